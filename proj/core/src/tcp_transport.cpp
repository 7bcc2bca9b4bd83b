#include "neurotwin/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "neurotwin/error.hpp"

namespace neurotwin::fog {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(what + ": " + std::strerror(errno));
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

}  // namespace

LineListener::LineListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd_);
    fail("bind 127.0.0.1:" + std::to_string(port));
  }
  if (::listen(fd_, 1) != 0) {
    ::close(fd_);
    fail("listen");
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LineListener::~LineListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::size_t LineListener::serve_one(const std::function<void(std::string_view)>& on_frame) {
  const Fd conn(::accept(fd_, nullptr, nullptr));
  if (conn.get() < 0) fail("accept");
  std::string buffer;
  std::size_t frames = 0;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(conn.get(), chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("recv");
    }
    if (n == 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (auto lf = buffer.find('\n', start); lf != std::string::npos; lf = buffer.find('\n', start)) {
      on_frame(std::string_view(buffer).substr(start, lf - start + 1));
      ++frames;
      start = lf + 1;
    }
    buffer.erase(0, start);
  }
  if (!buffer.empty()) {
    on_frame(buffer);
    ++frames;
  }
  return frames;
}

void send_frames(const std::string& host, std::uint16_t port, const std::vector<std::string>& frames) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error("send_frames: cannot resolve " + host);
  }
  const Fd fd(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  const int rc = fd.get() < 0 ? -1 : ::connect(fd.get(), res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) fail("connect " + host + ":" + std::to_string(port));
  for (const auto& f : frames) {
    std::size_t off = 0;
    while (off < f.size()) {
      const ssize_t n = ::send(fd.get(), f.data() + off, f.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("send");
      }
      off += static_cast<std::size_t>(n);
    }
  }
}

}  // namespace neurotwin::fog
