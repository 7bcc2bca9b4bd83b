#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace neurotwin::fog {

/// Loopback-only TCP carrier for LF-delimited frames.
class LineListener {
 public:
  /// Binds 127.0.0.1:port; port 0 picks an ephemeral port.
  explicit LineListener(std::uint16_t port);
  ~LineListener();
  LineListener(const LineListener&) = delete;
  LineListener& operator=(const LineListener&) = delete;

  std::uint16_t port() const { return port_; }

  /// Accepts one connection and calls `on_frame` with every complete frame
  /// (LF included) until the peer closes. Returns the number of frames.
  /// A trailing partial line is passed through without its LF so that the
  /// codec can reject it.
  std::size_t serve_one(const std::function<void(std::string_view)>& on_frame);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Connects to host:port and writes every frame verbatim.
void send_frames(const std::string& host, std::uint16_t port, const std::vector<std::string>& frames);

}  // namespace neurotwin::fog
