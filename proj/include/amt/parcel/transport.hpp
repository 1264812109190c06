#pragma once

#include "amt/parcel/wire.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace amt {

/// Per-peer frame accounting of one locality.
struct peer_traffic {
  std::int64_t frames_sent = 0;
  std::int64_t frames_received = 0;
  std::int64_t bytes_sent = 0;
  std::int64_t bytes_received = 0;
  std::int64_t order_violations = 0;
  bool connected = false;
};

/// Reliable ordered byte streams between localities over TCP.
///
/// One connection per locality pair, opened by the higher id at boot and
/// identified by a hello frame. Each connection has one writer thread
/// (frames are written whole, in the order they were queued) and one reader
/// thread that decodes frames and hands them to the frame sink.
class tcp_transport {
 public:
  using frame_sink = std::function<void(parcel)>;
  using loss_sink = std::function<void(std::uint32_t peer)>;

  tcp_transport(std::uint32_t self, std::uint32_t localities, frame_sink on_frame,
                loss_sink on_loss);
  ~tcp_transport();

  tcp_transport(const tcp_transport&) = delete;
  tcp_transport& operator=(const tcp_transport&) = delete;

  /// Binds the listening socket; returns the bound port.
  std::uint16_t listen(const std::string& host, std::uint16_t port);
  void start_accepting();

  /// Connects to `peer`, retrying until `deadline`; throws boot_failure.
  void connect(std::uint32_t peer, const std::string& host, std::uint16_t port,
               std::chrono::steady_clock::time_point deadline);

  /// Waits until every other locality is connected; false on timeout.
  bool wait_all_connected(std::chrono::steady_clock::time_point deadline);

  /// Queues `p` for `peer`. Fresh parcels get the next sequence number of
  /// this locality; forwarded ones keep theirs. Throws transport_error if
  /// the peer is unreachable.
  void send(std::uint32_t peer, parcel& p);

  bool connected(std::uint32_t peer) const;
  peer_traffic traffic(std::uint32_t peer) const;
  std::int64_t frames_sent() const;
  std::int64_t frames_received() const;
  std::int64_t bytes_sent() const;

  /// Closes every connection and joins all threads. Idempotent.
  void close();

 private:
  struct impl;
  std::unique_ptr<impl> impl_;
};

} // namespace amt
