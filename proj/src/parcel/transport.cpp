#include "amt/parcel/transport.hpp"

#include "amt/error.hpp"
#include "amt/parcel/action.hpp"

#include <boost/asio.hpp>
#include <spdlog/spdlog.h>

#include <sys/socket.h>

#include <condition_variable>
#include <deque>
#include <optional>

namespace amt {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

constexpr std::uint32_t unknown_peer = ~std::uint32_t{0};

struct connection {
  explicit connection(asio::io_context& io) : sock(io) {}

  std::uint32_t peer = unknown_peer;
  tcp::socket sock;

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> outbox;
  bool dead = false;
  bool draining = false;  // flush the outbox, then stop writing

  std::thread reader;
  std::thread writer;

  std::atomic<std::int64_t> frames_sent{0};
  std::atomic<std::int64_t> frames_received{0};
  std::atomic<std::int64_t> bytes_sent{0};
  std::atomic<std::int64_t> bytes_received{0};
  std::atomic<std::int64_t> order_violations{0};
  std::optional<std::uint64_t> last_seq;  // reader thread only
};

} // namespace

struct tcp_transport::impl {
  impl(std::uint32_t s, std::uint32_t n, frame_sink f, loss_sink l)
      : self(s), localities(n), on_frame(std::move(f)), on_loss(std::move(l)), peers(n) {}

  std::uint32_t self;
  std::uint32_t localities;
  frame_sink on_frame;
  loss_sink on_loss;

  asio::io_context io;
  std::optional<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> closing{false};
  bool closed = false;

  mutable std::mutex mutex;
  std::condition_variable cv;
  std::vector<std::shared_ptr<connection>> peers;  // by locality id
  std::vector<std::shared_ptr<connection>> all;    // every connection ever made
  std::atomic<std::uint64_t> next_seq{1};

  void start(const std::shared_ptr<connection>& c) {
    c->writer = std::thread([this, c] { write_loop(*c); });
    c->reader = std::thread([this, c] { read_loop(*c); });
  }

  void enqueue(connection& c, parcel& p) {
    std::lock_guard lock(c.mutex);
    if (c.dead) {
      throw_error(errc::transport_error,
                  "connection to locality " + std::to_string(c.peer) + " is down");
    }
    // Sequence numbers are taken under the connection lock so that frames
    // reach each stream in sequence order.
    if (!p.forwarded) p.seq_no = next_seq.fetch_add(1, std::memory_order_relaxed);
    auto bytes = encode(p);
    c.frames_sent.fetch_add(1, std::memory_order_relaxed);
    c.bytes_sent.fetch_add(static_cast<std::int64_t>(bytes.size()), std::memory_order_relaxed);
    c.outbox.push_back(std::move(bytes));
    c.cv.notify_one();
  }

  void fail(connection& c, const std::string& why) {
    {
      std::lock_guard lock(c.mutex);
      if (c.dead) return;
      c.dead = true;
      c.cv.notify_all();
    }
    ::shutdown(c.sock.native_handle(), SHUT_RDWR);
    {
      std::lock_guard lock(mutex);
      cv.notify_all();
    }
    if (c.peer == unknown_peer || closing.load(std::memory_order_acquire)) return;
    spdlog::debug("locality {}: lost connection to locality {}: {}", self, c.peer, why);
    on_loss(c.peer);
  }

  void write_loop(connection& c) {
    std::deque<std::vector<std::uint8_t>> batch;
    for (;;) {
      {
        std::unique_lock lock(c.mutex);
        c.cv.wait(lock, [&] { return c.dead || c.draining || !c.outbox.empty(); });
        if (c.dead) return;
        if (c.outbox.empty()) return;  // draining and flushed
        batch.swap(c.outbox);
      }
      for (auto& frame : batch) {
        boost::system::error_code ec;
        asio::write(c.sock, asio::buffer(frame), ec);
        if (ec) {
          fail(c, ec.message());
          return;
        }
      }
      batch.clear();
    }
  }

  bool admit(connection& c, const parcel& hello) {
    auto peer = hello.source_locality;
    if (hello.action_id != sys::hello) {
      spdlog::error("locality {}: first frame on a new connection is not a hello", self);
      return false;
    }
    std::lock_guard lock(mutex);
    if (peer >= localities || peer == self) {
      spdlog::error("locality {}: hello from invalid locality id {}", self, peer);
      return false;
    }
    if (peers[peer]) {
      spdlog::error("locality {}: duplicate connection claiming locality id {}", self, peer);
      return false;
    }
    c.peer = peer;
    peers[peer] = find_shared(c);
    cv.notify_all();
    return true;
  }

  std::shared_ptr<connection> find_shared(connection& c) {
    for (auto& p : all) {
      if (p.get() == &c) return p;
    }
    return nullptr;
  }

  void read_loop(connection& c) {
    std::vector<std::uint8_t> frame;
    bool handshaken = c.peer != unknown_peer;
    for (;;) {
      frame.resize(frame_header_size);
      boost::system::error_code ec;
      asio::read(c.sock, asio::buffer(frame), ec);
      if (ec) {
        fail(c, ec == asio::error::eof ? "peer closed the stream" : ec.message());
        return;
      }
      parcel p;
      try {
        auto len = frame_payload_length(frame);
        frame.resize(frame_header_size + len);
        if (len > 0) {
          asio::read(c.sock, asio::buffer(frame.data() + frame_header_size, len), ec);
          if (ec) {
            fail(c, ec.message());
            return;
          }
        }
        p = decode(frame);
      } catch (const error& e) {
        fail(c, e.what());
        return;
      }
      if (!handshaken) {
        if (!admit(c, p)) {
          fail(c, "handshake rejected");
          return;
        }
        handshaken = true;
      }
      c.frames_received.fetch_add(1, std::memory_order_relaxed);
      c.bytes_received.fetch_add(static_cast<std::int64_t>(frame.size()),
                                 std::memory_order_relaxed);
      if (!p.forwarded) {
        if (c.last_seq && p.seq_no <= *c.last_seq) {
          c.order_violations.fetch_add(1, std::memory_order_relaxed);
        }
        c.last_seq = p.seq_no;
      }
      if (p.action_id == sys::hello) continue;
      on_frame(std::move(p));
    }
  }

  void accept_loop() {
    for (;;) {
      auto c = std::make_shared<connection>(io);
      boost::system::error_code ec;
      acceptor->accept(c->sock, ec);
      if (closing.load(std::memory_order_acquire)) {
        return;
      }
      if (ec) {
        spdlog::warn("locality {}: accept failed: {}", self, ec.message());
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        continue;
      }
      c->sock.set_option(tcp::no_delay(true), ec);
      {
        std::lock_guard lock(mutex);
        all.push_back(c);
      }
      start(c);
    }
  }
};

tcp_transport::tcp_transport(std::uint32_t self, std::uint32_t localities, frame_sink on_frame,
                             loss_sink on_loss)
    : impl_(std::make_unique<impl>(self, localities, std::move(on_frame), std::move(on_loss))) {}

tcp_transport::~tcp_transport() { close(); }

std::uint16_t tcp_transport::listen(const std::string& host, std::uint16_t port) {
  boost::system::error_code ec;
  auto addr = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
  if (ec) throw_error(errc::boot_failure, "cannot listen on '" + host + "': " + ec.message());
  tcp::endpoint ep(addr, port);
  auto& acc = impl_->acceptor.emplace(impl_->io);
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(tcp::acceptor::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw_error(errc::boot_failure, "cannot listen on " + host + ":" + std::to_string(port) + ": " +
                                        ec.message());
  }
  return acc.local_endpoint().port();
}

void tcp_transport::start_accepting() {
  if (!impl_->acceptor || impl_->accept_thread.joinable()) return;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void tcp_transport::connect(std::uint32_t peer, const std::string& host, std::uint16_t port,
                            std::chrono::steady_clock::time_point deadline) {
  auto c = std::make_shared<connection>(impl_->io);
  c->peer = peer;
  tcp::resolver resolver(impl_->io);
  std::string last_error;
  for (;;) {
    boost::system::error_code ec;
    auto results = resolver.resolve(host, std::to_string(port), ec);
    if (!ec) {
      c->sock = tcp::socket(impl_->io);
      asio::connect(c->sock, results, ec);
    }
    if (!ec) break;
    last_error = ec.message();
    if (std::chrono::steady_clock::now() >= deadline || impl_->closing.load()) {
      throw_error(errc::boot_failure, "cannot reach locality " + std::to_string(peer) + " at " +
                                          host + ":" + std::to_string(port) + ": " + last_error);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  boost::system::error_code ec;
  c->sock.set_option(tcp::no_delay(true), ec);
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->peers[peer]) {
      throw_error(errc::boot_failure, "locality " + std::to_string(peer) + " connected twice");
    }
    impl_->peers[peer] = c;
    impl_->all.push_back(c);
    impl_->cv.notify_all();
  }
  parcel hello;
  hello.dest = gid{peer, 0, 1};
  hello.action_id = sys::hello;
  hello.source_locality = impl_->self;
  impl_->enqueue(*c, hello);
  impl_->start(c);
}

bool tcp_transport::wait_all_connected(std::chrono::steady_clock::time_point deadline) {
  std::unique_lock lock(impl_->mutex);
  return impl_->cv.wait_until(lock, deadline, [&] {
    std::uint32_t n = 0;
    for (auto& c : impl_->peers) n += c != nullptr;
    return n + 1 >= impl_->localities;
  });
}

void tcp_transport::send(std::uint32_t peer, parcel& p) {
  std::shared_ptr<connection> c;
  {
    std::lock_guard lock(impl_->mutex);
    if (peer < impl_->peers.size()) c = impl_->peers[peer];
  }
  if (!c) {
    throw_error(errc::transport_error, "no connection to locality " + std::to_string(peer));
  }
  impl_->enqueue(*c, p);
}

bool tcp_transport::connected(std::uint32_t peer) const {
  std::lock_guard lock(impl_->mutex);
  if (peer >= impl_->peers.size() || !impl_->peers[peer]) return false;
  std::lock_guard clock(impl_->peers[peer]->mutex);
  return !impl_->peers[peer]->dead;
}

peer_traffic tcp_transport::traffic(std::uint32_t peer) const {
  std::shared_ptr<connection> c;
  {
    std::lock_guard lock(impl_->mutex);
    if (peer < impl_->peers.size()) c = impl_->peers[peer];
  }
  peer_traffic t;
  if (!c) return t;
  t.frames_sent = c->frames_sent.load(std::memory_order_relaxed);
  t.frames_received = c->frames_received.load(std::memory_order_relaxed);
  t.bytes_sent = c->bytes_sent.load(std::memory_order_relaxed);
  t.bytes_received = c->bytes_received.load(std::memory_order_relaxed);
  t.order_violations = c->order_violations.load(std::memory_order_relaxed);
  std::lock_guard clock(c->mutex);
  t.connected = !c->dead;
  return t;
}

std::int64_t tcp_transport::frames_sent() const {
  std::int64_t n = 0;
  for (std::uint32_t p = 0; p < impl_->localities; ++p) n += traffic(p).frames_sent;
  return n;
}

std::int64_t tcp_transport::frames_received() const {
  std::int64_t n = 0;
  for (std::uint32_t p = 0; p < impl_->localities; ++p) n += traffic(p).frames_received;
  return n;
}

std::int64_t tcp_transport::bytes_sent() const {
  std::int64_t n = 0;
  for (std::uint32_t p = 0; p < impl_->localities; ++p) n += traffic(p).bytes_sent;
  return n;
}

void tcp_transport::close() {
  if (!impl_ || impl_->closed) return;
  impl_->closing.store(true, std::memory_order_release);
  if (impl_->acceptor) {
    ::shutdown(impl_->acceptor->native_handle(), SHUT_RDWR);
    boost::system::error_code ec;
    // Closing from here while accept() blocks is unsafe; shutdown wakes it.
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
    impl_->acceptor->close(ec);
  }
  std::vector<std::shared_ptr<connection>> all;
  {
    std::lock_guard lock(impl_->mutex);
    all = impl_->all;
  }
  // Let each writer flush what is already queued, then tear down.
  for (auto& c : all) {
    std::lock_guard lock(c->mutex);
    c->draining = true;
    c->cv.notify_all();
  }
  for (auto& c : all) {
    if (c->writer.joinable()) c->writer.join();
  }
  for (auto& c : all) impl_->fail(*c, "transport closed");
  for (auto& c : all) {
    if (c->reader.joinable()) c->reader.join();
  }
  impl_->closed = true;
}

} // namespace amt
