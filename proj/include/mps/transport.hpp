#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mps/wire.hpp"

namespace mps {

struct PartyId {
  enum class Role : uint8_t { Csp = 1, Owner = 2, Dealer = 3 };
  Role role = Role::Csp;
  int index = 0;

  auto operator<=>(const PartyId&) const = default;

  std::string to_string() const {
    switch (role) {
      case Role::Csp: return "csp" + std::to_string(index);
      case Role::Owner: return "owner" + std::to_string(index);
      case Role::Dealer: return "dealer";
    }
    return "?";
  }
  static PartyId csp(int i) { return {Role::Csp, i}; }
  static PartyId owner(int i) { return {Role::Owner, i}; }
  static PartyId dealer() { return {Role::Dealer, 0}; }
};

// Ordered, reliable frame pipe to one peer. recv blocks with a generous
// timeout so a wedged session fails instead of hanging the test suite.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const MessageFrame& f) = 0;
  virtual MessageFrame recv() = 0;
};

constexpr auto kRecvTimeout = std::chrono::seconds(120);

// ---------------------------------------------------------------------------
// In-process transport: pairwise byte queues. Frames are encoded and
// decoded exactly as on the TCP path so both transports exercise the same
// framing code.

class InProcHub {
 public:
  class Endpoint : public Channel {
   public:
    Endpoint(InProcHub* hub, PartyId from, PartyId to) : hub_(hub), from_(from), to_(to) {}
    void send(const MessageFrame& f) override { hub_->queue(from_, to_).push(encode_frame(f)); }
    MessageFrame recv() override {
      auto bytes = hub_->queue(to_, from_).pop();
      if (bytes.size() < 4) throw ProtocolError("short frame");
      uint32_t len = get_u32_be(bytes.data());
      if (len != bytes.size() - 4) throw ProtocolError("frame length mismatch");
      return decode_frame_body(std::span<const uint8_t>(bytes).subspan(4));
    }

   private:
    InProcHub* hub_;
    PartyId from_, to_;
  };

  // Channel owned by the hub; valid for the hub's lifetime.
  Channel* channel(PartyId from, PartyId to) {
    std::lock_guard lk(mu_);
    auto key = std::make_pair(from, to);
    auto it = endpoints_.find(key);
    if (it == endpoints_.end())
      it = endpoints_.emplace(key, std::make_unique<Endpoint>(this, from, to)).first;
    return it->second.get();
  }

  // Total frames of a given type delivered into a party's queues; used by
  // tests auditing what a party was ever sent.
  size_t delivered_count(PartyId to, MsgType type) {
    std::lock_guard lk(mu_);
    size_t n = 0;
    for (auto& [key, q] : queues_)
      if (key.second == to) n += q->type_counts[static_cast<size_t>(type)];
    return n;
  }

 private:
  struct ByteQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::vector<uint8_t>> items;
    std::array<size_t, 16> type_counts{};

    void push(std::vector<uint8_t> b) {
      {
        std::lock_guard lk(mu);
        if (b.size() > 4) type_counts[b[4] & 15]++;
        items.push_back(std::move(b));
      }
      cv.notify_one();
    }
    std::vector<uint8_t> pop() {
      std::unique_lock lk(mu);
      if (!cv.wait_for(lk, kRecvTimeout, [&] { return !items.empty(); }))
        throw ProtocolError("recv timeout");
      auto b = std::move(items.front());
      items.pop_front();
      return b;
    }
  };

  ByteQueue& queue(PartyId from, PartyId to) {
    std::lock_guard lk(mu_);
    auto key = std::make_pair(from, to);
    auto it = queues_.find(key);
    if (it == queues_.end()) it = queues_.emplace(key, std::make_unique<ByteQueue>()).first;
    return *it->second;
  }

  std::mutex mu_;
  std::map<std::pair<PartyId, PartyId>, std::unique_ptr<ByteQueue>> queues_;
  std::map<std::pair<PartyId, PartyId>, std::unique_ptr<Endpoint>> endpoints_;
};

// ---------------------------------------------------------------------------
// TCP transport. Only CSPs listen; owners and the dealer dial out. A tiny
// identity preamble on each connection maps sockets to roster entries.

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    timeval tv{};
    tv.tv_sec = std::chrono::duration_cast<std::chrono::seconds>(kRecvTimeout).count();
    setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    int buf = 1 << 22;
    setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &buf, sizeof(buf));
    setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
  }
  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void send(const MessageFrame& f) override { write_all(encode_frame(f)); }

  MessageFrame recv() override {
    uint8_t lenbuf[4];
    read_all(lenbuf, 4);
    uint32_t len = get_u32_be(lenbuf);
    if (len < kFrameHeaderLen || len > kMaxFrameLen)
      throw ProtocolError("bad frame length " + std::to_string(len));
    std::vector<uint8_t> body(len);
    read_all(body.data(), len);
    return decode_frame_body(body);
  }

  void write_all(std::span<const uint8_t> data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw ProtocolError("tcp send failed");
      off += static_cast<size_t>(n);
    }
  }
  void read_all(void* buf, size_t len) {
    size_t off = 0;
    auto* p = static_cast<uint8_t*>(buf);
    while (off < len) {
      ssize_t n = ::recv(fd_, p + off, len - off, 0);
      if (n == 0) throw ProtocolError("peer closed connection");
      if (n < 0) throw ProtocolError("tcp recv failed/timeout");
      off += static_cast<size_t>(n);
    }
  }

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& s) {
  auto pos = s.rfind(':');
  if (pos == std::string::npos) throw ValueError("endpoint must be host:port, got " + s);
  Endpoint e;
  e.host = s.substr(0, pos);
  e.port = static_cast<uint16_t>(std::stoi(s.substr(pos + 1)));
  return e;
}

namespace tcp {

constexpr uint32_t kHelloMagic = 0x4d505331;  // "MPS1"

inline int listen_on(const Endpoint& ep) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ProtocolError("socket() failed");
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
    throw ProtocolError("bad listen address " + ep.host);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw ProtocolError("bind failed on port " + std::to_string(ep.port));
  }
  if (::listen(fd, 32) != 0) {
    ::close(fd);
    throw ProtocolError("listen failed");
  }
  return fd;
}

inline int dial(const Endpoint& ep, int attempts = 100) {
  for (int i = 0; i < attempts; ++i) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw ProtocolError("bad dial address " + ep.host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) return fd;
    ::close(fd);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  throw ProtocolError("could not connect to " + ep.host + ":" + std::to_string(ep.port));
}

inline void send_hello(TcpChannel& ch, PartyId me) {
  std::vector<uint8_t> hello;
  put_u32_be(hello, kHelloMagic);
  hello.push_back(static_cast<uint8_t>(me.role));
  put_u32_be(hello, static_cast<uint32_t>(me.index));
  ch.write_all(hello);
}

inline PartyId recv_hello(TcpChannel& ch) {
  uint8_t buf[9];
  ch.read_all(buf, sizeof(buf));
  if (get_u32_be(buf) != kHelloMagic) throw ProtocolError("bad hello magic");
  PartyId id;
  uint8_t role = buf[4];
  if (role < 1 || role > 3) throw ProtocolError("bad hello role");
  id.role = static_cast<PartyId::Role>(role);
  id.index = static_cast<int>(get_u32_be(buf + 5));
  return id;
}

}  // namespace tcp

using PeerMap = std::map<PartyId, std::unique_ptr<Channel>>;

// Establish every link this party participates in. Links: CSP<->CSP,
// owner->all CSPs, dealer->all CSPs. CSP i accepts from CSPs j > i, all
// owners and the dealer, and dials CSPs j < i.
inline PeerMap establish_tcp_links(PartyId me, const std::vector<Endpoint>& csp_endpoints,
                                   int n_owners) {
  const int beta = static_cast<int>(csp_endpoints.size());
  PeerMap peers;
  if (me.role == PartyId::Role::Csp) {
    int listen_fd = tcp::listen_on(csp_endpoints[me.index]);
    // Dial lower-indexed CSPs (they are already listening or will be).
    for (int j = 0; j < me.index; ++j) {
      auto ch = std::make_unique<TcpChannel>(tcp::dial(csp_endpoints[j]));
      tcp::send_hello(*ch, me);
      peers[PartyId::csp(j)] = std::move(ch);
    }
    int expected = (beta - 1 - me.index) + n_owners + 1;
    for (int k = 0; k < expected; ++k) {
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) throw ProtocolError("accept failed");
      auto ch = std::make_unique<TcpChannel>(fd);
      PartyId who = tcp::recv_hello(*ch);
      if (peers.count(who)) throw ProtocolError("duplicate connection from " + who.to_string());
      peers[who] = std::move(ch);
    }
    ::close(listen_fd);
  } else {
    for (int j = 0; j < beta; ++j) {
      auto ch = std::make_unique<TcpChannel>(tcp::dial(csp_endpoints[j]));
      tcp::send_hello(*ch, me);
      peers[PartyId::csp(j)] = std::move(ch);
    }
  }
  return peers;
}

}  // namespace mps
