#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mps/util.hpp"

namespace mps {

enum class MsgType : uint8_t {
  Setup = 1,
  SetupAck = 2,
  InputMShare = 3,
  CountRequest = 4,
  CountShares = 5,
  MaterialRequest = 6,
  Material = 7,
  OpenPart = 8,
  LayerDigest = 9,
  Result = 10,
  Abort = 11,
};

inline const char* to_string(MsgType t) {
  switch (t) {
    case MsgType::Setup: return "SETUP";
    case MsgType::SetupAck: return "SETUP_ACK";
    case MsgType::InputMShare: return "INPUT_M_SHARE";
    case MsgType::CountRequest: return "COUNT_REQUEST";
    case MsgType::CountShares: return "COUNT_SHARES";
    case MsgType::MaterialRequest: return "MATERIAL_REQUEST";
    case MsgType::Material: return "MATERIAL";
    case MsgType::OpenPart: return "OPEN_PART";
    case MsgType::LayerDigest: return "LAYER_DIGEST";
    case MsgType::Result: return "RESULT";
    case MsgType::Abort: return "ABORT";
  }
  return "?";
}

using SessionId = std::array<uint8_t, 16>;

// Frame layout: 32-bit big-endian length (covering everything after the
// length field), message type byte, 16-byte session id, 32-bit round,
// 32-bit gadget id, payload. Payload integers are 16-byte little-endian
// field elements unless noted.
struct MessageFrame {
  MsgType type = MsgType::Abort;
  SessionId session{};
  uint32_t round = 0;
  uint32_t gadget = 0;
  std::vector<uint8_t> payload;
};

constexpr uint32_t kFrameHeaderLen = 1 + 16 + 4 + 4;
constexpr uint32_t kMaxFrameLen = 1u << 26;

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t get_u32_be(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

inline std::vector<uint8_t> encode_frame(const MessageFrame& f) {
  uint32_t body = kFrameHeaderLen + static_cast<uint32_t>(f.payload.size());
  if (body > kMaxFrameLen) throw ProtocolError("frame too large");
  std::vector<uint8_t> out;
  out.reserve(4 + body);
  put_u32_be(out, body);
  out.push_back(static_cast<uint8_t>(f.type));
  out.insert(out.end(), f.session.begin(), f.session.end());
  put_u32_be(out, f.round);
  put_u32_be(out, f.gadget);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

// Decodes the body of a frame (everything after the length prefix).
inline MessageFrame decode_frame_body(std::span<const uint8_t> body) {
  if (body.size() < kFrameHeaderLen) throw ProtocolError("frame shorter than header");
  MessageFrame f;
  uint8_t t = body[0];
  if (t < 1 || t > 11) throw ProtocolError("unknown message type " + std::to_string(t));
  f.type = static_cast<MsgType>(t);
  std::copy(body.begin() + 1, body.begin() + 17, f.session.begin());
  f.round = get_u32_be(body.data() + 17);
  f.gadget = get_u32_be(body.data() + 21);
  f.payload.assign(body.begin() + kFrameHeaderLen, body.end());
  return f;
}

}  // namespace mps
