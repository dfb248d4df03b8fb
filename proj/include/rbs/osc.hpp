// Open Sound Control 1.0 codec.
//
// Supports the i, f, s and b argument types, messages and (nested) bundles.
// All multi-byte fields are big-endian and every field is padded to a
// 4-byte boundary.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rbs::osc {

using Bytes = std::vector<std::uint8_t>;

struct Blob {
  Bytes data;
  bool operator==(const Blob&) const = default;
};

using Arg = std::variant<std::int32_t, float, std::string, Blob>;

/// Type tag character for an argument ('i', 'f', 's' or 'b').
char type_tag(const Arg& arg);

struct Message {
  std::string address;
  std::vector<Arg> args;

  bool operator==(const Message& other) const;
};

struct Packet;

/// Timetag value meaning "process immediately".
inline constexpr std::uint64_t kImmediately = 1;

struct Bundle {
  std::uint64_t timetag = kImmediately;
  std::vector<Packet> elements;

  bool operator==(const Bundle& other) const;
};

struct Packet {
  std::variant<Message, Bundle> value;

  bool is_message() const { return std::holds_alternative<Message>(value); }
  bool is_bundle() const { return std::holds_alternative<Bundle>(value); }
  const Message& message() const { return std::get<Message>(value); }
  const Bundle& bundle() const { return std::get<Bundle>(value); }

  bool operator==(const Packet& other) const { return value == other.value; }
};

enum class ErrorKind {
  InvalidAddress,
  InteriorNul,
  Truncated,
  Misaligned,
  BadTypeTag,
  BadHeader,
  NestingTooDeep,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Maximum bundle nesting accepted by the decoder.
inline constexpr int kMaxNesting = 16;

Bytes encode_message(const Message& msg);
Bytes encode_bundle(const Bundle& bundle);
Bytes encode(const Packet& packet);

Message decode_message(std::span<const std::uint8_t> bytes);
Bundle decode_bundle(std::span<const std::uint8_t> bytes);
/// Dispatches on the first byte: '/' is a message, '#' a bundle.
Packet decode(std::span<const std::uint8_t> bytes);

/// Exact match, or prefix match when the pattern ends in a single '*'.
bool address_matches(std::string_view pattern, std::string_view address);

/// Convenience: the float value of argument `i`, accepting int32 as well.
/// Throws std::invalid_argument for other types or out-of-range indices.
float arg_as_float(const Message& msg, std::size_t i);

}  // namespace rbs::osc
