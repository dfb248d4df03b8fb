#include "rbs/osc.hpp"

#include <bit>
#include <cstring>
#include <limits>

namespace rbs::osc {

namespace {

std::size_t padded(std::size_t n) { return (n + 3) & ~std::size_t{3}; }

class Writer {
 public:
  void u32(std::uint32_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 24));
    out_.push_back(static_cast<std::uint8_t>(v >> 16));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v >> 32));
    u32(static_cast<std::uint32_t>(v));
  }
  // Null-terminated, zero-padded to a multiple of 4.
  void str(std::string_view s) {
    out_.insert(out_.end(), s.begin(), s.end());
    out_.resize(out_.size() + (padded(s.size() + 1) - s.size()), 0);
  }
  void blob(const Bytes& b) {
    u32(static_cast<std::uint32_t>(b.size()));
    out_.insert(out_.end(), b.begin(), b.end());
    out_.resize(out_.size() + (padded(b.size()) - b.size()), 0);
  }
  void raw(const Bytes& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = (std::uint32_t{in_[pos_]} << 24) | (std::uint32_t{in_[pos_ + 1]} << 16) |
                      (std::uint32_t{in_[pos_ + 2]} << 8) | std::uint32_t{in_[pos_ + 3]};
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t hi = u32();
    return (hi << 32) | u32();
  }
  std::string str() {
    const auto* begin = in_.data() + pos_;
    const auto* nul = static_cast<const std::uint8_t*>(std::memchr(begin, 0, remaining()));
    if (nul == nullptr) throw Error(ErrorKind::Truncated, "unterminated string");
    std::size_t len = static_cast<std::size_t>(nul - begin);
    std::size_t total = padded(len + 1);
    need(total);
    for (std::size_t i = len; i < total; ++i) {
      if (begin[i] != 0) throw Error(ErrorKind::Misaligned, "non-zero string padding");
    }
    std::string s(reinterpret_cast<const char*>(begin), len);
    pos_ += total;
    return s;
  }
  Bytes blob() {
    std::uint32_t size = u32();
    std::size_t total = padded(size);
    if (size > remaining() || total > remaining()) {
      throw Error(ErrorKind::Truncated, "blob exceeds packet");
    }
    Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
            in_.begin() + static_cast<std::ptrdiff_t>(pos_ + size));
    pos_ += total;
    return b;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw Error(ErrorKind::Truncated, "unexpected end of packet");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_alignment(std::span<const std::uint8_t> bytes, std::size_t minimum) {
  if (bytes.size() < minimum) throw Error(ErrorKind::Truncated, "packet too short");
  if (bytes.size() % 4 != 0) throw Error(ErrorKind::Misaligned, "length is not a multiple of 4");
}

void validate(const Message& msg) {
  if (msg.address.empty() || msg.address.front() != '/') {
    throw Error(ErrorKind::InvalidAddress, "address must begin with '/': " + msg.address);
  }
  if (msg.address.find('\0') != std::string::npos) {
    throw Error(ErrorKind::InteriorNul, "address contains NUL");
  }
  for (const auto& arg : msg.args) {
    if (const auto* s = std::get_if<std::string>(&arg); s && s->find('\0') != std::string::npos) {
      throw Error(ErrorKind::InteriorNul, "string argument contains NUL");
    }
  }
}

void write_message(Writer& w, const Message& msg) {
  validate(msg);
  w.str(msg.address);
  std::string tags(",");
  for (const auto& arg : msg.args) tags.push_back(type_tag(arg));
  w.str(tags);
  for (const auto& arg : msg.args) {
    std::visit(
        [&w](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::int32_t>) {
            w.u32(static_cast<std::uint32_t>(v));
          } else if constexpr (std::is_same_v<T, float>) {
            w.u32(std::bit_cast<std::uint32_t>(v));
          } else if constexpr (std::is_same_v<T, std::string>) {
            w.str(v);
          } else {
            w.blob(v.data);
          }
        },
        arg);
  }
}

void write_packet(Writer& w, const Packet& p);

void write_bundle(Writer& w, const Bundle& b) {
  w.str("#bundle");
  w.u64(b.timetag);
  for (const auto& element : b.elements) {
    Writer inner;
    write_packet(inner, element);
    Bytes body = inner.take();
    w.u32(static_cast<std::uint32_t>(body.size()));
    w.raw(body);
  }
}

void write_packet(Writer& w, const Packet& p) {
  if (p.is_message()) {
    write_message(w, p.message());
  } else {
    write_bundle(w, p.bundle());
  }
}

Message read_message(std::span<const std::uint8_t> bytes) {
  check_alignment(bytes, 8);
  Reader r(bytes);
  Message msg;
  msg.address = r.str();
  if (msg.address.empty() || msg.address.front() != '/') {
    throw Error(ErrorKind::InvalidAddress, "address must begin with '/'");
  }
  if (r.done()) throw Error(ErrorKind::Truncated, "missing type tag string");
  std::string tags = r.str();
  if (tags.empty() || tags.front() != ',') throw Error(ErrorKind::BadTypeTag, "type tags must begin with ','");
  msg.args.reserve(tags.size() - 1);
  for (std::size_t i = 1; i < tags.size(); ++i) {
    switch (tags[i]) {
      case 'i':
        msg.args.emplace_back(static_cast<std::int32_t>(r.u32()));
        break;
      case 'f':
        msg.args.emplace_back(std::bit_cast<float>(r.u32()));
        break;
      case 's':
        msg.args.emplace_back(r.str());
        break;
      case 'b':
        msg.args.emplace_back(Blob{r.blob()});
        break;
      default:
        throw Error(ErrorKind::BadTypeTag, std::string("unsupported type tag '") + tags[i] + "'");
    }
  }
  if (!r.done()) throw Error(ErrorKind::Misaligned, "trailing bytes after arguments");
  return msg;
}

Packet read_packet(std::span<const std::uint8_t> bytes, int depth);

Bundle read_bundle(std::span<const std::uint8_t> bytes, int depth) {
  if (depth > kMaxNesting) throw Error(ErrorKind::NestingTooDeep, "bundle nesting too deep");
  check_alignment(bytes, 16);
  static constexpr std::uint8_t kHeader[8] = {'#', 'b', 'u', 'n', 'd', 'l', 'e', 0};
  if (std::memcmp(bytes.data(), kHeader, 8) != 0) throw Error(ErrorKind::BadHeader, "missing #bundle header");
  Reader r(bytes.subspan(8));
  Bundle b;
  b.timetag = r.u64();
  while (!r.done()) {
    std::uint32_t size = r.u32();
    if (size == 0 || size % 4 != 0) throw Error(ErrorKind::Misaligned, "bad bundle element size");
    if (size > r.remaining()) throw Error(ErrorKind::Truncated, "bundle element exceeds packet");
    b.elements.push_back(read_packet(r.take(size), depth + 1));
  }
  return b;
}

Packet read_packet(std::span<const std::uint8_t> bytes, int depth) {
  if (bytes.empty()) throw Error(ErrorKind::Truncated, "empty packet");
  if (bytes[0] == '#') return Packet{read_bundle(bytes, depth)};
  if (bytes[0] == '/') return Packet{read_message(bytes)};
  throw Error(ErrorKind::InvalidAddress, "packet is neither message nor bundle");
}

bool same_arg(const Arg& a, const Arg& b) {
  if (a.index() != b.index()) return false;
  // Floats compare by bit pattern so NaN payloads round-trip as equal.
  if (const auto* fa = std::get_if<float>(&a)) {
    return std::bit_cast<std::uint32_t>(*fa) == std::bit_cast<std::uint32_t>(std::get<float>(b));
  }
  return a == b;
}

}  // namespace

char type_tag(const Arg& arg) {
  static constexpr char kTags[] = {'i', 'f', 's', 'b'};
  return kTags[arg.index()];
}

bool Message::operator==(const Message& other) const {
  if (address != other.address || args.size() != other.args.size()) return false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!same_arg(args[i], other.args[i])) return false;
  }
  return true;
}

bool Bundle::operator==(const Bundle& other) const {
  return timetag == other.timetag && elements == other.elements;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidAddress: return "InvalidAddress";
    case ErrorKind::InteriorNul: return "InteriorNul";
    case ErrorKind::Truncated: return "Truncated";
    case ErrorKind::Misaligned: return "Misaligned";
    case ErrorKind::BadTypeTag: return "BadTypeTag";
    case ErrorKind::BadHeader: return "BadHeader";
    case ErrorKind::NestingTooDeep: return "NestingTooDeep";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

Bytes encode_message(const Message& msg) {
  Writer w;
  write_message(w, msg);
  return w.take();
}

Bytes encode_bundle(const Bundle& bundle) {
  Writer w;
  write_bundle(w, bundle);
  return w.take();
}

Bytes encode(const Packet& packet) {
  Writer w;
  write_packet(w, packet);
  return w.take();
}

Message decode_message(std::span<const std::uint8_t> bytes) { return read_message(bytes); }

Bundle decode_bundle(std::span<const std::uint8_t> bytes) { return read_bundle(bytes, 0); }

Packet decode(std::span<const std::uint8_t> bytes) { return read_packet(bytes, 0); }

bool address_matches(std::string_view pattern, std::string_view address) {
  if (!pattern.empty() && pattern.back() == '*') {
    return address.starts_with(pattern.substr(0, pattern.size() - 1));
  }
  return pattern == address;
}

float arg_as_float(const Message& msg, std::size_t i) {
  if (i >= msg.args.size()) throw std::invalid_argument("missing argument");
  if (const auto* f = std::get_if<float>(&msg.args[i])) return *f;
  if (const auto* n = std::get_if<std::int32_t>(&msg.args[i])) return static_cast<float>(*n);
  throw std::invalid_argument("argument is not numeric");
}

}  // namespace rbs::osc
