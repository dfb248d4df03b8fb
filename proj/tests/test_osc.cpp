#include "rbs/osc.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace rbs::osc;
using rbs::test::from_hex;

namespace {

ErrorKind decode_error(const Bytes& bytes) {
  try {
    (void)decode(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a decode error");
  return ErrorKind::Truncated;
}

}  // namespace

TEST_CASE("message layout follows OSC 1.0 padding", "[osc]") {
  SECTION("address only") {
    const Bytes bytes = encode_message({"/p", {}});
    REQUIRE(bytes == Bytes{'/', 'p', 0, 0, ',', 0, 0, 0});
  }
  SECTION("single float zero") {
    const Bytes bytes = encode_message({"/a", {0.0f}});
    REQUIRE(bytes.size() == 12);
    REQUIRE(bytes == Bytes{'/', 'a', 0, 0, ',', 'f', 0, 0, 0, 0, 0, 0});
  }
  SECTION("six-float pose matches reference implementation bytes") {
    // Produced by python-osc 1.8 for the same message.
    const Bytes expected = from_hex(
        "2f7463702f706f73650000002c666666666666003f000000bfa000003f8000000000000040400000bf400000");
    const Message pose{"/tcp/pose", {0.5f, -1.25f, 1.0f, 0.0f, 3.0f, -0.75f}};
    const Bytes bytes = encode_message(pose);
    REQUIRE(bytes.size() == 44);
    REQUIRE(bytes == expected);
    REQUIRE(decode_message(expected) == pose);
  }
  SECTION("int, string and blob arguments") {
    const Bytes expected =
        from_hex("2f636f6c6c61622f706f73002c697362000000000000000161626300000000050102030405000000");
    const Message msg{"/collab/pos", {std::int32_t{1}, std::string("abc"), Blob{{1, 2, 3, 4, 5}}}};
    REQUIRE(encode_message(msg) == expected);
    REQUIRE(decode_message(expected) == msg);
  }
}

TEST_CASE("encoding rejects invalid messages", "[osc]") {
  try {
    (void)encode_message({"tcp", {}});
    FAIL("expected InvalidAddress");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::InvalidAddress);
  }
  try {
    (void)encode_message({"/x", {std::string("a\0b", 3)}});
    FAIL("expected InteriorNul");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::InteriorNul);
  }
}

TEST_CASE("decoding reports structured errors", "[osc]") {
  REQUIRE(decode_error(Bytes{'/', 'a', 0}) == ErrorKind::Truncated);
  REQUIRE(decode_error(Bytes{'/', 'a', 0, 0, ',', 'q', 0, 0}) == ErrorKind::BadTypeTag);
  REQUIRE(decode_error(Bytes{'/', 'a', 0, 0, 'f', 0, 0, 0}) == ErrorKind::BadTypeTag);
  REQUIRE(decode_error(Bytes{'/', 'a', 0, 0, ',', 'f', 0, 0, 0}) == ErrorKind::Misaligned);
  REQUIRE(decode_error(Bytes{'/', 'a', 0, 0, ',', 'f', 0, 0}) == ErrorKind::Truncated);
  REQUIRE(decode_error(Bytes{'/', 'a', 0, 0, ',', 's', 0, 0, 'a', 'b', 'c', 'd'}) == ErrorKind::Truncated);
  REQUIRE(decode_error(Bytes{'/', 'a', 'b', 0, 1, 0, 0, 0}) == ErrorKind::BadTypeTag);
  REQUIRE(decode_error(Bytes{'#', 'b', 'u', 'n', 'd', 'l', 'x', 0, 0, 0, 0, 0, 0, 0, 0, 1}) == ErrorKind::BadHeader);
  REQUIRE(decode_error(Bytes{}) == ErrorKind::Truncated);
}

TEST_CASE("bundles", "[osc]") {
  SECTION("empty immediate bundle is 16 bytes") {
    const Bytes bytes = encode_bundle(Bundle{kImmediately, {}});
    REQUIRE(bytes == from_hex("2362756e646c65000000000000000001"));
    REQUIRE(decode_bundle(bytes) == Bundle{kImmediately, {}});
  }
  SECTION("bundle of one empty message") {
    Bundle b{kImmediately, {Packet{Message{"/p", {}}}}};
    const Bytes bytes = encode_bundle(b);
    REQUIRE(bytes.size() == 16 + 4 + 8);
    REQUIRE(decode_bundle(bytes) == b);
  }
  SECTION("nested depth 2") {
    Bundle inner{0x0123456789abcdefULL, {Packet{Message{"/x", {1.5f}}}}};
    Bundle outer{kImmediately, {Packet{inner}, Packet{Message{"/y", {std::int32_t{-7}}}}}};
    const Packet p{outer};
    REQUIRE(decode(encode(p)) == p);
  }
  SECTION("nesting beyond the limit is rejected") {
    Packet p{Message{"/leaf", {}}};
    for (int i = 0; i < kMaxNesting + 2; ++i) p = Packet{Bundle{kImmediately, {p}}};
    REQUIRE(decode_error(encode(p)) == ErrorKind::NestingTooDeep);
  }
}

TEST_CASE("random packets round-trip and stay aligned", "[osc][property]") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 500; ++i) {
    const Packet p = rbs::test::random_packet(rng, 3);
    const Bytes bytes = encode(p);
    REQUIRE(bytes.size() % 4 == 0);
    REQUIRE(decode(bytes) == p);
  }
}

TEST_CASE("fuzzed bytes never crash the decoder", "[osc][property]") {
  std::mt19937_64 rng(99);
  int rejected = 0;
  for (int i = 0; i < 5000; ++i) {
    const Bytes bytes = rbs::test::fuzz_bytes(rng);
    try {
      (void)decode(bytes);
    } catch (const Error&) {
      ++rejected;
    }
  }
  REQUIRE(rejected > 0);
}

TEST_CASE("address matching", "[osc]") {
  REQUIRE(address_matches("/collab/pos", "/collab/pos"));
  REQUIRE_FALSE(address_matches("/collab/pos", "/collab/posx"));
  REQUIRE(address_matches("/env/*", "/env/light"));
  REQUIRE_FALSE(address_matches("/env/*", "/link/0/rpy"));
}
