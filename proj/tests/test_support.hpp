// Shared helpers for the unit and acceptance suites: random generators for
// property tests and a few independent numerical oracles.
#pragma once

#include "rbs/osc.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rbs::test {

inline osc::Bytes from_hex(std::string_view hex) {
  osc::Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> ch(1, 127);
  std::string s(len(rng), 'a');
  for (auto& c : s) c = static_cast<char>(ch(rng));
  return s;
}

inline osc::Arg random_arg(std::mt19937_64& rng) {
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: return static_cast<std::int32_t>(static_cast<std::uint32_t>(rng()));
    case 1: {
      // Any bit pattern, including NaNs and infinities.
      return std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    }
    case 2: return random_string(rng, 13);
    default: {
      osc::Blob b;
      b.data.resize(std::uniform_int_distribution<std::size_t>(0, 9)(rng));
      for (auto& v : b.data) v = static_cast<std::uint8_t>(rng());
      return b;
    }
  }
}

inline osc::Message random_message(std::mt19937_64& rng) {
  osc::Message m;
  m.address = "/" + random_string(rng, 10);
  const auto n = std::uniform_int_distribution<int>(0, 8)(rng);
  for (int i = 0; i < n; ++i) m.args.push_back(random_arg(rng));
  return m;
}

inline osc::Packet random_packet(std::mt19937_64& rng, int max_depth) {
  if (max_depth <= 0 || std::uniform_int_distribution<int>(0, 3)(rng) != 0) {
    return osc::Packet{random_message(rng)};
  }
  osc::Bundle b;
  b.timetag = rng();
  const auto n = std::uniform_int_distribution<int>(0, 4)(rng);
  for (int i = 0; i < n; ++i) b.elements.push_back(random_packet(rng, max_depth - 1));
  return osc::Packet{b};
}

/// Half pure noise, half mutated valid packets (bit flips, truncation,
/// splices), so the decoder's deeper paths are exercised as well.
inline osc::Bytes fuzz_bytes(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  osc::Bytes bytes;
  if (coin(rng) == 0) {
    bytes.resize(std::uniform_int_distribution<std::size_t>(0, 96)(rng));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    if (!bytes.empty() && coin(rng) == 0) bytes[0] = coin(rng) ? '/' : '#';
    return bytes;
  }
  bytes = osc::encode(random_packet(rng, 2));
  const int edits = std::uniform_int_distribution<int>(1, 4)(rng);
  for (int e = 0; e < edits && !bytes.empty(); ++e) {
    const auto pos = std::uniform_int_distribution<std::size_t>(0, bytes.size() - 1)(rng);
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
      case 0: bytes[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
      case 1: bytes.resize(pos); break;
      default: bytes[pos] = static_cast<std::uint8_t>(rng()); break;
    }
  }
  return bytes;
}

/// Direct evaluation of a biquad transfer function at `freq_hz`; independent
/// of the filter implementation.
inline double biquad_magnitude_db(double b0, double b1, double b2, double a1, double a2, double freq_hz,
                                  double sample_rate) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  const std::complex<double> z2 = z1 * z1;
  const auto h = (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  return 20.0 * std::log10(std::abs(h));
}

/// Plain O(n^2) DFT magnitudes of a Hann-windowed frame, bins 0..n/2-1.
inline std::vector<double> dft_magnitudes(std::span<const float> x) {
  const std::size_t n = x.size();
  std::vector<double> mags(n / 2);
  std::vector<double> w(n);
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = x[i] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n)));
    twiddle[i] = std::polar(1.0, -2.0 * std::numbers::pi * double(i) / double(n));
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * twiddle[(k * i) % n];
    mags[k] = std::abs(acc);
  }
  return mags;
}

}  // namespace rbs::test
