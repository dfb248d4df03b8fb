#include "rbs/spatializer.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

using namespace rbs;
using namespace rbs::spatial;
using Catch::Approx;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double energy(const std::vector<double>& g) {
  double e = 0;
  for (double v : g) e += v * v;
  return e;
}

AudioBlock tone_block() {
  AudioBlock b(1, 512, 48000.0);
  for (Eigen::Index i = 0; i < b.frames(); ++i) b.samples(0, i) = static_cast<float>(std::sin(0.05 * double(i)));
  return b;
}

SourcePosition at_azimuth(double az, double distance = 1.0) {
  SourcePosition s;
  s.position = Eigen::Vector3d(distance * std::cos(az), distance * std::sin(az), 0.7);
  return s;
}

}  // namespace

TEST_CASE("default layout is quad plus point source", "[spatializer]") {
  const auto layout = default_layout();
  REQUIRE(layout.channel_count() == 5);
  REQUIRE(layout.ring_size() == 4);
  REQUIRE(layout.has_point_source);
  REQUIRE(layout.point_source_channel() == 4);
  REQUIRE(layout.ring[0] == Approx(45 * kDeg));
  REQUIRE(layout.ring[3] == Approx(315 * kDeg));
  REQUIRE(layout.valid());
  REQUIRE_FALSE(SpeakerLayout{{0.0}, false}.valid());
  REQUIRE_FALSE(SpeakerLayout{{1.0, 0.5}, false}.valid());
}

TEST_CASE("pairwise equal-power pan gains", "[spatializer]") {
  const auto layout = default_layout();
  SECTION("on a speaker") {
    const auto g = pan_gains(135 * kDeg, layout);
    REQUIRE(g == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  }
  SECTION("midway between speakers") {
    const auto g = pan_gains(90 * kDeg, layout);
    REQUIRE(g[0] == Approx(std::sqrt(0.5)).epsilon(1e-12));
    REQUIRE(g[1] == Approx(std::sqrt(0.5)).epsilon(1e-12));
    REQUIRE(g[2] == 0.0);
    REQUIRE(g[3] == 0.0);
  }
  SECTION("wrap-around pans between the last and first speaker") {
    const auto g = pan_gains(2 * std::numbers::pi - 1e-9, layout);
    REQUIRE(g[3] > 0.0);
    REQUIRE(g[0] > 0.0);
    REQUIRE(g[1] == 0.0);
    REQUIRE(g[2] == 0.0);
    const auto h = pan_gains(0.0, layout);
    REQUIRE(h[0] == Approx(std::sqrt(0.5)));
    REQUIRE(h[3] == Approx(std::sqrt(0.5)));
  }
  SECTION("exactly two adjacent non-zero gains and unit energy") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> az(-10, 10);
    for (std::size_t n : {2u, 3u, 4u, 8u}) {
      const auto ring = ring_layout(n, 0.3);
      for (int k = 0; k < 2000; ++k) {
        const auto g = pan_gains(az(rng), ring);
        REQUIRE(std::abs(energy(g) - 1.0) <= 1e-9);
        int nonzero = 0;
        for (double v : g) nonzero += v != 0.0;
        REQUIRE(nonzero <= 2);
      }
    }
  }
  SECTION("gains are continuous in azimuth") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> az(0, 2 * std::numbers::pi);
    for (int k = 0; k < 5000; ++k) {
      const double a = az(rng);
      const auto g1 = pan_gains(a, layout);
      const auto g2 = pan_gains(a + 1e-6, layout);
      for (std::size_t c = 0; c < g1.size(); ++c) REQUIRE(std::abs(g1[c] - g2[c]) < 1e-4);
    }
  }
}

TEST_CASE("spatialize", "[spatializer]") {
  const auto layout = default_layout();
  const auto mono = tone_block();
  SECTION("source on speaker 0 without rolloff") {
    const auto out = spatialize(mono, at_azimuth(45 * kDeg, 3.0), layout, {Rolloff::None, 1.0, 0.0});
    REQUIRE(out.channels() == 5);
    // The azimuth of a Cartesian position is exact only to rounding.
    REQUIRE(((out.samples.row(0) - mono.samples.row(0)).abs() < 1e-6f).all());
    for (int c = 1; c < 5; ++c) REQUIRE((out.samples.row(c).abs() < 1e-6f).all());
  }
  SECTION("inverse rolloff halves ring gains at twice the reference distance") {
    const auto near = spatialize(mono, at_azimuth(45 * kDeg, 1.0), layout, {Rolloff::Inverse, 1.0, 0.3});
    const auto far = spatialize(mono, at_azimuth(45 * kDeg, 2.0), layout, {Rolloff::Inverse, 1.0, 0.3});
    REQUIRE(((far.samples.row(0) - 0.5f * near.samples.row(0)).abs() < 1e-7f).all());
    REQUIRE((far.samples.row(4) == near.samples.row(4)).all());
    REQUIRE(rolloff_gain(Rolloff::Inverse, 0.25, 1.0) == 1.0);
  }
  SECTION("zero point send silences the point channel") {
    const auto out = spatialize(mono, at_azimuth(200 * kDeg), layout, {Rolloff::None, 1.0, 0.0});
    REQUIRE((out.samples.row(4) == 0.0f).all());
  }
  SECTION("ring energy equals input energy without rolloff") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> az(0, 2 * std::numbers::pi);
    const double in = std::pow(rms<float>(mono.channel(0)), 2);
    for (int k = 0; k < 200; ++k) {
      const auto out = spatialize(mono, at_azimuth(az(rng)), layout, {Rolloff::None, 1.0, 0.5});
      double ring = 0;
      for (int c = 0; c < 4; ++c) ring += std::pow(rms<float>(out.channel(c)), 2);
      REQUIRE(std::abs(ring - in) <= 1e-6);
    }
  }
  SECTION("streaming spatializer matches the pure transform for a static source") {
    Spatializer s(layout, {Rolloff::Inverse, 1.0, 0.5});
    SampleArray<float> out(5, mono.frames());
    const auto src = at_azimuth(100 * kDeg, 1.7);
    s.process(mono.channel(0), src, out);
    const auto ref = spatialize(mono, src, layout, {Rolloff::Inverse, 1.0, 0.5});
    REQUIRE(((out - ref.samples).abs() < 1e-7f).all());
  }
}
