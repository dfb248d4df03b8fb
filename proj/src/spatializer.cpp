#include "rbs/spatializer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rbs::spatial {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHalfPi = std::numbers::pi / 2.0;
}  // namespace

bool SpeakerLayout::valid() const {
  if (ring.size() < 2) return false;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    if (!(ring[i] >= 0.0 && ring[i] < kTwoPi)) return false;
    if (i > 0 && !(ring[i] > ring[i - 1])) return false;
  }
  return true;
}

SpeakerLayout default_layout() {
  constexpr double deg = std::numbers::pi / 180.0;
  return {{45 * deg, 135 * deg, 225 * deg, 315 * deg}, true};
}

SpeakerLayout ring_layout(std::size_t n, double first, bool point_source) {
  SpeakerLayout layout;
  layout.has_point_source = point_source;
  for (std::size_t i = 0; i < n; ++i) layout.ring.push_back(wrap_azimuth(first + kTwoPi * double(i) / double(n)));
  std::sort(layout.ring.begin(), layout.ring.end());
  return layout;
}

double wrap_azimuth(double azimuth) {
  double a = std::fmod(azimuth, kTwoPi);
  if (a < 0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

void pan_gains(double azimuth, const SpeakerLayout& layout, std::span<double> gains) {
  const auto& ring = layout.ring;
  const std::size_t n = ring.size();
  std::fill(gains.begin(), gains.end(), 0.0);
  if (n == 0) return;
  const double a = wrap_azimuth(azimuth);
  // Index of the last speaker at or before `a`, cyclically.
  std::size_t lo = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (ring[i] <= a) lo = i;
  }
  const std::size_t hi = (lo + 1) % n;
  double span = ring[hi] - ring[lo];
  double offset = a - ring[lo];
  if (span <= 0) span += kTwoPi;
  if (offset < 0) offset += kTwoPi;
  const double theta = std::clamp(offset / span, 0.0, 1.0);
  gains[lo] = std::cos(theta * kHalfPi);
  gains[hi] = std::sin(theta * kHalfPi);
}

std::vector<double> pan_gains(double azimuth, const SpeakerLayout& layout) {
  std::vector<double> g(layout.ring.size());
  pan_gains(azimuth, layout, g);
  return g;
}

std::optional<Rolloff> parse_rolloff(std::string_view name) {
  if (name == "none") return Rolloff::None;
  if (name == "inverse") return Rolloff::Inverse;
  return std::nullopt;
}

std::string_view to_string(Rolloff rolloff) { return rolloff == Rolloff::None ? "none" : "inverse"; }

double rolloff_gain(Rolloff rolloff, double distance, double reference_distance) {
  if (rolloff == Rolloff::None) return 1.0;
  if (!(distance > reference_distance)) return 1.0;
  return reference_distance / distance;
}

double SourcePosition::azimuth() const {
  return wrap_azimuth(std::atan2(position.y() - listener.y(), position.x() - listener.x()));
}

double SourcePosition::distance() const { return (position.head<2>() - listener).norm(); }

AudioBlock spatialize(const AudioBlock& mono, const SourcePosition& src, const SpeakerLayout& layout,
                      const SpatialParams& params) {
  AudioBlock out(static_cast<Eigen::Index>(layout.channel_count()), mono.frames(), mono.sample_rate);
  const auto gains = pan_gains(src.azimuth(), layout);
  const double roll = rolloff_gain(params.rolloff, src.distance(), params.reference_distance);
  for (std::size_t c = 0; c < gains.size(); ++c) {
    out.samples.row(static_cast<Eigen::Index>(c)) = mono.samples.row(0) * static_cast<float>(gains[c] * roll);
  }
  if (layout.has_point_source) {
    out.samples.row(static_cast<Eigen::Index>(layout.point_source_channel())) =
        mono.samples.row(0) * static_cast<float>(params.point_send);
  }
  return out;
}

Spatializer::Spatializer(SpeakerLayout layout, SpatialParams params)
    : layout_(std::move(layout)), params_(params), previous_(layout_.ring.size(), 0.0),
      target_(layout_.ring.size(), 0.0) {}

void Spatializer::process(std::span<const float> mono, const SourcePosition& src, SampleArray<float>& out) {
  pan_gains(src.azimuth(), layout_, target_);
  const double roll = rolloff_gain(params_.rolloff, src.distance(), params_.reference_distance);
  for (double& g : target_) g *= roll;
  if (!primed_) {
    previous_ = target_;
    primed_ = true;
  }
  const auto n = static_cast<double>(mono.size());
  for (std::size_t c = 0; c < target_.size(); ++c) {
    float* row = out.data() + c * static_cast<std::size_t>(out.cols());
    const double from = previous_[c];
    const double to = target_[c];
    if (from == to) {
      const auto g = static_cast<float>(to);
      for (std::size_t i = 0; i < mono.size(); ++i) row[i] = mono[i] * g;
    } else {
      for (std::size_t i = 0; i < mono.size(); ++i) {
        row[i] = static_cast<float>(mono[i] * (from + (to - from) * (double(i + 1) / n)));
      }
    }
    previous_[c] = to;
  }
  if (layout_.has_point_source) {
    float* row = out.data() + layout_.point_source_channel() * static_cast<std::size_t>(out.cols());
    const auto send = static_cast<float>(params_.point_send);
    for (std::size_t i = 0; i < mono.size(); ++i) row[i] = mono[i] * send;
  }
}

}  // namespace rbs::spatial
