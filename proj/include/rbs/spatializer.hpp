// Horizontal-ring speaker layouts with pairwise equal-power panning plus an
// optional point-source channel at the robot base.
#pragma once

#include "rbs/audio.hpp"

#include <Eigen/Core>

#include <span>
#include <string_view>
#include <optional>
#include <vector>

namespace rbs::spatial {

struct SpeakerLayout {
  /// Ring azimuths in radians, CCW from +x, strictly increasing in [0, 2pi).
  std::vector<double> ring;
  bool has_point_source = true;

  std::size_t ring_size() const { return ring.size(); }
  std::size_t channel_count() const { return ring.size() + (has_point_source ? 1 : 0); }
  /// The point source is always the last channel.
  std::size_t point_source_channel() const { return ring.size(); }

  bool valid() const;
  bool operator==(const SpeakerLayout&) const = default;
};

/// Quadraphonic ring at 45/135/225/315 degrees plus the base point source:
/// five channels.
SpeakerLayout default_layout();

/// Evenly spaced ring of n speakers starting at `first` radians.
SpeakerLayout ring_layout(std::size_t n, double first = 0.0, bool point_source = false);

/// Azimuth wrapped into [0, 2pi).
double wrap_azimuth(double azimuth);

/// Pairwise equal-power gains for the ring: only the two speakers adjacent to
/// `azimuth` are non-zero, g1 = cos(theta pi/2), g2 = sin(theta pi/2).
void pan_gains(double azimuth, const SpeakerLayout& layout, std::span<double> gains);
std::vector<double> pan_gains(double azimuth, const SpeakerLayout& layout);

enum class Rolloff { None, Inverse };

std::optional<Rolloff> parse_rolloff(std::string_view name);
std::string_view to_string(Rolloff rolloff);

/// Inverse-distance gain ref/d, never above 1.
double rolloff_gain(Rolloff rolloff, double distance, double reference_distance);

struct SourcePosition {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector2d listener = Eigen::Vector2d::Zero();  // horizontal listening centre

  double azimuth() const;
  double distance() const;
};

struct SpatialParams {
  Rolloff rolloff = Rolloff::None;
  double reference_distance = 1.0;  // m
  double point_send = 0.5;          // linear gain into the point-source channel

  bool operator==(const SpatialParams&) const = default;
};

/// Ring channels = block * pan gain * rolloff; point-source channel =
/// block * point_send regardless of position.
AudioBlock spatialize(const AudioBlock& mono, const SourcePosition& src, const SpeakerLayout& layout,
                      const SpatialParams& params);

/// Stateful variant for the audio thread: gains ramp linearly across each
/// block from the previous block's values, and nothing allocates after
/// construction.
class Spatializer {
 public:
  Spatializer(SpeakerLayout layout, SpatialParams params);

  const SpeakerLayout& layout() const { return layout_; }
  const SpatialParams& params() const { return params_; }

  /// `out` must have layout.channel_count() rows and mono.size() columns.
  void process(std::span<const float> mono, const SourcePosition& src, SampleArray<float>& out);

 private:
  SpeakerLayout layout_;
  SpatialParams params_;
  std::vector<double> previous_;
  std::vector<double> target_;
  bool primed_ = false;
};

}  // namespace rbs::spatial
