// Audio block type shared by sources, the processing graph and the spatializer.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <stdexcept>

namespace rbs {

/// Channels x frames, row-major so each channel is contiguous.
template <typename Scalar>
using SampleArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct AudioBlockT {
  SampleArray<Scalar> samples;
  double sample_rate = 48000.0;

  AudioBlockT() = default;
  AudioBlockT(Eigen::Index channels, Eigen::Index frames, double rate)
      : samples(SampleArray<Scalar>::Zero(channels, frames)), sample_rate(rate) {}

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index frames() const { return samples.cols(); }

  std::span<Scalar> channel(Eigen::Index c) {
    return {samples.data() + c * samples.cols(), static_cast<std::size_t>(samples.cols())};
  }
  std::span<const Scalar> channel(Eigen::Index c) const {
    return {samples.data() + c * samples.cols(), static_cast<std::size_t>(samples.cols())};
  }

  bool all_finite() const { return samples.isFinite().all(); }
};

using AudioBlock = AudioBlockT<float>;

class BlockMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear crossfade: (1 - mix) * consequential + mix * synthetic. mix = 0 and
/// mix = 1 reproduce the respective input exactly.
template <typename Scalar>
AudioBlockT<Scalar> blend(const AudioBlockT<Scalar>& consequential, const AudioBlockT<Scalar>& synthetic,
                          Scalar mix) {
  if (consequential.samples.rows() != synthetic.samples.rows() ||
      consequential.samples.cols() != synthetic.samples.cols() ||
      consequential.sample_rate != synthetic.sample_rate) {
    throw BlockMismatch("blend: block shape or sample rate differs");
  }
  AudioBlockT<Scalar> out;
  out.sample_rate = consequential.sample_rate;
  out.samples = (Scalar(1) - mix) * consequential.samples + mix * synthetic.samples;
  return out;
}

/// In-place variant for the audio thread: out[i] = (1 - mix) * a[i] + mix * b[i].
template <typename Scalar>
void blend_into(std::span<const Scalar> consequential, std::span<const Scalar> synthetic, Scalar mix,
                std::span<Scalar> out) {
  if (consequential.size() != synthetic.size() || out.size() != consequential.size()) {
    throw BlockMismatch("blend: block sizes differ");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (Scalar(1) - mix) * consequential[i] + mix * synthetic[i];
  }
}

template <typename Scalar>
double rms(std::span<const Scalar> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (Scalar v : x) acc += double(v) * double(v);
  return std::sqrt(acc / double(x.size()));
}

}  // namespace rbs
