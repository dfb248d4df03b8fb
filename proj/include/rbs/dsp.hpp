// Block-based processing graph: gain, biquad, delay, ring modulator, pitch
// shifter and mixer nodes with one-pole smoothed parameters.
//
// The graph is built once (allocation, validation, topological ordering) and
// then processed block by block without allocating. Parameter changes are
// resolved to ParamHandle on the control side and applied on the audio side.
#pragma once

#include "rbs/audio.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rbs::dsp {

inline constexpr double kDefaultSmoothingMs = 20.0;

/// One-pole parameter smoother. Per sample:
///   current = target + alpha * (current - target),  alpha = exp(-1 / (tau * sr / 1000)).
class SmoothedParam {
 public:
  SmoothedParam() = default;
  SmoothedParam(double value, double sample_rate) : target_(value), current_(value), sample_rate_(sample_rate) {}

  void set_target(double target, double tau_ms);
  /// Jumps to `value` with no ramp.
  void reset(double value);

  double next();
  double current() const { return current_; }
  double target() const { return target_; }
  double alpha() const { return alpha_; }
  bool settled() const { return current_ == target_; }

 private:
  double target_ = 0.0;
  double current_ = 0.0;
  double alpha_ = 0.0;
  double sample_rate_ = 48000.0;
};

enum class BiquadKind { Lowpass, Highpass, Bandpass };

std::optional<BiquadKind> parse_biquad_kind(std::string_view name);
std::string_view to_string(BiquadKind kind);

/// Normalized coefficients (a0 = 1):
///   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct BiquadCoeffs {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

/// Audio-EQ-cookbook biquad design. Throws OutOfRange unless
/// 0 < cutoff < sample_rate / 2 and q > 0.
BiquadCoeffs biquad_coeffs(BiquadKind kind, double cutoff_hz, double q, double sample_rate);

enum class ErrorKind {
  OutOfRange,
  DuplicateId,
  UnknownKind,
  UnknownParam,
  MissingInput,
  CycleDetected,
  UnknownAddress,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Dual-tap delay-line pitch shifter. The taps sweep through a window of
/// `window` samples at rate (1 - ratio) and are crossfaded with
/// complementary sin^2 weights. At ratio 1 the output is the input delayed by
/// window / 2 samples exactly.
class PitchShifter {
 public:
  static constexpr double kMinRatio = 0.25;
  static constexpr double kMaxRatio = 4.0;

  PitchShifter() = default;
  explicit PitchShifter(std::size_t window);

  std::size_t latency() const { return window_ / 2; }
  void reset();
  float process(float x, double ratio);

 private:
  float tap(double delay) const;

  std::vector<float> line_;
  std::size_t mask_ = 0;
  std::size_t write_ = 0;
  std::size_t window_ = 0;
  double phase_ = 0.5;
};

/// Default shifter window, in milliseconds.
inline constexpr double kPitchWindowMs = 100.0;

std::size_t pitch_window_samples(double sample_rate);

/// Processes a block through `state`. Throws OutOfRange for ratios outside
/// [0.25, 4].
void pitchshift_block(std::span<const float> in, double ratio, PitchShifter& state, std::span<float> out);

enum class NodeKind { Gain, Biquad, Delay, RingMod, PitchShift, Mixer };

std::optional<NodeKind> parse_node_kind(std::string_view name);
std::string_view to_string(NodeKind kind);

struct ParamInfo {
  std::string_view name;
  double min;
  double max;
  double default_value;
};

/// Parameters accepted by each node kind, in their fixed index order.
std::span<const ParamInfo> node_params(NodeKind kind);

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Gain;
  std::map<std::string, double> params;
  std::vector<std::string> inputs;
  /// Biquad response type; ignored by other kinds.
  BiquadKind mode = BiquadKind::Lowpass;

  bool operator==(const NodeSpec&) const = default;
};

struct ParamHandle {
  std::uint32_t node = 0;
  std::uint32_t param = 0;
  bool operator==(const ParamHandle&) const = default;
};

/// A parameter change travelling from the control side to the audio side.
struct ParamUpdate {
  ParamHandle handle;
  double value = 0.0;
  double smooth_ms = kDefaultSmoothingMs;
};

class Node;

class Graph {
 public:
  /// Validates and builds the graph. `external_inputs` names the blocks the
  /// caller supplies to process(); node inputs may reference those names or
  /// other node ids.
  Graph(std::vector<NodeSpec> specs, std::vector<std::string> external_inputs, double sample_rate,
        std::size_t block_size);
  ~Graph();
  Graph(Graph&&) noexcept;
  Graph& operator=(Graph&&) noexcept;

  double sample_rate() const { return sample_rate_; }
  std::size_t block_size() const { return block_size_; }
  const std::vector<NodeSpec>& specs() const { return specs_; }
  const std::vector<std::string>& external_inputs() const { return externals_; }

  /// Node ids in evaluation order (topological, ties broken by id).
  std::vector<std::string> evaluation_order() const;

  std::optional<std::size_t> node_index(std::string_view id) const;
  std::optional<std::size_t> external_index(std::string_view name) const;

  /// Resolves "nodeId.paramName".
  std::optional<ParamHandle> resolve(std::string_view address) const;
  ParamHandle resolve_or_throw(std::string_view address) const;
  const ParamInfo& param_info(ParamHandle handle) const;
  const SmoothedParam& param(ParamHandle handle) const;

  /// Sets a parameter target (clamped to its range) with one-pole smoothing.
  void set_param(ParamHandle handle, double value, double smooth_ms = kDefaultSmoothingMs);
  void set_param(std::string_view address, double value, double smooth_ms = kDefaultSmoothingMs);
  void apply(const ParamUpdate& update) { set_param(update.handle, update.value, update.smooth_ms); }

  /// Real-time entry point. `externals[i]` is the block for external input i;
  /// every span must hold `frames` samples (frames <= block_size).
  void process(std::span<const std::span<const float>> externals, std::size_t frames);

  std::span<const float> output(std::size_t node, std::size_t frames) const;

  /// Convenience wrapper taking and returning named mono blocks (allocates).
  std::map<std::string, AudioBlock> process_block(const std::map<std::string, AudioBlock>& inputs);

  /// Clears all node state (delay lines, filter memories, oscillator phases).
  void reset_state();

 private:
  struct Source {
    bool external = false;
    std::size_t index = 0;
  };

  std::vector<NodeSpec> specs_;
  std::vector<std::string> externals_;
  double sample_rate_;
  std::size_t block_size_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::vector<Source>> sources_;
  std::vector<std::size_t> order_;
  std::vector<std::vector<float>> buffers_;
  std::vector<float> scratch_;
};

}  // namespace rbs::dsp
