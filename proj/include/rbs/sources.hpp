// Sound sources feeding the blend stage: synthetic per-joint motor voices
// standing in for contact microphones, a TCP-height drone as the synthetic
// layer, and looping WAV file feeds for recorded material.
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace rbs {

struct MotorVoiceParams {
  double base_freq = 90.0;         // Hz
  double freq_per_radps = 60.0;    // Hz per rad/s
  int n_harmonics = 6;
  double harmonic_rolloff = 0.6;   // gain ratio between successive harmonics
  double noise_level = 0.15;
  double idle_floor = 0.02;
  double amp_per_radps = 0.4;      // 1 / (rad/s)

  bool valid() const;
  bool operator==(const MotorVoiceParams&) const = default;
};

/// Per-voice render state: oscillator phase (cycles), last applied frequency
/// and amplitude (ramped across each block), and the noise generator.
struct MotorVoiceState {
  double phase = 0.0;
  double freq = 0.0;
  double amp = 0.0;
  bool primed = false;
  std::mt19937 rng;

  explicit MotorVoiceState(std::uint32_t seed = 0) : rng(seed) {}
};

double motor_voice_frequency(double joint_velocity, const MotorVoiceParams& params);
double motor_voice_amplitude(double joint_velocity, const MotorVoiceParams& params);

/// RMS of the normalized harmonic stack (unit amplitude, no noise) at `freq`.
double harmonic_stack_rms(const MotorVoiceParams& params, double freq, double sample_rate);

/// Renders one block of the voice for the given joint velocity. Frequency and
/// amplitude ramp linearly from the previous block's values; phase is
/// continuous across blocks. |sample| <= 1 + noise_level.
void motor_voice(double joint_velocity, const MotorVoiceParams& params, MotorVoiceState& state,
                 double sample_rate, std::span<float> out);

struct DroneParams {
  double base_freq = 110.0;       // Hz at TCP height 0
  double octaves_per_m = 1.0;
  double level = 0.25;

  bool operator==(const DroneParams&) const = default;
};

struct DroneState {
  double phase = 0.0;
  double freq = 0.0;
  bool primed = false;
};

double drone_frequency(double tcp_height, const DroneParams& params);

/// Sine drone whose pitch tracks TCP height.
void drone(double tcp_height, const DroneParams& params, DroneState& state, double sample_rate,
           std::span<float> out);

/// Sequential reader over pre-loaded mono samples.
class FileFeed {
 public:
  FileFeed() = default;
  FileFeed(std::shared_ptr<const std::vector<float>> samples, bool loop)
      : samples_(std::move(samples)), loop_(loop) {}

  /// Fills `out` and advances the cursor. Without looping, output after the
  /// end of the file is silence.
  void next(std::span<float> out);

  std::size_t cursor() const { return cursor_; }
  void seek(std::size_t cursor) { cursor_ = cursor; }
  bool loops() const { return loop_; }

 private:
  std::shared_ptr<const std::vector<float>> samples_;
  std::size_t cursor_ = 0;
  bool loop_ = true;
};

}  // namespace rbs
