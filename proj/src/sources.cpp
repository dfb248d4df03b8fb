#include "rbs/sources.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rbs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double stack_norm(const MotorVoiceParams& p) {
  double sum = 0.0;
  double g = 1.0;
  for (int h = 0; h < p.n_harmonics; ++h, g *= p.harmonic_rolloff) sum += g;
  return sum;
}

// Uniform in [-1, 1), independent of the standard library's distributions so
// renders are identical across toolchains.
double white(std::mt19937& rng) { return std::ldexp(static_cast<double>(rng()), -31) - 1.0; }

}  // namespace

bool MotorVoiceParams::valid() const {
  return base_freq > 0 && n_harmonics >= 1 && harmonic_rolloff >= 0 && harmonic_rolloff <= 1 && idle_floor >= 0 &&
         noise_level >= 0 && amp_per_radps >= 0 && freq_per_radps >= 0;
}

double motor_voice_frequency(double joint_velocity, const MotorVoiceParams& params) {
  return params.base_freq + params.freq_per_radps * std::abs(joint_velocity);
}

double motor_voice_amplitude(double joint_velocity, const MotorVoiceParams& params) {
  return std::clamp(params.idle_floor + params.amp_per_radps * std::abs(joint_velocity), 0.0, 1.0);
}

double harmonic_stack_rms(const MotorVoiceParams& params, double freq, double sample_rate) {
  double power = 0.0;
  double g = 1.0;
  for (int h = 1; h <= params.n_harmonics; ++h, g *= params.harmonic_rolloff) {
    if (h * freq < sample_rate / 2) power += g * g / 2.0;
  }
  return std::sqrt(power) / stack_norm(params);
}

void motor_voice(double joint_velocity, const MotorVoiceParams& params, MotorVoiceState& state,
                 double sample_rate, std::span<float> out) {
  const double freq = motor_voice_frequency(joint_velocity, params);
  const double amp = motor_voice_amplitude(joint_velocity, params);
  if (!state.primed) {
    state.freq = freq;
    state.amp = amp;
    state.primed = true;
  }
  const double norm = 1.0 / stack_norm(params);
  const double nyquist = sample_rate / 2;
  const auto n = static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = n > 0 ? double(i + 1) / n : 1.0;
    const double f = state.freq + (freq - state.freq) * t;
    const double a = state.amp + (amp - state.amp) * t;
    double tone = 0.0;
    double g = 1.0;
    for (int h = 1; h <= params.n_harmonics && h * f < nyquist; ++h, g *= params.harmonic_rolloff) {
      tone += g * std::sin(kTwoPi * h * state.phase);
    }
    const double noise = params.noise_level > 0 ? params.noise_level * white(state.rng) : 0.0;
    out[i] = static_cast<float>(a * (tone * norm + noise));
    state.phase += f / sample_rate;
    state.phase -= std::floor(state.phase);
  }
  state.freq = freq;
  state.amp = amp;
}

double drone_frequency(double tcp_height, const DroneParams& params) {
  return params.base_freq * std::exp2(params.octaves_per_m * tcp_height);
}

void drone(double tcp_height, const DroneParams& params, DroneState& state, double sample_rate,
           std::span<float> out) {
  const double freq = std::min(drone_frequency(tcp_height, params), sample_rate / 2);
  if (!state.primed) {
    state.freq = freq;
    state.primed = true;
  }
  const auto n = static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double f = state.freq + (freq - state.freq) * (double(i + 1) / n);
    out[i] = static_cast<float>(params.level * std::sin(kTwoPi * state.phase));
    state.phase += f / sample_rate;
    state.phase -= std::floor(state.phase);
  }
  state.freq = freq;
}

void FileFeed::next(std::span<float> out) {
  const std::size_t size = samples_ ? samples_->size() : 0;
  for (auto& s : out) {
    if (cursor_ >= size && loop_ && size > 0) cursor_ = 0;
    if (cursor_ < size) {
      s = (*samples_)[cursor_++];
    } else {
      s = 0.0f;
    }
  }
}

}  // namespace rbs
