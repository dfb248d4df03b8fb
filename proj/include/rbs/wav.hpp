// RIFF/WAVE reading (PCM16, PCM24, float32) and float32 multichannel writing.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbs::wav {

enum class ErrorKind { UnsupportedFormat, FileUnreadable };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class SampleFormat { Pcm16, Pcm24, Float32 };

struct Audio {
  double sample_rate = 0;
  int channels = 0;
  SampleFormat format = SampleFormat::Float32;
  std::vector<float> interleaved;

  std::size_t frames() const { return channels > 0 ? interleaved.size() / std::size_t(channels) : 0; }
};

Audio parse(std::span<const std::uint8_t> bytes);
Audio read_file(const std::filesystem::path& path);

/// Average of all channels per frame.
std::vector<float> downmix(const Audio& audio);

/// Linear-interpolation resampling; returns the input unchanged if rates match.
std::vector<float> resample_linear(std::span<const float> in, double from_rate, double to_rate);

/// Mono samples at `target_rate`, ready for a file feed.
std::vector<float> load_mono(const std::filesystem::path& path, double target_rate);

/// Float32 WAVE (format tag 3) with the given interleaved samples.
std::vector<std::uint8_t> encode_float32(std::span<const float> interleaved, int channels, std::uint32_t sample_rate);

/// PCM16 WAVE, mostly for producing test fixtures.
std::vector<std::uint8_t> encode_pcm16(std::span<const std::int16_t> interleaved, int channels,
                                       std::uint32_t sample_rate);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rbs::wav
