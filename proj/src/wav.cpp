#include "rbs/wav.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rbs::wav {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::vector<std::uint8_t> header(std::uint16_t format, int channels, std::uint32_t rate, std::uint16_t bits,
                                 std::uint32_t data_bytes) {
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  const auto block_align = static_cast<std::uint16_t>(channels * bits / 8);
  put_tag(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, format);
  put16(out, static_cast<std::uint16_t>(channels));
  put32(out, rate);
  put32(out, rate * block_align);
  put16(out, block_align);
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_bytes);
  return out;
}

}  // namespace

Audio parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::UnsupportedFormat, "not a RIFF/WAVE file");
  }
  std::uint16_t format = 0;
  std::uint16_t bits = 0;
  int channels = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw Error(ErrorKind::UnsupportedFormat, "malformed fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorKind::UnsupportedFormat, "malformed extensible fmt chunk");
        format = le16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      // Tolerate writers that leave the data size unset or too large.
      data = bytes.subspan(body, std::min<std::size_t>(size, available));
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) throw Error(ErrorKind::UnsupportedFormat, "missing fmt or data chunk");
  if (channels < 1 || rate == 0) throw Error(ErrorKind::UnsupportedFormat, "invalid channel count or rate");

  Audio audio;
  audio.channels = channels;
  audio.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    audio.format = SampleFormat::Pcm16;
    const std::size_t n = data.size() / 2;
    audio.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(le16(data.data() + 2 * i));
      audio.interleaved[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == kFormatPcm && bits == 24) {
    audio.format = SampleFormat::Pcm24;
    const std::size_t n = data.size() / 3;
    audio.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* p = data.data() + 3 * i;
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      audio.interleaved[i] = static_cast<float>(static_cast<double>(v) / 8388608.0);
    }
  } else if (format == kFormatFloat && bits == 32) {
    audio.format = SampleFormat::Float32;
    const std::size_t n = data.size() / 4;
    audio.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) audio.interleaved[i] = std::bit_cast<float>(le32(data.data() + 4 * i));
  } else {
    throw Error(ErrorKind::UnsupportedFormat,
                "unsupported sample format (tag " + std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }
  audio.interleaved.resize(audio.frames() * std::size_t(channels));
  return audio;
}

Audio read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::FileUnreadable, "read failed for " + path.string());
  return parse(bytes);
}

std::vector<float> downmix(const Audio& audio) {
  const std::size_t frames = audio.frames();
  if (audio.channels == 1) return audio.interleaved;
  std::vector<float> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < audio.channels; ++c) acc += audio.interleaved[f * std::size_t(audio.channels) + std::size_t(c)];
    mono[f] = static_cast<float>(acc / audio.channels);
  }
  return mono;
}

std::vector<float> resample_linear(std::span<const float> in, double from_rate, double to_rate) {
  if (from_rate == to_rate || in.empty()) return {in.begin(), in.end()};
  const auto out_len = static_cast<std::size_t>(std::llround(double(in.size()) * to_rate / from_rate));
  std::vector<float> out(std::max<std::size_t>(out_len, 1));
  const double step = from_rate / to_rate;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pos = double(i) * step;
    const auto idx = static_cast<std::size_t>(pos);
    if (idx + 1 >= in.size()) {
      out[i] = in.back();
      continue;
    }
    const double frac = pos - double(idx);
    out[i] = static_cast<float>(in[idx] + frac * (double(in[idx + 1]) - double(in[idx])));
  }
  return out;
}

std::vector<float> load_mono(const std::filesystem::path& path, double target_rate) {
  const Audio audio = read_file(path);
  const std::vector<float> mono = downmix(audio);
  return resample_linear(mono, audio.sample_rate, target_rate);
}

std::vector<std::uint8_t> encode_float32(std::span<const float> interleaved, int channels, std::uint32_t sample_rate) {
  auto out = header(kFormatFloat, channels, sample_rate, 32, static_cast<std::uint32_t>(interleaved.size() * 4));
  for (float v : interleaved) put32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::vector<std::uint8_t> encode_pcm16(std::span<const std::int16_t> interleaved, int channels,
                                       std::uint32_t sample_rate) {
  auto out = header(kFormatPcm, channels, sample_rate, 16, static_cast<std::uint32_t>(interleaved.size() * 2));
  for (std::int16_t v : interleaved) put16(out, static_cast<std::uint16_t>(v));
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace rbs::wav
