#include "rbs/dsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <set>

namespace rbs::dsp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }

constexpr ParamInfo kGainParams[] = {{"gain_db", -120.0, 24.0, 0.0}};
constexpr ParamInfo kBiquadParams[] = {{"cutoff_hz", 10.0, 20000.0, 1000.0}, {"q", 0.1, 20.0, 0.7071}};
constexpr ParamInfo kDelayParams[] = {
    {"time_ms", 1.0, 2000.0, 250.0}, {"feedback", 0.0, 0.95, 0.0}, {"mix", 0.0, 1.0, 1.0}};
constexpr ParamInfo kRingParams[] = {{"freq_hz", 0.0, 20000.0, 30.0}, {"depth", 0.0, 1.0, 1.0}};
constexpr ParamInfo kPitchParams[] = {{"ratio", PitchShifter::kMinRatio, PitchShifter::kMaxRatio, 1.0}};
constexpr ParamInfo kMixerParams[] = {{"gain_db", -120.0, 24.0, 0.0}};

}  // namespace

// --- SmoothedParam ---------------------------------------------------------

void SmoothedParam::set_target(double target, double tau_ms) {
  target_ = target;
  alpha_ = tau_ms > 0 ? std::exp(-1.0 / (tau_ms * sample_rate_ / 1000.0)) : 0.0;
  if (alpha_ == 0.0) current_ = target_;
}

void SmoothedParam::reset(double value) {
  target_ = value;
  current_ = value;
}

double SmoothedParam::next() {
  if (current_ != target_) {
    const double next = target_ + alpha_ * (current_ - target_);
    // Snap once the remaining gap is far below anything audible.
    const double snap = 1e-7 * std::max(1.0, std::abs(target_));
    current_ = std::abs(next - target_) <= snap ? target_ : next;
  }
  return current_;
}

// --- Biquad ----------------------------------------------------------------

std::optional<BiquadKind> parse_biquad_kind(std::string_view name) {
  if (name == "lowpass") return BiquadKind::Lowpass;
  if (name == "highpass") return BiquadKind::Highpass;
  if (name == "bandpass") return BiquadKind::Bandpass;
  return std::nullopt;
}

std::string_view to_string(BiquadKind kind) {
  switch (kind) {
    case BiquadKind::Lowpass: return "lowpass";
    case BiquadKind::Highpass: return "highpass";
    case BiquadKind::Bandpass: return "bandpass";
  }
  return "lowpass";
}

BiquadCoeffs biquad_coeffs(BiquadKind kind, double cutoff_hz, double q, double sample_rate) {
  if (!(cutoff_hz > 0 && cutoff_hz < sample_rate / 2)) {
    throw Error(ErrorKind::OutOfRange, "biquad cutoff must lie in (0, sample_rate/2)");
  }
  if (!(q > 0)) throw Error(ErrorKind::OutOfRange, "biquad Q must be positive");
  const double w0 = kTwoPi * cutoff_hz / sample_rate;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  double b0 = 0, b1 = 0, b2 = 0;
  switch (kind) {
    case BiquadKind::Lowpass:
      b0 = (1.0 - cw) / 2.0;
      b1 = 1.0 - cw;
      b2 = b0;
      break;
    case BiquadKind::Highpass:
      b0 = (1.0 + cw) / 2.0;
      b1 = -(1.0 + cw);
      b2 = b0;
      break;
    case BiquadKind::Bandpass:
      b0 = alpha;
      b1 = 0.0;
      b2 = -alpha;
      break;
  }
  return {b0 / a0, b1 / a0, b2 / a0, -2.0 * cw / a0, (1.0 - alpha) / a0};
}

// --- Errors ----------------------------------------------------------------

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnknownKind: return "UnknownKind";
    case ErrorKind::UnknownParam: return "UnknownParam";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::UnknownAddress: return "UnknownAddress";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

// --- Pitch shifter ---------------------------------------------------------

PitchShifter::PitchShifter(std::size_t window) : window_(window + (window & 1)) {
  const std::size_t size = std::bit_ceil(window_ + 2);
  line_.assign(size, 0.0f);
  mask_ = size - 1;
}

void PitchShifter::reset() {
  std::fill(line_.begin(), line_.end(), 0.0f);
  write_ = 0;
  phase_ = 0.5;
}

float PitchShifter::tap(double delay) const {
  const double whole = std::floor(delay);
  const double frac = delay - whole;
  const std::size_t newer = (write_ - static_cast<std::size_t>(whole)) & mask_;
  const float x0 = line_[newer];
  if (frac == 0.0) return x0;
  const float x1 = line_[(newer - 1) & mask_];
  return static_cast<float>(x0 + frac * (double(x1) - double(x0)));
}

float PitchShifter::process(float x, double ratio) {
  line_[write_] = x;
  const double w = static_cast<double>(window_);
  double other = phase_ + 0.5;
  if (other >= 1.0) other -= 1.0;
  const double s = std::sin(std::numbers::pi * phase_);
  const double weight_a = s * s;
  const double weight_b = 1.0 - weight_a;
  const float a = tap(phase_ * w);
  const float b = tap(other * w);
  const auto y = static_cast<float>(weight_a * a + weight_b * b);
  phase_ += (1.0 - ratio) / w;
  phase_ -= std::floor(phase_);
  write_ = (write_ + 1) & mask_;
  return y;
}

std::size_t pitch_window_samples(double sample_rate) {
  return static_cast<std::size_t>(std::lround(kPitchWindowMs * sample_rate / 1000.0));
}

void pitchshift_block(std::span<const float> in, double ratio, PitchShifter& state, std::span<float> out) {
  if (!(ratio >= PitchShifter::kMinRatio && ratio <= PitchShifter::kMaxRatio)) {
    throw Error(ErrorKind::OutOfRange, "pitch ratio must lie in [0.25, 4]");
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = state.process(in[i], ratio);
}

// --- Nodes -----------------------------------------------------------------

std::optional<NodeKind> parse_node_kind(std::string_view name) {
  if (name == "gain") return NodeKind::Gain;
  if (name == "biquad") return NodeKind::Biquad;
  if (name == "delay") return NodeKind::Delay;
  if (name == "ringmod") return NodeKind::RingMod;
  if (name == "pitchshift") return NodeKind::PitchShift;
  if (name == "mixer") return NodeKind::Mixer;
  return std::nullopt;
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Gain: return "gain";
    case NodeKind::Biquad: return "biquad";
    case NodeKind::Delay: return "delay";
    case NodeKind::RingMod: return "ringmod";
    case NodeKind::PitchShift: return "pitchshift";
    case NodeKind::Mixer: return "mixer";
  }
  return "gain";
}

std::span<const ParamInfo> node_params(NodeKind kind) {
  switch (kind) {
    case NodeKind::Gain: return kGainParams;
    case NodeKind::Biquad: return kBiquadParams;
    case NodeKind::Delay: return kDelayParams;
    case NodeKind::RingMod: return kRingParams;
    case NodeKind::PitchShift: return kPitchParams;
    case NodeKind::Mixer: return kMixerParams;
  }
  return {};
}

class Node {
 public:
  Node(NodeKind kind, const NodeSpec& spec, double sample_rate) : kind_(kind), sample_rate_(sample_rate) {
    for (const auto& info : node_params(kind)) {
      auto it = spec.params.find(std::string(info.name));
      double v = it == spec.params.end() ? info.default_value : it->second;
      params_.emplace_back(std::clamp(v, info.min, info.max), sample_rate);
    }
  }
  virtual ~Node() = default;

  virtual void process(std::span<const float> in, std::span<float> out) = 0;
  virtual void reset() {}

  NodeKind kind() const { return kind_; }
  SmoothedParam& param(std::size_t i) { return params_[i]; }
  const SmoothedParam& param(std::size_t i) const { return params_[i]; }

 protected:
  NodeKind kind_;
  double sample_rate_;
  std::vector<SmoothedParam> params_;
};

namespace {

class GainNode final : public Node {
 public:
  using Node::Node;
  void process(std::span<const float> in, std::span<float> out) override {
    SmoothedParam& gain = params_[0];
    if (gain.settled()) {
      const auto g = static_cast<float>(db_to_linear(gain.current()));
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * g;
      return;
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<float>(in[i] * db_to_linear(gain.next()));
  }
};

class BiquadNode final : public Node {
 public:
  BiquadNode(const NodeSpec& spec, double sample_rate) : Node(NodeKind::Biquad, spec, sample_rate), mode_(spec.mode) {
    update();
  }
  void process(std::span<const float> in, std::span<float> out) override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!params_[0].settled() || !params_[1].settled()) {
        params_[0].next();
        params_[1].next();
        update();
      }
      const double x = in[i];
      const double y = c_.b0 * x + z1_;
      z1_ = c_.b1 * x - c_.a1 * y + z2_;
      z2_ = c_.b2 * x - c_.a2 * y;
      out[i] = static_cast<float>(y);
    }
  }
  void reset() override { z1_ = z2_ = 0.0; }

 private:
  void update() {
    const double cutoff = std::min(params_[0].current(), 0.49 * sample_rate_);
    c_ = biquad_coeffs(mode_, cutoff, params_[1].current(), sample_rate_);
  }

  BiquadKind mode_;
  BiquadCoeffs c_;
  double z1_ = 0.0;
  double z2_ = 0.0;
};

class DelayNode final : public Node {
 public:
  DelayNode(const NodeSpec& spec, double sample_rate) : Node(NodeKind::Delay, spec, sample_rate) {
    const auto max_samples = static_cast<std::size_t>(std::ceil(kDelayParams[0].max * sample_rate / 1000.0)) + 2;
    line_.assign(std::bit_ceil(max_samples), 0.0f);
    mask_ = line_.size() - 1;
  }
  void process(std::span<const float> in, std::span<float> out) override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double delay = std::max(1.0, params_[0].next() * sample_rate_ / 1000.0);
      const double feedback = params_[1].next();
      const double mix = params_[2].next();
      const double whole = std::floor(delay);
      const double frac = delay - whole;
      const std::size_t newer = (write_ - static_cast<std::size_t>(whole)) & mask_;
      const double x0 = line_[newer];
      const double wet = frac == 0.0 ? x0 : x0 + frac * (line_[(newer - 1) & mask_] - x0);
      line_[write_] = static_cast<float>(in[i] + feedback * wet);
      write_ = (write_ + 1) & mask_;
      out[i] = static_cast<float>((1.0 - mix) * in[i] + mix * wet);
    }
  }
  void reset() override {
    std::fill(line_.begin(), line_.end(), 0.0f);
    write_ = 0;
  }

 private:
  std::vector<float> line_;
  std::size_t mask_ = 0;
  std::size_t write_ = 0;
};

class RingModNode final : public Node {
 public:
  using Node::Node;
  void process(std::span<const float> in, std::span<float> out) override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double freq = params_[0].next();
      const double depth = params_[1].next();
      out[i] = static_cast<float>(in[i] * (1.0 - depth + depth * std::sin(kTwoPi * phase_)));
      phase_ += freq / sample_rate_;
      phase_ -= std::floor(phase_);
    }
  }
  void reset() override { phase_ = 0.0; }

 private:
  double phase_ = 0.0;
};

class PitchShiftNode final : public Node {
 public:
  PitchShiftNode(const NodeSpec& spec, double sample_rate)
      : Node(NodeKind::PitchShift, spec, sample_rate), shifter_(pitch_window_samples(sample_rate)) {}
  void process(std::span<const float> in, std::span<float> out) override {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = shifter_.process(in[i], params_[0].next());
  }
  void reset() override { shifter_.reset(); }

 private:
  PitchShifter shifter_;
};

std::unique_ptr<Node> make_node(const NodeSpec& spec, double sample_rate) {
  switch (spec.kind) {
    case NodeKind::Gain:
    case NodeKind::Mixer:
      return std::make_unique<GainNode>(spec.kind, spec, sample_rate);
    case NodeKind::Biquad: return std::make_unique<BiquadNode>(spec, sample_rate);
    case NodeKind::Delay: return std::make_unique<DelayNode>(spec, sample_rate);
    case NodeKind::RingMod: return std::make_unique<RingModNode>(spec.kind, spec, sample_rate);
    case NodeKind::PitchShift: return std::make_unique<PitchShiftNode>(spec, sample_rate);
  }
  throw Error(ErrorKind::UnknownKind, spec.id);
}

}  // namespace

// --- Graph -----------------------------------------------------------------

Graph::Graph(std::vector<NodeSpec> specs, std::vector<std::string> external_inputs, double sample_rate,
             std::size_t block_size)
    : specs_(std::move(specs)), externals_(std::move(external_inputs)), sample_rate_(sample_rate),
      block_size_(block_size) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& spec = specs_[i];
    if (spec.id.empty() || spec.id.find('.') != std::string::npos) {
      throw Error(ErrorKind::UnknownAddress, "node id must be non-empty and contain no '.': '" + spec.id + "'");
    }
    if (!index.emplace(spec.id, i).second) throw Error(ErrorKind::DuplicateId, spec.id);
    if (std::find(externals_.begin(), externals_.end(), spec.id) != externals_.end()) {
      throw Error(ErrorKind::DuplicateId, spec.id + " shadows an external input");
    }
    const auto known = node_params(spec.kind);
    for (const auto& [name, value] : spec.params) {
      const auto it = std::find_if(known.begin(), known.end(), [&](const ParamInfo& p) { return p.name == name; });
      if (it == known.end()) throw Error(ErrorKind::UnknownParam, spec.id + "." + name);
      if (!(value >= it->min && value <= it->max)) {
        throw Error(ErrorKind::OutOfRange, spec.id + "." + name + " outside [" + std::to_string(it->min) + ", " +
                                               std::to_string(it->max) + "]");
      }
    }
  }

  sources_.resize(specs_.size());
  std::vector<std::vector<std::size_t>> dependents(specs_.size());
  std::vector<std::size_t> pending(specs_.size(), 0);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    for (const auto& input : specs_[i].inputs) {
      if (auto it = index.find(input); it != index.end()) {
        sources_[i].push_back({false, it->second});
        dependents[it->second].push_back(i);
        ++pending[i];
      } else if (auto e = external_index(input)) {
        sources_[i].push_back({true, *e});
      } else {
        throw Error(ErrorKind::MissingInput, specs_[i].id + " references unknown input '" + input + "'");
      }
    }
  }

  // Kahn's algorithm; the ready set is ordered by id so the evaluation order
  // does not depend on declaration order.
  auto by_id = [this](std::size_t a, std::size_t b) { return specs_[a].id < specs_[b].id; };
  std::set<std::size_t, decltype(by_id)> ready(by_id);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (pending[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const std::size_t n = *ready.begin();
    ready.erase(ready.begin());
    order_.push_back(n);
    for (std::size_t d : dependents[n]) {
      if (--pending[d] == 0) ready.insert(d);
    }
  }
  if (order_.size() != specs_.size()) throw Error(ErrorKind::CycleDetected, "graph contains a cycle");

  for (const auto& spec : specs_) nodes_.push_back(make_node(spec, sample_rate_));
  buffers_.assign(specs_.size(), std::vector<float>(block_size_, 0.0f));
  scratch_.assign(block_size_, 0.0f);
}

Graph::~Graph() = default;
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;

std::vector<std::string> Graph::evaluation_order() const {
  std::vector<std::string> ids;
  for (std::size_t n : order_) ids.push_back(specs_[n].id);
  return ids;
}

std::optional<std::size_t> Graph::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Graph::external_index(std::string_view name) const {
  for (std::size_t i = 0; i < externals_.size(); ++i) {
    if (externals_[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<ParamHandle> Graph::resolve(std::string_view address) const {
  const auto dot = address.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  const auto node = node_index(address.substr(0, dot));
  if (!node) return std::nullopt;
  const auto name = address.substr(dot + 1);
  const auto params = node_params(specs_[*node].kind);
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].name == name) return ParamHandle{static_cast<std::uint32_t>(*node), static_cast<std::uint32_t>(p)};
  }
  return std::nullopt;
}

ParamHandle Graph::resolve_or_throw(std::string_view address) const {
  if (auto h = resolve(address)) return *h;
  throw Error(ErrorKind::UnknownAddress, std::string(address));
}

const ParamInfo& Graph::param_info(ParamHandle handle) const {
  return node_params(specs_.at(handle.node).kind)[handle.param];
}

const SmoothedParam& Graph::param(ParamHandle handle) const { return nodes_.at(handle.node)->param(handle.param); }

void Graph::set_param(ParamHandle handle, double value, double smooth_ms) {
  if (handle.node >= nodes_.size() || handle.param >= node_params(specs_[handle.node].kind).size()) return;
  const ParamInfo& info = param_info(handle);
  if (!std::isfinite(value)) return;
  nodes_[handle.node]->param(handle.param).set_target(std::clamp(value, info.min, info.max), smooth_ms);
}

void Graph::set_param(std::string_view address, double value, double smooth_ms) {
  set_param(resolve_or_throw(address), value, smooth_ms);
}

void Graph::process(std::span<const std::span<const float>> externals, std::size_t frames) {
  frames = std::min(frames, block_size_);
  for (std::size_t n : order_) {
    std::span<float> in(scratch_.data(), frames);
    const auto& srcs = sources_[n];
    if (srcs.empty()) {
      std::fill(in.begin(), in.end(), 0.0f);
    }
    for (std::size_t s = 0; s < srcs.size(); ++s) {
      const float* src = srcs[s].external ? externals[srcs[s].index].data() : buffers_[srcs[s].index].data();
      if (s == 0) {
        std::copy(src, src + frames, in.begin());
      } else {
        for (std::size_t i = 0; i < frames; ++i) in[i] += src[i];
      }
    }
    nodes_[n]->process(in, std::span<float>(buffers_[n].data(), frames));
  }
}

std::span<const float> Graph::output(std::size_t node, std::size_t frames) const {
  return {buffers_.at(node).data(), std::min(frames, block_size_)};
}

std::map<std::string, AudioBlock> Graph::process_block(const std::map<std::string, AudioBlock>& inputs) {
  std::vector<std::span<const float>> ext(externals_.size());
  std::size_t frames = block_size_;
  std::vector<bool> used(externals_.size(), false);
  for (const auto& srcs : sources_) {
    for (const auto& s : srcs) {
      if (s.external) used[s.index] = true;
    }
  }
  for (std::size_t i = 0; i < externals_.size(); ++i) {
    auto it = inputs.find(externals_[i]);
    if (it == inputs.end()) {
      if (used[i]) throw Error(ErrorKind::MissingInput, "no block supplied for '" + externals_[i] + "'");
      continue;
    }
    ext[i] = it->second.channel(0);
    frames = std::min<std::size_t>(frames, ext[i].size());
  }
  process(ext, frames);
  std::map<std::string, AudioBlock> out;
  for (std::size_t n = 0; n < specs_.size(); ++n) {
    AudioBlock block(1, static_cast<Eigen::Index>(frames), sample_rate_);
    auto src = output(n, frames);
    std::copy(src.begin(), src.end(), block.channel(0).begin());
    out.emplace(specs_[n].id, std::move(block));
  }
  return out;
}

void Graph::reset_state() {
  for (auto& node : nodes_) node->reset();
}

}  // namespace rbs::dsp
