// Single-producer single-consumer triple buffer: the writer never waits for
// the reader and the reader always sees the most recently published value.
#pragma once

#include <array>
#include <atomic>
#include <cstdint>

namespace rbs {

template <typename T>
class TripleBuffer {
 public:
  TripleBuffer() = default;
  explicit TripleBuffer(const T& initial) { slots_.fill(initial); }

  /// Writer side: fill back(), then publish().
  T& back() { return slots_[back_]; }

  void publish() {
    const std::uint8_t prev = middle_.exchange(static_cast<std::uint8_t>(back_ | kFresh), std::memory_order_acq_rel);
    back_ = prev & kIndex;
  }

  void write(const T& value) {
    back() = value;
    publish();
  }

  /// Reader side: swaps in the newest value if one was published since the
  /// last call. Returns true when the value changed.
  bool update() {
    if ((middle_.load(std::memory_order_relaxed) & kFresh) == 0) return false;
    const std::uint8_t prev = middle_.exchange(front_, std::memory_order_acq_rel);
    front_ = prev & kIndex;
    return true;
  }

  const T& read() {
    update();
    return slots_[front_];
  }

  /// The value the reader holds, without checking for a newer one.
  const T& front() const { return slots_[front_]; }

 private:
  static constexpr std::uint8_t kIndex = 0x3;
  static constexpr std::uint8_t kFresh = 0x4;

  std::array<T, 3> slots_{};
  std::uint8_t back_ = 0;
  std::atomic<std::uint8_t> middle_{1};
  std::uint8_t front_ = 2;
};

}  // namespace rbs
