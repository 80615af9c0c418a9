#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace anc {

// Fixed-length history of the most recent samples, newest first.
// The buffer is mirrored so that the window is always one contiguous span.
class DelayLine {
 public:
  DelayLine() = default;
  explicit DelayLine(std::size_t length) : length_(length), buf_(2 * length, 0.0) {}

  std::size_t size() const noexcept { return length_; }

  void push(double v) noexcept {
    if (length_ == 0) return;
    head_ = (head_ == 0 ? length_ : head_) - 1;
    buf_[head_] = v;
    buf_[head_ + length_] = v;
  }

  // window()[j] is the sample pushed j steps ago.
  std::span<const double> window() const noexcept { return {buf_.data() + head_, length_}; }
  std::span<const double> window(std::size_t n) const noexcept {
    return {buf_.data() + head_, n < length_ ? n : length_};
  }

  double operator[](std::size_t j) const noexcept { return buf_[head_ + j]; }

  void reset() noexcept {
    std::fill(buf_.begin(), buf_.end(), 0.0);
    head_ = 0;
  }

 private:
  std::size_t length_ = 0;
  std::size_t head_ = 0;
  std::vector<double> buf_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace anc
