#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace liftedq {

// Non-negative real kept in log space. Potentials get raised to powers up to
// the domain size (~10^3), which overflows plain doubles long before that.
class Weight {
 public:
  Weight() : lg_(-std::numeric_limits<double>::infinity()) {}

  static Weight from_value(double v) {
    Weight w;
    if (v > 0.0) w.lg_ = std::log(v);
    return w;
  }
  static Weight from_log(double lg) {
    Weight w;
    w.lg_ = lg;
    return w;
  }
  static Weight zero() { return Weight(); }
  static Weight one() { return from_log(0.0); }

  double log() const { return lg_; }
  double value() const { return std::exp(lg_); }
  bool is_zero() const { return std::isinf(lg_) && lg_ < 0; }

  Weight operator*(Weight o) const {
    if (is_zero() || o.is_zero()) return zero();
    return from_log(lg_ + o.lg_);
  }
  Weight& operator*=(Weight o) { return *this = *this * o; }

  Weight operator/(Weight o) const { return from_log(lg_ - o.lg_); }

  Weight operator+(Weight o) const {
    if (is_zero()) return o;
    if (o.is_zero()) return *this;
    double hi = std::max(lg_, o.lg_), lo = std::min(lg_, o.lg_);
    return from_log(hi + std::log1p(std::exp(lo - hi)));
  }
  Weight& operator+=(Weight o) { return *this = *this + o; }

  // x^e for real e; 0^0 = 1.
  Weight pow(double e) const {
    if (is_zero()) return e == 0.0 ? one() : zero();
    return from_log(lg_ * e);
  }

 private:
  double lg_;
};

// log(n!)
inline double log_factorial(int n) { return std::lgamma(double(n) + 1.0); }

// log C(n, k)
inline double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// log of the multinomial coefficient n! / prod_v h(v)!  with n = sum h.
inline double log_multinomial(const std::vector<int>& hist) {
  int n = 0;
  for (int c : hist) n += c;
  double lg = log_factorial(n);
  for (int c : hist) lg -= log_factorial(c);
  return lg;
}

// Exact multinomial for small n (fits a double exactly up to n ~ 170).
inline double multinomial(const std::vector<int>& hist) {
  return std::round(std::exp(log_multinomial(hist)));
}

// Number of histograms over r values summing to n: C(n + r - 1, r - 1).
inline std::int64_t histogram_count(int n, int r) {
  std::int64_t c = 1;
  for (int i = 1; i < r; ++i) c = c * (n + i) / i;
  return c;
}

// Enumerates histograms in canonical order: first coordinate descending
// from n to 0, recursively. (2,0), (1,1), (0,2) for n=2, r=2.
void enumerate_histograms(int n, int r, std::vector<std::vector<int>>& out);

}  // namespace liftedq
