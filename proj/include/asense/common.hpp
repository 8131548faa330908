#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace asense {

using cplx = std::complex<double>;
using Rng = std::mt19937_64;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Library-level failure (bad arguments, degenerate inputs, non-convergence).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 2) return {lo};
  std::vector<double> v(static_cast<size_t>(count));
  const double step = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) v[static_cast<size_t>(i)] = lo + step * i;
  return v;
}

// Fold phase jumps larger than pi back into a continuous series.
inline std::vector<double> unwrap_phase(const std::vector<double>& phase) {
  std::vector<double> out(phase.size());
  if (phase.empty()) return out;
  out[0] = phase[0];
  for (size_t i = 1; i < phase.size(); ++i) {
    double d = phase[i] - phase[i - 1];
    while (d > kPi) d -= kTwoPi;
    while (d < -kPi) d += kTwoPi;
    out[i] = out[i - 1] + d;
  }
  return out;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double mean, double sigma) {
  if (sigma == 0.0) return mean;
  return std::normal_distribution<double>(mean, sigma)(rng);
}

}  // namespace asense
