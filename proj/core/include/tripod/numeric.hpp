#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>

namespace tripod {

inline constexpr double kPi = std::numbers::pi;

// Compensated accumulator; keeps long quadrature sums accurate to ~1 ulp.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Shift `raw` by a multiple of 2*pi onto the branch closest to `hint`.
inline double unwrap_near(double raw, double hint) {
  return raw + 2.0 * kPi * std::round((hint - raw) / (2.0 * kPi));
}

// min over phi of || a - e^{i phi} b ||
inline double distance_up_to_phase(const Eigen::Vector4cd& a,
                                   const Eigen::Vector4cd& b) {
  const double g =
      a.squaredNorm() + b.squaredNorm() - 2.0 * std::abs(a.dot(b));
  return std::sqrt(std::max(g, 0.0));
}

}  // namespace tripod
