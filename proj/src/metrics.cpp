#include "fedq/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fedq {
namespace {

constexpr double kSpdTol = 1e-12;

double entry_scale(const Mat2& s) {
  return std::max({1.0, std::fabs(s.a), std::fabs(s.b), std::fabs(s.c), std::fabs(s.d)});
}

// Symmetrize and clamp eigenvalues up to zero; reject matrices that
// are asymmetric or indefinite beyond tolerance.
Mat2 sanitize_spd(const Mat2& s) {
  const double scale = entry_scale(s);
  if (!std::isfinite(s.a) || !std::isfinite(s.b) || !std::isfinite(s.c) ||
      !std::isfinite(s.d)) {
    throw InvalidCovariance("covariance has a non-finite entry");
  }
  if (std::fabs(s.b - s.c) > 1e-9 * scale) {
    throw InvalidCovariance("covariance is not symmetric");
  }
  Mat2 m{s.a, 0.5 * (s.b + s.c), 0.5 * (s.b + s.c), s.d};
  const double half_gap = std::hypot(0.5 * (m.a - m.d), m.b);
  const double lambda_min = 0.5 * m.trace() - half_gap;
  if (lambda_min < -kSpdTol * scale) {
    throw InvalidCovariance("covariance has eigenvalue " + std::to_string(lambda_min));
  }
  if (lambda_min < 0.0) {
    m.a -= lambda_min;
    m.d -= lambda_min;
  }
  return m;
}

// Principal root of a sanitized matrix: with t = tr(S) and
// s = sqrt(det(S)), the root is (S + s I) / sqrt(t + 2 s).
Mat2 root_of_sanitized(const Mat2& m) {
  const double s = std::sqrt(std::max(m.det(), 0.0));
  const double denom = std::sqrt(std::max(m.trace() + 2.0 * s, 0.0));
  if (denom == 0.0) return Mat2{};
  return Mat2{(m.a + s) / denom, m.b / denom, m.c / denom, (m.d + s) / denom};
}

Mat2 mul(const Mat2& x, const Mat2& y) {
  return Mat2{x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
              x.c * y.b + x.d * y.d};
}

}  // namespace

GaussianFit fit_gaussian(const std::vector<Point2>& points) {
  if (points.size() < 2) {
    throw TooFewSamples("need at least 2 points, got " + std::to_string(points.size()));
  }
  const double n = static_cast<double>(points.size());
  GaussianFit fit;
  for (const Point2& p : points) {
    fit.mean[0] += p[0];
    fit.mean[1] += p[1];
  }
  fit.mean[0] /= n;
  fit.mean[1] /= n;
  for (const Point2& p : points) {
    const double dx = p[0] - fit.mean[0];
    const double dy = p[1] - fit.mean[1];
    fit.cov.a += dx * dx;
    fit.cov.b += dx * dy;
    fit.cov.d += dy * dy;
  }
  fit.cov.a /= n;
  fit.cov.b /= n;
  fit.cov.c = fit.cov.b;
  fit.cov.d /= n;
  return fit;
}

Mat2 sqrt_spd_2x2(const Mat2& s) { return root_of_sanitized(sanitize_spd(s)); }

double frechet_2d(const GaussianFit& a, const GaussianFit& b) {
  const Mat2 ca = sanitize_spd(a.cov);
  const Mat2 cb = sanitize_spd(b.cov);
  const Mat2 ra = root_of_sanitized(ca);
  Mat2 inner = mul(mul(ra, cb), ra);
  inner.b = inner.c = 0.5 * (inner.b + inner.c);
  const double cross = root_of_sanitized(sanitize_spd(inner)).trace();
  const double dx = a.mean[0] - b.mean[0];
  const double dy = a.mean[1] - b.mean[1];
  const double d2 = dx * dx + dy * dy + ca.trace() + cb.trace() - 2.0 * cross;
  return std::max(d2, 0.0);
}

}  // namespace fedq
