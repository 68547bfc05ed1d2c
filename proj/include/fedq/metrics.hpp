#pragma once

#include <vector>

#include "fedq/errors.hpp"
#include "fedq/types.hpp"

namespace fedq {

/// Symmetric 2x2 matrix stored row-major as [[a, b], [b, d]] with an
/// explicit c slot so asymmetric inputs can be detected.
struct Mat2 {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  double trace() const noexcept { return a + d; }
  double det() const noexcept { return a * d - b * c; }
};

/// Mean and covariance of a 2-D point cloud.
struct GaussianFit {
  Point2 mean{0.0, 0.0};
  Mat2 cov;
};

/// Moment-match a Gaussian to points: sample mean and population
/// covariance (normalized by the point count). Throws TooFewSamples
/// for fewer than 2 points.
GaussianFit fit_gaussian(const std::vector<Point2>& points);

/// Principal square root of a symmetric positive semi-definite 2x2
/// matrix, in closed form from its trace and determinant. Negative
/// eigenvalues within 1e-12 of zero are clamped; anything worse
/// throws InvalidCovariance.
Mat2 sqrt_spd_2x2(const Mat2& s);

/// Squared Fréchet distance between two Gaussians:
///   d^2 = |mean_a - mean_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^{1/2}).
/// Always non-negative; 0 for identical fits.
double frechet_2d(const GaussianFit& a, const GaussianFit& b);

}  // namespace fedq
