#pragma once

#include <array>
#include <vector>

namespace fedq {

/// Flat sequence of model parameters; the unit of quantization,
/// transmission, and aggregation.
using WeightVector = std::vector<double>;

/// A point of the 2-D toy data domain.
using Point2 = std::array<double, 2>;

}  // namespace fedq
