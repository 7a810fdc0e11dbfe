#pragma once

#include <limits>
#include <vector>

namespace mtmc {

/// Dense cost matrix; entries equal to kForbidden may not be assigned.
using CostMatrix = std::vector<std::vector<double>>;

inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Maximum-cardinality, minimum-total-cost assignment over allowed entries
/// (Hungarian method on a padded square matrix). Allowed costs must be
/// finite and non-negative. Returns the assigned column per row, or -1.
std::vector<int> solve_assignment(const CostMatrix& cost);

}  // namespace mtmc
