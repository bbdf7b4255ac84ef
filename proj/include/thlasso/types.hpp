#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace thlasso {

using Index = Eigen::Index;

// Dense length-d parameter: the true theta and every estimate of it.
using ParameterVector = Eigen::VectorXd;

// One row per observation, one column per feature.
using DesignMatrix = Eigen::MatrixXd;

using ResponseVector = Eigen::VectorXd;

// K x d; row k is the context of arm k.
using ContextSet = Eigen::MatrixXd;

// Sorted, duplicate-free, zero-based coordinate indices.
using IndexSet = std::vector<Index>;

inline IndexSet normalized(IndexSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline IndexSet support_of(const ParameterVector& v) {
  IndexSet s;
  for (Index j = 0; j < v.size(); ++j)
    if (v[j] != 0.0) s.push_back(j);
  return s;
}

// |a \ b| for sorted sets.
inline std::size_t difference_size(const IndexSet& a, const IndexSet& b) {
  std::size_t n = 0;
  auto it = b.begin();
  for (Index x : a) {
    while (it != b.end() && *it < x) ++it;
    if (it == b.end() || *it != x) ++n;
  }
  return n;
}

inline bool is_subset(const IndexSet& a, const IndexSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace thlasso
