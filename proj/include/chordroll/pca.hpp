#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chordroll/neural.hpp"

namespace chordroll {

struct ProjectedPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

struct Projection2D {
  std::vector<ProjectedPoint> points;
  neural::Vec component1, component2;       // orthonormal directions
  double explained1 = 0.0, explained2 = 0.0;  // variance fractions, non-increasing
};

/// Project labeled vectors onto their top-2 principal components.
/// Mean-centers, eigendecomposes the covariance with cyclic Jacobi sweeps,
/// and fixes each component's sign so its largest-magnitude entry is
/// positive. Needs at least 3 points with nonzero variance.
Projection2D pca_2d(const std::vector<neural::Vec>& vectors,
                    const std::vector<std::string>& labels);

struct NeighborEntry {
  std::string label;
  std::string neighbor;
  double distance = 0.0;
};

/// Nearest distinct point per label under full-dimensional Euclidean
/// distance; ties break by label order.
std::vector<NeighborEntry> nearest_neighbor_report(const std::vector<neural::Vec>& vectors,
                                                   const std::vector<std::string>& labels);

/// CSV with header "label,x,y", one row per point.
void save_projection_csv(const std::filesystem::path& path, const Projection2D& projection);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and matching orthonormal eigenvectors
/// as columns. Exposed for tests.
void jacobi_eigensymmetric(const neural::Mat& symmetric, neural::Vec& eigenvalues,
                           neural::Mat& eigenvectors);

}  // namespace chordroll
