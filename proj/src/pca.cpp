#include "chordroll/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace chordroll {

using neural::Mat;
using neural::Vec;

void jacobi_eigensymmetric(const Mat& symmetric, Vec& eigenvalues, Mat& eigenvectors) {
  if (symmetric.rows() != symmetric.cols()) throw std::invalid_argument("matrix must be square");
  const Eigen::Index n = symmetric.rows();
  Mat a = symmetric;
  Mat v = Mat::Identity(n, n);

  constexpr double kOffTolerance = 1e-12;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off < kOffTolerance) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < kOffTolerance) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // rotate rows/columns p and q
        for (Eigen::Index k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n), 0);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  eigenvalues.resize(n);
  eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    eigenvalues[k] = a(order[k], order[k]);
    eigenvectors.col(k) = v.col(order[k]);
  }
}

Projection2D pca_2d(const std::vector<Vec>& vectors, const std::vector<std::string>& labels) {
  if (vectors.size() != labels.size()) throw std::invalid_argument("labels/vectors size mismatch");
  if (vectors.size() < 3) throw std::invalid_argument("PCA needs at least 3 points");
  const Eigen::Index dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim) throw std::invalid_argument("inconsistent vector dimensions");

  Vec mean = Vec::Zero(dim);
  for (const auto& v : vectors) mean += v;
  mean /= double(vectors.size());

  Mat cov = Mat::Zero(dim, dim);
  for (const auto& v : vectors) {
    Vec d = v - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= double(vectors.size() - 1);

  double total_var = cov.trace();
  if (total_var <= 0.0) throw std::invalid_argument("zero-variance data has no principal components");

  Vec eigenvalues;
  Mat eigenvectors;
  jacobi_eigensymmetric(cov, eigenvalues, eigenvectors);

  Projection2D proj;
  proj.component1 = eigenvectors.col(0);
  proj.component2 = eigenvectors.col(1);
  // fix the reflection ambiguity: largest-magnitude entry positive
  for (Vec* comp : {&proj.component1, &proj.component2}) {
    Eigen::Index imax;
    comp->cwiseAbs().maxCoeff(&imax);
    if ((*comp)[imax] < 0.0) *comp = -*comp;
  }
  proj.explained1 = std::max(0.0, eigenvalues[0]) / total_var;
  proj.explained2 = std::max(0.0, eigenvalues[1]) / total_var;

  proj.points.reserve(vectors.size());
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    Vec d = vectors[k] - mean;
    proj.points.push_back({labels[k], proj.component1.dot(d), proj.component2.dot(d)});
  }
  return proj;
}

std::vector<NeighborEntry> nearest_neighbor_report(const std::vector<Vec>& vectors,
                                                   const std::vector<std::string>& labels) {
  if (vectors.size() != labels.size()) throw std::invalid_argument("labels/vectors size mismatch");
  if (vectors.size() < 2) throw std::invalid_argument("need at least 2 points for neighbors");

  std::vector<NeighborEntry> report;
  report.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    std::size_t best = i;
    double best_dist = 0.0;
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      if (j == i) continue;
      double d = (vectors[i] - vectors[j]).norm();
      if (best == i || d < best_dist) {
        best = j;
        best_dist = d;
      }
    }
    report.push_back({labels[i], labels[best], best_dist});
  }
  return report;
}

void save_projection_csv(const std::filesystem::path& path, const Projection2D& projection) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,x,y\n";
  out.precision(17);
  for (const auto& p : projection.points) out << p.label << ',' << p.x << ',' << p.y << '\n';
}

}  // namespace chordroll
