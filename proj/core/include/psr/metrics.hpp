#pragma once

#include <span>
#include <vector>

#include "psr/grid.hpp"

namespace psr {

/// Immutable exact nearest-neighbor index (kd-tree) over a fixed point set.
/// Queries return the true nearest neighbor; ties break to the lowest
/// original index. Safe for concurrent queries after construction.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::span<const Vec3> points);

  struct Result {
    int index = -1;
    double dist_sq = 0.0;
  };
  Result nearest(const Vec3& query) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int axis = -1;       // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end);
  void search(int node, const Vec3& query, Result& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct ChamferL2 {
  double value = 0.0;
  std::vector<Vec3> grad_a;  // d(value)/dA, both directions accounted for
};

/// Bi-directional squared-L2 Chamfer distance
///   (1/|A|) sum_a min_b |a-b|^2 + (1/|B|) sum_b min_a |b-a|^2
/// with its gradient with respect to A. Nearest-neighbor ties break to the
/// lowest index; the value is non-smooth exactly at tie configurations.
ChamferL2 chamfer_l2(std::span<const Vec3> a, std::span<const Vec3> b);

/// Evaluation variant: mean of the two mean unsquared distances,
///   0.5 * [ (1/|A|) sum_a min_b |a-b| + (1/|B|) sum_b min_a |b-a| ].
double chamfer_l1_metric(std::span<const Vec3> a, std::span<const Vec3> b);

/// F-Score at distance threshold tau: harmonic mean of precision (fraction
/// of pred within tau of gt) and recall (fraction of gt within tau of
/// pred); defined as 0 when both are 0.
double fscore(std::span<const Vec3> pred, std::span<const Vec3> gt,
              double tau = 0.01);

/// Symmetric mean absolute cosine between nearest-neighbor normal pairs.
/// Normals must be unit length within 1e-6.
double normal_consistency(std::span<const Vec3> points_a,
                          std::span<const Vec3> normals_a,
                          std::span<const Vec3> points_b,
                          std::span<const Vec3> normals_b);

struct GridMse {
  double value = 0.0;
  ScalarGrid grad;  // d(value)/d(pred) = 2 (pred - gt) / n
};

/// Mean squared error between two indicator grids (mean convention, so the
/// magnitude is resolution-independent).
GridMse grid_mse(const ScalarGrid& pred, const ScalarGrid& gt);

}  // namespace psr
