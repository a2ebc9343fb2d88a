#include "psr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psr {

namespace {
constexpr int kLeafSize = 16;
}

NearestNeighborIndex::NearestNeighborIndex(std::span<const Vec3> points)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) {
    throw Error("NearestNeighborIndex: empty point set");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<int>(points_.size()));
}

int NearestNeighborIndex::build(int begin, int end) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  Vec3 lo = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
  Vec3 hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    const Vec3& p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  int axis = 0;
  if (extent.y() > extent[axis]) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int ia, int ib) {
                     const double ca = points_[static_cast<std::size_t>(ia)][axis];
                     const double cb = points_[static_cast<std::size_t>(ib)][axis];
                     return ca < cb || (ca == cb && ia < ib);
                   });

  node.axis = axis;
  node.split = points_[static_cast<std::size_t>(
      order_[static_cast<std::size_t>(mid)])][axis];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(self)].left = left;
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

void NearestNeighborIndex::search(int node_id, const Vec3& query,
                                  Result& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[static_cast<std::size_t>(i)];
      const double d = (points_[static_cast<std::size_t>(idx)] - query).squaredNorm();
      if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) {
        best.dist_sq = d;
        best.index = idx;
      }
    }
    return;
  }

  const double delta = query[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, query, best);
  // On equality we still descend: an equally distant, lower-index point
  // could sit on the other side.
  if (delta * delta <= best.dist_sq) {
    search(far, query, best);
  }
}

NearestNeighborIndex::Result NearestNeighborIndex::nearest(
    const Vec3& query) const {
  Result best;
  best.index = static_cast<int>(points_.size());
  best.dist_sq = std::numeric_limits<double>::infinity();
  search(root_, query, best);
  return best;
}

ChamferL2 chamfer_l2(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) {
    throw Error("chamfer_l2: point sets must be non-empty");
  }
  const NearestNeighborIndex index_b(b);
  const NearestNeighborIndex index_a(a);

  ChamferL2 out;
  out.grad_a.assign(a.size(), Vec3::Zero());
  const double inv_a = 1.0 / static_cast<double>(a.size());
  const double inv_b = 1.0 / static_cast<double>(b.size());

  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto nn = index_b.nearest(a[i]);
    out.value += nn.dist_sq * inv_a;
    out.grad_a[i] += 2.0 * inv_a * (a[i] - b[static_cast<std::size_t>(nn.index)]);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    const auto nn = index_a.nearest(b[j]);
    out.value += nn.dist_sq * inv_b;
    out.grad_a[static_cast<std::size_t>(nn.index)] +=
        2.0 * inv_b * (a[static_cast<std::size_t>(nn.index)] - b[j]);
  }
  return out;
}

double chamfer_l1_metric(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) {
    throw Error("chamfer_l1_metric: point sets must be non-empty");
  }
  const NearestNeighborIndex index_b(b);
  const NearestNeighborIndex index_a(a);
  double mean_a = 0.0, mean_b = 0.0;
  for (const Vec3& p : a) mean_a += std::sqrt(index_b.nearest(p).dist_sq);
  for (const Vec3& p : b) mean_b += std::sqrt(index_a.nearest(p).dist_sq);
  mean_a /= static_cast<double>(a.size());
  mean_b /= static_cast<double>(b.size());
  return 0.5 * (mean_a + mean_b);
}

double fscore(std::span<const Vec3> pred, std::span<const Vec3> gt,
              double tau) {
  if (pred.empty() || gt.empty()) {
    throw Error("fscore: point sets must be non-empty");
  }
  const NearestNeighborIndex index_gt(gt);
  const NearestNeighborIndex index_pred(pred);
  const double tau_sq = tau * tau;

  std::size_t hit_pred = 0;
  for (const Vec3& p : pred) {
    if (index_gt.nearest(p).dist_sq <= tau_sq) ++hit_pred;
  }
  std::size_t hit_gt = 0;
  for (const Vec3& p : gt) {
    if (index_pred.nearest(p).dist_sq <= tau_sq) ++hit_gt;
  }
  const double precision = static_cast<double>(hit_pred) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(hit_gt) / static_cast<double>(gt.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double normal_consistency(std::span<const Vec3> points_a,
                          std::span<const Vec3> normals_a,
                          std::span<const Vec3> points_b,
                          std::span<const Vec3> normals_b) {
  if (points_a.empty() || points_b.empty()) {
    throw Error("normal_consistency: point sets must be non-empty");
  }
  if (normals_a.size() != points_a.size() ||
      normals_b.size() != points_b.size()) {
    throw Error("normal_consistency: normals must match points");
  }
  const auto check_unit = [](std::span<const Vec3> normals) {
    for (const Vec3& n : normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) {
        throw Error("normal_consistency: normals must be unit length");
      }
    }
  };
  check_unit(normals_a);
  check_unit(normals_b);

  const NearestNeighborIndex index_b(points_b);
  const NearestNeighborIndex index_a(points_a);
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < points_a.size(); ++i) {
    const auto nn = index_b.nearest(points_a[i]);
    mean_a += std::abs(normals_a[i].dot(normals_b[static_cast<std::size_t>(nn.index)]));
  }
  for (std::size_t j = 0; j < points_b.size(); ++j) {
    const auto nn = index_a.nearest(points_b[j]);
    mean_b += std::abs(normals_b[j].dot(normals_a[static_cast<std::size_t>(nn.index)]));
  }
  mean_a /= static_cast<double>(points_a.size());
  mean_b /= static_cast<double>(points_b.size());
  return 0.5 * (mean_a + mean_b);
}

GridMse grid_mse(const ScalarGrid& pred, const ScalarGrid& gt) {
  if (pred.spec != gt.spec) {
    throw Error("grid_mse: grid specs differ");
  }
  GridMse out;
  out.grad = ScalarGrid(pred.spec);
  const double inv_n = 1.0 / static_cast<double>(pred.spec.voxel_count());
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - gt.values[i];
    out.value += d * d * inv_n;
    out.grad.values[i] = 2.0 * d * inv_n;
  }
  return out;
}

}  // namespace psr
