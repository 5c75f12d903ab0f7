#include "tofu/bvh.hpp"

#include <algorithm>
#include <stdexcept>

namespace tofu {

ClosestHit closest_point_on_triangle(const Eigen::Vector3d& q, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  ClosestHit hit;
  const Eigen::Vector3d ab = b - a, ac = c - a, aq = q - a;
  const double d1 = ab.dot(aq), d2 = ac.dot(aq);
  if (d1 <= 0.0 && d2 <= 0.0) {
    hit.point = a;
    hit.bary = {1, 0, 0};
  } else {
    const Eigen::Vector3d bq = q - b;
    const double d3 = ab.dot(bq), d4 = ac.dot(bq);
    if (d3 >= 0.0 && d4 <= d3) {
      hit.point = b;
      hit.bary = {0, 1, 0};
    } else {
      const double vc = d1 * d4 - d3 * d2;
      if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        hit.point = a + v * ab;
        hit.bary = {1 - v, v, 0};
      } else {
        const Eigen::Vector3d cq = q - c;
        const double d5 = ab.dot(cq), d6 = ac.dot(cq);
        if (d6 >= 0.0 && d5 <= d6) {
          hit.point = c;
          hit.bary = {0, 0, 1};
        } else {
          const double vb = d5 * d2 - d1 * d6;
          if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
            const double w = d2 / (d2 - d6);
            hit.point = a + w * ac;
            hit.bary = {1 - w, 0, w};
          } else {
            const double va = d3 * d6 - d5 * d4;
            if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
              const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
              hit.point = b + w * (c - b);
              hit.bary = {0, 1 - w, w};
            } else {
              const double denom = 1.0 / (va + vb + vc);
              const double v = vb * denom, w = vc * denom;
              hit.point = a + ab * v + ac * w;
              hit.bary = {1 - v - w, v, w};
            }
          }
        }
      }
    }
  }
  hit.dist2 = (q - hit.point).squaredNorm();
  return hit;
}

ClosestHit closest_point_brute(const Mesh& mesh, const Eigen::Vector3d& q) {
  if (mesh.faces.empty()) throw std::invalid_argument("closest_point: empty mesh");
  ClosestHit best;
  best.dist2 = std::numeric_limits<double>::infinity();
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& fc = mesh.faces[f];
    ClosestHit h = closest_point_on_triangle(q, mesh.vertices[static_cast<size_t>(fc[0])],
                                             mesh.vertices[static_cast<size_t>(fc[1])],
                                             mesh.vertices[static_cast<size_t>(fc[2])]);
    h.triangle = static_cast<int>(f);
    if (h.dist2 < best.dist2) best = h;  // strict: ties keep the lowest index
  }
  return best;
}

TriangleBvh::TriangleBvh(const Mesh& mesh) : mesh_(&mesh) {
  if (mesh.faces.empty()) throw std::invalid_argument("TriangleBvh: empty mesh");
  const int nf = static_cast<int>(mesh.faces.size());
  order_.resize(static_cast<size_t>(nf));
  for (int i = 0; i < nf; ++i) order_[static_cast<size_t>(i)] = i;
  std::vector<Eigen::Vector3d> centroids(static_cast<size_t>(nf));
  for (int i = 0; i < nf; ++i) {
    const auto& fc = mesh.faces[static_cast<size_t>(i)];
    centroids[static_cast<size_t>(i)] =
        (mesh.vertices[static_cast<size_t>(fc[0])] + mesh.vertices[static_cast<size_t>(fc[1])] +
         mesh.vertices[static_cast<size_t>(fc[2])]) /
        3.0;
  }
  nodes_.reserve(static_cast<size_t>(2 * nf));
  build(0, nf, centroids);
}

int TriangleBvh::build(int begin, int end, std::vector<Eigen::Vector3d>& centroids) {
  const int idx = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  for (int i = begin; i < end; ++i) {
    const auto& fc = mesh_->faces[static_cast<size_t>(order_[static_cast<size_t>(i)])];
    for (int k = 0; k < 3; ++k) box.extend(mesh_->vertices[static_cast<size_t>(fc[k])]);
  }
  nodes_[static_cast<size_t>(idx)].lo = box.min();
  nodes_[static_cast<size_t>(idx)].hi = box.max();
  if (end - begin <= 4) {
    nodes_[static_cast<size_t>(idx)].begin = begin;
    nodes_[static_cast<size_t>(idx)].end = end;
    // deterministic tie handling: keep leaf triangles sorted by index
    std::sort(order_.begin() + begin, order_.begin() + end);
    return idx;
  }
  const Eigen::Vector3d ext = box.diagonal();
  int axis = 0;
  if (ext.y() > ext.x()) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroids[static_cast<size_t>(a)][axis];
                     const double cb = centroids[static_cast<size_t>(b)][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int l = build(begin, mid, centroids);
  const int r = build(mid, end, centroids);
  nodes_[static_cast<size_t>(idx)].left = l;
  nodes_[static_cast<size_t>(idx)].right = r;
  return idx;
}

double TriangleBvh::box_dist2(const BvhNode& n, const Eigen::Vector3d& q) const {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double v = q[k];
    if (v < n.lo[k]) {
      const double d = n.lo[k] - v;
      d2 += d * d;
    } else if (v > n.hi[k]) {
      const double d = v - n.hi[k];
      d2 += d * d;
    }
  }
  return d2;
}

void TriangleBvh::search(int node, const Eigen::Vector3d& q, ClosestHit& best) const {
  const BvhNode& n = nodes_[static_cast<size_t>(node)];
  if (n.leaf()) {
    for (int i = n.begin; i < n.end; ++i) {
      const int tri = order_[static_cast<size_t>(i)];
      const auto& fc = mesh_->faces[static_cast<size_t>(tri)];
      ClosestHit h = closest_point_on_triangle(q, mesh_->vertices[static_cast<size_t>(fc[0])],
                                               mesh_->vertices[static_cast<size_t>(fc[1])],
                                               mesh_->vertices[static_cast<size_t>(fc[2])]);
      h.triangle = tri;
      if (h.dist2 < best.dist2 || (h.dist2 == best.dist2 && h.triangle < best.triangle))
        best = h;
    }
    return;
  }
  const double dl = box_dist2(nodes_[static_cast<size_t>(n.left)], q);
  const double dr = box_dist2(nodes_[static_cast<size_t>(n.right)], q);
  const int first = dl <= dr ? n.left : n.right;
  const int second = dl <= dr ? n.right : n.left;
  const double dfirst = std::min(dl, dr), dsecond = std::max(dl, dr);
  // non-strict prune keeps equal-distance candidates visible for tie-breaking
  if (dfirst <= best.dist2) search(first, q, best);
  if (dsecond <= best.dist2) search(second, q, best);
}

ClosestHit TriangleBvh::closest_point(const Eigen::Vector3d& q) const {
  ClosestHit best;
  best.dist2 = std::numeric_limits<double>::infinity();
  best.triangle = std::numeric_limits<int>::max();
  search(0, q, best);
  return best;
}

}  // namespace tofu
