#include "tofu/decimate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <queue>
#include <set>
#include <stdexcept>
#include <vector>

#include "tofu/bvh.hpp"

namespace tofu {

namespace {

using Quadric = Eigen::Matrix4d;

Quadric face_quadric(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                     const Eigen::Vector3d& c) {
  Eigen::Vector3d n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len < 1e-20) return Quadric::Zero();
  n /= len;
  Eigen::Vector4d p(n.x(), n.y(), n.z(), -n.dot(a));
  // area weighting keeps large faces authoritative
  return 0.5 * len * (p * p.transpose());
}

struct Candidate {
  double cost;
  int a, b;              // a < b
  uint32_t va, vb;       // vertex versions at push time
  Eigen::Vector3d pos;
};

struct CandidateOrder {
  bool operator()(const Candidate& x, const Candidate& y) const {
    if (x.cost != y.cost) return x.cost > y.cost;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

struct Working {
  std::vector<Eigen::Vector3d> pos;
  std::vector<Quadric> q;
  std::vector<uint32_t> version;
  std::vector<uint8_t> alive;
  std::vector<std::array<int, 3>> faces;
  std::vector<uint8_t> face_alive;
  std::vector<std::vector<int>> vfaces;  // vertex -> incident face ids

  bool face_has(int f, int v) const {
    return faces[(size_t)f][0] == v || faces[(size_t)f][1] == v || faces[(size_t)f][2] == v;
  }
};

double quadric_cost(const Quadric& q, const Eigen::Vector3d& p) {
  Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
  return h.dot(q * h);
}

// Optimal collapse position, falling back to the best of the endpoints and
// the midpoint when the quadric is near-singular.
Eigen::Vector3d optimal_position(const Quadric& q, const Eigen::Vector3d& pa,
                                 const Eigen::Vector3d& pb, double* cost) {
  Eigen::Matrix3d A = q.topLeftCorner<3, 3>();
  Eigen::Vector3d rhs = -q.topRightCorner<3, 1>();
  const double scale = A.cwiseAbs().maxCoeff();
  Eigen::Vector3d best;
  bool solved = false;
  if (scale > 0.0) {
    Eigen::Matrix3d An = A / scale;
    if (std::abs(An.determinant()) > 1e-9) {
      best = A.ldlt().solve(rhs);
      // guard against runaway solutions on flat quadrics
      if ((best - 0.5 * (pa + pb)).norm() < 10.0 * (pa - pb).norm() + 1e-9) solved = true;
    }
  }
  if (!solved) {
    const Eigen::Vector3d mid = 0.5 * (pa + pb);
    best = pa;
    double c = quadric_cost(q, pa);
    const double cb = quadric_cost(q, pb);
    if (cb < c) {
      c = cb;
      best = pb;
    }
    if (quadric_cost(q, mid) < c) best = mid;
  }
  *cost = quadric_cost(q, best);
  return best;
}

void push_edges_around(const Working& w, int v,
                       std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder>& pq) {
  std::set<std::pair<int, int>> edges;
  for (int f : w.vfaces[(size_t)v]) {
    if (!w.face_alive[(size_t)f]) continue;
    const auto& fc = w.faces[(size_t)f];
    for (int k = 0; k < 3; ++k) {
      const int x = fc[k], y = fc[(k + 1) % 3];
      if (x == v || y == v) edges.insert({std::min(x, y), std::max(x, y)});
    }
  }
  for (const auto& [a, b] : edges) {
    Candidate c;
    c.a = a;
    c.b = b;
    c.va = w.version[(size_t)a];
    c.vb = w.version[(size_t)b];
    const Quadric q = w.q[(size_t)a] + w.q[(size_t)b];
    c.pos = optimal_position(q, w.pos[(size_t)a], w.pos[(size_t)b], &c.cost);
    pq.push(c);
  }
}

// Shared-neighbor (link) condition for a closed triangle mesh: the collapse
// is manifold-safe iff a and b share exactly the two face-opposite vertices.
bool link_ok(const Working& w, int a, int b) {
  std::set<int> na;
  for (int f : w.vfaces[(size_t)a]) {
    if (!w.face_alive[(size_t)f]) continue;
    for (int v : w.faces[(size_t)f])
      if (v != a) na.insert(v);
  }
  int shared = 0;
  std::set<int> seen;
  for (int f : w.vfaces[(size_t)b]) {
    if (!w.face_alive[(size_t)f]) continue;
    for (int v : w.faces[(size_t)f])
      if (v != b && na.count(v) && seen.insert(v).second) ++shared;
  }
  return shared == 2;
}

bool flips_normal(const Working& w, int a, int b, const Eigen::Vector3d& newpos) {
  for (int v : {a, b}) {
    for (int f : w.vfaces[(size_t)v]) {
      if (!w.face_alive[(size_t)f]) continue;
      auto fc = w.faces[(size_t)f];
      if (w.face_has(f, a) && w.face_has(f, b)) continue;  // face dies with the edge
      Eigen::Vector3d p[3], pn[3];
      for (int k = 0; k < 3; ++k) {
        p[k] = w.pos[(size_t)fc[k]];
        pn[k] = (fc[k] == a || fc[k] == b) ? newpos : p[k];
      }
      const Eigen::Vector3d n0 = (p[1] - p[0]).cross(p[2] - p[0]);
      const Eigen::Vector3d n1 = (pn[1] - pn[0]).cross(pn[2] - pn[0]);
      if (n0.dot(n1) <= 0.0) return true;
      if (n1.norm() < 1e-14 * std::max(1.0, n0.norm())) return true;
    }
  }
  return false;
}

}  // namespace

Mesh decimate(const Mesh& mesh, int target_vertex_count) {
  const int n = static_cast<int>(mesh.vertices.size());
  if (target_vertex_count < 4)
    throw std::invalid_argument("decimate: target must be >= 4, got " +
                                std::to_string(target_vertex_count));
  if (target_vertex_count >= n)
    throw std::invalid_argument("decimate: target " + std::to_string(target_vertex_count) +
                                " must be below the input vertex count " + std::to_string(n));
  mesh.validate(true);

  Working w;
  w.pos = mesh.vertices;
  w.q.assign((size_t)n, Quadric::Zero());
  w.version.assign((size_t)n, 0);
  w.alive.assign((size_t)n, 1);
  w.faces = mesh.faces;
  w.face_alive.assign(mesh.faces.size(), 1);
  w.vfaces.assign((size_t)n, {});
  for (size_t f = 0; f < w.faces.size(); ++f) {
    const auto& fc = w.faces[f];
    const Quadric k = face_quadric(w.pos[(size_t)fc[0]], w.pos[(size_t)fc[1]],
                                   w.pos[(size_t)fc[2]]);
    for (int v : fc) {
      w.q[(size_t)v] += k;
      w.vfaces[(size_t)v].push_back(static_cast<int>(f));
    }
  }

  std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> pq;
  for (int v = 0; v < n; ++v) push_edges_around(w, v, pq);  // duplicates skipped via versions

  int live = n;
  int64_t collapses = 0, collapses_at_drain = -1;
  std::set<std::pair<int, int>> deferred;
  while (live > target_vertex_count) {
    if (pq.empty()) {
      // retry geometry-rejected edges once the surface changed elsewhere
      if (collapses == collapses_at_drain || deferred.empty())
        throw std::runtime_error("decimate: no valid collapse left, achieved minimum " +
                                 std::to_string(live) + " (target " +
                                 std::to_string(target_vertex_count) + ")");
      collapses_at_drain = collapses;
      for (const auto& [a, b] : deferred) {
        if (!w.alive[(size_t)a] || !w.alive[(size_t)b]) continue;
        Candidate c;
        c.a = a;
        c.b = b;
        c.va = w.version[(size_t)a];
        c.vb = w.version[(size_t)b];
        const Quadric q = w.q[(size_t)a] + w.q[(size_t)b];
        c.pos = optimal_position(q, w.pos[(size_t)a], w.pos[(size_t)b], &c.cost);
        pq.push(c);
      }
      deferred.clear();
      continue;
    }
    Candidate c = pq.top();
    pq.pop();
    if (!w.alive[(size_t)c.a] || !w.alive[(size_t)c.b]) continue;
    if (c.va != w.version[(size_t)c.a] || c.vb != w.version[(size_t)c.b]) continue;
    if (!link_ok(w, c.a, c.b) || flips_normal(w, c.a, c.b, c.pos)) {
      deferred.insert({c.a, c.b});
      continue;
    }

    // collapse b into a
    w.pos[(size_t)c.a] = c.pos;
    w.q[(size_t)c.a] += w.q[(size_t)c.b];
    w.alive[(size_t)c.b] = 0;
    ++w.version[(size_t)c.a];
    ++w.version[(size_t)c.b];
    for (int f : w.vfaces[(size_t)c.b]) {
      if (!w.face_alive[(size_t)f]) continue;
      auto& fc = w.faces[(size_t)f];
      if (w.face_has(f, c.a)) {
        w.face_alive[(size_t)f] = 0;
        continue;
      }
      for (int k = 0; k < 3; ++k)
        if (fc[k] == c.b) fc[k] = c.a;
      w.vfaces[(size_t)c.a].push_back(f);
    }
    w.vfaces[(size_t)c.b].clear();
    --live;
    ++collapses;
    // stars of every neighbor of a changed shape; bump their versions and
    // refresh candidate edges around the merged vertex
    std::set<int> ring;
    for (int f : w.vfaces[(size_t)c.a]) {
      if (!w.face_alive[(size_t)f]) continue;
      for (int v : w.faces[(size_t)f])
        if (v != c.a) ring.insert(v);
    }
    for (int v : ring) ++w.version[(size_t)v];
    push_edges_around(w, c.a, pq);
    for (int v : ring) push_edges_around(w, v, pq);
  }

  // compact and project onto the input surface
  Mesh out;
  std::vector<int> remap((size_t)n, -1);
  TriangleBvh bvh(mesh);
  for (int v = 0; v < n; ++v) {
    if (!w.alive[(size_t)v]) continue;
    remap[(size_t)v] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(bvh.closest_point(w.pos[(size_t)v]).point);
  }
  for (size_t f = 0; f < w.faces.size(); ++f) {
    if (!w.face_alive[f]) continue;
    const auto& fc = w.faces[f];
    out.faces.push_back({remap[(size_t)fc[0]], remap[(size_t)fc[1]], remap[(size_t)fc[2]]});
  }
  out.validate(true);
  return out;
}

}  // namespace tofu
