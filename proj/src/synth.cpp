#include "tofu/synth.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "tofu/rng.hpp"

namespace tofu {

Mesh make_icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back(
          ((m.vertices[(size_t)a] + m.vertices[(size_t)b]) * 0.5).normalized());
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

TemplateResult make_template(uint64_t seed, int subdivisions) {
  if (subdivisions < 1 || subdivisions > 4)
    throw std::invalid_argument("make_template: subdivisions must be in [1,4]");
  constexpr double kRadiusMm = 100.0;
  Mesh m = make_icosphere(subdivisions, kRadiusMm);

  // smooth seeded radial field turns the sphere into an asymmetric blob
  Rng rng(seed * 2654435761u + 17);
  struct Bump {
    Eigen::Vector3d dir;
    double amp, freq, phase;
  };
  std::vector<Bump> bumps;
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    while (d.norm() < 1e-6) d = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    bumps.push_back({d.normalized(), rng.uniform(0.04, 0.09), rng.uniform(1.5, 3.0),
                     rng.uniform(0.0, 6.283185307179586)});
  }
  for (auto& v : m.vertices) {
    const Eigen::Vector3d u = v.normalized();
    double r = 1.0;
    for (const auto& b : bumps) r += b.amp * std::sin(b.freq * u.dot(b.dir) + b.phase);
    v = u * (kRadiusMm * r);
  }

  // 16 fixed directions; landmark = extremal vertex along each, deduplicated
  std::vector<Eigen::Vector3d> dirs;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) dirs.emplace_back(sx, sy, sz);
  dirs.emplace_back(1, 0, 0);
  dirs.emplace_back(-1, 0, 0);
  dirs.emplace_back(0, 1, 0);
  dirs.emplace_back(0, -1, 0);
  dirs.emplace_back(0, 0, 1);
  dirs.emplace_back(0, 0, -1);
  dirs.emplace_back(1, 1, 0);
  dirs.emplace_back(-1, -1, 0);

  TemplateResult out;
  out.mesh = std::move(m);
  std::vector<uint8_t> taken(out.mesh.vertices.size(), 0);
  for (auto& d : dirs) {
    d.normalize();
    int best = -1;
    double bestdot = -1e300;
    for (size_t v = 0; v < out.mesh.vertices.size(); ++v) {
      if (taken[v]) continue;
      const double s = out.mesh.vertices[v].dot(d);
      if (s > bestdot) {
        bestdot = s;
        best = static_cast<int>(v);
      }
    }
    taken[(size_t)best] = 1;
    out.landmarks.push_back(best);
  }
  return out;
}

Eigen::Vector3d DeformationField::displacement(const Eigen::Vector3d& p) const {
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
  for (size_t b = 0; b < basis.size(); ++b) {
    const auto& B = basis[b];
    d += coefficients[b] * B.magnitude_mm * std::sin(B.wave.dot(p) + B.phase) * B.direction;
  }
  return d;
}

Eigen::Vector3d DeformationField::apply(const Eigen::Vector3d& p) const {
  return rigid_rotation * (p + displacement(p)) + rigid_translation;
}

DeformationField sample_deformation(uint64_t seed, const Mesh& reference,
                                    const DeformationParams& params) {
  const double diag = reference.bbox_diagonal();
  Rng rng(seed * 0x9E3779B97F4A7C15ull + 3);

  DeformationField f;
  for (int b = 0; b < params.basis_count; ++b) {
    DeformationField::Basis B;
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    while (d.norm() < 1e-6) d = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    B.direction = d.normalized();
    Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    while (w.norm() < 1e-6) w = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    // wavelengths between roughly 0.7 and 2 bbox diagonals: low frequency
    B.wave = w.normalized() * rng.uniform(3.0, 9.0) / diag;
    B.phase = rng.uniform(0.0, 6.283185307179586);
    B.magnitude_mm = params.magnitude_scale * diag;
    f.basis.push_back(B);
    f.coefficients.push_back(rng.normal());
  }

  // rigid motion: bounded random axis-angle plus translation in a ball
  {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-6) axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    const double ang = rng.uniform(0.0, params.rigid_rotation_deg * M_PI / 180.0);
    f.rigid_rotation = Eigen::AngleAxisd(ang, axis.normalized()).toRotationMatrix();
    Eigen::Vector3d t(rng.normal(), rng.normal(), rng.normal());
    f.rigid_translation = t * (params.rigid_translation_mm / 3.0);
  }

  // cap the applied displacement over the reference surface
  double worst = 0.0;
  for (const auto& v : reference.vertices) worst = std::max(worst, f.displacement(v).norm());
  const double cap = params.max_displacement * diag;
  if (worst > cap) {
    const double s = cap / worst;
    for (auto& c : f.coefficients) c *= s;
  }
  return f;
}

Mesh apply_deformation(const DeformationField& field, const Mesh& mesh) {
  Mesh out;
  out.faces = mesh.faces;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(field.apply(v));
  return out;
}

}  // namespace tofu
