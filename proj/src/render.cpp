#include "tofu/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tofu/rng.hpp"

namespace tofu {

TextureFn make_procedural_texture(uint64_t seed, double feature_scale_mm) {
  struct Wave {
    Eigen::Vector3d k;
    double phase;
    double amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  Rng rng(seed * 0xD1B54A32D192ED03ull + 11);
  for (int c = 0; c < 3; ++c) {
    double amp = 0.26;
    for (int o = 0; o < 3; ++o) {
      Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
      while (d.norm() < 1e-6) d = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      const double wavelength = feature_scale_mm / (1.0 + 0.9 * o);
      waves[(size_t)c].push_back(
          {d.normalized() * (6.283185307179586 / wavelength),
           rng.uniform(0.0, 6.283185307179586), amp});
      amp *= 0.55;
    }
  }
  return [waves](const Eigen::Vector3d& p) {
    Eigen::Vector3d rgb;
    for (int c = 0; c < 3; ++c) {
      double v = 0.5;
      for (const auto& w : waves[(size_t)c]) v += w.amp * std::sin(w.k.dot(p) + w.phase);
      rgb[c] = std::clamp(v, 0.0, 1.0);
    }
    return rgb;
  };
}

DenseArray render_view(const Mesh& mesh, const std::vector<Eigen::Vector3d>& attributes,
                       const Camera& camera, const TextureFn& texture,
                       const Eigen::Vector3d& light_dir) {
  if (attributes.size() != mesh.vertices.size())
    throw std::invalid_argument("render_view: attribute count does not match vertices");
  const int W = camera.width, H = camera.height;
  DenseArray img({3, H, W});
  std::vector<double> zbuf(static_cast<size_t>(W) * H,
                           std::numeric_limits<double>::infinity());

  const size_t nv = mesh.vertices.size();
  std::vector<Eigen::Vector2d> uv(nv);
  std::vector<double> depth(nv);
  for (size_t i = 0; i < nv; ++i) {
    depth[i] = camera_depth(mesh.vertices[i], camera);
    if (depth[i] <= kMinDepthMm)
      throw std::domain_error("render_view: mesh behind camera '" + camera.name + "'");
    uv[i] = project(mesh.vertices[i], camera);
  }
  const auto normals = vertex_normals(mesh);
  const Eigen::Vector3d l = -light_dir.normalized();  // direction toward the light

  for (const auto& f : mesh.faces) {
    const Eigen::Vector2d& p0 = uv[(size_t)f[0]];
    const Eigen::Vector2d& p1 = uv[(size_t)f[1]];
    const Eigen::Vector2d& p2 = uv[(size_t)f[2]];
    double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
    if (std::abs(area) < 1e-14) continue;

    const int x0 = std::max(0, (int)std::ceil(std::min({p0.x(), p1.x(), p2.x()})));
    const int x1 = std::min(W - 1, (int)std::floor(std::max({p0.x(), p1.x(), p2.x()})));
    const int y0 = std::max(0, (int)std::ceil(std::min({p0.y(), p1.y(), p2.y()})));
    const int y1 = std::min(H - 1, (int)std::floor(std::max({p0.y(), p1.y(), p2.y()})));
    if (x0 > x1 || y0 > y1) continue;

    const double inv_area = 1.0 / area;
    const double iz0 = 1.0 / depth[(size_t)f[0]];
    const double iz1 = 1.0 / depth[(size_t)f[1]];
    const double iz2 = 1.0 / depth[(size_t)f[2]];
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x, py = y;
        double w0 = ((p1.x() - px) * (p2.y() - py) - (p1.y() - py) * (p2.x() - px)) * inv_area;
        double w1 = ((p2.x() - px) * (p0.y() - py) - (p2.y() - py) * (p0.x() - px)) * inv_area;
        double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double izp = w0 * iz0 + w1 * iz1 + w2 * iz2;
        const double z = 1.0 / izp;
        double& zref = zbuf[(size_t)y * W + (size_t)x];
        if (z >= zref) continue;
        zref = z;
        // perspective-correct attribute interpolation
        const double b0 = w0 * iz0 * z, b1 = w1 * iz1 * z, b2 = w2 * iz2 * z;
        const Eigen::Vector3d attr = b0 * attributes[(size_t)f[0]] +
                                     b1 * attributes[(size_t)f[1]] +
                                     b2 * attributes[(size_t)f[2]];
        Eigen::Vector3d n = b0 * normals[(size_t)f[0]] + b1 * normals[(size_t)f[1]] +
                            b2 * normals[(size_t)f[2]];
        const double nn = n.norm();
        if (nn > 1e-20) n /= nn;
        const double shade = 0.92 + 0.08 * std::max(0.0, n.dot(l));
        const Eigen::Vector3d rgb = texture(attr) * shade;
        for (int c = 0; c < 3; ++c)
          img[(int64_t)c * H * W + (int64_t)y * W + x] = std::clamp(rgb[c], 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<DenseArray> render_views(const Mesh& mesh,
                                     const std::vector<Eigen::Vector3d>& attributes,
                                     const std::vector<Camera>& cameras,
                                     const TextureFn& texture) {
  // collect every offending view before failing
  std::string behind;
  for (const auto& cam : cameras)
    for (const auto& v : mesh.vertices)
      if (camera_depth(v, cam) <= kMinDepthMm) {
        behind += behind.empty() ? cam.name : ", " + cam.name;
        break;
      }
  if (!behind.empty())
    throw std::domain_error("render_views: mesh behind cameras: " + behind);

  std::vector<DenseArray> out;
  out.reserve(cameras.size());
  for (const auto& cam : cameras) out.push_back(render_view(mesh, attributes, cam, texture));
  return out;
}

}  // namespace tofu
