#include "tofu/camera.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace tofu {

void Camera::validate() const {
  const Eigen::Matrix3d rtr = R.transpose() * R;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("Camera '" + name + "': rotation is not orthonormal");
  if (std::abs(R.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("Camera '" + name + "': rotation determinant is not +1");
  if (fx() <= 0.0 || fy() <= 0.0)
    throw std::invalid_argument("Camera '" + name + "': focal lengths must be positive");
  if (cx() < 0.0 || cx() >= width || cy() < 0.0 || cy() >= height)
    throw std::invalid_argument("Camera '" + name + "': principal point outside image");
}

double camera_depth(const Eigen::Vector3d& point, const Camera& camera) {
  return camera.R.row(2).dot(point) + camera.t.z();
}

Eigen::Vector2d project(const Eigen::Vector3d& point, const Camera& camera) {
  const Eigen::Vector3d pc = camera.R * point + camera.t;
  if (pc.z() <= kMinDepthMm)
    throw std::domain_error("project: point behind camera '" + camera.name +
                            "' (depth = " + std::to_string(pc.z()) + " mm)");
  return {camera.fx() * pc.x() / pc.z() + camera.cx(),
          camera.fy() * pc.y() / pc.z() + camera.cy()};
}

NodePtr project_points(const NodePtr& points, const Camera& camera, int64_t* clamp_events) {
  const auto& s = points->value.shape();
  if (s.size() != 2 || s[1] != 3)
    throw std::invalid_argument("project_points: expects [M,3], got " + points->value.shape_str());
  const int64_t M = s[0];
  const Eigen::Matrix3d R = camera.R;
  const Eigen::Vector3d t = camera.t;
  const double fx = camera.fx(), fy = camera.fy(), cx = camera.cx(), cy = camera.cy();

  DenseArray out({M, 2});
  for (int64_t i = 0; i < M; ++i) {
    const double* p = points->value.data() + i * 3;
    const double x = R(0, 0) * p[0] + R(0, 1) * p[1] + R(0, 2) * p[2] + t.x();
    const double y = R(1, 0) * p[0] + R(1, 1) * p[1] + R(1, 2) * p[2] + t.y();
    double z = R(2, 0) * p[0] + R(2, 1) * p[1] + R(2, 2) * p[2] + t.z();
    if (z < kClampDepthMm) {
      z = kClampDepthMm;
      if (clamp_events) ++*clamp_events;
    }
    out[i * 2 + 0] = fx * x / z + cx;
    out[i * 2 + 1] = fy * y / z + cy;
  }

  auto back = [M, R, t, fx, fy](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const auto& pv = self.parents[0]->value;
    for (int64_t i = 0; i < M; ++i) {
      const double* p = pv.data() + i * 3;
      const double x = R(0, 0) * p[0] + R(0, 1) * p[1] + R(0, 2) * p[2] + t.x();
      const double y = R(1, 0) * p[0] + R(1, 1) * p[1] + R(1, 2) * p[2] + t.y();
      const double zr = R(2, 0) * p[0] + R(2, 1) * p[1] + R(2, 2) * p[2] + t.z();
      const bool clamped = zr < kClampDepthMm;
      const double z = clamped ? kClampDepthMm : zr;
      const double gu = self.grad[i * 2 + 0];
      const double gv = self.grad[i * 2 + 1];
      // du/dpc = fx * (1/z, 0, -x/z^2), dv/dpc = fy * (0, 1/z, -y/z^2)
      const double inv = 1.0 / z;
      Eigen::Vector3d gc(fx * gu * inv, fy * gv * inv,
                         clamped ? 0.0 : -(fx * gu * x + fy * gv * y) * inv * inv);
      const Eigen::Vector3d gw = R.transpose() * gc;
      g[i * 3 + 0] += gw.x();
      g[i * 3 + 1] += gw.y();
      g[i * 3 + 2] += gw.z();
    }
  };
  return make_op(std::move(out), "project_points", {points}, std::move(back));
}

std::vector<Camera> load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_rig: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (!j.is_array()) throw std::runtime_error("load_rig: expected a JSON list in " + path);
  std::vector<Camera> rig;
  for (const auto& e : j) {
    Camera c;
    c.name = e.at("name").get<std::string>();
    c.width = e.at("width").get<int>();
    c.height = e.at("height").get<int>();
    const auto K = e.at("K");
    const auto R = e.at("R");
    const auto t = e.at("t");
    if (K.size() != 9 || R.size() != 9 || t.size() != 3)
      throw std::runtime_error("load_rig: bad matrix sizes for camera '" + c.name + "'");
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) {
        c.K(r, col) = K[r * 3 + col].get<double>();
        c.R(r, col) = R[r * 3 + col].get<double>();
      }
    for (int r = 0; r < 3; ++r) c.t(r) = t[r].get<double>();
    c.validate();
    rig.push_back(std::move(c));
  }
  return rig;
}

void save_rig(const std::string& path, const std::vector<Camera>& cameras) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cameras) {
    nlohmann::json e;
    e["name"] = c.name;
    e["width"] = c.width;
    e["height"] = c.height;
    std::vector<double> K(9), R(9), t(3);
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) {
        K[r * 3 + col] = c.K(r, col);
        R[r * 3 + col] = c.R(r, col);
      }
    for (int r = 0; r < 3; ++r) t[r] = c.t(r);
    e["K"] = K;
    e["R"] = R;
    e["t"] = t;
    j.push_back(std::move(e));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_rig: cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace tofu
