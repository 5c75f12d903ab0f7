#include "tofu/hierarchy.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "tofu/bvh.hpp"
#include "tofu/decimate.hpp"

namespace tofu {

void HierarchyLevel::validate() const {
  if (static_cast<int64_t>(cols.size()) != fine_count || q.size() != cols.size() ||
      d.size() != cols.size())
    throw std::invalid_argument("HierarchyLevel: inconsistent row counts");
  for (size_t j = 0; j < q.size(); ++j) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (q[j][k] < 0.0) throw std::invalid_argument("HierarchyLevel: negative Q weight");
      if (cols[j][k] < 0 || cols[j][k] >= coarse_count)
        throw std::invalid_argument("HierarchyLevel: column out of range");
      if (q[j][k] == 0.0 && d[j][k] != 0.0)
        throw std::invalid_argument("HierarchyLevel: D outside Q's sparsity pattern");
      s += q[j][k];
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("HierarchyLevel: Q row " + std::to_string(j) +
                                  " does not sum to 1");
  }
}

void MeshHierarchy::validate() const {
  if (levels.size() != ups.size() + 1)
    throw std::invalid_argument("MeshHierarchy: level/record count mismatch");
  for (size_t k = 0; k + 1 < levels.size(); ++k) {
    if (levels[k].vertex_count() >= levels[k + 1].vertex_count())
      throw std::invalid_argument("MeshHierarchy: vertex counts must strictly increase");
    if (ups[k].coarse_count != levels[k].vertex_count() ||
        ups[k].fine_count != levels[k + 1].vertex_count())
      throw std::invalid_argument("MeshHierarchy: record " + std::to_string(k) +
                                  " does not match its levels");
    ups[k].validate();
  }
}

std::vector<int64_t> MeshHierarchy::vertex_counts() const {
  std::vector<int64_t> c;
  for (const auto& m : levels) c.push_back(m.vertex_count());
  return c;
}

HierarchyLevel embed(const Mesh& fine, const Mesh& coarse) {
  if (coarse.faces.empty()) throw std::invalid_argument("embed: empty coarse mesh");
  coarse.validate(true);
  HierarchyLevel lvl;
  lvl.coarse = coarse;
  lvl.coarse_count = coarse.vertex_count();
  lvl.fine_count = fine.vertex_count();

  TriangleBvh bvh(coarse);
  const auto normals = vertex_normals(coarse);
  lvl.cols.resize(fine.vertices.size());
  lvl.q.resize(fine.vertices.size());
  lvl.d.resize(fine.vertices.size());

  for (size_t j = 0; j < fine.vertices.size(); ++j) {
    const Eigen::Vector3d& p = fine.vertices[j];
    const ClosestHit hit = bvh.closest_point(p);
    const auto& fc = coarse.faces[static_cast<size_t>(hit.triangle)];
    Eigen::Vector3d bary = hit.bary;
    for (int k = 0; k < 3; ++k) bary[k] = std::clamp(bary[k], 0.0, 1.0);
    bary /= bary.sum();

    const Eigen::Vector3d foot = bary[0] * coarse.vertices[(size_t)fc[0]] +
                                 bary[1] * coarse.vertices[(size_t)fc[1]] +
                                 bary[2] * coarse.vertices[(size_t)fc[2]];
    const Eigen::Vector3d residual = p - foot;
    const Eigen::Vector3d m = bary[0] * normals[(size_t)fc[0]] +
                              bary[1] * normals[(size_t)fc[1]] +
                              bary[2] * normals[(size_t)fc[2]];
    const double mlen = m.norm();
    double scale = 0.0;
    if (mlen > 1e-20) {
      const double s = residual.dot(m / mlen);  // signed normal offset
      scale = s / mlen;                          // so that (D N)_j = s * m_hat
    }
    for (int k = 0; k < 3; ++k) {
      lvl.cols[j][k] = fc[k];
      lvl.q[j][k] = bary[k];
      lvl.d[j][k] = scale * bary[k];
    }
  }
  lvl.validate();
  return lvl;
}

std::vector<Eigen::Vector3d> upsample(const std::vector<Eigen::Vector3d>& coarse_vertices,
                                      const HierarchyLevel& level) {
  if (static_cast<int64_t>(coarse_vertices.size()) != level.coarse_count)
    throw std::invalid_argument("upsample: expected " + std::to_string(level.coarse_count) +
                                " coarse vertices, got " +
                                std::to_string(coarse_vertices.size()));
  Mesh shaped;
  shaped.vertices = coarse_vertices;
  shaped.faces = level.coarse.faces;
  const auto normals = vertex_normals(shaped);
  std::vector<Eigen::Vector3d> out(static_cast<size_t>(level.fine_count));
  for (size_t j = 0; j < out.size(); ++j) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
      const auto c = static_cast<size_t>(level.cols[j][k]);
      v += level.q[j][k] * coarse_vertices[c] + level.d[j][k] * normals[c];
    }
    out[j] = v;
  }
  return out;
}

NodePtr upsample_node(const NodePtr& coarse_vertices, const HierarchyLevel& level) {
  const auto& s = coarse_vertices->value.shape();
  if (s.size() != 2 || s[1] != 3 || s[0] != level.coarse_count)
    throw std::invalid_argument("upsample_node: expected [" +
                                std::to_string(level.coarse_count) + ",3], got " +
                                coarse_vertices->value.shape_str());
  NodePtr normals = vertex_normals_node(coarse_vertices, level.coarse.faces);

  const int64_t NF = level.fine_count;
  DenseArray out({NF, 3});
  for (int64_t j = 0; j < NF; ++j) {
    const auto sj = static_cast<size_t>(j);
    for (int64_t x = 0; x < 3; ++x) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) {
        const int64_t c = level.cols[sj][static_cast<size_t>(k)];
        v += level.q[sj][static_cast<size_t>(k)] * coarse_vertices->value[c * 3 + x] +
             level.d[sj][static_cast<size_t>(k)] * normals->value[c * 3 + x];
      }
      out[j * 3 + x] = v;
    }
  }
  const auto* lvl = &level;  // hierarchies outlive any graph built on them
  auto back = [lvl, NF](Node& self) {
    auto& gv = self.parents[0]->ensure_grad();
    auto& gn = self.parents[1]->ensure_grad();
    for (int64_t j = 0; j < NF; ++j) {
      const auto sj = static_cast<size_t>(j);
      for (int64_t x = 0; x < 3; ++x) {
        const double g = self.grad[j * 3 + x];
        if (g == 0.0) continue;
        for (int k = 0; k < 3; ++k) {
          const int64_t c = lvl->cols[sj][static_cast<size_t>(k)];
          gv[c * 3 + x] += lvl->q[sj][static_cast<size_t>(k)] * g;
          gn[c * 3 + x] += lvl->d[sj][static_cast<size_t>(k)] * g;
        }
      }
    }
  };
  return make_op(std::move(out), "upsample_mesh", {coarse_vertices, normals}, std::move(back));
}

MeshHierarchy build_hierarchy(const Mesh& full, const std::vector<int>& coarse_counts) {
  for (size_t i = 0; i + 1 < coarse_counts.size(); ++i)
    if (coarse_counts[i] >= coarse_counts[i + 1])
      throw std::invalid_argument("build_hierarchy: coarse counts must be ascending");
  if (!coarse_counts.empty() &&
      coarse_counts.back() >= static_cast<int>(full.vertex_count()))
    throw std::invalid_argument("build_hierarchy: coarse counts must be below the template");

  MeshHierarchy h;
  h.levels.resize(coarse_counts.size() + 1);
  h.levels.back() = full;
  for (size_t i = coarse_counts.size(); i-- > 0;)
    h.levels[i] = decimate(h.levels[i + 1], coarse_counts[i]);
  for (size_t i = 0; i + 1 < h.levels.size(); ++i)
    h.ups.push_back(embed(h.levels[i + 1], h.levels[i]));
  h.validate();
  return h;
}

namespace {

void save_triplets(const std::string& path, const HierarchyLevel& lvl, bool d_matrix) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_hierarchy: cannot open " + path);
  std::fprintf(f, "row,col,value\n");
  for (size_t j = 0; j < lvl.cols.size(); ++j)
    for (int k = 0; k < 3; ++k) {
      const double v = d_matrix ? lvl.d[j][static_cast<size_t>(k)]
                                : lvl.q[j][static_cast<size_t>(k)];
      if (v == 0.0) continue;
      std::fprintf(f, "%zu,%d,%.17g\n", j, lvl.cols[j][static_cast<size_t>(k)], v);
    }
  std::fclose(f);
}

void load_triplets(const std::string& path, int64_t rows, int64_t cols,
                   std::vector<std::vector<std::pair<int, double>>>& out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_hierarchy: cannot open " + path);
  out.assign(static_cast<size_t>(rows), {});
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    long r = 0, c = 0;
    double v = 0.0;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf", &r, &c, &v) != 3)
      throw std::runtime_error("load_hierarchy: malformed triplet in " + path);
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw std::runtime_error("load_hierarchy: triplet out of range in " + path);
    out[static_cast<size_t>(r)].push_back({static_cast<int>(c), v});
  }
}

}  // namespace

void save_hierarchy(const std::string& dir, const MeshHierarchy& h) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json idx;
  idx["levels"] = nlohmann::json::array();
  idx["Q"] = nlohmann::json::array();
  idx["D"] = nlohmann::json::array();
  for (size_t k = 0; k < h.levels.size(); ++k) {
    const std::string name = "level_" + std::to_string(k) + ".obj";
    save_obj(h.levels[k], (fs::path(dir) / name).string());
    idx["levels"].push_back(name);
  }
  for (size_t k = 0; k < h.ups.size(); ++k) {
    const std::string qn = "Q_" + std::to_string(k) + ".csv";
    const std::string dn = "D_" + std::to_string(k) + ".csv";
    save_triplets((fs::path(dir) / qn).string(), h.ups[k], false);
    save_triplets((fs::path(dir) / dn).string(), h.ups[k], true);
    idx["Q"].push_back(qn);
    idx["D"].push_back(dn);
  }
  std::ofstream out(fs::path(dir) / "index.json");
  out << idx.dump(2) << "\n";
}

MeshHierarchy load_hierarchy(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "index.json");
  if (!in) throw std::runtime_error("load_hierarchy: cannot open " + dir + "/index.json");
  nlohmann::json idx;
  in >> idx;
  MeshHierarchy h;
  for (const auto& name : idx.at("levels"))
    h.levels.push_back(load_obj((fs::path(dir) / name.get<std::string>()).string()));
  for (size_t k = 0; k + 1 < h.levels.size(); ++k) {
    HierarchyLevel lvl;
    lvl.coarse = h.levels[k];
    lvl.coarse_count = h.levels[k].vertex_count();
    lvl.fine_count = h.levels[k + 1].vertex_count();
    std::vector<std::vector<std::pair<int, double>>> qrows, drows;
    load_triplets((fs::path(dir) / idx.at("Q")[k].get<std::string>()).string(),
                  lvl.fine_count, lvl.coarse_count, qrows);
    load_triplets((fs::path(dir) / idx.at("D")[k].get<std::string>()).string(),
                  lvl.fine_count, lvl.coarse_count, drows);
    lvl.cols.resize(static_cast<size_t>(lvl.fine_count));
    lvl.q.resize(static_cast<size_t>(lvl.fine_count));
    lvl.d.resize(static_cast<size_t>(lvl.fine_count));
    for (int64_t j = 0; j < lvl.fine_count; ++j) {
      const auto sj = static_cast<size_t>(j);
      lvl.cols[sj] = {0, 0, 0};
      lvl.q[sj] = {0.0, 0.0, 0.0};
      lvl.d[sj] = {0.0, 0.0, 0.0};
      const auto& qr = qrows[sj];
      if (qr.empty() || qr.size() > 3)
        throw std::runtime_error("load_hierarchy: Q row with " + std::to_string(qr.size()) +
                                 " entries");
      for (size_t k2 = 0; k2 < qr.size(); ++k2) {
        lvl.cols[sj][k2] = qr[k2].first;
        lvl.q[sj][k2] = qr[k2].second;
      }
      // pad duplicate columns with zero weight so the fixed-3 layout stays valid
      for (size_t k2 = qr.size(); k2 < 3; ++k2) lvl.cols[sj][k2] = qr[0].first;
      for (const auto& [c, v] : drows[sj]) {
        bool placed = false;
        for (int k2 = 0; k2 < 3 && !placed; ++k2)
          if (lvl.cols[sj][static_cast<size_t>(k2)] == c &&
              lvl.q[sj][static_cast<size_t>(k2)] != 0.0) {
            lvl.d[sj][static_cast<size_t>(k2)] = v;
            placed = true;
          }
        if (!placed)
          throw std::runtime_error("load_hierarchy: D entry outside Q pattern at row " +
                                   std::to_string(j));
      }
    }
    lvl.validate();
    h.ups.push_back(std::move(lvl));
  }
  h.validate();
  return h;
}

}  // namespace tofu
