#include "tofu/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <json.hpp>

#include "tofu/log.hpp"
#include "tofu/pfm.hpp"
#include "tofu/render.hpp"
#include "tofu/rng.hpp"

namespace fs = std::filesystem;

namespace tofu {

std::vector<Camera> make_ring_rig(int views, int image_size, const Eigen::AlignedBox3d& box) {
  if (views < 1) throw std::invalid_argument("make_ring_rig: need at least one view");
  const Eigen::Vector3d center = box.center();
  const double diag = box.diagonal().norm();
  const double dist = 2.5 * diag;
  const double f = 0.7 * static_cast<double>(image_size) * dist / diag;
  const double c = 0.5 * static_cast<double>(image_size - 1);

  std::vector<Camera> rig;
  for (int i = 0; i < views; ++i) {
    // equally spaced azimuths over the frontal arc [-60deg, +60deg]
    const double az = views == 1 ? 0.0
                                 : (-60.0 + 120.0 * static_cast<double>(i) /
                                                static_cast<double>(views - 1)) *
                                       M_PI / 180.0;
    const Eigen::Vector3d pos =
        center + dist * Eigen::Vector3d(std::cos(az), std::sin(az), 0.0);
    const Eigen::Vector3d camZ = (center - pos).normalized();
    Eigen::Vector3d camX = camZ.cross(Eigen::Vector3d::UnitZ()).normalized();
    const Eigen::Vector3d camY = camZ.cross(camX);

    Camera cam;
    cam.name = "view_" + std::to_string(i);
    cam.width = image_size;
    cam.height = image_size;
    cam.K << f, 0, c, 0, f, c, 0, 0, 1;
    cam.R.row(0) = camX;
    cam.R.row(1) = camY;
    cam.R.row(2) = camZ;
    cam.t = -cam.R * pos;
    cam.validate();
    rig.push_back(std::move(cam));
  }
  return rig;
}

namespace {

void write_landmarks(const std::string& path, const std::vector<int>& indices,
                     const std::vector<Eigen::Vector3d>& positions) {
  nlohmann::json j;
  j["indices"] = indices;
  auto arr = nlohmann::json::array();
  for (const auto& p : positions) arr.push_back({p.x(), p.y(), p.z()});
  j["positions"] = arr;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

struct SampleResult {
  double up_res_mean = 0.0;
  double up_res_max = 0.0;
};

SampleResult generate_sample(const SynthConfig& cfg, const std::string& root,
                             const MeshHierarchy& hier, const std::vector<Camera>& rig,
                             const TemplateResult& tmpl, const TextureFn& texture,
                             uint64_t seed) {
  const fs::path dir = fs::path(root) / "samples" / std::to_string(seed);
  fs::create_directories(dir);

  const Mesh& full = hier.levels.back();
  DeformationField field = sample_deformation(seed, full, cfg.deformation);

  // ground truth per level: the field evaluated at each level's template
  std::vector<std::vector<Eigen::Vector3d>> gt;
  for (const auto& level : hier.levels) {
    std::vector<Eigen::Vector3d> v;
    v.reserve(level.vertices.size());
    for (const auto& p : level.vertices) v.push_back(field.apply(p));
    gt.push_back(std::move(v));
  }

  Mesh deformed;
  deformed.faces = full.faces;
  deformed.vertices = gt.back();
  auto images = render_views(deformed, full.vertices, rig, texture);
  if (cfg.noise_sigma > 0.0) {
    Rng noise(seed ^ 0xABCDEF1234567890ull);
    for (auto& img : images)
      for (int64_t i = 0; i < img.size(); ++i)
        img[i] = std::clamp(img[i] + cfg.noise_sigma * noise.normal(), 0.0, 1.0);
  }
  for (size_t i = 0; i < images.size(); ++i)
    save_pfm((dir / ("view_" + std::to_string(i) + ".pfm")).string(), images[i]);

  for (size_t k = 0; k < gt.size(); ++k) {
    Mesh m;
    m.vertices = gt[k];
    m.faces = hier.levels[k].faces;
    save_obj(m, (dir / ("ground_truth_level_" + std::to_string(k) + ".obj")).string());
  }

  std::vector<Eigen::Vector3d> lm_pos;
  for (int idx : tmpl.landmarks) lm_pos.push_back(gt.back()[static_cast<size_t>(idx)]);
  write_landmarks((dir / "landmarks.json").string(), tmpl.landmarks, lm_pos);

  nlohmann::json meta;
  meta["seed"] = seed;
  meta["split"] = (seed % 2 == 0) ? "train" : "test";
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";

  // ground-truth consistency: how well the fixed upsampling alone predicts
  // the next level (the residual the refinement networks must learn)
  SampleResult res;
  int64_t count = 0;
  for (size_t k = 0; k < hier.ups.size(); ++k) {
    const auto up = upsample(gt[k], hier.ups[k]);
    for (size_t j = 0; j < up.size(); ++j) {
      const double e = (up[j] - gt[k + 1][j]).norm();
      res.up_res_mean += e;
      res.up_res_max = std::max(res.up_res_max, e);
      ++count;
    }
  }
  if (count > 0) res.up_res_mean /= static_cast<double>(count);
  return res;
}

}  // namespace

void generate_dataset(const SynthConfig& cfg, const std::string& root) {
  fs::create_directories(root);
  const TemplateResult tmpl = make_template(cfg.template_seed, cfg.subdivisions);
  const MeshHierarchy hier = build_hierarchy(tmpl.mesh, cfg.hierarchy_counts);
  save_hierarchy((fs::path(root) / "hierarchy").string(), hier);

  const auto rig = make_ring_rig(cfg.views, cfg.image_size, tmpl.mesh.bounding_box());
  save_rig((fs::path(root) / "rig.json").string(), rig);

  const TextureFn texture = make_procedural_texture(cfg.texture_seed, cfg.texture_scale_mm);

  std::vector<SampleResult> results(cfg.seeds.size());
  if (cfg.jobs > 1) {
    std::vector<std::future<SampleResult>> futures;
    for (uint64_t seed : cfg.seeds)
      futures.push_back(std::async(std::launch::async, [&, seed] {
        return generate_sample(cfg, root, hier, rig, tmpl, texture, seed);
      }));
    for (size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (size_t i = 0; i < cfg.seeds.size(); ++i)
      results[i] = generate_sample(cfg, root, hier, rig, tmpl, texture, cfg.seeds[i]);
  }

  double mean = 0.0, worst = 0.0;
  for (const auto& r : results) {
    mean += r.up_res_mean;
    worst = std::max(worst, r.up_res_max);
  }
  if (!results.empty()) mean /= static_cast<double>(results.size());
  log_info("dataset %s: %zu samples, upsample-only residual vs next level: mean %.3f mm, "
           "max %.3f mm",
           root.c_str(), cfg.seeds.size(), mean, worst);
}

std::vector<const SampleData*> Dataset::split(const std::string& tag) const {
  std::vector<const SampleData*> out;
  for (const auto& s : samples)
    if (s.split == tag) out.push_back(&s);
  return out;
}

Dataset load_dataset(const std::string& root) {
  Dataset ds;
  ds.rig = load_rig((fs::path(root) / "rig.json").string());
  ds.hierarchy = load_hierarchy((fs::path(root) / "hierarchy").string());

  std::vector<fs::path> sample_dirs;
  for (const auto& e : fs::directory_iterator(fs::path(root) / "samples"))
    if (e.is_directory()) sample_dirs.push_back(e.path());
  std::sort(sample_dirs.begin(), sample_dirs.end(),
            [](const fs::path& a, const fs::path& b) {
              return std::stoull(a.filename().string()) < std::stoull(b.filename().string());
            });

  for (const auto& dir : sample_dirs) {
    SampleData s;
    {
      std::ifstream in(dir / "meta.json");
      if (!in) throw std::runtime_error("load_dataset: missing meta.json in " + dir.string());
      nlohmann::json meta;
      in >> meta;
      s.seed = meta.at("seed").get<uint64_t>();
      s.split = meta.at("split").get<std::string>();
    }
    for (size_t i = 0; i < ds.rig.size(); ++i) {
      const fs::path p = dir / ("view_" + std::to_string(i) + ".pfm");
      if (!fs::exists(p))
        throw std::runtime_error("load_dataset: missing image " + p.string());
      s.images.push_back(load_pfm(p.string()));
    }
    for (size_t k = 0; k < ds.hierarchy.levels.size(); ++k) {
      const Mesh m =
          load_obj((dir / ("ground_truth_level_" + std::to_string(k) + ".obj")).string());
      if (m.vertex_count() != ds.hierarchy.levels[k].vertex_count())
        throw std::runtime_error("load_dataset: ground-truth level " + std::to_string(k) +
                                 " vertex count mismatch in " + dir.string());
      s.gt_levels.push_back(m.vertices);
    }
    {
      std::ifstream in(dir / "landmarks.json");
      nlohmann::json j;
      in >> j;
      s.landmark_indices = j.at("indices").get<std::vector<int>>();
      for (const auto& p : j.at("positions"))
        s.landmark_positions.emplace_back(p[0].get<double>(), p[1].get<double>(),
                                          p[2].get<double>());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace tofu
