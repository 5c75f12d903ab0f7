#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tofu/camera.hpp"
#include "tofu/hierarchy.hpp"
#include "tofu/synth.hpp"

namespace tofu {

struct SynthConfig {
  uint64_t template_seed = 1;
  int subdivisions = 3;                        // 642-vertex full template
  std::vector<int> hierarchy_counts = {42, 162};  // coarse levels, ascending
  int views = 4;
  int image_size = 128;
  uint64_t texture_seed = 0;        // one texture shared by the whole dataset
  double texture_scale_mm = 35.0;
  // identities; parity decides the split (even = train, odd = test)
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14};
  DeformationParams deformation;
  double noise_sigma = 0.0;  // optional Gaussian image noise
  int jobs = 1;
};

// K cameras equally spaced over a +-60 degree frontal azimuth arc at zero
// elevation, radius 2.5x the bbox diagonal, all looking at the box center.
std::vector<Camera> make_ring_rig(int views, int image_size, const Eigen::AlignedBox3d& box);

// Writes <root>/rig.json, <root>/hierarchy/..., and per sample
// samples/<seed>/{view_<i>.pfm, ground_truth_level_<k>.obj, landmarks.json,
// meta.json}. Deterministic per config. Returns the per-level ground-truth
// consistency residuals (reported, not asserted).
void generate_dataset(const SynthConfig& config, const std::string& root);

struct SampleData {
  uint64_t seed = 0;
  std::string split;
  std::vector<DenseArray> images;                      // [3,H,W] each
  std::vector<std::vector<Eigen::Vector3d>> gt_levels; // V-bar per level
  std::vector<int> landmark_indices;
  std::vector<Eigen::Vector3d> landmark_positions;
};

struct Dataset {
  std::vector<Camera> rig;
  MeshHierarchy hierarchy;
  std::vector<SampleData> samples;

  std::vector<const SampleData*> split(const std::string& tag) const;
};

Dataset load_dataset(const std::string& root);

}  // namespace tofu
