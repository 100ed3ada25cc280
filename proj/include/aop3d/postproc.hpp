#pragma once

#include <cstdint>
#include <vector>

#include "aop3d/volume.hpp"
#include "json.hpp"

namespace aop3d::postproc {

// The seven postprocessing knobs. A category whose parameters are all zero
// is skipped entirely (voxel-exact no-op).
struct PostprocParams {
  int theta_ed = 0;        // [-10, 10] erosion (<0) / dilation (>0) radius
  int theta_co = 0;        // [-5, 5]   opening (<0) / closing (>0) radius
  double theta_mc = 0.0;   // [0, 1] merge weight: contour continuity
  double theta_ms = 0.0;   // [0, 1] merge weight: contact-surface smoothness
  double theta_mr = 0.0;   // [0, 1] merge weight: relative contact area
  double theta_ssigma = 0.0;  // [0, 1] watershed smoothing, sigma = 4 * value voxels
  double theta_st = 0.0;      // [0, 1] marker quantile threshold

  bool morphology_enabled() const { return theta_ed != 0 || theta_co != 0; }
  bool merging_enabled() const { return theta_mc != 0.0 || theta_ms != 0.0 || theta_mr != 0.0; }
  bool splitting_enabled() const { return theta_ssigma != 0.0 || theta_st != 0.0; }

  friend bool operator==(const PostprocParams&, const PostprocParams&) = default;
};

void validate(const PostprocParams& p);
nlohmann::ordered_json to_json(const PostprocParams& p);
PostprocParams params_from_json(const nlohmann::json& j);

constexpr double kMergeThreshold = 0.5;
constexpr double kSigmaPerUnit = 4.0;

// Morphology on the binary union mask; voxels the mask gains take the label
// of the nearest original instance (ties to the lower id), voxels it loses
// become background. Erosion that disconnects an instance keeps one id.
LabelVolume apply_morphology(const LabelVolume& labels, int theta_ed, int theta_co);

// Watershed splitting of every instance on its smoothed interior distance
// transform; output ids are consecutive (instances in ascending id order,
// each contributing one id per watershed region).
LabelVolume split_instances(const LabelVolume& labels, double theta_ssigma, double theta_st);

struct AdjacencyEdge {
  std::uint32_t a = 0, b = 0;  // a < b
  double f_c = 0, f_s = 0, f_r = 0;
  double score = 0;
  std::size_t contact_faces = 0;
};

// Instance pairs with any two voxels within Chebyshev distance 2, with their
// merge features and weighted score. Sorted by (a, b).
std::vector<AdjacencyEdge> adjacency_edges(const LabelVolume& labels, double theta_mc, double theta_ms,
                                           double theta_mr);

// Merges every edge whose score exceeds kMergeThreshold, transitively; a merged
// group keeps its smallest id.
LabelVolume merge_instances(const LabelVolume& labels, double theta_mc, double theta_ms, double theta_mr);

// morphology -> merging -> splitting, each skipped when disabled, then
// relabeled to 1..n.
LabelVolume apply_postprocessing(const LabelVolume& labels, const PostprocParams& params);

// Number of 6-connected voxel faces of `id` that do not border `id` (volume
// border faces count as exposed).
std::uint64_t exposed_faces(const LabelVolume& labels, std::uint32_t id);

}  // namespace aop3d::postproc
