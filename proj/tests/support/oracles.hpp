#pragma once

// Brute-force reference implementations used to check the library. They are
// deliberately naive: direct voxel scans and dense linear algebra.

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "aop3d/distance.hpp"
#include "aop3d/gp.hpp"
#include "aop3d/volume.hpp"

namespace oracle {

using aop3d::LabelVolume;
using aop3d::Mask;

struct Match {
  std::set<std::uint32_t> tp, fp, fn;
  std::map<std::uint32_t, double> union_iou;
};

// All-pairs overlap by scanning the volume once per (pred, gt) pair.
Match match(const LabelVolume& pred, const LabelVolume& gt, double tau);

Mask dilate(const Mask& m, int r);
Mask erode(const Mask& m, int r);
LabelVolume morphology(const LabelVolume& labels, int ed, int co);

// Distance from every voxel to the nearest mask voxel by exhaustive search.
std::vector<double> distance_to_mask(const Mask& m);

// GP posterior with an explicitly inverted covariance.
std::pair<double, double> gp_posterior(const aop3d::bo::GpHyper& h, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& x, double jitter);

}  // namespace oracle
