#include "aop3d/distance.hpp"
#include "aop3d/postproc.hpp"

namespace aop3d::postproc {

LabelVolume apply_morphology(const LabelVolume& labels, int theta_ed, int theta_co) {
  if (theta_ed < -10 || theta_ed > 10) throw ParameterError("theta_ed must be in [-10,10], got " + std::to_string(theta_ed));
  if (theta_co < -5 || theta_co > 5) throw ParameterError("theta_co must be in [-5,5], got " + std::to_string(theta_co));
  if (theta_ed == 0 && theta_co == 0) return labels;

  Mask mask = foreground_mask(labels);
  if (theta_ed > 0) mask = dilate(mask, theta_ed);
  if (theta_ed < 0) mask = erode(mask, -theta_ed);
  if (theta_co > 0) mask = close(mask, theta_co);
  if (theta_co < 0) mask = open(mask, -theta_co);

  // Every gained voxel lies within max(ed,0) + max(co,0) of an original voxel.
  const std::int64_t reach = std::max(theta_ed, 0) + std::max(theta_co, 0);
  bool grows = false;
  for (std::size_t i = 0; i < mask.size() && !grows; ++i) grows = mask[i] && labels[i] == 0;
  LabelVolume near;
  if (grows) near = nearest_labels(labels, reach * reach);

  LabelVolume out(labels.shape(), labels.spacing(), 0u);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = labels[i] != 0 ? labels[i] : near[i];
  }
  return out;
}

}  // namespace aop3d::postproc
