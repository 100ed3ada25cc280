#pragma once

#include <cstdint>
#include <vector>

#include "aop3d/volume.hpp"

namespace aop3d {

using Mask = Volume<std::uint8_t>;

Mask foreground_mask(const LabelVolume& labels);
Mask instance_mask(const LabelVolume& labels, std::uint32_t id);

// Exact squared Euclidean distance from every voxel to the nearest nonzero
// voxel of `sites` (Felzenszwalb-Huttenlocher lower envelope per axis).
// Voxels are unit cubes regardless of spacing. +inf when there is no site.
std::vector<double> squared_distance_transform(const Mask& sites);

// For every voxel, the id of the nearest nonzero voxel of `sites` among those
// with squared distance <= max_d2, ties resolved to the lower id; 0 if none is
// that close. `d2_out`, when given, receives the squared distance (-1 if none).
LabelVolume nearest_labels(const LabelVolume& sites, std::int64_t max_d2,
                           std::vector<std::int64_t>* d2_out = nullptr);

// Spherical structuring element of radius r: voxels with offset |o|^2 <= r^2.
// Out-of-volume voxels are ignored, so dilation only grows inside the volume
// and erosion does not eat instances from the volume border.
Mask dilate(const Mask& m, int radius);
Mask erode(const Mask& m, int radius);
Mask open(const Mask& m, int radius);
Mask close(const Mask& m, int radius);

}  // namespace aop3d
