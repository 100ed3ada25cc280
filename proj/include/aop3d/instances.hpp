#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "aop3d/distance.hpp"
#include "aop3d/volume.hpp"
#include "json.hpp"

namespace aop3d::instances {

// Half-open voxel box [lo, hi) in (z, y, x).
struct Box {
  std::array<std::int64_t, 3> lo{};
  std::array<std::int64_t, 3> hi{};
  Shape shape() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct InstanceCrop {
  std::string image_id;
  std::uint32_t id = 0;
  Box box;
  bool clipped = false;  // the margin was cut by the volume border
  IntensityVolume intensity;
  Mask mask;  // 1 on voxels of this instance only
};

constexpr int kDefaultMargin = 4;

// One crop per instance in ascending id order; box = tight bounding box grown
// by `margin` and clipped to the volume.
std::vector<InstanceCrop> extract_instances(const LabelVolume& labels, const IntensityVolume& intensity,
                                            int margin = kDefaultMargin, const std::string& image_id = "");

enum class Preprocess { Mask, Distance };
Preprocess preprocess_from_string(const std::string& s);

// Mask: the binary mask as intensity. Distance: voxels outside the mask are
// scaled by exp(-d / sigma), d the Euclidean distance to the nearest mask
// voxel; inside voxels keep their value. Always reads crop.intensity.
IntensityVolume preprocess_crop(const InstanceCrop& crop, Preprocess method, double sigma = 1.0);

struct FeatureVector {
  double volume = 0;
  double surface = 0;                 // exposed voxel faces
  std::array<double, 3> extent{};     // tight bbox z, y, x
  std::array<double, 3> axes{};       // principal-axis lengths, descending
  double elongation = 0;              // axes[0] / axes[2]
  double sphericity = 0;
  std::array<double, 3> centroid{};   // volume coordinates z, y, x
  double mean_intensity = 0;
  double std_intensity = 0;

  std::vector<double> values() const;  // in feature_columns() order
};

const std::vector<std::string>& feature_columns();

FeatureVector geometric_features(const InstanceCrop& crop);

// crops/<image>/<id>/{intensity.i3d, mask.i3d, meta.json}
void save_crop(const InstanceCrop& crop, const std::filesystem::path& root,
               const FeatureVector* features = nullptr);
InstanceCrop load_crop(const std::filesystem::path& dir);
// All crops under root, ordered by (image id, instance id).
std::vector<InstanceCrop> load_crops(const std::filesystem::path& root);

nlohmann::ordered_json crop_meta(const InstanceCrop& crop, const FeatureVector* features = nullptr);

struct FeatureTable {
  std::vector<std::string> keys;  // "<image>/<id>"
  std::vector<std::vector<double>> rows;
};

// CSV: image,id,<feature_columns()...>; values with 17 significant digits.
void write_features_csv(const std::vector<InstanceCrop>& crops, std::ostream& out);
FeatureTable read_features_csv(std::istream& in);

}  // namespace aop3d::instances
