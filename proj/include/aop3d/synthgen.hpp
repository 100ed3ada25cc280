#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aop3d/volume.hpp"
#include "json.hpp"

namespace aop3d::synth {

// Parametric nuclei-like phantom: randomly oriented ellipsoids with a minimum
// background gap, rendered as blurred indicator * base + Gaussian noise.
struct SynthConfig {
  Shape shape{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.0};
  int count = 10;
  double radius_min = 4.0;  // semi-major axis range, voxels
  double radius_max = 8.0;
  double axis_ratio_min = 0.6;  // minor/major ratio range for the two other axes
  double axis_ratio_max = 1.0;
  int min_gap = 2;  // background voxels between instances along any line
  double intensity_base = 0.8;
  double noise_sigma = 0.05;
  double blur_sigma = 1.0;
  std::uint64_t seed = 0;
};

constexpr int kMaxPlacementAttempts = 10000;

void validate(const SynthConfig& cfg);
SynthConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SynthConfig& cfg);

struct Benchmark {
  IntensityVolume image;
  LabelVolume labels;
};

Benchmark generate_benchmark(const SynthConfig& cfg);

enum class Axis { Z = 0, Y = 1, X = 2 };

struct Dilate { int radius = 1; };
struct Erode { int radius = 1; };
struct SplitPlane { double fraction = 1.0; Axis axis = Axis::Z; };
struct MergeAdjacent { double probability = 1.0; };
struct Hallucinate { int count = 1; int radius = 3; };
struct Drop { double probability = 0.1; };

using CorruptionOp = std::variant<Dilate, Erode, SplitPlane, MergeAdjacent, Hallucinate, Drop>;

struct CorruptionSpec {
  std::vector<CorruptionOp> ops;
  std::uint64_t seed = 0;
};

void validate(const CorruptionSpec& spec);
CorruptionSpec corruption_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const CorruptionSpec& spec);

// Applies the operators in order; output ids are consecutive.
LabelVolume corrupt_labels(const LabelVolume& gt, const CorruptionSpec& spec);

}  // namespace aop3d::synth
