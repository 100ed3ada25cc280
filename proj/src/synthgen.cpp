#include "aop3d/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "aop3d/postproc.hpp"
#include "aop3d/rng.hpp"

namespace aop3d::synth {

namespace {

void blur(std::vector<double>& v, const Shape& s, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& w : k) w /= sum;
  std::vector<double> tmp(v.size());
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = s[axis];
    const std::int64_t stride = axis == 0 ? s.y * s.x : (axis == 1 ? s.x : 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto c = (static_cast<std::int64_t>(i) / stride) % n;
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const auto cc = std::clamp<std::int64_t>(c + t, 0, n - 1);
        acc += k[t + radius] * v[static_cast<std::size_t>(static_cast<std::int64_t>(i) + (cc - c) * stride)];
      }
      tmp[i] = acc;
    }
    v.swap(tmp);
  }
}

Axis axis_from_string(const std::string& s) {
  if (s == "z") return Axis::Z;
  if (s == "y") return Axis::Y;
  if (s == "x") return Axis::X;
  throw ParameterError("axis must be one of z, y, x; got '" + s + "'");
}

const char* axis_name(Axis a) { return a == Axis::Z ? "z" : (a == Axis::Y ? "y" : "x"); }

template <typename T>
T field(const nlohmann::json& j, const char* key, T dflt) {
  return j.contains(key) ? j.at(key).get<T>() : dflt;
}

struct Ellipsoid {
  Eigen::Vector3d centre;
  Eigen::Matrix3d rotation;
  Eigen::Vector3d semi;
};

std::vector<Coord> rasterize(const Ellipsoid& e, const Shape& s) {
  const double r = e.semi.maxCoeff();
  std::vector<Coord> out;
  const auto lo = [&](int a) { return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.centre[a] - r))); };
  const auto hi = [&](int a) { return std::min<std::int64_t>(s[a] - 1, static_cast<std::int64_t>(std::ceil(e.centre[a] + r))); };
  for (std::int64_t z = lo(0); z <= hi(0); ++z)
    for (std::int64_t y = lo(1); y <= hi(1); ++y)
      for (std::int64_t x = lo(2); x <= hi(2); ++x) {
        const Eigen::Vector3d local = e.rotation.transpose() * (Eigen::Vector3d(double(z), double(y), double(x)) - e.centre);
        const double q = (local.array() / e.semi.array()).square().sum();
        if (q <= 1.0) out.push_back({z, y, x});
      }
  return out;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (!cfg.shape.valid()) throw ParameterError("synth shape must be >= 1 on every axis");
  if (cfg.count < 0) throw ParameterError("instance count must be >= 0");
  if (cfg.radius_min < 1.0 || cfg.radius_max < cfg.radius_min) throw ParameterError("radius range must satisfy 1 <= min <= max");
  if (cfg.axis_ratio_min <= 0.0 || cfg.axis_ratio_max > 1.0 || cfg.axis_ratio_max < cfg.axis_ratio_min) {
    throw ParameterError("axis ratio range must satisfy 0 < min <= max <= 1");
  }
  if (cfg.min_gap < 0) throw ParameterError("min gap must be >= 0");
  if (cfg.noise_sigma < 0.0 || cfg.blur_sigma < 0.0) throw ParameterError("noise and blur sigma must be >= 0");
}

SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    if (j.contains("shape")) {
      const auto s = j.at("shape").get<std::vector<std::int64_t>>();
      if (s.size() != 3) throw ParameterError("shape must have 3 entries");
      c.shape = {s[0], s[1], s[2]};
    }
    if (j.contains("spacing")) {
      const auto s = j.at("spacing").get<std::vector<double>>();
      if (s.size() != 3) throw ParameterError("spacing must have 3 entries");
      c.spacing = {s[0], s[1], s[2]};
    }
    c.count = field(j, "count", c.count);
    if (j.contains("radius")) {
      const auto r = j.at("radius").get<std::vector<double>>();
      if (r.size() != 2) throw ParameterError("radius must be [min, max]");
      c.radius_min = r[0];
      c.radius_max = r[1];
    }
    if (j.contains("axis_ratio")) {
      const auto r = j.at("axis_ratio").get<std::vector<double>>();
      if (r.size() != 2) throw ParameterError("axis_ratio must be [min, max]");
      c.axis_ratio_min = r[0];
      c.axis_ratio_max = r[1];
    }
    c.min_gap = field(j, "min_gap", c.min_gap);
    if (j.contains("intensity")) {
      const auto& in = j.at("intensity");
      c.intensity_base = field(in, "base", c.intensity_base);
      c.noise_sigma = field(in, "noise_sigma", c.noise_sigma);
      c.blur_sigma = field(in, "blur_sigma", c.blur_sigma);
    }
    c.seed = field<std::uint64_t>(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid synth config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["shape"] = {c.shape.z, c.shape.y, c.shape.x};
  j["spacing"] = {c.spacing[0], c.spacing[1], c.spacing[2]};
  j["count"] = c.count;
  j["radius"] = {c.radius_min, c.radius_max};
  j["axis_ratio"] = {c.axis_ratio_min, c.axis_ratio_max};
  j["min_gap"] = c.min_gap;
  j["intensity"] = {{"base", c.intensity_base}, {"noise_sigma", c.noise_sigma}, {"blur_sigma", c.blur_sigma}};
  j["seed"] = c.seed;
  return j;
}

Benchmark generate_benchmark(const SynthConfig& cfg) {
  validate(cfg);
  const Shape s = cfg.shape;
  LabelVolume labels(s, cfg.spacing, 0u);
  // Voxels closer than min_gap + 1 to a placed instance.
  std::vector<std::uint8_t> blocked(s.size(), 0);
  const std::int64_t reach = cfg.min_gap + 1;
  const std::int64_t reach2 = reach * reach;
  std::vector<std::array<std::int64_t, 3>> ball;
  for (std::int64_t dz = -reach; dz <= reach; ++dz)
    for (std::int64_t dy = -reach; dy <= reach; ++dy)
      for (std::int64_t dx = -reach; dx <= reach; ++dx)
        if (dz * dz + dy * dy + dx * dx < reach2) ball.push_back({dz, dy, dx});

  SplitMix64 rng = SplitMix64::stream(cfg.seed, 0);
  for (int k = 0; k < cfg.count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      Ellipsoid e;
      const double r = rng.uniform(cfg.radius_min, cfg.radius_max);
      e.semi = {r, r * rng.uniform(cfg.axis_ratio_min, cfg.axis_ratio_max),
                r * rng.uniform(cfg.axis_ratio_min, cfg.axis_ratio_max)};
      Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
      if (q.norm() < 1e-12) q = Eigen::Quaterniond::Identity();
      e.rotation = q.normalized().toRotationMatrix();
      bool fits = true;
      for (int a = 0; a < 3; ++a) {
        const double lo = r, hi = static_cast<double>(s[a] - 1) - r;
        if (hi < lo) {
          fits = false;
          break;
        }
        e.centre[a] = rng.uniform(lo, hi);
      }
      if (!fits) continue;
      const auto voxels = rasterize(e, s);
      if (voxels.empty()) continue;
      if (std::any_of(voxels.begin(), voxels.end(), [&](const Coord& c) { return blocked[s.index(c.z, c.y, c.x)]; })) {
        continue;
      }
      const auto id = static_cast<std::uint32_t>(k + 1);
      for (const auto& c : voxels) labels(c.z, c.y, c.x) = id;
      // The voxel nearest to any outside point is a surface voxel, so
      // blocking around the surface is enough.
      for (const auto& c : voxels) {
        blocked[s.index(c.z, c.y, c.x)] = 1;
        bool surface = false;
        for (const auto& o : neighbor_offsets(Connectivity::Six))
          if (labels.get_or(c.z + o[0], c.y + o[1], c.x + o[2], 0u) != id) surface = true;
        if (!surface) continue;
        for (const auto& o : ball) {
          const std::int64_t z = c.z + o[0], y = c.y + o[1], x = c.x + o[2];
          if (s.contains(z, y, x)) blocked[s.index(z, y, x)] = 1;
        }
      }
      placed = true;
    }
    if (!placed) {
      throw CapacityError("could not place instance " + std::to_string(k) + " after " +
                          std::to_string(kMaxPlacementAttempts) + " attempts");
    }
  }

  std::vector<double> field(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) field[i] = labels[i] ? 1.0 : 0.0;
  blur(field, s, cfg.blur_sigma);
  SplitMix64 noise = SplitMix64::stream(cfg.seed, 1);
  IntensityVolume image(s, cfg.spacing, 0.0f);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = field[i] * cfg.intensity_base + cfg.noise_sigma * noise.normal();
    image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return {std::move(image), std::move(labels)};
}

void validate(const CorruptionSpec& spec) {
  for (const auto& op : spec.ops) {
    std::visit(
        [](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, Dilate> || std::is_same_v<T, Erode>) {
            if (o.radius < 1 || o.radius > 10) throw ParameterError("dilate/erode radius must be in [1,10]");
          } else if constexpr (std::is_same_v<T, SplitPlane>) {
            if (!(o.fraction >= 0.0 && o.fraction <= 1.0)) throw ParameterError("split_plane fraction must be in [0,1]");
          } else if constexpr (std::is_same_v<T, MergeAdjacent> || std::is_same_v<T, Drop>) {
            if (!(o.probability >= 0.0 && o.probability <= 1.0)) throw ParameterError("probabilities must be in [0,1]");
          } else if constexpr (std::is_same_v<T, Hallucinate>) {
            if (o.count < 0 || o.radius < 1) throw ParameterError("hallucinate needs count >= 0 and radius >= 1");
          }
        },
        op);
  }
}

CorruptionSpec corruption_from_json(const nlohmann::json& j) {
  CorruptionSpec spec;
  try {
    spec.seed = field<std::uint64_t>(j, "seed", 0);
    for (const auto& o : j.value("ops", nlohmann::json::array())) {
      const auto name = o.at("op").get<std::string>();
      if (name == "dilate") {
        spec.ops.push_back(Dilate{o.at("radius").get<int>()});
      } else if (name == "erode") {
        spec.ops.push_back(Erode{o.at("radius").get<int>()});
      } else if (name == "split_plane") {
        spec.ops.push_back(SplitPlane{field(o, "fraction", 1.0), axis_from_string(field<std::string>(o, "axis", "z"))});
      } else if (name == "merge_adjacent") {
        spec.ops.push_back(MergeAdjacent{field(o, "probability", 1.0)});
      } else if (name == "hallucinate") {
        spec.ops.push_back(Hallucinate{field(o, "count", 1), field(o, "radius", 3)});
      } else if (name == "drop") {
        spec.ops.push_back(Drop{field(o, "probability", 0.1)});
      } else {
        throw ParameterError("unknown corruption operator '" + name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid corruption spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

nlohmann::ordered_json to_json(const CorruptionSpec& spec) {
  nlohmann::ordered_json ops = nlohmann::ordered_json::array();
  for (const auto& op : spec.ops) {
    nlohmann::ordered_json o;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dilate>) {
            o["op"] = "dilate";
            o["radius"] = v.radius;
          } else if constexpr (std::is_same_v<T, Erode>) {
            o["op"] = "erode";
            o["radius"] = v.radius;
          } else if constexpr (std::is_same_v<T, SplitPlane>) {
            o["op"] = "split_plane";
            o["fraction"] = v.fraction;
            o["axis"] = axis_name(v.axis);
          } else if constexpr (std::is_same_v<T, MergeAdjacent>) {
            o["op"] = "merge_adjacent";
            o["probability"] = v.probability;
          } else if constexpr (std::is_same_v<T, Hallucinate>) {
            o["op"] = "hallucinate";
            o["count"] = v.count;
            o["radius"] = v.radius;
          } else {
            o["op"] = "drop";
            o["probability"] = v.probability;
          }
        },
        op);
    ops.push_back(o);
  }
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["ops"] = ops;
  return j;
}

namespace {

LabelVolume split_plane(const LabelVolume& in, const SplitPlane& op, SplitMix64& rng) {
  const auto ids = instance_ids(in);
  std::vector<std::uint32_t> order = ids;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto chosen_n = static_cast<std::size_t>(std::llround(op.fraction * static_cast<double>(ids.size())));
  std::vector<std::uint32_t> chosen(order.begin(), order.begin() + std::min(chosen_n, order.size()));
  std::sort(chosen.begin(), chosen.end());

  const int axis = static_cast<int>(op.axis);
  const Shape s = in.shape();
  const auto top = max_label(in);
  std::vector<std::int64_t> lo(top + 1, INT64_MAX), hi(top + 1, INT64_MIN);
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto id = in(z, y, x);
        if (!id) continue;
        const std::int64_t c = axis == 0 ? z : (axis == 1 ? y : x);
        lo[id] = std::min(lo[id], c);
        hi[id] = std::max(hi[id], c);
      }
  std::vector<std::uint32_t> new_id(top + 1, 0);
  std::vector<std::int64_t> cut(top + 1, 0);
  std::uint32_t next = top + 1;
  for (auto id : chosen) {
    const auto extent = hi[id] - lo[id] + 1;
    if (extent < 2) continue;
    cut[id] = lo[id] + extent / 2;
    new_id[id] = next++;
  }
  LabelVolume out = in;
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto id = in(z, y, x);
        if (!id || !new_id[id]) continue;
        const std::int64_t c = axis == 0 ? z : (axis == 1 ? y : x);
        if (c >= cut[id]) out(z, y, x) = new_id[id];
      }
  return out;
}

LabelVolume merge_adjacent(const LabelVolume& in, const MergeAdjacent& op, SplitMix64& rng) {
  const auto edges = postproc::adjacency_edges(in, 0.0, 0.0, 0.0);
  std::vector<std::uint32_t> parent(max_label(in) + 1);
  for (std::uint32_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::uint32_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& e : edges) {
    if (!rng.bernoulli(op.probability)) continue;
    const auto a = find(e.a), b = find(e.b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  LabelVolume out = in;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i]) out[i] = find(out[i]);
  return out;
}

LabelVolume hallucinate(const LabelVolume& in, const Hallucinate& op, SplitMix64& rng) {
  LabelVolume out = in;
  const Shape s = in.shape();
  std::uint32_t next = max_label(in) + 1;
  const std::int64_t r = op.radius;
  for (int k = 0; k < op.count; ++k) {
    std::vector<Coord> best;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Coord c{rng.range(0, s.z - 1), rng.range(0, s.y - 1), rng.range(0, s.x - 1)};
      std::vector<Coord> ball;
      bool clear = true;
      for (std::int64_t dz = -r; dz <= r; ++dz)
        for (std::int64_t dy = -r; dy <= r; ++dy)
          for (std::int64_t dx = -r; dx <= r; ++dx) {
            if (dz * dz + dy * dy + dx * dx > r * r) continue;
            const Coord p{c.z + dz, c.y + dy, c.x + dx};
            if (!s.contains(p.z, p.y, p.x)) continue;
            if (out(p.z, p.y, p.x) != 0) {
              clear = false;
              continue;
            }
            ball.push_back(p);
          }
      if (ball.size() > best.size() || (clear && !ball.empty())) best = std::move(ball);
      if (clear && !best.empty()) break;
    }
    if (best.empty()) continue;
    for (const auto& p : best) out(p.z, p.y, p.x) = next;
    ++next;
  }
  return out;
}

}  // namespace

LabelVolume corrupt_labels(const LabelVolume& gt, const CorruptionSpec& spec) {
  validate(spec);
  LabelVolume v = gt;
  for (std::size_t i = 0; i < spec.ops.size(); ++i) {
    SplitMix64 rng = SplitMix64::stream(spec.seed, 100 + i);
    v = std::visit(
        [&](const auto& op) -> LabelVolume {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Dilate>) {
            return postproc::apply_morphology(v, op.radius, 0);
          } else if constexpr (std::is_same_v<T, Erode>) {
            return postproc::apply_morphology(v, -op.radius, 0);
          } else if constexpr (std::is_same_v<T, SplitPlane>) {
            return split_plane(v, op, rng);
          } else if constexpr (std::is_same_v<T, MergeAdjacent>) {
            return merge_adjacent(v, op, rng);
          } else if constexpr (std::is_same_v<T, Hallucinate>) {
            return hallucinate(v, op, rng);
          } else {
            LabelVolume out = v;
            const auto ids = instance_ids(v);
            std::vector<char> dropped(max_label(v) + 1, 0);
            for (auto id : ids) dropped[id] = rng.bernoulli(op.probability);
            for (std::size_t k = 0; k < out.size(); ++k)
              if (out[k] && dropped[out[k]]) out[k] = 0;
            return out;
          }
        },
        spec.ops[i]);
  }
  return relabel_consecutive(v);
}

}  // namespace aop3d::synth
