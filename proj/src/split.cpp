#include <algorithm>
#include <cmath>
#include <queue>

#include "aop3d/distance.hpp"
#include "aop3d/postproc.hpp"

namespace aop3d::postproc {

namespace {

struct Box {
  Coord lo{INT64_MAX, INT64_MAX, INT64_MAX};
  Coord hi{INT64_MIN, INT64_MIN, INT64_MIN};  // inclusive
};

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian with clamp-to-edge boundaries.
void smooth(std::vector<double>& v, const Shape& s, double sigma) {
  if (sigma <= 0.0) return;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(v.size());
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = s[axis];
    const std::int64_t stride = axis == 0 ? s.y * s.x : (axis == 1 ? s.x : 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::int64_t c = (static_cast<std::int64_t>(i) / stride) % n;
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const std::int64_t cc = std::clamp<std::int64_t>(c + t, 0, n - 1);
        acc += k[t + radius] * v[static_cast<std::size_t>(static_cast<std::int64_t>(i) + (cc - c) * stride)];
      }
      tmp[i] = acc;
    }
    v.swap(tmp);
  }
}

// Linear-interpolated quantile of sorted values (numpy's default).
double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Splits one instance inside its padded crop. Returns region index per crop
// voxel (0 outside the instance) and the region count.
std::vector<std::uint32_t> split_crop(const Mask& inside, double sigma, double q, std::uint32_t& regions) {
  const Shape s = inside.shape();
  Mask outside(s, inside.spacing(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) outside[i] = !inside[i];
  std::vector<double> dt = squared_distance_transform(outside);
  for (double& d : dt) d = std::sqrt(d);
  smooth(dt, s, sigma);

  std::vector<double> values;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (inside[i]) values.push_back(dt[i]);
  const double threshold = quantile(values, q);

  LabelVolume seeds(s, inside.spacing(), 0u);
  for (std::size_t i = 0; i < s.size(); ++i) seeds[i] = inside[i] && dt[i] >= threshold;
  std::uint32_t markers = 0;
  LabelVolume marker_ids = connected_components(seeds, Connectivity::TwentySix, &markers);
  std::vector<std::uint32_t> region(s.size(), 0);
  if (markers < 2) {
    regions = 1;
    for (std::size_t i = 0; i < s.size(); ++i) region[i] = inside[i] ? 1u : 0u;
    return region;
  }

  // Priority flood on the negated smoothed distance: higher distance first,
  // FIFO among equal priorities so the result does not depend on heap layout.
  struct Item {
    double priority;
    std::uint64_t age;
    std::size_t index;
    bool operator<(const Item& o) const {
      if (priority != o.priority) return priority < o.priority;
      return age > o.age;
    }
  };
  std::priority_queue<Item> heap;
  std::uint64_t age = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (marker_ids[i]) {
      region[i] = marker_ids[i];
      heap.push({dt[i], age++, i});
    }
  }
  const auto offsets = neighbor_offsets(Connectivity::TwentySix);
  while (!heap.empty()) {
    const Item it = heap.top();
    heap.pop();
    const auto idx = static_cast<std::int64_t>(it.index);
    const std::int64_t z = idx / (s.y * s.x), y = (idx / s.x) % s.y, x = idx % s.x;
    for (const auto& o : offsets) {
      const std::int64_t nz = z + o[0], ny = y + o[1], nx = x + o[2];
      if (!s.contains(nz, ny, nx)) continue;
      const std::size_t n = s.index(nz, ny, nx);
      if (!inside[n] || region[n] != 0) continue;
      region[n] = region[it.index];
      heap.push({dt[n], age++, n});
    }
  }
  // Fragments without a marker stay with the first region.
  for (std::size_t i = 0; i < s.size(); ++i)
    if (inside[i] && region[i] == 0) region[i] = 1;
  regions = markers;
  return region;
}

}  // namespace

LabelVolume split_instances(const LabelVolume& labels, double theta_ssigma, double theta_st) {
  if (!(theta_ssigma >= 0.0 && theta_ssigma <= 1.0) || !(theta_st >= 0.0 && theta_st <= 1.0)) {
    throw ParameterError("splitting parameters must lie in [0,1]");
  }
  if (theta_ssigma == 0.0 && theta_st == 0.0) return labels;

  const Shape s = labels.shape();
  std::vector<Box> boxes(max_label(labels) + 1);
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto id = labels(z, y, x);
        if (!id) continue;
        Box& b = boxes[id];
        b.lo = {std::min(b.lo.z, z), std::min(b.lo.y, y), std::min(b.lo.x, x)};
        b.hi = {std::max(b.hi.z, z), std::max(b.hi.y, y), std::max(b.hi.x, x)};
      }

  LabelVolume out(s, labels.spacing(), 0u);
  std::uint32_t next = 1;
  const double sigma = kSigmaPerUnit * theta_ssigma;
  for (std::uint32_t id = 1; id < boxes.size(); ++id) {
    const Box& b = boxes[id];
    if (b.lo.z > b.hi.z) continue;
    // One voxel of padding so the crop border is always outside the instance.
    const Shape cs{b.hi.z - b.lo.z + 3, b.hi.y - b.lo.y + 3, b.hi.x - b.lo.x + 3};
    Mask inside(cs, labels.spacing(), 0);
    for (std::int64_t z = 1; z < cs.z - 1; ++z)
      for (std::int64_t y = 1; y < cs.y - 1; ++y)
        for (std::int64_t x = 1; x < cs.x - 1; ++x)
          inside(z, y, x) = labels(b.lo.z + z - 1, b.lo.y + y - 1, b.lo.x + x - 1) == id;
    std::uint32_t regions = 0;
    const auto region = split_crop(inside, sigma, theta_st, regions);
    for (std::int64_t z = 1; z < cs.z - 1; ++z)
      for (std::int64_t y = 1; y < cs.y - 1; ++y)
        for (std::int64_t x = 1; x < cs.x - 1; ++x) {
          const auto r = region[cs.index(z, y, x)];
          if (r) out(b.lo.z + z - 1, b.lo.y + y - 1, b.lo.x + x - 1) = next + r - 1;
        }
    next += regions;
  }
  return out;
}

}  // namespace aop3d::postproc
