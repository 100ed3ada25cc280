#include "aop3d/volume.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

namespace aop3d {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.z) + "," + std::to_string(s.y) + "," + std::to_string(s.x) + ")";
}

namespace {

std::vector<std::array<int, 3>> make_offsets(int max_nonzero) {
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nz = (dz != 0) + (dy != 0) + (dx != 0);
        if (nz == 0 || nz > max_nonzero) continue;
        out.push_back({dz, dy, dx});
      }
  return out;
}

const std::vector<std::array<int, 3>> kOffsets6 = make_offsets(1);
const std::vector<std::array<int, 3>> kOffsets18 = make_offsets(2);
const std::vector<std::array<int, 3>> kOffsets26 = make_offsets(3);

// Flood fill in raster order; `same` decides whether two voxels join.
template <typename Same>
LabelVolume flood_components(const LabelVolume& in, Connectivity c, std::uint32_t* count, Same same) {
  const Shape s = in.shape();
  LabelVolume out(s, in.spacing(), 0u);
  const auto offsets = neighbor_offsets(c);
  std::uint32_t next = 0;
  std::deque<std::size_t> queue;
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const std::size_t i = s.index(z, y, x);
        if (in[i] == 0 || out[i] != 0) continue;
        out[i] = ++next;
        queue.push_back(i);
        while (!queue.empty()) {
          const std::size_t cur = queue.front();
          queue.pop_front();
          const std::int64_t cz = static_cast<std::int64_t>(cur) / (s.y * s.x);
          const std::int64_t cy = (static_cast<std::int64_t>(cur) / s.x) % s.y;
          const std::int64_t cx = static_cast<std::int64_t>(cur) % s.x;
          for (const auto& o : offsets) {
            const std::int64_t nz = cz + o[0], ny = cy + o[1], nx = cx + o[2];
            if (!s.contains(nz, ny, nx)) continue;
            const std::size_t n = s.index(nz, ny, nx);
            if (in[n] == 0 || out[n] != 0 || !same(in[cur], in[n])) continue;
            out[n] = next;
            queue.push_back(n);
          }
        }
      }
  if (count) *count = next;
  return out;
}

}  // namespace

Connectivity connectivity_from_int(int c) {
  switch (c) {
    case 6: return Connectivity::Six;
    case 18: return Connectivity::Eighteen;
    case 26: return Connectivity::TwentySix;
    default: throw ParameterError("connectivity must be 6, 18 or 26, got " + std::to_string(c));
  }
}

std::span<const std::array<int, 3>> neighbor_offsets(Connectivity c) {
  switch (c) {
    case Connectivity::Six: return kOffsets6;
    case Connectivity::Eighteen: return kOffsets18;
    case Connectivity::TwentySix: break;
  }
  return kOffsets26;
}

LabelVolume relabel_consecutive(const LabelVolume& labels, std::uint32_t* count) {
  const auto ids = instance_ids(labels);
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  remap.reserve(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) remap.emplace(ids[k], static_cast<std::uint32_t>(k + 1));
  LabelVolume out(labels.shape(), labels.spacing(), 0u);
  // Fast path: already consecutive.
  const bool identity = ids.empty() || ids.back() == ids.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels[i];
    out[i] = (v == 0 || identity) ? v : remap.at(v);
  }
  if (count) *count = static_cast<std::uint32_t>(ids.size());
  return out;
}

LabelVolume connected_components(const LabelVolume& mask, Connectivity c, std::uint32_t* count) {
  return flood_components(mask, c, count, [](std::uint32_t, std::uint32_t) { return true; });
}

LabelVolume label_components(const LabelVolume& labels, Connectivity c, std::uint32_t* count) {
  return flood_components(labels, c, count, [](std::uint32_t a, std::uint32_t b) { return a == b; });
}

std::uint32_t max_label(const LabelVolume& labels) {
  std::uint32_t m = 0;
  for (auto v : labels.data()) m = std::max(m, v);
  return m;
}

std::vector<std::uint32_t> instance_ids(const LabelVolume& labels) {
  std::vector<std::uint32_t> ids;
  const std::uint32_t m = max_label(labels);
  if (m == 0) return ids;
  if (m <= 4 * labels.size() + 1024) {
    std::vector<char> seen(static_cast<std::size_t>(m) + 1, 0);
    for (auto v : labels.data()) seen[v] = 1;
    for (std::uint32_t k = 1; k <= m; ++k)
      if (seen[k]) ids.push_back(k);
    return ids;
  }
  ids.assign(labels.data().begin(), labels.data().end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (!ids.empty() && ids.front() == 0) ids.erase(ids.begin());
  return ids;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace aop3d
