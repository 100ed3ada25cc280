#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "aop3d/postproc.hpp"

namespace aop3d::postproc {

namespace {

using Vec3 = Eigen::Vector3d;

struct InstanceStats {
  std::uint64_t voxels = 0;
  std::uint64_t exposed = 0;
  Vec3 sum = Vec3::Zero();
  Vec3 centroid() const { return sum / static_cast<double>(voxels); }
};

std::uint32_t label_at(const LabelVolume& labels, const Vec3& p) {
  const auto z = static_cast<std::int64_t>(std::lround(p[0]));
  const auto y = static_cast<std::int64_t>(std::lround(p[1]));
  const auto x = static_cast<std::int64_t>(std::lround(p[2]));
  return labels.get_or(z, y, x, 0u);
}

// Half of the 5x5x5 neighborhood (lexicographically positive offsets), so
// every unordered voxel pair within Chebyshev distance 2 is visited once.
std::vector<std::array<int, 3>> half_neighborhood() {
  std::vector<std::array<int, 3>> out;
  for (int dz = -2; dz <= 2; ++dz)
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        if (dz > 0 || (dz == 0 && (dy > 0 || (dy == 0 && dx > 0)))) out.push_back({dz, dy, dx});
      }
  return out;
}

// Fraction of 3x3 probe lines along u, centred on the contact, whose profile
// runs from a into b without a background gap longer than one sample.
double contour_continuity(const LabelVolume& labels, std::uint32_t a, std::uint32_t b, const Vec3& centre,
                          Vec3 u, std::size_t contacts) {
  u.normalize();
  Vec3 helper = std::abs(u[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  const Vec3 v = u.cross(helper).normalized();
  const Vec3 w = u.cross(v).normalized();
  const double spacing = std::max(1.0, 0.5 * std::sqrt(static_cast<double>(contacts) / std::numbers::pi));
  constexpr int kHalfLength = 4;
  int continuous = 0;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      const Vec3 origin = centre + (i * spacing) * v + (j * spacing) * w;
      std::array<std::uint32_t, 2 * kHalfLength + 1> profile{};
      for (int t = -kHalfLength; t <= kHalfLength; ++t) profile[t + kHalfLength] = label_at(labels, origin + t * u);
      int first_b = -1;
      for (int t = 0; t < static_cast<int>(profile.size()); ++t) {
        if (profile[t] == b) {
          first_b = t;
          break;
        }
      }
      if (first_b < 0) continue;
      int last_a = -1;
      for (int t = first_b - 1; t >= 0; --t) {
        if (profile[t] == a) {
          last_a = t;
          break;
        }
      }
      if (last_a < 0) continue;
      int run = 0, longest = 0;
      for (int t = last_a + 1; t < first_b; ++t) {
        run = profile[t] == 0 ? run + 1 : 0;
        longest = std::max(longest, run);
      }
      if (longest <= 1) ++continuous;
    }
  }
  return continuous / 9.0;
}

struct Contact {
  std::vector<Vec3> midpoints;
};

}  // namespace

std::uint64_t exposed_faces(const LabelVolume& labels, std::uint32_t id) {
  const Shape s = labels.shape();
  std::uint64_t faces = 0;
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        if (labels(z, y, x) != id) continue;
        for (const auto& o : neighbor_offsets(Connectivity::Six))
          if (labels.get_or(z + o[0], y + o[1], x + o[2], 0u) != id) ++faces;
      }
  return faces;
}

std::vector<AdjacencyEdge> adjacency_edges(const LabelVolume& labels, double theta_mc, double theta_ms,
                                           double theta_mr) {
  const Shape s = labels.shape();
  std::map<std::uint32_t, InstanceStats> stats;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Contact> edges;
  static const auto half = half_neighborhood();

  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto id = labels(z, y, x);
        if (!id) continue;
        auto& st = stats[id];
        ++st.voxels;
        st.sum += Vec3(double(z), double(y), double(x));
        for (const auto& o : neighbor_offsets(Connectivity::Six))
          if (labels.get_or(z + o[0], y + o[1], x + o[2], 0u) != id) ++st.exposed;
        for (const auto& o : half) {
          const auto other = labels.get_or(z + o[0], y + o[1], x + o[2], 0u);
          if (other && other != id) edges.try_emplace(std::minmax(id, other));
        }
        // Axis-aligned contacts: face-adjacent, or across one background voxel.
        for (int axis = 0; axis < 3; ++axis) {
          std::array<std::int64_t, 3> step{0, 0, 0};
          step[axis] = 1;
          const auto n1 = labels.get_or(z + step[0], y + step[1], x + step[2], 0u);
          const Vec3 p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
          const Vec3 e{static_cast<double>(step[0]), static_cast<double>(step[1]), static_cast<double>(step[2])};
          if (n1 && n1 != id) {
            edges[std::minmax(id, n1)].midpoints.push_back(p + 0.5 * e);
          } else if (n1 == 0) {
            const auto n2 = labels.get_or(z + 2 * step[0], y + 2 * step[1], x + 2 * step[2], 0u);
            if (n2 && n2 != id) edges[std::minmax(id, n2)].midpoints.push_back(p + e);
          }
        }
      }

  std::vector<AdjacencyEdge> out;
  out.reserve(edges.size());
  for (const auto& [key, contact] : edges) {
    AdjacencyEdge e;
    e.a = key.first;
    e.b = key.second;
    const auto& pts = contact.midpoints;
    e.contact_faces = pts.size();
    if (!pts.empty()) {
      const auto& sa = stats.at(e.a);
      const auto& sb = stats.at(e.b);
      const double min_surface = static_cast<double>(std::min(sa.exposed, sb.exposed));
      e.f_r = std::min(1.0, static_cast<double>(pts.size()) / min_surface);

      Vec3 centre = Vec3::Zero();
      for (const auto& p : pts) centre += p;
      centre /= static_cast<double>(pts.size());
      Vec3 normal = sb.centroid() - sa.centroid();
      if (pts.size() >= 3) {
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& p : pts) cov += (p - centre) * (p - centre).transpose();
        cov /= static_cast<double>(pts.size());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        const double rms = std::sqrt(std::max(0.0, eig.eigenvalues()[0]));
        e.f_s = 1.0 - std::min(1.0, rms / 2.0);
        if (normal.norm() < 1e-9) normal = eig.eigenvectors().col(0);
      } else {
        e.f_s = 1.0;
      }
      if (normal.norm() < 1e-9) normal = Vec3(1, 0, 0);
      e.f_c = contour_continuity(labels, e.a, e.b, centre, normal, pts.size());
    }
    e.score = theta_mc * e.f_c + theta_ms * e.f_s + theta_mr * e.f_r;
    out.push_back(e);
  }
  return out;
}

LabelVolume merge_instances(const LabelVolume& labels, double theta_mc, double theta_ms, double theta_mr) {
  for (double w : {theta_mc, theta_ms, theta_mr}) {
    if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("merge weights must lie in [0,1]");
  }
  if (theta_mc == 0.0 && theta_ms == 0.0 && theta_mr == 0.0) return labels;

  const auto edges = adjacency_edges(labels, theta_mc, theta_ms, theta_mr);
  std::vector<std::uint32_t> parent(max_label(labels) + 1);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  bool any = false;
  for (const auto& e : edges) {
    if (e.score <= kMergeThreshold) continue;
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    parent[std::max(ra, rb)] = std::min(ra, rb);
    any = true;
  }
  if (!any) return labels;
  LabelVolume out(labels.shape(), labels.spacing(), 0u);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] ? find(labels[i]) : 0u;
  return out;
}

}  // namespace aop3d::postproc
