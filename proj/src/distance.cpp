#include "aop3d/distance.hpp"

#include <cmath>
#include <limits>

namespace aop3d {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform of sampled function f (Felzenszwalb &
// Huttenlocher 2012). f may contain +inf.
void edt_1d(const double* f, double* d, std::int64_t n, std::vector<std::int64_t>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const std::int64_t p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k]) {
        if (--k < 0) break;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (std::int64_t q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = double(q - v[j]);
    d[q] = dq * dq + f[v[j]];
  }
}

struct Cell {
  std::int64_t d2;
  std::uint32_t label;
};

constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max() / 4;

// One windowed pass along `axis`: out(p) = min over |t| <= r of in(p + t e_axis) + t^2,
// ties to the lower label.
void window_pass(const std::vector<Cell>& in, std::vector<Cell>& out, const Shape& s, int axis, std::int64_t r) {
  const std::int64_t n = s[axis];
  const std::int64_t stride = axis == 0 ? s.y * s.x : (axis == 1 ? s.x : 1);
  const std::int64_t outer_a = axis == 0 ? s.y : s.z;
  const std::int64_t outer_b = axis == 2 ? s.y : s.x;
  for (std::int64_t a = 0; a < outer_a; ++a) {
    for (std::int64_t b = 0; b < outer_b; ++b) {
      std::int64_t base;
      if (axis == 0) base = a * s.x + b;
      else if (axis == 1) base = a * s.y * s.x + b;
      else base = (a * s.y + b) * s.x;
      bool any = false;
      for (std::int64_t t = 0; t < n; ++t) {
        if (in[base + t * stride].label != 0) {
          any = true;
          break;
        }
      }
      if (!any) {
        for (std::int64_t t = 0; t < n; ++t) out[base + t * stride] = {kFar, 0};
        continue;
      }
      for (std::int64_t t = 0; t < n; ++t) {
        Cell best{kFar, 0};
        const std::int64_t lo = std::max<std::int64_t>(0, t - r), hi = std::min<std::int64_t>(n - 1, t + r);
        for (std::int64_t u = lo; u <= hi; ++u) {
          const Cell& c = in[base + u * stride];
          if (c.label == 0) continue;
          const std::int64_t d2 = c.d2 + (u - t) * (u - t);
          if (d2 < best.d2 || (d2 == best.d2 && c.label < best.label)) best = {d2, c.label};
        }
        out[base + t * stride] = best;
      }
    }
  }
}

}  // namespace

Mask foreground_mask(const LabelVolume& labels) {
  Mask m(labels.shape(), labels.spacing(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] != 0;
  return m;
}

Mask instance_mask(const LabelVolume& labels, std::uint32_t id) {
  Mask m(labels.shape(), labels.spacing(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == id;
  return m;
}

std::vector<double> squared_distance_transform(const Mask& sites) {
  const Shape s = sites.shape();
  std::vector<double> d(s.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = sites[i] ? 0.0 : kInf;
  std::vector<std::int64_t> v;
  std::vector<double> z;
  const std::int64_t longest = std::max({s.z, s.y, s.x});
  std::vector<double> fbuf(longest), dbuf(longest);
  for (int axis = 2; axis >= 0; --axis) {
    const std::int64_t n = s[axis];
    const std::int64_t stride = axis == 0 ? s.y * s.x : (axis == 1 ? s.x : 1);
    for (std::size_t start = 0; start < d.size(); ++start) {
      // Visit each line once via its first element.
      const std::int64_t coord = (static_cast<std::int64_t>(start) / stride) % n;
      if (coord != 0) continue;
      for (std::int64_t t = 0; t < n; ++t) fbuf[t] = d[start + t * stride];
      edt_1d(fbuf.data(), dbuf.data(), n, v, z);
      for (std::int64_t t = 0; t < n; ++t) d[start + t * stride] = dbuf[t];
    }
  }
  return d;
}

LabelVolume nearest_labels(const LabelVolume& sites, std::int64_t max_d2, std::vector<std::int64_t>* d2_out) {
  const Shape s = sites.shape();
  const std::int64_t r = max_d2 < 0 ? -1 : static_cast<std::int64_t>(std::floor(std::sqrt(double(max_d2)) + 1e-9));
  std::vector<Cell> a(s.size()), b(s.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = sites[i] ? Cell{0, sites[i]} : Cell{kFar, 0};
  LabelVolume out(s, sites.spacing(), 0u);
  if (d2_out) d2_out->assign(s.size(), -1);
  if (r < 0) return out;
  window_pass(a, b, s, 2, r);
  window_pass(b, a, s, 1, r);
  window_pass(a, b, s, 0, r);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i].label != 0 && b[i].d2 <= max_d2) {
      out[i] = b[i].label;
      if (d2_out) (*d2_out)[i] = b[i].d2;
    }
  }
  return out;
}

Mask dilate(const Mask& m, int radius) {
  if (radius <= 0) return m;
  LabelVolume sites(m.shape(), m.spacing(), 0u);
  for (std::size_t i = 0; i < m.size(); ++i) sites[i] = m[i] ? 1u : 0u;
  const LabelVolume near = nearest_labels(sites, std::int64_t(radius) * radius);
  Mask out(m.shape(), m.spacing(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = near[i] != 0;
  return out;
}

Mask erode(const Mask& m, int radius) {
  if (radius <= 0) return m;
  Mask background(m.shape(), m.spacing(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) background[i] = !m[i];
  const Mask grown = dilate(background, radius);
  Mask out(m.shape(), m.spacing(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] && !grown[i];
  return out;
}

Mask open(const Mask& m, int radius) { return dilate(erode(m, radius), radius); }

Mask close(const Mask& m, int radius) { return erode(dilate(m, radius), radius); }

}  // namespace aop3d
