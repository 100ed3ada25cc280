#include "aop3d/metrics.hpp"

#include <algorithm>
#include <unordered_map>

namespace aop3d::metrics {

namespace {

double iou(std::uint64_t inter, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t uni = a + b - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

OverlapTable count_overlaps(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_shape(pred.shape(), gt.shape(), "match_instances");
  std::unordered_map<std::uint64_t, std::uint64_t> pairs;
  std::unordered_map<std::uint32_t, std::uint64_t> ps, gs;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = pred[i], g = gt[i];
    if (p) ++ps[p];
    if (g) ++gs[g];
    if (p && g) ++pairs[(std::uint64_t(p) << 32) | g];
  }
  OverlapTable t;
  t.pred_size.insert(ps.begin(), ps.end());
  t.gt_size.insert(gs.begin(), gs.end());
  for (const auto& [key, n] : pairs) {
    t.overlap.emplace(std::make_pair(static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key)), n);
  }
  return t;
}

MatchResult match_instances(const LabelVolume& pred, const LabelVolume& gt, double tau) {
  return match_instances(count_overlaps(pred, gt), tau);
}

MatchResult match_instances(OverlapTable overlaps, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw ParameterError("IoU threshold tau must be in [0,1), got " + std::to_string(tau));
  MatchResult m;
  m.tau = tau;
  for (const auto& [g, n] : overlaps.gt_size) m.groups[g];

  // Overlap map is ordered by (pred, gt), so each prediction's candidates are
  // contiguous with ascending gt; strict '>' keeps the lower gt on ties.
  std::map<std::uint32_t, std::uint32_t> assigned;
  for (const auto& [key, n] : overlaps.overlap) {
    const auto [p, g] = key;
    auto it = assigned.find(p);
    if (it == assigned.end() || n > overlaps.overlap.at({p, it->second})) assigned[p] = g;
  }
  for (const auto& [p, n] : overlaps.pred_size) {
    auto it = assigned.find(p);
    if (it == assigned.end()) {
      m.fp.insert(p);
    } else {
      m.groups[it->second].push_back(p);
    }
  }
  for (auto& [g, preds] : m.groups) {
    std::uint64_t inter = 0, usize = 0;
    for (auto p : preds) {
      inter += overlaps.overlap.at({p, g});
      usize += overlaps.pred_size.at(p);
    }
    const double u = iou(inter, usize, overlaps.gt_size.at(g));
    m.union_iou[g] = u;
    if (!preds.empty() && u > tau) {
      m.tp.insert(g);
    } else {
      m.fn.insert(g);
      m.fp.insert(preds.begin(), preds.end());
    }
  }
  m.overlaps = std::move(overlaps);
  return m;
}

std::string to_string(IqMode m) {
  return m == IqMode::MatchedPredictions ? "matched-predictions" : "per-annotation";
}

IqMode iq_mode_from_string(const std::string& s) {
  if (s == "matched-predictions") return IqMode::MatchedPredictions;
  if (s == "per-annotation") return IqMode::PerAnnotation;
  throw ParameterError("unknown IQ mode '" + s + "' (expected matched-predictions or per-annotation)");
}

void validate(const IpqWeights& k) {
  for (double v : {k.k1, k.k2, k.k3}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("IPQ weights must lie in [0,1]");
  }
}

IpqReport compute_ipq(const MatchResult& m, const IpqWeights& k, IqMode mode) {
  validate(k);
  IpqReport r;
  r.k = k;
  r.iq_mode = mode;
  r.counts.tp = m.tp.size();
  r.counts.fp = m.fp.size();
  r.counts.fn = m.fn.size();
  r.counts.gt = m.overlaps.gt_size.size();
  r.counts.pred = m.overlaps.pred_size.size();

  if (r.counts.gt == 0) {
    r.sq = 1.0;
    r.iq = 1.0;
    r.rq = r.counts.pred == 0 ? 1.0 : 0.0;
  } else {
    double iou_sum = 0.0;
    for (auto g : m.tp) iou_sum += m.union_iou.at(g);
    r.sq = m.tp.empty() ? 0.0 : iou_sum / static_cast<double>(m.tp.size());
    const double denom = r.counts.tp + 0.5 * r.counts.fp + 0.5 * r.counts.fn;
    r.rq = denom == 0.0 ? 0.0 : r.counts.tp / denom;

    double iq_denom = 0.0;
    if (mode == IqMode::MatchedPredictions) {
      for (auto g : m.tp) {
        const double n = static_cast<double>(m.groups.at(g).size());
        iq_denom += n * std::max(1.0, n - 1.0);
      }
    } else {
      for (const auto& [g, preds] : m.groups) iq_denom += std::max(1.0, static_cast<double>(preds.size()) - 1.0);
    }
    // No TP groups means no splitting to penalize; RQ already carries the miss.
    r.iq = iq_denom == 0.0 ? 1.0 : std::min(1.0, static_cast<double>(r.counts.gt) / iq_denom);
  }
  r.ipq = (k.k1 * r.sq) * (k.k2 * r.rq) * (k.k3 * r.iq);
  r.pq = compute_pq(m.overlaps, std::max(m.tau, 0.5)).pq;
  return r;
}

PqReport compute_pq(const LabelVolume& pred, const LabelVolume& gt, double tau) {
  return compute_pq(count_overlaps(pred, gt), tau);
}

PqReport compute_pq(const OverlapTable& t, double tau) {
  if (!(tau >= 0.5 && tau < 1.0)) throw ParameterError("PQ threshold must be in [0.5,1), got " + std::to_string(tau));
  PqReport r;
  double iou_sum = 0.0;
  std::set<std::uint32_t> matched_p, matched_g;
  for (const auto& [key, n] : t.overlap) {
    const double v = iou(n, t.pred_size.at(key.first), t.gt_size.at(key.second));
    if (v > tau) {
      iou_sum += v;
      matched_p.insert(key.first);
      matched_g.insert(key.second);
    }
  }
  r.tp = matched_g.size();
  r.fp = t.pred_size.size() - matched_p.size();
  r.fn = t.gt_size.size() - matched_g.size();
  if (t.gt_size.empty() && t.pred_size.empty()) {
    r.pq = r.sq = r.rq = 1.0;
    return r;
  }
  const double denom = r.tp + 0.5 * r.fp + 0.5 * r.fn;
  r.sq = r.tp == 0 ? 0.0 : iou_sum / static_cast<double>(r.tp);
  r.rq = r.tp / denom;
  r.pq = iou_sum / denom;
  return r;
}

IpqReport evaluate(const LabelVolume& pred, const LabelVolume& gt, const EvalOptions& opts) {
  return compute_ipq(match_instances(pred, gt, opts.tau), opts.k, opts.mode);
}

nlohmann::ordered_json to_json(const IpqReport& r) {
  nlohmann::ordered_json j;
  j["sq"] = r.sq;
  j["rq"] = r.rq;
  j["iq"] = r.iq;
  j["ipq"] = r.ipq;
  j["pq"] = r.pq;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"gt", r.counts.gt},
                 {"pred", r.counts.pred}};
  j["iq_mode"] = to_string(r.iq_mode);
  j["k"] = {r.k.k1, r.k.k2, r.k.k3};
  return j;
}

}  // namespace aop3d::metrics
