#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aop3d/volume.hpp"
#include "json.hpp"

namespace aop3d::metrics {

// Voxel counts per instance and per overlapping (pred, gt) pair.
struct OverlapTable {
  std::map<std::uint32_t, std::uint64_t> pred_size;
  std::map<std::uint32_t, std::uint64_t> gt_size;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> overlap;  // (pred, gt) -> voxels
};

OverlapTable count_overlaps(const LabelVolume& pred, const LabelVolume& gt);

struct MatchResult {
  double tau = 0.5;
  // Every annotation id, with the ascending predicted ids assigned to it.
  std::map<std::uint32_t, std::vector<std::uint32_t>> groups;
  std::set<std::uint32_t> tp;  // annotation ids
  std::set<std::uint32_t> fp;  // predicted ids
  std::set<std::uint32_t> fn;  // annotation ids
  std::map<std::uint32_t, double> union_iou;
  OverlapTable overlaps;
};

// Each predicted instance goes to the annotation it overlaps most (ties to
// the lower annotation id). An annotation is a TP when the union of its
// assigned predictions has IoU > tau with it; otherwise it is a FN and its
// predictions become FPs. Predictions without any overlap are FPs.
MatchResult match_instances(const LabelVolume& pred, const LabelVolume& gt, double tau = 0.5);
MatchResult match_instances(OverlapTable overlaps, double tau = 0.5);

struct IpqWeights {
  double k1 = 1.0;
  double k2 = 1.0;
  double k3 = 1.0;
};

// How the splitting penalty sums its denominator:
//  MatchedPredictions: over predictions of TP groups, each adding max(1, n-1)
//                      with n its group size;
//  PerAnnotation:      over annotations, each adding max(1, n_g-1).
enum class IqMode { MatchedPredictions, PerAnnotation };

std::string to_string(IqMode m);
IqMode iq_mode_from_string(const std::string& s);

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, gt = 0, pred = 0;
};

struct IpqReport {
  double sq = 0, rq = 0, iq = 0, ipq = 0, pq = 0;
  Counts counts;
  IqMode iq_mode = IqMode::MatchedPredictions;
  IpqWeights k;
};

// PQ field is filled from the overlap table at max(tau, 0.5).
IpqReport compute_ipq(const MatchResult& m, const IpqWeights& k = {}, IqMode mode = IqMode::MatchedPredictions);

struct PqReport {
  double pq = 0, sq = 0, rq = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Standard one-to-one panoptic quality; tau must be >= 0.5.
PqReport compute_pq(const LabelVolume& pred, const LabelVolume& gt, double tau = 0.5);
PqReport compute_pq(const OverlapTable& overlaps, double tau = 0.5);

struct EvalOptions {
  double tau = 0.5;
  IpqWeights k;
  IqMode mode = IqMode::MatchedPredictions;
};

IpqReport evaluate(const LabelVolume& pred, const LabelVolume& gt, const EvalOptions& opts = {});

nlohmann::ordered_json to_json(const IpqReport& r);

void validate(const IpqWeights& k);

}  // namespace aop3d::metrics
