#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "aop3d/metrics.hpp"
#include "aop3d/optimizer.hpp"
#include "aop3d/postproc.hpp"

namespace aop3d::segopt {

// Annotated images plus per-model predictions. Entries are either in memory
// or file paths that are loaded once on first use and then cached.
class BenchmarkSet {
 public:
  // {"images":[{"id":..,"gt":path}], "models":{"name":{"<image id>":path}}};
  // relative paths resolve against the manifest's directory.
  static BenchmarkSet from_manifest(const std::filesystem::path& manifest);

  void add_image(const std::string& id, LabelVolume gt);
  void add_image(const std::string& id, const std::filesystem::path& gt);
  void add_prediction(const std::string& model, const std::string& image, LabelVolume pred);
  void add_prediction(const std::string& model, const std::string& image, const std::filesystem::path& pred);

  const std::vector<std::string>& images() const { return images_; }
  std::vector<std::string> models() const;  // sorted by name
  bool has_model(const std::string& model) const { return models_.contains(model); }

  const LabelVolume& ground_truth(const std::string& image) const;
  // Throws DatasetError naming (model, image) when the prediction is absent
  // or unreadable, DimensionError when it does not match the annotation.
  const LabelVolume& prediction(const std::string& model, const std::string& image) const;

 private:
  struct Entry {
    std::filesystem::path path;
    mutable std::shared_ptr<const LabelVolume> volume;
  };
  const LabelVolume& load(const Entry& e, const std::string& what) const;

  std::vector<std::string> images_;
  std::map<std::string, Entry> gt_;
  std::map<std::string, std::map<std::string, Entry>> models_;
  mutable std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

struct ConfigScore {
  double ipq = 0, sq = 0, rq = 0, iq = 0;  // means over images
  std::vector<metrics::IpqReport> per_image;
};

ConfigScore evaluate_config(const BenchmarkSet& bench, const std::string& model, const postproc::PostprocParams& params,
                            const metrics::EvalOptions& eval = {});

// model (categorical) x theta_ed int[-10,10] x theta_co int[-5,5] x the five
// continuous parameters in [0,1].
bo::SearchSpace segmentation_space(const std::vector<std::string>& models);
postproc::PostprocParams params_from_config(const bo::SearchSpace& space, const bo::Config& c);

struct SegOptOptions {
  metrics::EvalOptions eval;
  std::size_t budget = 120;
  bo::Strategy strategy = bo::Strategy::Bayes;
  std::uint64_t seed = 0;
  std::vector<bo::Trial> resume;
  std::function<void(const bo::Trial&)> on_trial;
};

struct SegOptResult {
  std::string model;
  postproc::PostprocParams params;
  ConfigScore best;
  std::map<std::string, double> baseline;  // zero-parameter mean IPQ per model
  double baseline_mean = 0;                // mean over models
  bo::SearchSpace space;
  bo::Trace trace;
  std::size_t distinct_evaluations = 0;
};

SegOptResult optimize_segmentation(const BenchmarkSet& bench, const SegOptOptions& opts);

nlohmann::ordered_json to_json(const SegOptResult& r);

}  // namespace aop3d::segopt
