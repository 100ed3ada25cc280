#include "aop3d/segopt.hpp"

#include <fstream>

#include "aop3d/parallel.hpp"
#include "aop3d/volume_io.hpp"

namespace aop3d::segopt {

namespace fs = std::filesystem;

BenchmarkSet BenchmarkSet::from_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open benchmark manifest '" + manifest.string() + "'");
  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  BenchmarkSet b;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& img : j.at("images")) b.add_image(img.at("id").get<std::string>(), resolve(img.at("gt").get<std::string>()));
    for (const auto& [model, preds] : j.at("models").items()) {
      b.models_[model];
      for (const auto& [image, path] : preds.items()) b.add_prediction(model, image, resolve(path.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid benchmark manifest '" + manifest.string() + "': " + e.what());
  }
  if (b.images_.empty()) throw DatasetError("benchmark manifest lists no images");
  if (b.models_.empty()) throw DatasetError("benchmark manifest lists no models");
  return b;
}

void BenchmarkSet::add_image(const std::string& id, LabelVolume gt) {
  if (gt_.contains(id)) throw DatasetError("duplicate image id '" + id + "'");
  images_.push_back(id);
  gt_[id].volume = std::make_shared<const LabelVolume>(std::move(gt));
}

void BenchmarkSet::add_image(const std::string& id, const fs::path& gt) {
  if (gt_.contains(id)) throw DatasetError("duplicate image id '" + id + "'");
  images_.push_back(id);
  gt_[id].path = gt;
}

void BenchmarkSet::add_prediction(const std::string& model, const std::string& image, LabelVolume pred) {
  models_[model][image].volume = std::make_shared<const LabelVolume>(std::move(pred));
}

void BenchmarkSet::add_prediction(const std::string& model, const std::string& image, const fs::path& pred) {
  models_[model][image].path = pred;
}

std::vector<std::string> BenchmarkSet::models() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : models_) out.push_back(name);
  return out;
}

const LabelVolume& BenchmarkSet::load(const Entry& e, const std::string& what) const {
  std::lock_guard lock(*mutex_);
  if (!e.volume) {
    try {
      e.volume = std::make_shared<const LabelVolume>(read_labels(e.path));
    } catch (const Error& err) {
      throw DatasetError(what + ": " + err.what());
    }
  }
  return *e.volume;
}

const LabelVolume& BenchmarkSet::ground_truth(const std::string& image) const {
  auto it = gt_.find(image);
  if (it == gt_.end()) throw DatasetError("unknown image '" + image + "'");
  return load(it->second, "annotation for image '" + image + "'");
}

const LabelVolume& BenchmarkSet::prediction(const std::string& model, const std::string& image) const {
  const std::string what = "prediction of model '" + model + "' for image '" + image + "'";
  auto m = models_.find(model);
  if (m == models_.end()) throw DatasetError("unknown model '" + model + "'");
  auto it = m->second.find(image);
  if (it == m->second.end()) throw DatasetError("missing " + what);
  const auto& pred = load(it->second, what);
  require_same_shape(pred.shape(), ground_truth(image).shape(), what.c_str());
  return pred;
}

ConfigScore evaluate_config(const BenchmarkSet& bench, const std::string& model, const postproc::PostprocParams& params,
                            const metrics::EvalOptions& eval) {
  postproc::validate(params);
  if (!bench.has_model(model)) throw DatasetError("unknown model '" + model + "'");
  const auto& images = bench.images();
  if (images.empty()) throw DatasetError("benchmark has no images");
  ConfigScore s;
  s.per_image.resize(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    const auto& pred = bench.prediction(model, images[i]);
    s.per_image[i] = metrics::evaluate(postproc::apply_postprocessing(pred, params), bench.ground_truth(images[i]), eval);
  });
  auto mean = [&](double metrics::IpqReport::*field) {
    std::vector<double> v;
    for (const auto& r : s.per_image) v.push_back(r.*field);
    return compensated_sum(v) / static_cast<double>(v.size());
  };
  s.ipq = mean(&metrics::IpqReport::ipq);
  s.sq = mean(&metrics::IpqReport::sq);
  s.rq = mean(&metrics::IpqReport::rq);
  s.iq = mean(&metrics::IpqReport::iq);
  return s;
}

bo::SearchSpace segmentation_space(const std::vector<std::string>& models) {
  bo::SearchSpace s;
  s.add_categorical("model", models)
      .add_integer("theta_ed", -10, 10)
      .add_integer("theta_co", -5, 5)
      .add_continuous("theta_mc", 0, 1)
      .add_continuous("theta_ms", 0, 1)
      .add_continuous("theta_mr", 0, 1)
      .add_continuous("theta_ssigma", 0, 1)
      .add_continuous("theta_st", 0, 1);
  s.validate();
  return s;
}

postproc::PostprocParams params_from_config(const bo::SearchSpace& space, const bo::Config& c) {
  postproc::PostprocParams p;
  p.theta_ed = static_cast<int>(std::lround(c.at(space.index_of("theta_ed"))));
  p.theta_co = static_cast<int>(std::lround(c.at(space.index_of("theta_co"))));
  p.theta_mc = c.at(space.index_of("theta_mc"));
  p.theta_ms = c.at(space.index_of("theta_ms"));
  p.theta_mr = c.at(space.index_of("theta_mr"));
  p.theta_ssigma = c.at(space.index_of("theta_ssigma"));
  p.theta_st = c.at(space.index_of("theta_st"));
  return p;
}

SegOptResult optimize_segmentation(const BenchmarkSet& bench, const SegOptOptions& opts) {
  const auto models = bench.models();
  if (models.empty()) throw DatasetError("benchmark has no models");
  if (opts.budget < models.size()) throw ParameterError("budget must be at least the number of models");
  SegOptResult r;
  r.space = segmentation_space(models);
  const std::size_t model_dim = r.space.index_of("model");

  std::map<bo::Config, ConfigScore> cache;
  auto score = [&](const bo::Config& c) -> const ConfigScore& {
    auto it = cache.find(c);
    if (it == cache.end()) {
      const auto& model = models[static_cast<std::size_t>(c[model_dim])];
      it = cache.emplace(c, evaluate_config(bench, model, params_from_config(r.space, c), opts.eval)).first;
    }
    return it->second;
  };

  for (std::size_t m = 0; m < models.size(); ++m) {
    bo::Config zero(r.space.size(), 0.0);
    zero[model_dim] = static_cast<double>(m);
    r.baseline[models[m]] = score(zero).ipq;
    r.baseline_mean += r.baseline[models[m]] / static_cast<double>(models.size());
  }

  bo::OptimizeOptions bo_opts;
  bo_opts.budget = opts.budget;
  bo_opts.strategy = opts.strategy;
  bo_opts.seed = opts.seed;
  bo_opts.on_trial = opts.on_trial;
  r.trace = bo::optimize(r.space, [&](const bo::Config& c) { return score(c).ipq; }, bo_opts, opts.resume);
  const auto& best = r.trace.best_trial();
  r.model = models[static_cast<std::size_t>(best.config[model_dim])];
  r.params = params_from_config(r.space, best.config);
  r.best = score(best.config);
  r.distinct_evaluations = cache.size();
  return r;
}

nlohmann::ordered_json to_json(const SegOptResult& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["params"] = postproc::to_json(r.params);
  j["ipq"] = r.best.ipq;
  j["sq"] = r.best.sq;
  j["rq"] = r.best.rq;
  j["iq"] = r.best.iq;
  j["best_iteration"] = r.trace.best_trial().iteration;
  nlohmann::ordered_json base;
  base["mean_ipq"] = r.baseline_mean;
  base["models"] = nlohmann::ordered_json::object();
  for (const auto& [m, v] : r.baseline) base["models"][m] = v;
  j["baseline"] = base;
  j["strategy"] = bo::to_string(r.trace.strategy);
  j["seed"] = r.trace.seed;
  j["evaluations"] = r.trace.trials.size();
  j["distinct_evaluations"] = r.distinct_evaluations;
  return j;
}

}  // namespace aop3d::segopt
