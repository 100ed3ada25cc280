#include "aop3d/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "aop3d/annoserve.hpp"
#include "aop3d/design.hpp"
#include "aop3d/instances.hpp"
#include "aop3d/metrics.hpp"
#include "aop3d/postproc.hpp"
#include "aop3d/segopt.hpp"
#include "aop3d/semisup.hpp"
#include "aop3d/synthgen.hpp"
#include "aop3d/tiff.hpp"
#include "aop3d/volume_io.hpp"

namespace aop3d::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVolumeFormat =
    "Volumes are .i3d files: magic \"I3DVOL\\0\\1\", u32 little-endian header length, JSON header "
    "{dtype, shape [z,y,x], spacing, kind}, then the little-endian C-order payload.";

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void emit(const ordered_json& j, const std::string& path = "") {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

struct EvalFlags {
  double tau = 0.5;
  double k1 = 1, k2 = 1, k3 = 1;
  std::string iq_mode = "matched-predictions";

  void add(CLI::App* app) {
    app->add_option("--tau", tau, "IoU threshold in [0,1)")->capture_default_str();
    app->add_option("--k1", k1, "segmentation-quality exponent")->capture_default_str();
    app->add_option("--k2", k2, "recognition-quality exponent")->capture_default_str();
    app->add_option("--k3", k3, "injective-quality exponent")->capture_default_str();
    app->add_option("--iq-mode", iq_mode, "splitting penalty: matched-predictions | per-annotation")->capture_default_str();
  }
  metrics::EvalOptions options() const {
    metrics::EvalOptions o;
    o.tau = tau;
    o.k = {k1, k2, k3};
    o.mode = metrics::iq_mode_from_string(iq_mode);
    return o;
  }
};

annoserve::AnnotationService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Segmentation postprocessing optimization and assisted annotation for 3D microscopy volumes"};
  app.require_subcommand(1);
  app.footer(kVolumeFormat);
  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom (intensity + labels)");
  std::string synth_config, synth_image, synth_labels;
  std::uint64_t seed = 0;
  std::optional<int> synth_count;
  std::vector<std::int64_t> synth_shape;
  synth->add_option("--config", synth_config,
                    "generator JSON: shape, spacing, count, radius [min,max], axis_ratio [min,max], min_gap, "
                    "intensity {base, noise_sigma, blur_sigma}");
  synth->add_option("--seed", seed, "random seed")->required();
  synth->add_option("--count", synth_count, "number of instances (overrides config)");
  synth->add_option("--shape", synth_shape, "z y x (overrides config)")->expected(3);
  synth->add_option("--image", synth_image, "output intensity .i3d")->required();
  synth->add_option("--labels", synth_labels, "output label .i3d")->required();
  synth->callback([&] {
    action = [&] {
      auto cfg = synth_config.empty() ? synth::SynthConfig{} : synth::config_from_json(read_json_file(synth_config));
      cfg.seed = seed;
      if (synth_count) cfg.count = *synth_count;
      if (!synth_shape.empty()) cfg.shape = {synth_shape[0], synth_shape[1], synth_shape[2]};
      const auto b = synth::generate_benchmark(cfg);
      write_volume(b.image, synth_image);
      write_volume(b.labels, synth_labels);
      ordered_json j;
      j["instances"] = max_label(b.labels);
      j["shape"] = {cfg.shape.z, cfg.shape.y, cfg.shape.x};
      j["seed"] = seed;
      emit(j);
    };
  });

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Apply corruption operators to a label volume");
  std::string corrupt_in, corrupt_ops, corrupt_out;
  corrupt->add_option("--in", corrupt_in, "input label .i3d")->required();
  corrupt->add_option("--ops", corrupt_ops,
                      "operator JSON: {\"ops\":[{\"op\":\"dilate\",\"radius\":2}, {\"op\":\"split_plane\",\"fraction\":0.5,"
                      "\"axis\":\"z\"}, ...]}; ops: dilate, erode, split_plane, merge_adjacent, hallucinate, drop")
      ->required();
  corrupt->add_option("--seed", seed, "random seed")->required();
  corrupt->add_option("--out", corrupt_out, "output label .i3d")->required();
  corrupt->callback([&] {
    action = [&] {
      auto spec = synth::corruption_from_json(read_json_file(corrupt_ops));
      spec.seed = seed;
      const auto out = synth::corrupt_labels(read_labels(corrupt_in), spec);
      write_volume(out, corrupt_out);
      emit(ordered_json{{"instances", max_label(out)}, {"seed", seed}});
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Score a predicted label volume against annotations (IPQ JSON on stdout)");
  std::string eval_pred, eval_gt;
  EvalFlags eval_flags;
  eval->add_option("--pred", eval_pred, "predicted label .i3d")->required();
  eval->add_option("--gt", eval_gt, "annotation label .i3d")->required();
  eval_flags.add(eval);
  eval->callback([&] {
    action = [&] {
      const auto pred = read_labels(eval_pred);
      const auto gt = read_labels(eval_gt);
      require_same_shape(pred.shape(), gt.shape(), "eval (pred vs gt)");
      emit(metrics::to_json(metrics::evaluate(pred, gt, eval_flags.options())));
    };
  });

  // postprocess
  auto* post = app.add_subcommand("postprocess", "Apply morphology, merging and splitting to a label volume");
  std::string post_in, post_out, post_params;
  postproc::PostprocParams pp;
  post->add_option("--in", post_in, "input label .i3d")->required();
  post->add_option("--out", post_out, "output label .i3d")->required();
  post->add_option("--params", post_params,
                   "parameter JSON {theta_ed, theta_co, theta_mc, theta_ms, theta_mr, theta_ssigma, theta_st}; "
                   "flags below override it");
  auto* o_ed = post->add_option("--theta-ed", pp.theta_ed, "erosion (<0) / dilation (>0) radius, [-10,10]");
  auto* o_co = post->add_option("--theta-co", pp.theta_co, "opening (<0) / closing (>0) radius, [-5,5]");
  auto* o_mc = post->add_option("--theta-mc", pp.theta_mc, "merge weight, contour continuity, [0,1]");
  auto* o_ms = post->add_option("--theta-ms", pp.theta_ms, "merge weight, contact smoothness, [0,1]");
  auto* o_mr = post->add_option("--theta-mr", pp.theta_mr, "merge weight, relative contact area, [0,1]");
  auto* o_ss = post->add_option("--theta-ssigma", pp.theta_ssigma, "split smoothing, [0,1]");
  auto* o_st = post->add_option("--theta-st", pp.theta_st, "split marker quantile, [0,1]");
  post->callback([&] {
    action = [&] {
      auto p = post_params.empty() ? postproc::PostprocParams{} : postproc::params_from_json(read_json_file(post_params));
      if (o_ed->count()) p.theta_ed = pp.theta_ed;
      if (o_co->count()) p.theta_co = pp.theta_co;
      if (o_mc->count()) p.theta_mc = pp.theta_mc;
      if (o_ms->count()) p.theta_ms = pp.theta_ms;
      if (o_mr->count()) p.theta_mr = pp.theta_mr;
      if (o_ss->count()) p.theta_ssigma = pp.theta_ssigma;
      if (o_st->count()) p.theta_st = pp.theta_st;
      const auto out = postproc::apply_postprocessing(read_labels(post_in), p);
      write_volume(out, post_out);
      emit(ordered_json{{"instances", max_label(out)}, {"params", postproc::to_json(p)}});
    };
  });

  // optimize-seg
  auto* oseg = app.add_subcommand("optimize-seg", "Jointly optimize model choice and postprocessing parameters");
  std::string oseg_bench, oseg_out, oseg_trace = "trace.jsonl", oseg_strategy = "bayes";
  std::size_t oseg_budget = 120;
  bool oseg_resume = false;
  EvalFlags oseg_flags;
  oseg->add_option("--bench", oseg_bench,
                   "manifest JSON {\"images\":[{\"id\",\"gt\"}], \"models\":{\"name\":{\"<image id>\":path}}}")
      ->required();
  oseg->add_option("--budget", oseg_budget, "objective evaluations")->capture_default_str();
  oseg->add_option("--strategy", oseg_strategy, "bayes | random")->capture_default_str();
  oseg->add_option("--seed", seed, "random seed")->required();
  oseg->add_option("--out", oseg_out, "result JSON (stdout if omitted)");
  oseg->add_option("--trace", oseg_trace, "trace JSON-lines, one trial per line")->capture_default_str();
  oseg->add_flag("--resume", oseg_resume, "continue from the trials already in --trace");
  oseg_flags.add(oseg);
  oseg->callback([&] {
    action = [&] {
      const auto bench = segopt::BenchmarkSet::from_manifest(oseg_bench);
      segopt::SegOptOptions o;
      o.eval = oseg_flags.options();
      o.budget = oseg_budget;
      o.strategy = bo::strategy_from_string(oseg_strategy);
      o.seed = seed;
      const auto space = segopt::segmentation_space(bench.models());
      if (oseg_resume && fs::exists(oseg_trace)) {
        o.resume = bo::read_trace(space, oseg_trace);
        std::ofstream rewrite = open_out(oseg_trace);
        bo::write_trace(space, o.resume, rewrite);
      } else {
        open_out(oseg_trace);
      }
      o.on_trial = [&](const bo::Trial& t) {
        bo::append_trial(space, t, oseg_trace);
        std::cerr << "trial " << t.iteration << ": "
                  << (t.objective ? std::to_string(*t.objective) : "failed: " + t.error) << '\n';
      };
      const auto r = segopt::optimize_segmentation(bench, o);
      auto j = segopt::to_json(r);
      j["trace"] = oseg_trace;
      emit(j, oseg_out);
    };
  });

  // extract
  auto* extract = app.add_subcommand("extract", "Extract per-instance crops to crops/<image>/<id>/");
  std::string ex_labels, ex_image, ex_id, ex_out;
  int ex_margin = instances::kDefaultMargin;
  extract->add_option("--labels", ex_labels, "label .i3d")->required();
  extract->add_option("--image", ex_image, "intensity .i3d")->required();
  extract->add_option("--image-id", ex_id, "image id (defaults to the label file stem)");
  extract->add_option("--margin", ex_margin, "voxels added around each bounding box")->capture_default_str();
  extract->add_option("--out", ex_out, "crop root directory; each crop gets intensity.i3d, mask.i3d, meta.json")
      ->required();
  extract->callback([&] {
    action = [&] {
      const std::string id = ex_id.empty() ? fs::path(ex_labels).stem().string() : ex_id;
      const auto crops = instances::extract_instances(read_labels(ex_labels), read_intensity(ex_image), ex_margin, id);
      for (const auto& c : crops) {
        const auto f = instances::geometric_features(c);
        instances::save_crop(c, ex_out, &f);
      }
      emit(ordered_json{{"image", id}, {"crops", crops.size()}});
    };
  });

  // features
  auto* feats = app.add_subcommand("features", "Write the geometric feature table of all crops as CSV");
  std::string ft_crops, ft_out;
  feats->add_option("--crops", ft_crops, "crop root directory")->required();
  feats->add_option("--out", ft_out, "CSV path (stdout if omitted); columns: image,id,volume,surface,extent_z,"
                                     "extent_y,extent_x,axis_major,axis_middle,axis_minor,elongation,sphericity,"
                                     "centroid_z,centroid_y,centroid_x,mean_intensity,std_intensity");
  feats->callback([&] {
    action = [&] {
      const auto crops = instances::load_crops(ft_crops);
      if (ft_out.empty()) {
        instances::write_features_csv(crops, std::cout);
      } else {
        auto out = open_out(ft_out);
        instances::write_features_csv(crops, out);
      }
    };
  });

  // label-spread
  auto* spread = app.add_subcommand("label-spread", "Assign pseudo-labels from operator seeds");
  std::string ls_features, ls_seeds, ls_out;
  double ls_variance = 0.95;
  semisup::SpreadOptions ls_opts;
  std::optional<double> ls_gamma;
  spread->add_option("--features", ls_features, "features CSV from `features`")->required();
  spread->add_option("--seeds", ls_seeds, "seeds JSON {\"labels\":{\"<image>/<id>\":classId}}")->required();
  spread->add_option("--out", ls_out, "pseudo-label CSV: image,id,label,confidence,seeded,unreachable")->required();
  spread->add_option("--variance", ls_variance, "PCA variance to keep, (0,1]")->capture_default_str();
  spread->add_option("--alpha", ls_opts.alpha, "propagation weight, (0,1)")->capture_default_str();
  spread->add_option("--gamma", ls_gamma, "RBF width (default 1/(2 median^2))");
  spread->add_option("--iters", ls_opts.max_iter, "maximum iterations")->capture_default_str();
  spread->add_option("--tol", ls_opts.tol, "stop when max change < tol")->capture_default_str();
  spread->callback([&] {
    action = [&] {
      std::ifstream fin(ls_features);
      if (!fin) throw IoError("cannot open '" + ls_features + "'");
      const auto table = instances::read_features_csv(fin);
      std::ifstream sin(ls_seeds);
      if (!sin) throw IoError("cannot open '" + ls_seeds + "'");
      std::vector<int> class_ids;
      const auto seeds = semisup::resolve_seeds(semisup::read_seeds(sin), table.keys, class_ids);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(table.rows.size()),
                        table.rows.empty() ? 0 : static_cast<Eigen::Index>(table.rows[0].size()));
      for (std::size_t i = 0; i < table.rows.size(); ++i)
        for (std::size_t k = 0; k < table.rows[i].size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.rows[i][k];
      const auto reduced = semisup::pca_reduce(x, ls_variance);
      ls_opts.gamma = ls_gamma;
      const auto r = semisup::label_spread(reduced.x, seeds, ls_opts);
      auto out = open_out(ls_out);
      semisup::write_pseudo_labels(table.keys, r, seeds, class_ids, out);
      ordered_json j;
      j["points"] = table.keys.size();
      j["dims"] = reduced.x.cols();
      j["retained"] = reduced.retained;
      j["gamma"] = r.gamma;
      j["iterations"] = r.iterations;
      j["unreachable"] = std::count(r.unreachable.begin(), r.unreachable.end(), true);
      emit(j);
    };
  });

  // annotate
  auto* anno = app.add_subcommand("annotate", "Serve crops for assisted annotation over HTTP");
  std::string an_host = "127.0.0.1", an_crops, an_classes, an_labels, an_static;
  int an_port = 8080;
  double an_sigma = 1.0;
  anno->add_option("--port", an_port, "TCP port (0 picks a free one)")->capture_default_str();
  anno->add_option("--host", an_host, "bind address")->capture_default_str();
  anno->add_option("--crops", an_crops, "crop root directory from `extract`")->required();
  anno->add_option("--classes", an_classes,
                   "comma-separated class names (ids 1..n, hotkeys 1..9) or a JSON file [{\"id\",\"name\",\"hotkey\"}]")
      ->required();
  anno->add_option("--labels-out", an_labels, "append-only JSON-lines label log (replayed on start)")->required();
  anno->add_option("--static", an_static, "directory served at /");
  anno->add_option("--sigma", an_sigma, "default sigma for mode=distance")->capture_default_str();
  anno->callback([&] {
    action = [&] {
      annoserve::SessionConfig cfg;
      cfg.crops = an_crops;
      cfg.classes = annoserve::parse_classes(an_classes);
      cfg.labels_out = an_labels;
      if (!an_static.empty()) cfg.static_dir = an_static;
      cfg.distance_sigma = an_sigma;
      annoserve::AnnotationService service(cfg);
      const int port = service.bind(an_host, an_port);
      std::cerr << "serving on http://" << an_host << ":" << port << '\n';
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.serve();
      g_service = nullptr;
    };
  });

  // optimize-design
  auto* odes = app.add_subcommand("optimize-design", "Random-forest BO over a discrete design space with an external objective");
  std::string od_spec, od_trace, od_out;
  std::optional<std::size_t> od_budget;
  odes->add_option("--spec", od_spec,
                   "design JSON {\"dims\":{\"name\":[choices]}, \"command\":\"... {config} ...\", \"budget\":N}; the "
                   "command reads the config JSON at {config} and prints {\"objective\": number} as its last line")
      ->required();
  odes->add_option("--budget", od_budget, "evaluations (overrides the design file)");
  odes->add_option("--seed", seed, "random seed")->required();
  odes->add_option("--trace", od_trace, "trace JSON-lines output");
  odes->add_option("--out", od_out, "result JSON (stdout if omitted)");
  int design_status = 0;
  odes->callback([&] {
    action = [&] {
      auto spec = design::read_spec(od_spec);
      spec.seed = seed;
      if (od_budget) spec.budget = *od_budget;
      const auto space = design::design_space(spec);
      if (!od_trace.empty()) open_out(od_trace);
      const auto trace = design::optimize_design(spec, [&](const bo::Trial& t) {
        if (!od_trace.empty()) bo::append_trial(space, t, od_trace);
        std::cerr << "trial " << t.iteration << ": "
                  << (t.objective ? std::to_string(*t.objective) : "failed: " + t.error) << '\n';
      });
      ordered_json j;
      j["best"] = nullptr;
      if (trace.best) {
        const auto& b = trace.best_trial();
        j["best"] = {{"iteration", b.iteration}, {"config", space.config_to_json(b.config)}, {"objective", *b.objective}};
      }
      j["trials"] = trace.trials.size();
      j["failed"] = std::count_if(trace.trials.begin(), trace.trials.end(), [](const bo::Trial& t) { return !t.objective; });
      j["seed"] = seed;
      emit(j, od_out);
      if (!trace.best) {
        std::cerr << "error: every trial failed\n";
        design_status = 1;
      }
    };
  });

  // import-tiff
  auto* tiff = app.add_subcommand("import-tiff", "Convert an uncompressed 8/16-bit grayscale (multi-page) TIFF to .i3d");
  std::string tf_in, tf_out;
  tiff->add_option("--in", tf_in, "TIFF file; one page per z slice")->required();
  tiff->add_option("--out", tf_out, "output intensity .i3d")->required();
  tiff->callback([&] {
    action = [&] {
      const auto v = import_tiff(tf_in);
      write_volume(v, tf_out);
      emit(ordered_json{{"shape", {v.shape().z, v.shape().y, v.shape().x}}});
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return design_status;
}

}  // namespace aop3d::cli
