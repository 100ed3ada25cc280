#include "aop3d/postproc.hpp"

namespace aop3d::postproc {

void validate(const PostprocParams& p) {
  if (p.theta_ed < -10 || p.theta_ed > 10) throw ParameterError("theta_ed must be an integer in [-10,10]");
  if (p.theta_co < -5 || p.theta_co > 5) throw ParameterError("theta_co must be an integer in [-5,5]");
  const std::pair<const char*, double> unit[] = {{"theta_mc", p.theta_mc},     {"theta_ms", p.theta_ms},
                                                 {"theta_mr", p.theta_mr},     {"theta_ssigma", p.theta_ssigma},
                                                 {"theta_st", p.theta_st}};
  for (const auto& [name, v] : unit) {
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError(std::string(name) + " must lie in [0,1]");
  }
}

nlohmann::ordered_json to_json(const PostprocParams& p) {
  nlohmann::ordered_json j;
  j["theta_ed"] = p.theta_ed;
  j["theta_co"] = p.theta_co;
  j["theta_mc"] = p.theta_mc;
  j["theta_ms"] = p.theta_ms;
  j["theta_mr"] = p.theta_mr;
  j["theta_ssigma"] = p.theta_ssigma;
  j["theta_st"] = p.theta_st;
  return j;
}

PostprocParams params_from_json(const nlohmann::json& j) {
  PostprocParams p;
  try {
    p.theta_ed = j.value("theta_ed", 0);
    p.theta_co = j.value("theta_co", 0);
    p.theta_mc = j.value("theta_mc", 0.0);
    p.theta_ms = j.value("theta_ms", 0.0);
    p.theta_mr = j.value("theta_mr", 0.0);
    p.theta_ssigma = j.value("theta_ssigma", 0.0);
    p.theta_st = j.value("theta_st", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid postprocessing parameters: ") + e.what());
  }
  validate(p);
  return p;
}

LabelVolume apply_postprocessing(const LabelVolume& labels, const PostprocParams& params) {
  validate(params);
  LabelVolume v = labels;
  if (params.morphology_enabled()) v = apply_morphology(v, params.theta_ed, params.theta_co);
  if (params.merging_enabled()) v = merge_instances(v, params.theta_mc, params.theta_ms, params.theta_mr);
  if (params.splitting_enabled()) v = split_instances(v, params.theta_ssigma, params.theta_st);
  return relabel_consecutive(v);
}

}  // namespace aop3d::postproc
