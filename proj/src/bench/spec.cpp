#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "internal.hpp"
#include "zopmc/errors.hpp"
#include "zopmc/random.hpp"

namespace zopmc::bench {

namespace {

using nlohmann::json;

int line_of(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  return mark.line >= 0 ? mark.line + 1 : 0;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) {
    throw SpecError(field, line_of(node), "expected a scalar value");
  }
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw SpecError(field, line_of(node),
                    "cannot read '" + node.Scalar() + "' as the expected type");
  }
}

template <typename T>
std::vector<T> sequence(const YAML::Node& node, const std::string& field) {
  std::vector<T> out;
  if (node.IsScalar()) {
    // "5,10,25" or a single value
    std::stringstream ss(node.Scalar());
    std::string item;
    while (std::getline(ss, item, ',')) {
      YAML::Node element = YAML::Load(item);
      out.push_back(scalar<T>(element, field));
    }
    return out;
  }
  if (!node.IsSequence()) {
    throw SpecError(field, line_of(node), "expected a list");
  }
  for (const auto& element : node) out.push_back(scalar<T>(element, field));
  return out;
}

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed,
                const std::string& prefix) {
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.contains(key)) {
      throw SpecError(prefix + key, line_of(kv.first), "unknown field");
    }
  }
}

std::string covariance_name(CovarianceAdaptation c) {
  return c == CovarianceAdaptation::kDiagonal ? "diagonal" : "none";
}

void parse_target(const YAML::Node& node, TargetSpec& t) {
  if (!node.IsMap()) throw SpecError("target", line_of(node), "expected a map");
  check_keys(node,
             {"kind", "n", "d", "data_seed", "mu0", "phi0_raw", "log_sigma0",
              "precision"},
             "target.");
  if (node["kind"]) t.kind = scalar<std::string>(node["kind"], "target.kind");
  if (node["n"]) t.n = scalar<Index>(node["n"], "target.n");
  if (node["d"]) t.d = scalar<Index>(node["d"], "target.d");
  if (node["data_seed"]) {
    t.data_seed = scalar<std::uint64_t>(node["data_seed"], "target.data_seed");
  }
  if (node["mu0"]) t.mu0 = scalar<double>(node["mu0"], "target.mu0");
  if (node["phi0_raw"]) {
    t.phi0_raw = scalar<double>(node["phi0_raw"], "target.phi0_raw");
  }
  if (node["log_sigma0"]) {
    t.log_sigma0 = scalar<double>(node["log_sigma0"], "target.log_sigma0");
  }
  if (node["precision"]) {
    t.precision = sequence<double>(node["precision"], "target.precision");
  }
}

void parse_adaptation(const YAML::Node& node, AdaptationSettings& a) {
  if (!node.IsMap()) {
    throw SpecError("adaptation", line_of(node), "expected a map");
  }
  check_keys(node,
             {"enabled", "target_acceptance", "decay", "burn_in_fraction",
              "covariance"},
             "adaptation.");
  if (node["enabled"]) a.enabled = scalar<bool>(node["enabled"], "adaptation.enabled");
  if (node["target_acceptance"]) {
    const auto& v = node["target_acceptance"];
    if (v.IsNull() || (v.IsScalar() && v.Scalar() == "default")) {
      a.target_acceptance.reset();
    } else {
      a.target_acceptance = scalar<double>(v, "adaptation.target_acceptance");
    }
  }
  if (node["decay"]) a.decay = scalar<double>(node["decay"], "adaptation.decay");
  if (node["burn_in_fraction"]) {
    a.burn_in_fraction =
        scalar<double>(node["burn_in_fraction"], "adaptation.burn_in_fraction");
  }
  if (node["covariance"]) {
    const auto text = scalar<std::string>(node["covariance"], "adaptation.covariance");
    if (text == "diagonal") {
      a.covariance = CovarianceAdaptation::kDiagonal;
    } else if (text == "none") {
      a.covariance = CovarianceAdaptation::kNone;
    } else {
      throw SpecError("adaptation.covariance", line_of(node["covariance"]),
                      "expected 'none' or 'diagonal'");
    }
  }
}

ExperimentSpec parse_node(const YAML::Node& root) {
  if (!root.IsMap()) throw SpecError("<root>", line_of(root), "expected a map");
  // A run manifest carries the resolved spec under "spec".
  if (root["spec"] && root["spec"].IsMap()) return parse_node(root["spec"]);

  check_keys(root,
             {"experiment", "target", "kernels", "m", "leapfrog", "eff",
              "iterations", "paper_scale", "seeds", "epsilon", "workers", "law",
              "proposal_scale", "leapfrog_step", "ula_step", "adaptation",
              "save_trajectories", "thin", "out"},
             "");
  const std::string tag =
      root["experiment"] ? scalar<std::string>(root["experiment"], "experiment")
                         : "custom";
  if (!is_builtin(tag)) {
    throw SpecError("experiment", line_of(root["experiment"]),
                    "unknown experiment '" + tag + "'");
  }
  ExperimentSpec spec = builtin_spec(tag);
  if (root["target"]) parse_target(root["target"], spec.target);
  if (root["kernels"]) {
    spec.kernels = sequence<std::string>(root["kernels"], "kernels");
  }
  if (root["m"]) spec.m = sequence<Index>(root["m"], "m");
  if (root["leapfrog"]) spec.leapfrog = sequence<int>(root["leapfrog"], "leapfrog");
  if (root["eff"]) {
    const YAML::Node& e = root["eff"];
    if (!e.IsMap()) throw SpecError("eff", line_of(e), "expected a map");
    check_keys(e, {"kernel", "m0"}, "eff.");
    if (e["kernel"]) spec.eff.kernel = scalar<std::string>(e["kernel"], "eff.kernel");
    if (e["m0"]) spec.eff.m0 = sequence<Index>(e["m0"], "eff.m0");
  }
  if (root["iterations"]) {
    spec.iterations = scalar<std::size_t>(root["iterations"], "iterations");
  }
  if (root["paper_scale"]) {
    spec.paper_scale = scalar<bool>(root["paper_scale"], "paper_scale");
  }
  if (root["seeds"]) spec.seeds = sequence<std::uint64_t>(root["seeds"], "seeds");
  if (root["epsilon"]) spec.epsilon = scalar<double>(root["epsilon"], "epsilon");
  if (root["workers"]) spec.workers = scalar<std::size_t>(root["workers"], "workers");
  if (root["law"]) spec.law = scalar<std::string>(root["law"], "law");
  if (root["proposal_scale"]) {
    spec.proposal_scale = scalar<double>(root["proposal_scale"], "proposal_scale");
  }
  if (root["leapfrog_step"]) {
    spec.leapfrog_step = scalar<double>(root["leapfrog_step"], "leapfrog_step");
  }
  if (root["ula_step"]) spec.ula_step = scalar<double>(root["ula_step"], "ula_step");
  if (root["adaptation"]) parse_adaptation(root["adaptation"], spec.adaptation);
  if (root["save_trajectories"]) {
    spec.save_trajectories =
        scalar<bool>(root["save_trajectories"], "save_trajectories");
  }
  if (root["thin"]) spec.thin = scalar<std::size_t>(root["thin"], "thin");
  if (root["out"]) spec.out = scalar<std::string>(root["out"], "out");
  return spec;
}

YAML::Node to_yaml_node(const json& j) {
  YAML::Node node;
  if (j.is_object()) {
    node = YAML::Node(YAML::NodeType::Map);
    for (const auto& [k, v] : j.items()) node[k] = to_yaml_node(v);
  } else if (j.is_array()) {
    node = YAML::Node(YAML::NodeType::Sequence);
    for (const auto& v : j) node.push_back(to_yaml_node(v));
    node.SetStyle(YAML::EmitterStyle::Flow);
  } else if (j.is_null()) {
    node = YAML::Node(YAML::NodeType::Null);
  } else if (j.is_string()) {
    node = j.get<std::string>();
  } else {
    node = j.dump();  // numbers and booleans keep their JSON spelling
  }
  return node;
}

}  // namespace

SpecError::SpecError(std::string field, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : "") +
                         "field '" + field + "': " + message),
      field_(std::move(field)),
      line_(line) {}

bool is_builtin(const std::string& tag) {
  return tag == "logistic25" || tag == "logistic200" || tag == "stochvol203" ||
         tag == "gaussian-verify" || tag == "custom";
}

ExperimentSpec builtin_spec(const std::string& tag) {
  ExperimentSpec s;
  s.experiment = tag;
  s.leapfrog = {2, 5, 10, 20};
  s.adaptation.covariance = CovarianceAdaptation::kDiagonal;
  s.out = "results/" + tag;
  if (tag == "logistic25") {
    s.target.kind = "logistic";
    s.target.n = 25;
    s.target.d = 25;
    s.kernels = {"rs-mala", "rs-hmc", "mtm"};
    s.m = {1, 2, 5, 10, 15, 20, 25};
  } else if (tag == "logistic200") {
    s.target.kind = "logistic";
    s.target.n = 200;
    s.target.d = 200;
    s.kernels = {"rs-mala", "rs-hmc", "mtm", "naive-mala"};
    s.m = {25, 50, 100};
    s.eff = {"rs-mala", {10, 25}};
  } else if (tag == "stochvol203") {
    s.target.kind = "stochvol";
    s.target.n = 200;
    s.target.d = 203;
    s.kernels = {"rs-mala", "rs-hmc", "mtm"};
    s.m = {25, 50, 100};
    s.eff = {"rs-mala", {10, 25}};
  } else if (tag == "gaussian-verify") {
    s.target.kind = "gaussian";
    s.target.d = 2;
    s.target.precision = {1.0, 4.0};
    s.kernels = {"naive-mala", "rs-mala", "rs-hmc", "mtm"};
    s.m = {1};
    s.leapfrog = {5};
    s.iterations = 1000000;
    s.proposal_scale = 1.0;
    s.leapfrog_step = 0.5;
    s.adaptation.covariance = CovarianceAdaptation::kNone;
  } else if (tag == "custom") {
    s.target.kind = "gaussian";
    s.target.n = 0;
    s.target.d = 10;
    s.kernels = {"rs-mala"};
    s.m = {5};
  } else {
    throw SpecError("experiment", 0, "unknown experiment '" + tag + "'");
  }
  return s;
}

void ExperimentSpec::validate() const {
  const auto fail = [](const std::string& field, const std::string& msg) {
    throw SpecError(field, 0, msg);
  };
  const TargetSpec& t = target;
  if (t.kind != "logistic" && t.kind != "stochvol" && t.kind != "gaussian") {
    fail("target.kind", "expected logistic, stochvol or gaussian");
  }
  if (t.kind == "stochvol" && t.n < 2) fail("target.n", "stochvol needs n >= 2");
  if (t.kind == "logistic" && (t.n < 1 || t.d < 1)) {
    fail("target", "logistic needs n >= 1 and d >= 1");
  }
  if (t.kind == "gaussian") {
    if (t.d < 1) fail("target.d", "must be >= 1");
    if (!t.precision.empty() &&
        static_cast<Index>(t.precision.size()) != t.d) {
      fail("target.precision", "needs exactly d entries");
    }
    for (double p : t.precision) {
      if (!(p > 0.0)) fail("target.precision", "entries must be positive");
    }
  }
  const Index d = t.kind == "stochvol" ? t.n + 3 : t.d;

  if (kernels.empty()) fail("kernels", "must not be empty");
  for (const auto& k : kernels) {
    try {
      parse_kernel(k);
    } catch (const UsageError& e) {
      fail("kernels", e.what());
    }
  }
  if (m.empty()) fail("m", "must not be empty");
  for (Index v : m) {
    if (v < 1 || v > d) {
      fail("m", "value " + std::to_string(v) + " outside [1, " +
                    std::to_string(d) + "]");
    }
  }
  if (std::set<Index>(m.begin(), m.end()).size() != m.size()) {
    fail("m", "values must be distinct");
  }
  if (std::find(kernels.begin(), kernels.end(), "rs-hmc") != kernels.end()) {
    if (leapfrog.empty()) fail("leapfrog", "rs-hmc needs a non-empty L grid");
  }
  for (int l : leapfrog) {
    if (l < 1) fail("leapfrog", "L must be >= 1");
  }
  if (!eff.m0.empty()) {
    if (eff.kernel != "rs-mala" && eff.kernel != "rs-hmc") {
      fail("eff.kernel", "expected rs-mala or rs-hmc");
    }
    for (Index v : eff.m0) {
      if (v < 1 || v > d) fail("eff.m0", "value outside [1, d]");
    }
  }
  if (iterations < 2) fail("iterations", "must be >= 2");
  if (seeds.empty()) fail("seeds", "must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    fail("seeds", "values must be distinct");
  }
  if (!(epsilon > 0.0)) fail("epsilon", "must be positive");
  if (workers < 1) fail("workers", "must be >= 1");
  try {
    parse_direction_law(law);
  } catch (const std::exception& e) {
    fail("law", e.what());
  }
  if (!(proposal_scale > 0.0)) fail("proposal_scale", "must be positive");
  if (!(leapfrog_step > 0.0)) fail("leapfrog_step", "must be positive");
  if (!(ula_step > 0.0)) fail("ula_step", "must be positive");
  if (adaptation.target_acceptance &&
      !(*adaptation.target_acceptance > 0.0 && *adaptation.target_acceptance < 1.0)) {
    fail("adaptation.target_acceptance", "must lie in (0, 1)");
  }
  if (!(adaptation.decay > 0.5 && adaptation.decay <= 1.0)) {
    fail("adaptation.decay", "must lie in (0.5, 1]");
  }
  if (!(adaptation.burn_in_fraction >= 0.0 && adaptation.burn_in_fraction < 1.0)) {
    fail("adaptation.burn_in_fraction", "must lie in [0, 1)");
  }
  if (thin < 1) fail("thin", "must be >= 1");
  if (out.empty()) fail("out", "must not be empty");
}

ExperimentSpec parse_spec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw SpecError("<syntax>", e.mark.line + 1, e.msg);
  }
  if (!root || root.IsNull()) throw SpecError("<root>", 0, "empty spec");
  // A bare built-in tag is a valid spec.
  if (root.IsScalar()) {
    const std::string tag = root.Scalar();
    if (!is_builtin(tag)) throw SpecError("experiment", 1, "unknown experiment '" + tag + "'");
    return builtin_spec(tag);
  }
  ExperimentSpec spec = parse_node(root);
  return spec;
}

ExperimentSpec load_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("<file>", 0, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_spec(buffer.str());
}

void apply_overrides(ExperimentSpec& spec, const Overrides& o) {
  if (o.paper_scale) {
    spec.paper_scale = true;
    if (spec.experiment != "gaussian-verify") spec.iterations = kFullScaleIterations;
  }
  if (o.kernels) spec.kernels = *o.kernels;
  if (o.m) spec.m = *o.m;
  if (o.m0) spec.eff.m0 = *o.m0;
  if (o.iterations) spec.iterations = *o.iterations;
  if (o.seed) spec.seeds = {*o.seed};
  if (o.epsilon) spec.epsilon = *o.epsilon;
  if (o.workers) spec.workers = *o.workers;
  if (o.out) spec.out = *o.out;
  if (o.save_trajectories) spec.save_trajectories = true;
}

json spec_to_json(const ExperimentSpec& s) {
  json target = {{"kind", s.target.kind},
                 {"n", s.target.n},
                 {"d", s.target.d},
                 {"data_seed", s.target.data_seed},
                 {"mu0", s.target.mu0},
                 {"phi0_raw", s.target.phi0_raw},
                 {"log_sigma0", s.target.log_sigma0},
                 {"precision", s.target.precision}};
  json adaptation = {{"enabled", s.adaptation.enabled},
                     {"target_acceptance", nullptr},
                     {"decay", s.adaptation.decay},
                     {"burn_in_fraction", s.adaptation.burn_in_fraction},
                     {"covariance", covariance_name(s.adaptation.covariance)}};
  if (s.adaptation.target_acceptance) {
    adaptation["target_acceptance"] = *s.adaptation.target_acceptance;
  }
  return {{"experiment", s.experiment},
          {"target", target},
          {"kernels", s.kernels},
          {"m", s.m},
          {"leapfrog", s.leapfrog},
          {"eff", {{"kernel", s.eff.kernel}, {"m0", s.eff.m0}}},
          {"iterations", s.iterations},
          {"paper_scale", s.paper_scale},
          {"seeds", s.seeds},
          {"epsilon", s.epsilon},
          {"workers", s.workers},
          {"law", s.law},
          {"proposal_scale", s.proposal_scale},
          {"leapfrog_step", s.leapfrog_step},
          {"ula_step", s.ula_step},
          {"adaptation", adaptation},
          {"save_trajectories", s.save_trajectories},
          {"thin", s.thin},
          {"out", s.out}};
}

std::string spec_to_yaml(const ExperimentSpec& spec) {
  YAML::Emitter out;
  out << to_yaml_node(spec_to_json(spec));
  return std::string(out.c_str()) + "\n";
}

std::unique_ptr<TargetModel> build_target(const TargetSpec& t) {
  if (t.kind == "logistic") {
    const LogisticDataset data = generate_logistic_data(t.data_seed, t.n, t.d);
    return std::make_unique<LogisticRegressionTarget>(data.design, data.responses);
  }
  if (t.kind == "stochvol") {
    const StochVolDataset data =
        generate_sv_data(t.data_seed, t.n, t.mu0, t.phi0_raw, t.log_sigma0);
    return std::make_unique<StochasticVolatilityTarget>(data.observations);
  }
  if (t.kind == "gaussian") {
    if (t.precision.empty()) {
      return std::make_unique<GaussianTarget>(GaussianTarget::isotropic(t.d));
    }
    const VectorXd diag =
        Eigen::Map<const VectorXd>(t.precision.data(),
                                   static_cast<Index>(t.precision.size()));
    return std::make_unique<GaussianTarget>(GaussianTarget::diagonal(diag));
  }
  throw SpecError("target.kind", 0, "unknown target kind '" + t.kind + "'");
}

VectorXd initial_point(const TargetSpec& t) {
  if (t.kind == "logistic") {
    return generate_logistic_data(t.data_seed, t.n, t.d).true_beta;
  }
  if (t.kind == "stochvol") {
    return generate_sv_data(t.data_seed, t.n, t.mu0, t.phi0_raw, t.log_sigma0)
        .true_parameters();
  }
  return VectorXd::Zero(t.d);
}

}  // namespace zopmc::bench
