#include "gridcfc/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "gridcfc/error.hpp"

extern char** environ;

namespace gridcfc {

namespace {

using nlohmann::json;

const char* format_tag(CaseFormat f) {
  switch (f) {
    case CaseFormat::Auto: return "auto";
    case CaseFormat::Json: return "json";
    case CaseFormat::Matpower: return "matpower";
  }
  return "auto";
}

// Reads typed fields out of one config section and remembers what it saw.
class Section {
 public:
  Section(const json& root, const std::string& name, std::string& errors)
      : name_(name), errors_(errors) {
    if (root.contains(name)) {
      if (!root.at(name).is_object())
        errors_ += "\n  " + name + " must be an object";
      else
        obj_ = &root.at(name);
    }
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      errors_ += "\n  " + name_ + "." + key + " has the wrong type";
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key) || obj_->at(key).is_null()) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      errors_ += "\n  " + name_ + "." + key + " has the wrong type";
    }
  }

  template <class T, class Parse>
  void get_enum(const std::string& key, T& out, Parse parse) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = parse(obj_->at(key).get<std::string>());
    } catch (const json::exception&) {
      errors_ += "\n  " + name_ + "." + key + " must be a string";
    } catch (const Error& e) {
      errors_ += "\n  " + name_ + "." + key + ": " + e.what();
    }
  }

  void finish() {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items())
      if (!seen_.count(key)) errors_ += "\n  unknown key " + name_ + "." + key;
  }

 private:
  std::string name_;
  std::string& errors_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");
  ExperimentConfig c;
  std::string errors;
  const std::set<std::string> sections{"case",     "simulation", "interaction",
                                       "ranking",  "structural", "validation"};
  for (const auto& [key, value] : j.items())
    if (!sections.count(key)) errors += "\n  unknown section " + key;

  Section cs(j, "case", errors);
  cs.get("path", c.grid.path);
  cs.get_enum("format", c.grid.format, parse_case_format);
  cs.get("base_total_load_mw", c.grid.base_total_load_mw);
  cs.get("load_factor", c.grid.load_factor);
  cs.get("line_limit_mw", c.grid.line_limit_mw);
  cs.get("xfmr_limit_mw", c.grid.xfmr_limit_mw);
  cs.get("f_lim2_ratio", c.grid.f_lim2_ratio);
  cs.get("hidden_failure_prob", c.grid.hidden_failure_prob);
  cs.get("v_min", c.grid.v_min);
  cs.get("v_max", c.grid.v_max);
  cs.finish();

  Section ss(j, "simulation", errors);
  auto& sim = c.simulation;
  ss.get("n_samples", sim.n_samples);
  ss.get("master_seed", sim.master_seed);
  ss.get_enum("initial_policy", sim.initial_policy, parse_initial_policy);
  ss.get("initial_probability", sim.initial_probability);
  ss.get_enum("dispatch_policy", sim.dispatch_policy, parse_dispatch_policy);
  ss.get("max_stages", sim.max_stages);
  ss.get("secure_base", sim.secure_base);
  ss.get("workers", sim.workers);
  ss.finish();

  Section is(j, "interaction", errors);
  is.get("k1", c.interaction.k1);
  is.get("k2", c.interaction.k2);
  is.get("loss_includes_own_stage", c.interaction.loss_includes_own_stage);
  is.get("export_threshold", c.export_threshold);
  is.finish();

  Section rs(j, "ranking", errors);
  rs.get("tol", c.hits.tol);
  rs.get("max_iter", c.hits.max_iter);
  rs.get("regularize_floor", c.regularize_floor);
  rs.finish();

  Section st(j, "structural", errors);
  st.get("realtime_output", c.structural.realtime_output);
  st.finish();

  Section vs(j, "validation", errors);
  vs.get("delta_c_mw", c.validation.delta_c_mw);
  vs.get("sizes", c.validation.sizes);
  vs.get("middle_start", c.validation.middle_start);
  vs.finish();

  if (c.grid.line_limit_mw.has_value() != c.grid.xfmr_limit_mw.has_value())
    errors += "\n  case.line_limit_mw and case.xfmr_limit_mw must be given together";
  if (!(c.grid.load_factor > 0.0)) errors += "\n  case.load_factor must be positive";
  if (!(c.grid.f_lim2_ratio >= 1.0)) errors += "\n  case.f_lim2_ratio must be at least 1";
  if (!(c.grid.hidden_failure_prob >= 0.0 && c.grid.hidden_failure_prob <= 1.0))
    errors += "\n  case.hidden_failure_prob must lie in [0, 1]";
  if (!(c.interaction.k1 >= 0.0) || !(c.interaction.k2 >= 0.0))
    errors += "\n  interaction.k1 and interaction.k2 must be nonnegative";
  if (!(c.hits.tol > 0.0)) errors += "\n  ranking.tol must be positive";
  if (c.hits.max_iter < 1) errors += "\n  ranking.max_iter must be at least 1";
  if (!(c.validation.delta_c_mw >= 0.0)) errors += "\n  validation.delta_c_mw must be nonnegative";
  if (!std::is_sorted(c.validation.sizes.begin(), c.validation.sizes.end()) ||
      (!c.validation.sizes.empty() && c.validation.sizes.front() < 0))
    errors += "\n  validation.sizes must be nonnegative and ascending";
  if (c.validation.middle_start < 1) errors += "\n  validation.middle_start must be at least 1";
  if (sim.n_samples < 1) errors += "\n  simulation.n_samples must be at least 1";
  if (sim.workers < 1) errors += "\n  simulation.workers must be at least 1";
  if (sim.max_stages < 1) errors += "\n  simulation.max_stages must be at least 1";

  if (!errors.empty()) throw Error(ErrorCode::InvalidArgument, "invalid config:" + errors);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const auto& sim = c.simulation;
  return {
      {"case",
       {{"path", c.grid.path},
        {"format", format_tag(c.grid.format)},
        {"base_total_load_mw", opt(c.grid.base_total_load_mw)},
        {"load_factor", c.grid.load_factor},
        {"line_limit_mw", opt(c.grid.line_limit_mw)},
        {"xfmr_limit_mw", opt(c.grid.xfmr_limit_mw)},
        {"f_lim2_ratio", c.grid.f_lim2_ratio},
        {"hidden_failure_prob", c.grid.hidden_failure_prob},
        {"v_min", opt(c.grid.v_min)},
        {"v_max", opt(c.grid.v_max)}}},
      {"simulation",
       {{"n_samples", sim.n_samples},
        {"master_seed", sim.master_seed},
        {"initial_policy", to_string(sim.initial_policy)},
        {"initial_probability", sim.initial_probability},
        {"dispatch_policy", to_string(sim.dispatch_policy)},
        {"max_stages", sim.max_stages},
        {"secure_base", sim.secure_base},
        {"workers", sim.workers}}},
      {"interaction",
       {{"k1", c.interaction.k1},
        {"k2", c.interaction.k2},
        {"loss_includes_own_stage", c.interaction.loss_includes_own_stage},
        {"export_threshold", c.export_threshold}}},
      {"ranking",
       {{"tol", c.hits.tol}, {"max_iter", c.hits.max_iter}, {"regularize_floor", c.regularize_floor}}},
      {"structural", {{"realtime_output", c.structural.realtime_output}}},
      {"validation",
       {{"delta_c_mw", c.validation.delta_c_mw},
        {"sizes", c.validation.sizes},
        {"middle_start", c.validation.middle_start}}},
  };
}

json apply_env_overrides(json j, const std::map<std::string, std::string>& env) {
  static const std::string prefix = "GRIDCFC_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string rest = name.substr(prefix.size());
    std::transform(rest.begin(), rest.end(), rest.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    const auto cut = rest.find('_');
    if (cut == std::string::npos || cut == 0 || cut + 1 == rest.size())
      throw Error(ErrorCode::InvalidArgument,
                  "environment override " + name + " must look like GRIDCFC_<SECTION>_<KEY>");
    const std::string section = rest.substr(0, cut);
    const std::string key = rest.substr(cut + 1);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    if (!j.contains(section)) j[section] = json::object();
    j[section][key] = parsed;
  }
  return j;
}

std::map<std::string, std::string> gridcfc_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos || entry.rfind("GRIDCFC_", 0) != 0) continue;
    env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return env;
}

ExperimentConfig load_config(const std::filesystem::path& path, bool use_env) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  if (use_env) j = apply_env_overrides(std::move(j), gridcfc_environment());
  auto c = config_from_json(j);
  if (!c.grid.path.empty()) {
    std::filesystem::path p(c.grid.path);
    if (p.is_relative()) c.grid.path = (std::filesystem::absolute(path).parent_path() / p).lexically_normal().string();
  }
  return c;
}

GridCase build_case(const CaseSettings& s) {
  if (s.path.empty()) throw Error(ErrorCode::InvalidArgument, "no case path given");
  MatpowerOptions mp;
  mp.f_lim2_ratio = s.f_lim2_ratio;
  mp.hidden_failure_prob = s.hidden_failure_prob;
  auto grid = load_case(s.path, s.format, mp);
  ScaleOptions o;
  o.load_factor = s.load_factor;
  o.base_total_load_mw = s.base_total_load_mw;
  if (s.line_limit_mw) o.uniform_limits = UniformLimits{*s.line_limit_mw, *s.xfmr_limit_mw};
  o.f_lim2_ratio = s.f_lim2_ratio;
  o.hidden_failure_prob = s.hidden_failure_prob;
  o.v_min = s.v_min;
  o.v_max = s.v_max;
  return scale_case(grid, o);
}

}  // namespace gridcfc
