#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ckg/error.hpp"

namespace ckg::app {

namespace {

using nlohmann::json;

// Walks one JSON object, reading known keys and rejecting the rest.
class Section {
 public:
  Section(const json& j, std::string path, const EnvLookup& env, const std::filesystem::path& base)
      : j_(j), path_(std::move(path)), env_(env), base_(base) {
    if (!j_.is_object()) throw ConfigError(where() + "must be an object");
  }

  // Rejects keys that were never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) throw ConfigError("unknown config key " + path_ + "." + it.key());
    }
  }

  bool has(const std::string& k) {
    used_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }

  const json& raw(const std::string& k) {
    used_.insert(k);
    return j_.at(k);
  }

  std::optional<Section> section(const std::string& k) {
    if (!has(k)) return std::nullopt;
    return std::optional<Section>(std::in_place, j_.at(k), path_ + "." + k, env_, base_);
  }

  template <class T>
  void num(const std::string& k, T& out) {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where(k) + "must be a number");
      out = v.get<T>();
    } else {
      if (!v.is_number_integer()) throw ConfigError(where(k) + "must be an integer");
      out = v.get<T>();
    }
  }

  void boolean(const std::string& k, bool& out) {
    if (!has(k)) return;
    if (!j_.at(k).is_boolean()) throw ConfigError(where(k) + "must be true or false");
    out = j_.at(k).get<bool>();
  }

  void str(const std::string& k, std::string& out) {
    if (!has(k)) return;
    if (!j_.at(k).is_string()) throw ConfigError(where(k) + "must be a string");
    out = interpolate(j_.at(k).get<std::string>(), env_);
  }

  void path(const std::string& k, std::filesystem::path& out) {
    std::string s;
    if (!has(k)) return;
    str(k, s);
    out = resolve(s);
  }

  std::filesystem::path resolve(const std::string& s) const {
    std::filesystem::path p(s);
    return p.is_absolute() ? p : (base_ / p).lexically_normal();
  }

  std::string where(const std::string& k = {}) const {
    return "config " + path_ + (k.empty() ? "" : "." + k) + ": ";
  }

  const EnvLookup& env() const { return env_; }

 private:
  const json& j_;
  std::string path_;
  const EnvLookup& env_;
  std::filesystem::path base_;
  std::set<std::string> used_;
};

void read_gateway(Section& s, GatewayConfig& g) {
  s.str("endpoint_url", g.endpoint_url);
  s.str("api_key_env", g.api_key_env_name);
  s.str("model", g.model_id);
  s.num("max_concurrent", g.max_concurrent);
  s.num("requests_per_minute", g.requests_per_minute);
  s.num("max_retries", g.max_retries);
  std::int64_t ms = g.backoff_base.count();
  s.num("backoff_base_ms", ms);
  g.backoff_base = std::chrono::milliseconds(ms);
  ms = g.backoff_cap.count();
  s.num("backoff_cap_ms", ms);
  g.backoff_cap = std::chrono::milliseconds(ms);
  s.num("request_cap", g.request_cap);
  s.num("max_output_tokens", g.max_output_tokens);
  std::int64_t sec = g.timeout.count();
  s.num("timeout_s", sec);
  g.timeout = std::chrono::seconds(sec);
  s.finish();
}

void read_plan(Section& s, DistillPlan& p) {
  s.num("target_heads_per_type", p.target_heads_per_type);
  s.num("seeds_per_type", p.seeds_per_type);
  s.num("triple_seeds_per_relation", p.triple_seeds_per_relation);
  s.num("head_example_count", p.head_spec.example_count);
  s.num("head_temperature", p.head_spec.temperature);
  s.num("tail_example_count", p.tail_spec.example_count);
  s.num("tail_temperature", p.tail_spec.temperature);
  s.num("tails_per_request", p.tail_spec.tails_per_request);
  s.num("stall_limit", p.stall_limit);
  s.num("checkpoint_every", p.checkpoint_every);
  s.num("max_consecutive_errors", p.max_consecutive_errors);
  s.finish();
}

void read_filter(Section& s, FilterSettings& f) {
  s.num("judge_sample", f.judge_sample);
  s.num("holdout_fraction", f.holdout_fraction);
  s.num("threshold", f.train.threshold);
  s.boolean("calibrate_threshold", f.train.calibrate_threshold);
  s.num("epochs", f.train.epochs);
  s.num("learning_rate", f.train.learning_rate);
  s.num("l2", f.train.l2);
  s.num("min_n", f.train.features.min_n);
  s.num("max_n", f.train.features.max_n);
  int bits = 0;
  if (s.has("hash_bits")) {
    s.num("hash_bits", bits);
    if (bits < 4 || bits > 26) throw ConfigError(s.where("hash_bits") + "must be in [4, 26]");
    f.train.features.hash_size = 1u << bits;
  }
  s.str("external_command", f.external_command);
  s.str("judge_name", f.judge_name);
  s.finish();
}

void read_eval(Section& s, EvalSettings& e) {
  s.num("per_stratum", e.per_stratum);
  if (s.has("annotators")) {
    const auto& a = s.raw("annotators");
    if (!a.is_array()) throw ConfigError(s.where("annotators") + "must be a list of ids");
    e.annotators.clear();
    for (const auto& v : a) {
      if (!v.is_string()) throw ConfigError(s.where("annotators") + "must be a list of ids");
      e.annotators.push_back(interpolate(v.get<std::string>(), s.env()));
    }
  }
  s.str("host", e.host);
  s.num("port", e.port);
  if (s.has("static_dir")) {
    std::filesystem::path p;
    s.path("static_dir", p);
    e.static_dir = p;
  }
  s.boolean("reviewer", e.reviewer);
  s.finish();
}

void read_export(Section& s, ExportSettings& x) {
  if (s.has("format")) {
    std::string f;
    s.str("format", f);
    auto pf = parse_export_format(f);
    if (!pf) throw ConfigError(s.where("format") + "must be tsv or jsonl");
    x.format = *pf;
  }
  if (s.has("split")) {
    const auto& a = s.raw("split");
    if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number()) {
      throw ConfigError(s.where("split") + "must be [train, dev, test]");
    }
    x.split = SplitFractions{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  }
  s.finish();
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

std::string interpolate(std::string_view s, const EnvLookup& env) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto pos = s.find("${", i);
    if (pos == std::string_view::npos) {
      out.append(s.substr(i));
      break;
    }
    out.append(s.substr(i, pos - i));
    auto end = s.find('}', pos + 2);
    if (end == std::string_view::npos) throw ConfigError("unterminated ${ in config value");
    std::string ref(s.substr(pos + 2, end - pos - 2));
    std::optional<std::string> fallback;
    if (auto d = ref.find(":-"); d != std::string::npos) {
      fallback = ref.substr(d + 2);
      ref = ref.substr(0, d);
    }
    if (ref.empty()) throw ConfigError("empty variable name in config value");
    auto v = env(ref);
    if (v && !v->empty()) out.append(*v);
    else if (fallback) out.append(*fallback);
    else if (v) out.append(*v);
    else throw ConfigError("environment variable " + ref + " is not set");
    i = end + 1;
  }
  return out;
}

PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir, const EnvLookup& env) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.work_dir = base_dir / "work";
  {
    Section top(root, "", env, base_dir);
    top.num("rng_seed", cfg.rng_seed);
    top.path("work_dir", cfg.work_dir);
    if (auto s = top.section("gateway")) read_gateway(*s, cfg.gateway);
    if (auto s = top.section("plan")) read_plan(*s, cfg.plan);
    if (auto s = top.section("filter")) read_filter(*s, cfg.filter);
    if (auto s = top.section("eval")) read_eval(*s, cfg.eval);
    if (auto s = top.section("export")) read_export(*s, cfg.exports);
    if (auto s = top.section("assets")) {
      s->path("templates", cfg.assets.templates);
      s->path("head_seeds", cfg.assets.head_seeds);
      s->path("triple_seeds", cfg.assets.triple_seeds);
      s->path("names", cfg.assets.names);
      s->finish();
    }
    top.finish();
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto base = std::filesystem::absolute(path).parent_path();
  auto cfg = parse_config(ss.str(), base, env);
  cfg.source = path;
  return cfg;
}

void PipelineConfig::validate() const {
  gateway.validate();
  try {
    plan.validate();
  } catch (const PlanError& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  auto need = [](const std::filesystem::path& p, const char* what, bool dir) {
    if (p.empty()) throw ConfigError(std::string("config assets.") + what + " is required");
    bool ok = dir ? std::filesystem::is_directory(p) : std::filesystem::is_regular_file(p);
    if (!ok) throw ConfigError(std::string("config assets.") + what + ": " + p.string() + " does not exist");
  };
  need(assets.templates, "templates", true);
  need(assets.head_seeds, "head_seeds", false);
  need(assets.triple_seeds, "triple_seeds", false);
  need(assets.names, "names", false);
  if (filter.judge_sample < 2) throw ConfigError("filter.judge_sample must be at least 2");
  if (!(filter.holdout_fraction > 0.0 && filter.holdout_fraction <= 0.5)) {
    throw ConfigError("filter.holdout_fraction must be in (0, 0.5]");
  }
  if (!(filter.train.threshold > 0.0 && filter.train.threshold < 1.0)) {
    throw ConfigError("filter.threshold must be in (0, 1)");
  }
  try {
    filter.train.features.validate();
  } catch (const FilterError& e) {
    throw ConfigError(std::string("filter: ") + e.what());
  }
  if (filter.train.epochs < 1 || !(filter.train.learning_rate > 0.0) || filter.train.l2 < 0.0) {
    throw ConfigError("filter: epochs >= 1, learning_rate > 0 and l2 >= 0 are required");
  }
  if (eval.per_stratum < 1) throw ConfigError("eval.per_stratum must be positive");
  if (eval.annotators.empty()) throw ConfigError("eval.annotators must not be empty");
  if (eval.port < 0 || eval.port > 65535) throw ConfigError("eval.port must be in [0, 65535]");
  if (eval.static_dir && !std::filesystem::is_directory(*eval.static_dir)) {
    throw ConfigError("eval.static_dir " + eval.static_dir->string() + " does not exist");
  }
  if (exports.split) {
    try {
      exports.split->validate();
    } catch (const PlanError& e) {
      throw ConfigError(std::string("export.split: ") + e.what());
    }
  }
}

}  // namespace ckg::app
