#include "ckg/filter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "ckg/error.hpp"
#include "ckg/text.hpp"
#include "triple_json.hpp"

namespace ckg {

namespace {

using nlohmann::json;

constexpr std::string_view kModelHeader = "ckg-filter-model 1";

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z), without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

bool starts_with_word(std::string_view s, std::string_view w) {
  if (!s.starts_with(w)) return false;
  if (s.size() == w.size()) return true;
  unsigned char next = static_cast<unsigned char>(s[w.size()]);
  return !std::isalnum(next);
}

// Drops leading whitespace, quotes, emphasis and list markers, plus a
// leading "答案：" / "answer:" style label.
std::string_view strip_verdict_prefix(std::string_view s) {
  static const std::vector<std::string_view> skippable = {
      " ", "\t", "\n", "\r", "\"", "'", "*", "`", "“", "”", "‘", "’", "「", "」", "『", "』",
      "【", "】", "[", "]", "(", ")", "（", "）", "-", "•", ":", "：", ".", "。", "　"};
  static const std::vector<std::string_view> labels = {"答案", "回答", "判断", "结论", "答", "answer", "verdict"};
  auto skip = [&](std::string_view v) {
    bool moved = true;
    while (moved && !v.empty()) {
      moved = false;
      for (auto m : skippable) {
        if (v.starts_with(m)) {
          v.remove_prefix(m.size());
          moved = true;
        }
      }
    }
    return v;
  };
  s = skip(s);
  for (auto l : labels) {
    if (s.starts_with(l)) {
      auto rest = s.substr(l.size());
      if (rest.starts_with(":") || rest.starts_with("：")) return skip(rest);
    }
  }
  return s;
}

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw FilterError("model file: bad " + what + " '" + s + "'");
  }
  return v;
}

double dot(const std::vector<double>& w, const SparseVector& x) {
  double z = 0;
  for (std::size_t k = 0; k < x.index.size(); ++k) z += w[x.index[k]] * x.value[k];
  return z;
}

double label_value(JudgeLabel l) { return l == JudgeLabel::Valid ? 1.0 : 0.0; }

class LinearScorer final : public Scorer {
 public:
  explicit LinearScorer(const FilterModel& m) : model_(m) {}
  std::vector<double> score(std::span<const Triple> triples) override {
    std::vector<double> out;
    out.reserve(triples.size());
    for (const auto& t : triples) out.push_back(model_.score(t));
    return out;
  }

 private:
  const FilterModel& model_;
};

class SubprocessScorer final : public Scorer {
 public:
  explicit SubprocessScorer(std::string command) : command_(std::move(command)) {}

  std::vector<double> score(std::span<const Triple> triples) override {
    if (triples.empty()) return {};
    static std::atomic<int> counter{0};
    auto input = std::filesystem::temp_directory_path() /
                 ("ckg-score-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".tsv");
    {
      std::ofstream out(input, std::ios::binary);
      if (!out) throw IoError("cannot write scorer input " + input.string());
      for (const auto& t : triples) out << t.head.text << '\t' << to_string(t.relation) << '\t' << t.tail << '\n';
    }
    std::string cmd = command_ + " < '" + input.string() + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
      std::filesystem::remove(input);
      throw FilterError("cannot start scorer: " + command_);
    }
    std::string output;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
    int rc = ::pclose(pipe);
    std::error_code ec;
    std::filesystem::remove(input, ec);
    if (rc != 0) throw FilterError("scorer exited with status " + std::to_string(rc) + ": " + command_);

    std::vector<double> scores;
    for (auto line : text::split_lines(output)) {
      auto s = text::trim(line);
      if (s.empty()) continue;
      std::string str(s);
      char* end = nullptr;
      double v = std::strtod(str.c_str(), &end);
      if (end != str.c_str() + str.size() || !(v >= 0.0 && v <= 1.0)) {
        throw FilterError("scorer printed a non-probability: '" + str + "'");
      }
      scores.push_back(v);
    }
    if (scores.size() != triples.size()) {
      throw FilterError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(triples.size()) + " triples");
    }
    return scores;
  }

 private:
  std::string command_;
};

void require_hindered_by(std::span<const Triple> ts, std::string_view op) {
  for (const auto& t : ts) {
    if (t.relation != Relation::HinderedBy) {
      throw FilterError(std::string(op) + ": triple '" + t.head.text + "' has relation " +
                        std::string(to_string(t.relation)) + ", expected HinderedBy");
    }
  }
}

}  // namespace

std::string_view to_string(JudgeLabel l) { return l == JudgeLabel::Valid ? "valid" : "invalid"; }

std::optional<JudgeLabel> map_judge_text(std::string_view reply) {
  auto lowered = text::to_lower_ascii(strip_verdict_prefix(reply));
  std::string_view s = lowered;
  static const std::vector<std::string_view> invalid_cjk = {"否", "不", "无效", "错", "没有"};
  static const std::vector<std::string_view> valid_cjk = {"是", "合理", "有效", "对", "正确", "可以"};
  static const std::vector<std::string_view> invalid_words = {"no", "not", "invalid", "false", "unreasonable"};
  static const std::vector<std::string_view> valid_words = {"yes", "valid", "true", "reasonable"};
  if (s.starts_with("对不起") || s.starts_with("抱歉") || starts_with_word(s, "sorry")) return std::nullopt;
  for (auto m : invalid_cjk)
    if (s.starts_with(m)) return JudgeLabel::Invalid;
  for (auto m : invalid_words)
    if (starts_with_word(s, m)) return JudgeLabel::Invalid;
  for (auto m : valid_cjk)
    if (s.starts_with(m)) return JudgeLabel::Valid;
  for (auto m : valid_words)
    if (starts_with_word(s, m)) return JudgeLabel::Valid;
  return std::nullopt;
}

std::vector<Triple> sample_for_judging(std::span<const Triple> raw, std::size_t n, Rng& rng) {
  require_hindered_by(raw, "sample_for_judging");
  if (n > raw.size()) {
    throw FilterError("cannot sample " + std::to_string(n) + " triples for judging from " +
                      std::to_string(raw.size()));
  }
  std::vector<Triple> out;
  out.reserve(n);
  for (auto i : rng.sample_indices(raw.size(), n)) out.push_back(raw[i]);
  return out;
}

JudgeResult judge(std::span<const Triple> triples, Gateway& gateway, const TemplateSet& templates,
                  const JudgeOptions& options) {
  require_hindered_by(triples, "judge");
  const RequestTag tag{PromptKind::Judge, 1, Relation::HinderedBy};
  std::vector<CompletionRequest> reqs;
  reqs.reserve(triples.size());
  for (const auto& t : triples) {
    reqs.push_back(CompletionRequest::user_prompt(gateway.config().model_id,
                                                  render_judge_prompt(templates, t, options.name),
                                                  options.spec.temperature, options.max_output_tokens, tag));
  }

  JudgeResult result;
  std::vector<std::optional<JudgedSample>> slots(triples.size());
  std::vector<std::size_t> retry;
  auto record_failure = [&](std::size_t i, const BatchResult& r) {
    result.cap_reached = result.cap_reached || r.cap_reached;
    result.skipped.emplace_back(i, r.error);
  };

  auto first = gateway.complete_batch(reqs);
  for (std::size_t i = 0; i < first.size(); ++i) {
    const auto& r = first[i];
    if (!r.ok()) {
      record_failure(i, r);
      continue;
    }
    auto label = map_judge_text(r.response->text);
    if (label) {
      slots[i] = JudgedSample{triples[i], *label, r.response->text, false};
    } else {
      slots[i] = JudgedSample{triples[i], JudgeLabel::Invalid, r.response->text, true};
      retry.push_back(i);
    }
  }

  if (!retry.empty()) {
    std::vector<CompletionRequest> again;
    again.reserve(retry.size());
    for (auto i : retry) again.push_back(reqs[i]);
    auto second = gateway.complete_batch(again);
    for (std::size_t k = 0; k < second.size(); ++k) {
      auto i = retry[k];
      const auto& r = second[k];
      if (!r.ok()) {
        // The first reply stands: unmappable, conservatively invalid.
        result.cap_reached = result.cap_reached || r.cap_reached;
        continue;
      }
      if (auto label = map_judge_text(r.response->text)) {
        slots[i] = JudgedSample{triples[i], *label, r.response->text, false};
      } else {
        slots[i]->judge_raw_text = r.response->text;
      }
    }
  }

  for (auto& s : slots) {
    if (!s) continue;
    if (s->unmappable) ++result.unmappable;
    result.samples.push_back(std::move(*s));
  }
  return result;
}

void FeatureSpec::validate() const {
  if (min_n < 1 || max_n < min_n) throw FilterError("feature spec: need 1 <= min_n <= max_n");
  if (hash_size == 0) throw FilterError("feature spec: hash_size must be positive");
}

SparseVector featurize(std::string_view head, std::string_view tail, const FeatureSpec& spec) {
  std::vector<std::uint32_t> idx;
  auto add_grams = [&](std::string_view field, std::uint64_t ns) {
    auto cps = text::split_code_points(field);
    std::vector<std::string_view> padded;
    padded.reserve(cps.size() + 2);
    padded.push_back("\x02");
    padded.insert(padded.end(), cps.begin(), cps.end());
    padded.push_back("\x03");
    for (int n = spec.min_n; n <= spec.max_n; ++n) {
      if (padded.size() < static_cast<std::size_t>(n)) break;
      for (std::size_t i = 0; i + n <= padded.size(); ++i) {
        if (n == 1 && (i == 0 || i + 1 == padded.size())) continue;
        std::string gram;
        for (int k = 0; k < n; ++k) gram.append(padded[i + k]);
        idx.push_back(static_cast<std::uint32_t>(text::fnv1a64(gram, ns) % spec.hash_size));
      }
    }
  };
  add_grams(head, 0x9e3779b97f4a7c15ULL);
  add_grams(tail, 0xc2b2ae3d27d4eb4fULL);
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  SparseVector v;
  v.index = std::move(idx);
  double w = v.index.empty() ? 0.0 : 1.0 / std::sqrt(static_cast<double>(v.index.size()));
  v.value.assign(v.index.size(), w);
  return v;
}

SparseVector featurize(const Triple& t, const FeatureSpec& spec) { return featurize(t.head.text, t.tail, spec); }

FilterModel FilterModel::external(std::string command, double threshold) {
  FilterModel m;
  m.kind = ModelKind::External;
  m.external_command = std::move(command);
  m.threshold = threshold;
  m.validate();
  return m;
}

void FilterModel::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw FilterError("filter threshold must be in (0, 1)");
  if (kind == ModelKind::NgramLinear) {
    features.validate();
    if (weights.size() != features.hash_size) {
      throw FilterError("weights have dimension " + std::to_string(weights.size()) + ", hash size is " +
                        std::to_string(features.hash_size));
    }
  } else if (external_command.empty()) {
    throw FilterError("external filter model needs a command");
  }
}

double FilterModel::score(const Triple& t) const {
  if (kind != ModelKind::NgramLinear) throw FilterError("external models score through make_scorer");
  return sigmoid(dot(weights, featurize(t, features)) + bias);
}

std::string FilterModel::serialize() const {
  std::ostringstream out;
  out << kModelHeader << '\n';
  out << "kind " << (kind == ModelKind::NgramLinear ? "ngram_linear" : "external") << '\n';
  out << "threshold " << hexfloat(threshold) << '\n';
  if (kind == ModelKind::External) {
    out << "command " << external_command << '\n';
  } else {
    out << "min_n " << features.min_n << '\n';
    out << "max_n " << features.max_n << '\n';
    out << "hash_size " << features.hash_size << '\n';
    out << "bias " << hexfloat(bias) << '\n';
    std::size_t nnz = std::count_if(weights.begin(), weights.end(), [](double w) { return w != 0.0; });
    out << "weights " << nnz << '\n';
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] != 0.0) out << "w " << i << ' ' << hexfloat(weights[i]) << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

FilterModel FilterModel::parse(std::string_view data) {
  auto lines = text::split_lines(data);
  if (lines.empty() || lines[0] != kModelHeader) throw FilterError("not a filter model file (bad header)");
  FilterModel m;
  m.weights.clear();
  bool ended = false;
  bool have_kind = false;
  std::optional<std::size_t> declared_nnz;
  std::size_t seen_nnz = 0;
  std::vector<std::pair<std::size_t, double>> entries;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto line = lines[li];
    if (line.empty()) continue;
    if (ended) throw FilterError("model file: content after end");
    auto sp = line.find(' ');
    std::string key(line.substr(0, sp));
    std::string value = sp == std::string_view::npos ? std::string() : std::string(line.substr(sp + 1));
    if (key == "end") {
      ended = true;
    } else if (key == "kind") {
      if (value == "ngram_linear") m.kind = ModelKind::NgramLinear;
      else if (value == "external") m.kind = ModelKind::External;
      else throw FilterError("model file: unknown kind '" + value + "'");
      have_kind = true;
    } else if (key == "threshold") {
      m.threshold = parse_double(value, "threshold");
    } else if (key == "command") {
      m.external_command = value;
    } else if (key == "min_n" || key == "max_n" || key == "hash_size" || key == "weights") {
      char* end = nullptr;
      unsigned long long v = std::strtoull(value.c_str(), &end, 10);
      if (value.empty() || *end != '\0') throw FilterError("model file: bad " + key);
      if (key == "min_n") m.features.min_n = static_cast<int>(v);
      else if (key == "max_n") m.features.max_n = static_cast<int>(v);
      else if (key == "hash_size") m.features.hash_size = static_cast<std::uint32_t>(v);
      else declared_nnz = v;
    } else if (key == "bias") {
      m.bias = parse_double(value, "bias");
    } else if (key == "w") {
      auto sp2 = value.find(' ');
      if (sp2 == std::string::npos) throw FilterError("model file: bad weight line");
      char* end = nullptr;
      auto idx = std::strtoull(value.c_str(), &end, 10);
      if (end != value.c_str() + sp2) throw FilterError("model file: bad weight index");
      entries.emplace_back(idx, parse_double(value.substr(sp2 + 1), "weight"));
      ++seen_nnz;
    } else {
      throw FilterError("model file: unknown key '" + key + "'");
    }
  }
  if (!ended) throw FilterError("model file is truncated (no end marker)");
  if (!have_kind) throw FilterError("model file: missing kind");
  if (m.kind == ModelKind::NgramLinear) {
    if (!declared_nnz || *declared_nnz != seen_nnz) throw FilterError("model file: weight count mismatch");
    m.features.validate();
    m.weights.assign(m.features.hash_size, 0.0);
    for (auto [i, w] : entries) {
      if (i >= m.weights.size()) throw FilterError("model file: weight index out of range");
      m.weights[i] = w;
    }
  }
  m.validate();
  return m;
}

void FilterModel::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model file " + path.string());
    out << serialize();
    if (!out.flush()) throw IoError("cannot write model file " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

FilterModel FilterModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

LossGradient logistic_loss_gradient(std::span<const double> weights, double bias, std::span<const SparseVector> xs,
                                    std::span<const double> labels, double l2) {
  if (xs.size() != labels.size()) throw FilterError("samples and labels differ in length");
  LossGradient g;
  g.grad_weights.assign(weights.size(), 0.0);
  const double inv_n = xs.empty() ? 0.0 : 1.0 / static_cast<double>(xs.size());
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto& x = xs[s];
    double z = bias;
    for (std::size_t k = 0; k < x.index.size(); ++k) z += weights[x.index[k]] * x.value[k];
    g.loss += (softplus(z) - labels[s] * z) * inv_n;
    double r = (sigmoid(z) - labels[s]) * inv_n;
    for (std::size_t k = 0; k < x.index.size(); ++k) g.grad_weights[x.index[k]] += r * x.value[k];
    g.grad_bias += r;
  }
  double sq = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    sq += weights[i] * weights[i];
    g.grad_weights[i] += l2 * weights[i];
  }
  g.loss += 0.5 * l2 * sq;
  return g;
}

TrainResult train_filter(std::span<const JudgedSample> samples, double holdout_fraction, Rng& rng,
                         const TrainOptions& options) {
  if (!(holdout_fraction > 0.0 && holdout_fraction <= 0.5)) {
    throw FilterError("holdout fraction must be in (0, 0.5]");
  }
  options.features.validate();
  if (options.epochs < 1 || !(options.learning_rate > 0) || options.l2 < 0) {
    throw FilterError("training needs epochs >= 1, learning_rate > 0 and l2 >= 0");
  }
  std::size_t valid = 0;
  for (const auto& s : samples) {
    if (s.triple.relation != Relation::HinderedBy) throw FilterError("judged sample is not a HinderedBy triple");
    if (s.label == JudgeLabel::Valid) ++valid;
  }
  if (valid == 0 || valid == samples.size()) {
    throw FilterError("training data holds a single label; both valid and invalid samples are required");
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(samples.size())));
  n_hold = std::clamp<std::size_t>(n_hold, 1, samples.size() - 1);

  std::vector<SparseVector> xs;
  std::vector<double> ys;
  xs.reserve(samples.size());
  ys.reserve(samples.size());
  for (auto i : order) {
    xs.push_back(featurize(samples[i].triple, options.features));
    ys.push_back(label_value(samples[i].label));
  }
  const std::size_t n_train = samples.size() - n_hold;

  // Weights are kept as scale * v so the L2 shrink is O(1) per step.
  std::vector<double> v(options.features.hash_size, 0.0);
  double scale = 1.0;
  double bias = 0.0;
  std::vector<std::size_t> epoch_order(n_train);
  std::iota(epoch_order.begin(), epoch_order.end(), 0);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(epoch_order);
    for (auto s : epoch_order) {
      double lr = options.learning_rate / (1.0 + 1e-4 * static_cast<double>(step++));
      const auto& x = xs[s];
      double z = bias;
      for (std::size_t k = 0; k < x.index.size(); ++k) z += scale * v[x.index[k]] * x.value[k];
      double r = sigmoid(z) - ys[s];
      scale *= (1.0 - lr * options.l2);
      double upd = lr * r / scale;
      for (std::size_t k = 0; k < x.index.size(); ++k) v[x.index[k]] -= upd * x.value[k];
      bias -= lr * r;
      if (scale < 1e-9) {
        for (auto& w : v) w *= scale;
        scale = 1.0;
      }
    }
  }

  TrainResult result;
  result.model.kind = ModelKind::NgramLinear;
  result.model.features = options.features;
  result.model.weights.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) result.model.weights[i] = scale * v[i];
  result.model.bias = bias;
  result.model.threshold = options.threshold;
  result.train_size = n_train;
  result.holdout_size = n_hold;

  std::vector<double> hold_scores;
  hold_scores.reserve(n_hold);
  for (std::size_t s = n_train; s < xs.size(); ++s) {
    hold_scores.push_back(sigmoid(dot(result.model.weights, xs[s]) + bias));
  }

  if (options.calibrate_threshold) {
    std::vector<double> cands = hold_scores;
    cands.push_back(options.threshold);
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    double best_f1 = -1;
    double best_t = options.threshold;
    for (double c : cands) {
      double t = std::clamp(c, 1e-6, 1.0 - 1e-6);
      int tp = 0, fp = 0, fn = 0;
      for (std::size_t k = 0; k < hold_scores.size(); ++k) {
        bool pred = hold_scores[k] >= t;
        bool truth = ys[n_train + k] > 0.5;
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
      }
      double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
      if (f1 > best_f1 || (f1 == best_f1 && std::abs(t - 0.5) < std::abs(best_t - 0.5))) {
        best_f1 = f1;
        best_t = t;
      }
    }
    result.model.threshold = best_t;
  }

  std::size_t correct = 0;
  for (std::size_t k = 0; k < hold_scores.size(); ++k) {
    bool pred = hold_scores[k] >= result.model.threshold;
    correct += pred == (ys[n_train + k] > 0.5);
  }
  result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(n_hold);
  result.model.validate();
  return result;
}

std::unique_ptr<Scorer> make_scorer(const FilterModel& model) {
  model.validate();
  if (model.kind == ModelKind::External) return std::make_unique<SubprocessScorer>(model.external_command);
  return std::make_unique<LinearScorer>(model);
}

FilterOutcome apply_filter(std::span<const Triple> raw, const FilterModel& model) {
  auto scorer = make_scorer(model);
  return apply_filter(raw, *scorer, model.threshold);
}

FilterOutcome apply_filter(std::span<const Triple> raw, Scorer& scorer, double threshold) {
  require_hindered_by(raw, "apply_filter");
  for (const auto& t : raw) {
    if (t.filter_status != FilterStatus::Raw) {
      throw FilterError("apply_filter: triple '" + t.head.text + "' already has status " +
                        std::string(to_string(t.filter_status)));
    }
  }
  FilterOutcome out;
  auto scores = scorer.score(raw);
  if (scores.size() != raw.size()) throw FilterError("scorer returned the wrong number of scores");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Triple t = raw[i];
    if (scores[i] >= threshold) {
      t.filter_status = FilterStatus::Kept;
      out.kept.push_back(std::move(t));
    } else {
      t.filter_status = FilterStatus::Removed;
      out.removed.push_back(std::move(t));
    }
  }
  out.report.total = static_cast<std::int64_t>(raw.size());
  out.report.kept = static_cast<std::int64_t>(out.kept.size());
  out.report.removed = static_cast<std::int64_t>(out.removed.size());
  out.report.kept_rate = raw.empty() ? 0.0 : static_cast<double>(out.report.kept) / static_cast<double>(raw.size());
  return out;
}

void write_judged_samples(const std::filesystem::path& path, std::span<const JudgedSample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write judged samples to " + path.string());
  for (const auto& s : samples) {
    auto j = detail::triple_to_json(s.triple);
    j["label"] = std::string(to_string(s.label));
    j["judge_raw_text"] = s.judge_raw_text;
    j["unmappable"] = s.unmappable;
    out << j.dump() << '\n';
  }
  if (!out.flush()) throw IoError("cannot write judged samples to " + path.string());
}

std::vector<JudgedSample> read_judged_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read judged samples from " + path.string());
  std::vector<JudgedSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FilterError(where + "invalid JSON");
    }
    JudgedSample s;
    if (auto diag = detail::triple_from_json(j, s.triple)) throw FilterError(where + *diag);
    if (s.triple.relation != Relation::HinderedBy) throw FilterError(where + "judged sample is not HinderedBy");
    auto label = j.value("label", std::string());
    if (label == "valid") s.label = JudgeLabel::Valid;
    else if (label == "invalid") s.label = JudgeLabel::Invalid;
    else throw FilterError(where + "label must be valid or invalid");
    s.judge_raw_text = j.value("judge_raw_text", std::string());
    s.unmappable = j.value("unmappable", false);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ckg
