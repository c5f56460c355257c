#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ckg/gateway.hpp"
#include "ckg/prompts.hpp"
#include "ckg/random.hpp"
#include "ckg/schema.hpp"

namespace ckg {

enum class JudgeLabel : std::uint8_t { Valid, Invalid };
std::string_view to_string(JudgeLabel l);

struct JudgedSample {
  Triple triple;
  JudgeLabel label = JudgeLabel::Invalid;
  std::string judge_raw_text;
  // The verdict could not be read, even after one retry; label is Invalid.
  bool unmappable = false;
};

// Reads the verdict from the start of a judge reply. Leading whitespace,
// quotes and list markers are skipped and ASCII is compared lowercase.
//   invalid: 否 不 无效 错 "no" "invalid" "false"
//   valid:   是 合理 有效 对 正确 "yes" "valid" "true"
// Invalid markers are tried first so that "不合理" is not read as "合理".
std::optional<JudgeLabel> map_judge_text(std::string_view reply);

// Uniform sample without replacement. Throws FilterError if `raw` holds a
// non-HinderedBy triple or fewer than n triples.
std::vector<Triple> sample_for_judging(std::span<const Triple> raw, std::size_t n, Rng& rng);

struct JudgeOptions {
  PromptSpec spec = PromptSpec::judge_default();
  // Replaces the subject placeholder in the judged sentence when non-empty.
  std::string name;
  int max_output_tokens = 16;
};

struct JudgeResult {
  std::vector<JudgedSample> samples;
  // (input index, error) for items dropped after transport failures.
  std::vector<std::pair<std::size_t, std::string>> skipped;
  int unmappable = 0;
  bool cap_reached = false;
};

JudgeResult judge(std::span<const Triple> triples, Gateway& gateway, const TemplateSet& templates,
                  const JudgeOptions& options = {});

struct FeatureSpec {
  int min_n = 1;
  int max_n = 3;
  std::uint32_t hash_size = 1u << 18;

  void validate() const;
  bool operator==(const FeatureSpec&) const = default;
};

struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

// Hashed character n-grams of head and tail (separate hash namespaces),
// binary presence, L2-normalized. Indices are sorted and unique.
SparseVector featurize(std::string_view head, std::string_view tail, const FeatureSpec& spec);
SparseVector featurize(const Triple& t, const FeatureSpec& spec);

enum class ModelKind : std::uint8_t { NgramLinear, External };

struct FilterModel {
  ModelKind kind = ModelKind::NgramLinear;
  FeatureSpec features;
  std::vector<double> weights;  // size == features.hash_size for NgramLinear
  double bias = 0.0;
  double threshold = 0.5;
  // For External: shell command that reads "head\trelation\ttail" lines on
  // stdin and prints one probability-of-valid per line.
  std::string external_command;

  static FilterModel external(std::string command, double threshold = 0.5);

  // Probability that the triple is valid. NgramLinear only.
  double score(const Triple& t) const;

  // Text format: header "ckg-filter-model 1", key/value lines, and nonzero
  // weights as "w <index> <hexfloat>". Doubles are written as hexfloats, so
  // a round trip is exact.
  std::string serialize() const;
  static FilterModel parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static FilterModel load(const std::filesystem::path& path);

  void validate() const;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

// Mean logistic loss over the samples plus (l2 / 2) * |w|^2, and its
// gradient. Labels are 1 (valid) or 0 (invalid).
LossGradient logistic_loss_gradient(std::span<const double> weights, double bias, std::span<const SparseVector> xs,
                                    std::span<const double> labels, double l2);

struct TrainOptions {
  FeatureSpec features;
  int epochs = 30;
  double learning_rate = 0.5;
  double l2 = 1e-6;
  double threshold = 0.5;
  // Pick the holdout-F1-maximizing threshold (valid = positive class).
  bool calibrate_threshold = false;
};

struct TrainResult {
  FilterModel model;
  double holdout_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

// Shuffled holdout split, then per-sample gradient descent for
// options.epochs passes in an rng-determined order. Throws FilterError if
// only one label is present or holdout_fraction is outside (0, 0.5].
TrainResult train_filter(std::span<const JudgedSample> samples, double holdout_fraction, Rng& rng,
                         const TrainOptions& options = {});

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score(std::span<const Triple> triples) = 0;
};

// Scores through the model's own weights or its external command.
std::unique_ptr<Scorer> make_scorer(const FilterModel& model);

struct FilterReport {
  std::int64_t total = 0;
  std::int64_t kept = 0;
  std::int64_t removed = 0;
  double kept_rate = 0.0;
};

struct FilterOutcome {
  std::vector<Triple> kept;
  std::vector<Triple> removed;
  FilterReport report;
};

// score >= threshold keeps. Throws FilterError on a non-HinderedBy triple
// or one whose status is not raw.
FilterOutcome apply_filter(std::span<const Triple> raw, const FilterModel& model);
FilterOutcome apply_filter(std::span<const Triple> raw, Scorer& scorer, double threshold);

// Audit file: one JSON object per line with the triple id, fields, label,
// raw judge text and the unmappable flag.
void write_judged_samples(const std::filesystem::path& path, std::span<const JudgedSample> samples);
std::vector<JudgedSample> read_judged_samples(const std::filesystem::path& path);

}  // namespace ckg
