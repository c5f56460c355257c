#include "ckg/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "ckg/error.hpp"
#include "ckg/text.hpp"
#include "triple_json.hpp"

namespace ckg {

namespace {

using nlohmann::json;

bool canonical_less(const Triple& a, const Triple& b) { return a.key() < b.key(); }

std::vector<Triple> sample_stratum(std::vector<Triple> pool, int n, Stratum s, Rng& rng) {
  if (pool.size() < static_cast<std::size_t>(n)) {
    throw EvalError("stratum " + std::string(to_string(s)) + " has " + std::to_string(pool.size()) +
                    " triples, " + std::to_string(n) + " needed");
  }
  std::sort(pool.begin(), pool.end(), canonical_less);
  std::vector<Triple> out;
  out.reserve(static_cast<std::size_t>(n));
  for (auto i : rng.sample_indices(pool.size(), static_cast<std::size_t>(n))) out.push_back(pool[i]);
  return out;
}

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json record_to_json(const AnnotationRecord& r) {
  return json{{"sample_id", r.sample_id},
              {"annotator", r.annotator_id},
              {"label", std::string(to_string(r.label))},
              {"timestamp", r.timestamp}};
}

AnnotationRecord record_from_json(const json& j) {
  AnnotationRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.annotator_id = j.at("annotator").get<std::string>();
  auto label = parse_annotation_label(j.at("label").get<std::string>());
  if (!label) throw EvalError("bad label in annotation record");
  r.label = *label;
  r.timestamp = j.value("timestamp", std::string());
  return r;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(Stratum s) {
  switch (s) {
    case Stratum::HinderedByRaw:
      return "HinderedBy-raw";
    case Stratum::HinderedByFiltered:
      return "HinderedBy-filtered";
    default:
      return to_string(static_cast<Relation>(s));
  }
}

std::optional<Stratum> parse_stratum(std::string_view s) {
  for (auto st : kAllStrata) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

std::string_view to_string(AnnotationLabel l) {
  return l == AnnotationLabel::Reasonable ? "reasonable" : "unreasonable";
}

std::optional<AnnotationLabel> parse_annotation_label(std::string_view s) {
  if (s == "reasonable") return AnnotationLabel::Reasonable;
  if (s == "unreasonable") return AnnotationLabel::Unreasonable;
  return std::nullopt;
}

const EvalItem* EvalSample::find(const std::string& sample_id) const {
  for (const auto& it : items) {
    if (it.sample_id == sample_id) return &it;
  }
  return nullptr;
}

void EvalSample::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write eval sample " + path.string());
  for (const auto& it : items) {
    json j{{"sample_id", it.sample_id},
           {"stratum", std::string(to_string(it.stratum))},
           {"per_stratum", per_stratum},
           {"triple", detail::triple_to_json(it.triple)}};
    out << j.dump() << '\n';
  }
  if (!out.flush()) throw IoError("cannot write eval sample " + path.string());
}

EvalSample EvalSample::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read eval sample " + path.string());
  EvalSample s;
  std::string line;
  int lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      auto j = json::parse(line);
      EvalItem it;
      it.sample_id = j.at("sample_id").get<std::string>();
      auto st = parse_stratum(j.at("stratum").get<std::string>());
      if (!st) throw EvalError(where + "unknown stratum");
      it.stratum = *st;
      if (auto diag = detail::triple_from_json(j.at("triple"), it.triple)) throw EvalError(where + *diag);
      if (!ids.insert(it.sample_id).second) throw EvalError(where + "duplicate sample id " + it.sample_id);
      s.per_stratum = j.value("per_stratum", 0);
      s.items.push_back(std::move(it));
    } catch (const json::exception& e) {
      throw EvalError(where + "malformed item: " + e.what());
    }
  }
  return s;
}

EvalSample build_eval_sample(std::span<const Triple> triples, int per_stratum_n, Rng& rng) {
  if (per_stratum_n < 1) throw EvalError("per-stratum sample size must be positive");
  std::array<std::vector<Triple>, 7> by_rel;
  for (const auto& t : triples) by_rel[static_cast<std::size_t>(t.relation)].push_back(t);

  EvalSample sample;
  sample.per_stratum = per_stratum_n;
  auto add = [&](const std::vector<Triple>& picked, Stratum s) {
    for (const auto& t : picked) sample.items.push_back(EvalItem{t.id(), t, s});
  };
  for (std::size_t r = 0; r < 6; ++r) {
    add(sample_stratum(by_rel[r], per_stratum_n, static_cast<Stratum>(r), rng), static_cast<Stratum>(r));
  }
  const auto& hindered = by_rel[static_cast<std::size_t>(Relation::HinderedBy)];
  auto raw = sample_stratum(hindered, per_stratum_n, Stratum::HinderedByRaw, rng);
  std::set<std::string> taken;
  for (const auto& t : raw) taken.insert(t.key());
  std::vector<Triple> kept;
  for (const auto& t : hindered) {
    if (t.filter_status == FilterStatus::Kept && !taken.contains(t.key())) kept.push_back(t);
  }
  auto filtered = sample_stratum(std::move(kept), per_stratum_n, Stratum::HinderedByFiltered, rng);
  add(raw, Stratum::HinderedByRaw);
  add(filtered, Stratum::HinderedByFiltered);
  return sample;
}

EvalSample build_eval_sample(const GraphStore& store, int per_stratum_n, Rng& rng) {
  auto all = store.triples();
  return build_eval_sample(all, per_stratum_n, rng);
}

AcceptanceReport compute_acceptance(const EvalSample& sample, std::span<const AnnotationRecord> records,
                                    std::span<const std::string> annotators) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < sample.items.size(); ++i) index.emplace(sample.items[i].sample_id, i);

  std::map<std::pair<std::size_t, std::string>, AnnotationLabel> latest;
  for (const auto& r : records) {
    auto it = index.find(r.sample_id);
    if (it == index.end()) throw ValidationError("annotation for unknown sample " + r.sample_id);
    latest[{it->second, r.annotator_id}] = r.label;
  }

  std::set<std::string> who(annotators.begin(), annotators.end());
  if (who.empty()) {
    for (const auto& [k, _] : latest) who.insert(k.second);
  }

  AcceptanceReport rep;
  rep.records = static_cast<std::int64_t>(latest.size());
  struct Tally {
    std::size_t done = 0;
    std::size_t reasonable = 0;
  };
  std::map<std::string, Tally> overall;
  std::map<std::string, std::array<Tally, 8>> by_stratum;
  std::vector<std::array<std::size_t, 2>> votes(sample.items.size(), {0, 0});
  std::size_t counted = 0;
  for (const auto& [k, label] : latest) {
    if (!who.contains(k.second)) continue;
    ++counted;
    bool ok = label == AnnotationLabel::Reasonable;
    auto s = static_cast<std::size_t>(sample.items[k.first].stratum);
    auto& a = overall[k.second];
    auto& b = by_stratum[k.second][s];
    ++a.done;
    ++b.done;
    a.reasonable += ok;
    b.reasonable += ok;
    ++votes[k.first][ok ? 0 : 1];
  }

  std::vector<double> props;
  for (const auto& id : who) {
    auto it = overall.find(id);
    if (it == overall.end() || it->second.done == 0) {
      rep.per_annotator[id] = std::nullopt;
      continue;
    }
    double p = static_cast<double>(it->second.reasonable) / static_cast<double>(it->second.done);
    rep.per_annotator[id] = p;
    props.push_back(p);
  }
  rep.overall = mean_of(props);

  for (auto s : kAllStrata) {
    std::vector<double> sp;
    for (const auto& id : who) {
      auto it = by_stratum.find(id);
      if (it == by_stratum.end()) continue;
      const auto& t = it->second[static_cast<std::size_t>(s)];
      if (t.done > 0) sp.push_back(static_cast<double>(t.reasonable) / static_cast<double>(t.done));
    }
    rep.per_stratum[s] = mean_of(sp);
  }

  std::size_t judged = 0, majority = 0;
  std::array<std::size_t, 8> s_judged{}, s_majority{};
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (votes[i][0] + votes[i][1] == 0) continue;
    bool yes = votes[i][0] > votes[i][1];
    auto s = static_cast<std::size_t>(sample.items[i].stratum);
    ++judged;
    ++s_judged[s];
    majority += yes;
    s_majority[s] += yes;
  }
  if (judged > 0) rep.majority_vote = static_cast<double>(majority) / static_cast<double>(judged);
  for (auto s : kAllStrata) {
    auto k = static_cast<std::size_t>(s);
    rep.majority_vote_per_stratum[s] =
        s_judged[k] ? std::optional<double>(static_cast<double>(s_majority[k]) / static_cast<double>(s_judged[k]))
                    : std::nullopt;
  }

  const double pairs = static_cast<double>(sample.items.size()) * static_cast<double>(who.size());
  rep.coverage = pairs > 0 ? static_cast<double>(counted) / pairs : 0.0;
  return rep;
}

EvalService::EvalService(EvalSample sample, std::vector<std::string> annotators, TemplateSet templates,
                         std::optional<std::filesystem::path> records_path, std::uint64_t order_seed)
    : sample_(std::move(sample)),
      annotators_(std::move(annotators)),
      templates_(std::move(templates)),
      records_path_(std::move(records_path)) {
  if (annotators_.empty()) throw EvalError("at least one annotator must be registered");
  std::set<std::string> uniq(annotators_.begin(), annotators_.end());
  if (uniq.size() != annotators_.size()) throw EvalError("annotator ids must be unique");
  for (std::size_t i = 0; i < sample_.items.size(); ++i) {
    if (!item_index_.emplace(sample_.items[i].sample_id, i).second) {
      throw EvalError("duplicate sample id " + sample_.items[i].sample_id);
    }
  }
  for (const auto& a : annotators_) {
    if (a.empty()) throw EvalError("annotator ids must be non-empty");
    std::vector<std::size_t> order(sample_.items.size());
    std::iota(order.begin(), order.end(), 0);
    Rng base(order_seed);
    Rng r = base.fork(text::fnv1a64(a));
    r.shuffle(order);
    orders_.emplace(a, std::move(order));
  }

  if (records_path_ && std::filesystem::exists(*records_path_)) {
    std::ifstream in(*records_path_, std::ios::binary);
    if (!in) throw IoError("cannot read annotation records " + records_path_->string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      AnnotationRecord rec;
      try {
        rec = record_from_json(json::parse(line));
      } catch (const json::exception& e) {
        // A torn final line from an interrupted write is dropped.
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw EvalError(records_path_->string() + ":" + std::to_string(lineno) + ": malformed record");
      }
      if (!item_index_.contains(rec.sample_id) || !is_annotator(rec.annotator_id)) {
        throw EvalError(records_path_->string() + ":" + std::to_string(lineno) +
                        ": record for unknown sample or annotator");
      }
      store_locked(std::move(rec));
    }
  }
}

bool EvalService::is_annotator(const std::string& id) const { return orders_.contains(id); }

bool EvalService::store_locked(AnnotationRecord record) {
  auto key = std::make_pair(record.sample_id, record.annotator_id);
  auto it = latest_.find(key);
  if (it != latest_.end()) {
    records_[it->second] = std::move(record);
    return true;
  }
  latest_.emplace(std::move(key), records_.size());
  records_.push_back(std::move(record));
  return false;
}

bool EvalService::submit(AnnotationRecord record) {
  if (!item_index_.contains(record.sample_id)) throw ValidationError("unknown sample_id " + record.sample_id);
  if (!is_annotator(record.annotator_id)) throw ValidationError("unknown annotator " + record.annotator_id);
  if (record.timestamp.empty()) record.timestamp = now_iso8601();
  std::unique_lock lock(mu_);
  if (records_path_) {
    std::ofstream out(*records_path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + records_path_->string());
    out << record_to_json(record).dump() << '\n';
    if (!out.flush()) throw IoError("cannot append to " + records_path_->string());
  }
  return store_locked(std::move(record));
}

const std::vector<std::size_t>& EvalService::order_for(const std::string& annotator_id) const {
  auto it = orders_.find(annotator_id);
  if (it == orders_.end()) throw ValidationError("unknown annotator " + annotator_id);
  return it->second;
}

std::optional<NextItem> EvalService::next_for(const std::string& annotator_id) const {
  const auto& order = order_for(annotator_id);
  std::shared_lock lock(mu_);
  for (auto i : order) {
    const auto& item = sample_.items[i];
    if (latest_.contains({item.sample_id, annotator_id})) continue;
    NextItem n;
    n.sample_id = item.sample_id;
    n.triple = item.triple;
    n.stratum = item.stratum;
    n.relation_sentence =
        render_relation_sentence(templates_, item.triple.relation, item.triple.head.text, item.triple.tail);
    return n;
  }
  return std::nullopt;
}

AnnotatorProgress EvalService::progress_of(const std::string& annotator_id) const {
  (void)order_for(annotator_id);
  std::shared_lock lock(mu_);
  AnnotatorProgress p{annotator_id, 0, sample_.items.size()};
  for (const auto& [k, _] : latest_) p.done += k.second == annotator_id;
  return p;
}

ProgressReport EvalService::progress() const {
  ProgressReport rep;
  rep.total_items = sample_.items.size();
  std::size_t done = 0;
  for (const auto& a : annotators_) {
    rep.annotators.push_back(progress_of(a));
    done += rep.annotators.back().done;
  }
  double pairs = static_cast<double>(rep.total_items) * static_cast<double>(annotators_.size());
  rep.coverage = pairs > 0 ? static_cast<double>(done) / pairs : 0.0;
  return rep;
}

std::vector<AnnotationRecord> EvalService::records() const {
  std::shared_lock lock(mu_);
  return records_;
}

AcceptanceReport EvalService::acceptance() const {
  auto recs = records();
  return compute_acceptance(sample_, recs, annotators_);
}

}  // namespace ckg
