#include "ckg/schema.hpp"

#include "ckg/error.hpp"
#include "ckg/text.hpp"

namespace ckg {

namespace {

using KT = KnowledgeType;

constexpr TypeMask kAll{KT::Voluntary, KT::Involuntary, KT::State};

// Relation table: explanation sentences and the head types each relation is
// distilled for.
constexpr std::array<RelationInfo, 7> kRelations = {{
    {Relation::xWant, "xWant", "After the occurrence of {Head}, PersonX wants {Tail}", kAll},
    {Relation::xReact, "xReact", "After the occurrence of {Head}, PersonX feels {Tail}",
     TypeMask{KT::Voluntary, KT::Involuntary}},
    {Relation::xEffect, "xEffect", "After the occurrence of {Head}, PersonX does {Tail} as a result", kAll},
    {Relation::xAttr, "xAttr", "After the occurrence of {Head}, we can know that PersonX is {Tail}", kAll},
    {Relation::xNeed, "xNeed", "Before the occurrence of {Head}, PersonX needs {Tail}", kAll},
    {Relation::xIntent, "xIntent", "When doing {Head}, PersonX's intent is {Tail}", TypeMask{KT::Voluntary}},
    {Relation::HinderedBy, "HinderedBy", "The occurrence of {Head} can be hindered by {Tail}", kAll},
}};

}  // namespace

const RelationInfo& relation_info(Relation r) { return kRelations[static_cast<std::size_t>(r)]; }

std::string_view to_string(KnowledgeType kt) {
  switch (kt) {
    case KT::Voluntary: return "voluntary";
    case KT::Involuntary: return "involuntary";
    case KT::State: return "state";
  }
  return "?";
}

std::string_view to_string(Relation r) { return relation_info(r).name; }

std::optional<KnowledgeType> parse_knowledge_type(std::string_view s) {
  const auto lower = text::to_lower_ascii(s);
  for (auto kt : kAllKnowledgeTypes) {
    if (lower == to_string(kt)) return kt;
  }
  return std::nullopt;
}

std::optional<Relation> parse_relation(std::string_view s) {
  for (const auto& info : kRelations) {
    if (s == info.name) return info.relation;
  }
  return std::nullopt;
}

bool is_valid_pair(KnowledgeType kt, Relation r) { return relation_info(r).valid_types.contains(kt); }

std::vector<Relation> valid_relations(KnowledgeType kt) {
  std::vector<Relation> out;
  for (auto r : kAllRelations) {
    if (is_valid_pair(kt, r)) out.push_back(r);
  }
  return out;
}

std::string_view to_string(Origin o) { return o == Origin::Seed ? "seed" : "distilled"; }

std::optional<Origin> parse_origin(std::string_view s) {
  if (s == "seed") return Origin::Seed;
  if (s == "distilled") return Origin::Distilled;
  return std::nullopt;
}

std::string_view to_string(FilterStatus s) {
  switch (s) {
    case FilterStatus::NotApplicable: return "not_applicable";
    case FilterStatus::Raw: return "raw";
    case FilterStatus::Kept: return "kept";
    case FilterStatus::Removed: return "removed";
  }
  return "?";
}

std::optional<FilterStatus> parse_filter_status(std::string_view s) {
  for (auto st : {FilterStatus::NotApplicable, FilterStatus::Raw, FilterStatus::Kept, FilterStatus::Removed}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

HeadItem HeadItem::make(std::string_view text, KnowledgeType kt, Origin origin) {
  auto norm = text::normalize_item(text);
  if (norm.empty()) throw SchemaError("head item is empty after normalization");
  return HeadItem{std::move(norm), kt, origin};
}

Triple Triple::make(HeadItem head, Relation relation, std::string_view tail, Origin origin) {
  Triple t;
  t.head = std::move(head);
  t.relation = relation;
  t.tail = text::normalize_item(tail);
  t.origin = origin;
  t.filter_status = relation == Relation::HinderedBy ? FilterStatus::Raw : FilterStatus::NotApplicable;
  validate(t);
  return t;
}

std::string Triple::key() const {
  std::string k;
  k.reserve(head.text.size() + tail.size() + 24);
  k += head.text;
  k += '\t';
  k += to_string(head.knowledge_type);
  k += '\t';
  k += to_string(relation);
  k += '\t';
  k += tail;
  return k;
}

std::string Triple::id() const { return text::hex64(text::fnv1a64(key())); }

std::optional<std::string> check(const Triple& t) {
  if (t.head.text.empty()) return "empty head";
  if (t.tail.empty()) return "empty tail";
  if (!is_valid_pair(t.head.knowledge_type, t.relation)) {
    return std::string("relation ") + std::string(to_string(t.relation)) + " is not valid for " +
           std::string(to_string(t.head.knowledge_type)) + " head items";
  }
  const bool hindered = t.relation == Relation::HinderedBy;
  if (hindered && t.filter_status == FilterStatus::NotApplicable) {
    return "HinderedBy triple must carry a filter status";
  }
  if (!hindered && t.filter_status != FilterStatus::NotApplicable) {
    return std::string("filter status ") + std::string(to_string(t.filter_status)) +
           " is only allowed on HinderedBy triples";
  }
  if (t.tail.find('\t') != std::string::npos || t.head.text.find('\t') != std::string::npos ||
      t.tail.find('\n') != std::string::npos || t.head.text.find('\n') != std::string::npos) {
    return "head or tail contains a tab or newline";
  }
  return std::nullopt;
}

void validate(const Triple& t) {
  if (auto diag = check(t)) throw SchemaError(*diag);
}

std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::HeadDistill: return "head_distill";
    case PromptKind::TailDistill: return "tail_distill";
    case PromptKind::Judge: return "judge";
  }
  return "?";
}

void PromptSpec::validate() const {
  if (temperature < 0.0 || temperature > 2.0) throw SchemaError("temperature must be within [0, 2]");
  if (kind != PromptKind::Judge && example_count < 1) throw SchemaError("example_count must be positive");
  if (kind == PromptKind::TailDistill && tails_per_request < 1) {
    throw SchemaError("tails_per_request must be positive");
  }
}

}  // namespace ckg
