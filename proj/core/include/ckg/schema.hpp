#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ckg {

enum class KnowledgeType : std::uint8_t { Voluntary, Involuntary, State };

inline constexpr std::array<KnowledgeType, 3> kAllKnowledgeTypes = {
    KnowledgeType::Voluntary, KnowledgeType::Involuntary, KnowledgeType::State};

// Declaration order is the canonical order used for reports and exports.
enum class Relation : std::uint8_t { xWant, xReact, xEffect, xAttr, xNeed, xIntent, HinderedBy };

inline constexpr std::array<Relation, 7> kAllRelations = {
    Relation::xWant, Relation::xReact, Relation::xEffect, Relation::xAttr,
    Relation::xNeed, Relation::xIntent, Relation::HinderedBy};

// Bit set over KnowledgeType.
class TypeMask {
 public:
  constexpr TypeMask() = default;
  constexpr TypeMask(std::initializer_list<KnowledgeType> types) {
    for (auto t : types) bits_ |= bit(t);
  }
  constexpr bool contains(KnowledgeType t) const { return (bits_ & bit(t)) != 0; }
  constexpr int size() const { return (bits_ & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
  constexpr bool operator==(const TypeMask&) const = default;

 private:
  static constexpr std::uint8_t bit(KnowledgeType t) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
  }
  std::uint8_t bits_ = 0;
};

struct RelationInfo {
  Relation relation;
  std::string_view name;
  // Explanation sentence with {Head} and {Tail} slots.
  std::string_view sentence_template;
  TypeMask valid_types;
};

const RelationInfo& relation_info(Relation r);

std::string_view to_string(KnowledgeType kt);
std::string_view to_string(Relation r);
std::optional<KnowledgeType> parse_knowledge_type(std::string_view s);
std::optional<Relation> parse_relation(std::string_view s);

bool is_valid_pair(KnowledgeType kt, Relation r);

// Relations whose validity cell for `kt` is set, in canonical order.
std::vector<Relation> valid_relations(KnowledgeType kt);

// Placeholder for the subject of every head and tail as stored.
inline constexpr std::string_view kPersonPlaceholder = "PersonX";
// Alternative spelling accepted in templates and seed files.
inline constexpr std::string_view kNamePlaceholder = "[NAME]";

enum class Origin : std::uint8_t { Seed, Distilled };
std::string_view to_string(Origin o);
std::optional<Origin> parse_origin(std::string_view s);

enum class FilterStatus : std::uint8_t { NotApplicable, Raw, Kept, Removed };
std::string_view to_string(FilterStatus s);
std::optional<FilterStatus> parse_filter_status(std::string_view s);

struct HeadItem {
  std::string text;
  KnowledgeType knowledge_type = KnowledgeType::Voluntary;
  Origin origin = Origin::Distilled;

  // Normalizes `text`; throws SchemaError when nothing is left.
  static HeadItem make(std::string_view text, KnowledgeType kt, Origin origin = Origin::Distilled);

  // Identity ignores origin.
  bool same_item(const HeadItem& other) const {
    return knowledge_type == other.knowledge_type && text == other.text;
  }
};

struct Triple {
  HeadItem head;
  Relation relation = Relation::xWant;
  std::string tail;
  Origin origin = Origin::Distilled;
  FilterStatus filter_status = FilterStatus::NotApplicable;

  // Normalizes the tail, assigns the status implied by the relation (Raw for
  // HinderedBy, NotApplicable otherwise) and checks the validity matrix.
  // Throws SchemaError on an invalid pair or an empty tail.
  static Triple make(HeadItem head, Relation relation, std::string_view tail,
                     Origin origin = Origin::Distilled);

  // Deduplication key: head text, head type, relation, tail.
  std::string key() const;
  // Stable hex id derived from key().
  std::string id() const;
};

// Throws SchemaError if the triple breaks any invariant.
void validate(const Triple& t);

// Returns a diagnostic for the first violated invariant, if any.
std::optional<std::string> check(const Triple& t);

enum class PromptKind : std::uint8_t { HeadDistill, TailDistill, Judge };
std::string_view to_string(PromptKind k);

struct PromptSpec {
  PromptKind kind = PromptKind::HeadDistill;
  int example_count = 10;
  double temperature = 0.7;
  // Only meaningful for TailDistill.
  int tails_per_request = 0;

  static PromptSpec head_default() { return {PromptKind::HeadDistill, 10, 0.7, 0}; }
  static PromptSpec tail_default() { return {PromptKind::TailDistill, 8, 0.7, 10}; }
  static PromptSpec judge_default() { return {PromptKind::Judge, 0, 0.0, 0}; }

  void validate() const;
};

}  // namespace ckg
