#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "ckg/schema.hpp"

namespace ckg::detail {

inline nlohmann::json triple_to_json(const Triple& t) {
  return nlohmann::json{{"id", t.id()},
                        {"head", t.head.text},
                        {"knowledge_type", std::string(to_string(t.head.knowledge_type))},
                        {"relation", std::string(to_string(t.relation))},
                        {"tail", t.tail},
                        {"origin", std::string(to_string(t.origin))},
                        {"filter_status", std::string(to_string(t.filter_status))}};
}

// Reads the fields written by triple_to_json. Returns a diagnostic on
// failure instead of throwing so callers can pick their error type.
inline std::optional<std::string> triple_from_json(const nlohmann::json& j, Triple& out) {
  if (!j.is_object()) return "not a JSON object";
  auto str = [&](const char* k) -> std::optional<std::string> {
    auto it = j.find(k);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };
  auto head = str("head");
  auto kt = str("knowledge_type");
  auto rel = str("relation");
  auto tail = str("tail");
  if (!head || !kt || !rel || !tail) return "missing head, knowledge_type, relation or tail";
  auto pkt = parse_knowledge_type(*kt);
  if (!pkt) return "unknown knowledge type '" + *kt + "'";
  auto prel = parse_relation(*rel);
  if (!prel) return "unknown relation '" + *rel + "'";
  Triple t;
  t.head.text = *head;
  t.head.knowledge_type = *pkt;
  t.head.origin = Origin::Distilled;
  t.relation = *prel;
  t.tail = *tail;
  t.filter_status = *prel == Relation::HinderedBy ? FilterStatus::Raw : FilterStatus::NotApplicable;
  if (auto o = str("origin")) {
    auto po = parse_origin(*o);
    if (!po) return "unknown origin '" + *o + "'";
    t.origin = *po;
  }
  if (auto s = str("filter_status")) {
    auto ps = parse_filter_status(*s);
    if (!ps) return "unknown filter status '" + *s + "'";
    t.filter_status = *ps;
  }
  if (auto diag = check(t)) return diag;
  out = std::move(t);
  return std::nullopt;
}

}  // namespace ckg::detail
