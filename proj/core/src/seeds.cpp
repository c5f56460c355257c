#include "ckg/seeds.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "ckg/error.hpp"
#include "ckg/text.hpp"

namespace ckg {

namespace {

using nlohmann::json;

std::string canonical_placeholder(std::string_view s) {
  return text::replace_all(s, kNamePlaceholder, kPersonPlaceholder);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open seed file " + path.string());
  return in;
}

std::string string_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) throw SchemaError(std::string("missing string field \"") + name + "\"");
  return it->get<std::string>();
}

KnowledgeType type_field(const json& j) {
  auto s = string_field(j, "knowledge_type");
  auto kt = parse_knowledge_type(s);
  if (!kt) throw SchemaError("unknown knowledge_type \"" + s + "\"");
  return *kt;
}

template <class Fn>
void for_each_record(const std::filesystem::path& path, std::vector<SeedIssue>& issues, Fn&& fn) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      if (!j.is_object()) throw SchemaError("record is not a JSON object");
      fn(j, lineno);
    } catch (const json::exception& e) {
      issues.push_back({path, lineno, std::string("malformed JSON: ") + e.what()});
    } catch (const SchemaError& e) {
      issues.push_back({path, lineno, e.what()});
    }
  }
}

}  // namespace

std::string SeedIssue::describe() const { return file.string() + ":" + std::to_string(line) + ": " + message; }

HeadSeedFile read_head_seeds(const std::filesystem::path& path) {
  HeadSeedFile out;
  std::set<std::pair<std::string, KnowledgeType>> seen;
  for_each_record(path, out.issues, [&](const json& j, int lineno) {
    auto item = HeadItem::make(canonical_placeholder(string_field(j, "text")), type_field(j), Origin::Seed);
    if (!seen.emplace(item.text, item.knowledge_type).second) {
      out.issues.push_back({path, lineno, "duplicate head seed \"" + item.text + "\""});
      return;
    }
    out.items.push_back(std::move(item));
  });
  return out;
}

TripleSeedFile read_triple_seeds(const std::filesystem::path& path) {
  TripleSeedFile out;
  std::set<std::string> seen;
  for_each_record(path, out.issues, [&](const json& j, int lineno) {
    auto head = HeadItem::make(canonical_placeholder(string_field(j, "head")), type_field(j), Origin::Seed);
    auto rel_name = string_field(j, "relation");
    auto rel = parse_relation(rel_name);
    if (!rel) throw SchemaError("unknown relation \"" + rel_name + "\"");
    auto t = Triple::make(std::move(head), *rel, canonical_placeholder(string_field(j, "tail")), Origin::Seed);
    if (!seen.insert(t.key()).second) {
      out.issues.push_back({path, lineno, "duplicate triple seed"});
      return;
    }
    out.items.push_back(std::move(t));
  });
  return out;
}

std::vector<HeadItem> load_head_seeds(const std::filesystem::path& path) {
  auto f = read_head_seeds(path);
  if (!f.issues.empty()) throw SchemaError(f.issues.front().describe());
  return std::move(f.items);
}

std::vector<Triple> load_triple_seeds(const std::filesystem::path& path) {
  auto f = read_triple_seeds(path);
  if (!f.issues.empty()) throw SchemaError(f.issues.front().describe());
  return std::move(f.items);
}

std::vector<std::string> load_name_pool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open name pool " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto name = text::trim(line);
    if (name.empty() || name.front() == '#') continue;
    names.push_back(std::move(name));
  }
  if (names.empty()) throw ConfigError("name pool " + path.string() + " is empty");
  return names;
}

void write_head_seeds(const std::filesystem::path& path, const std::vector<HeadItem>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& h : items) {
    out << json{{"text", h.text}, {"knowledge_type", std::string(to_string(h.knowledge_type))}}.dump() << '\n';
  }
}

}  // namespace ckg
