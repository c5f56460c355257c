#include "ckg/prompts.hpp"

#include <fstream>
#include <sstream>

#include "ckg/error.hpp"
#include "ckg/text.hpp"

namespace ckg {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read template asset " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Strips one trailing newline so that a prompt file ending with '\n' does not
// leave a blank line at the end of every rendered prompt.
std::string read_template(const std::filesystem::path& p) {
  auto s = read_file(p);
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

template <class Fn>
void for_each_tsv_row(const std::filesystem::path& p, Fn&& fn) {
  const auto body = read_file(p);
  int lineno = 0;
  for (auto line : text::split_lines(body)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ConfigError(p.string() + ":" + std::to_string(lineno) + ": expected <key>\\t<value>");
    }
    fn(line.substr(0, tab), line.substr(tab + 1), lineno);
  }
}

std::string numbered(std::span<const std::string> lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1);
    out += ". ";
    out += lines[i];
  }
  return out;
}

std::string fill(std::string_view tmpl, std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  std::string out(tmpl);
  for (const auto& [slot, value] : slots) out = text::replace_all(out, slot, value);
  return out;
}

}  // namespace

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
  TemplateSet t;
  t.head_prompt = read_template(dir / "head_prompt.txt");
  t.tail_prompt = read_template(dir / "tail_prompt.txt");
  t.judge_prompt = read_template(dir / "judge_prompt.txt");

  std::array<bool, 7> seen_rel{};
  for_each_tsv_row(dir / "relations.tsv", [&](std::string_view key, std::string_view value, int lineno) {
    auto rel = parse_relation(key);
    if (!rel) {
      throw ConfigError((dir / "relations.tsv").string() + ":" + std::to_string(lineno) + ": unknown relation " +
                        std::string(key));
    }
    if (text::count_occurrences(value, "{Head}") != 1 || text::count_occurrences(value, "{Tail}") != 1) {
      throw ConfigError("relation sentence for " + std::string(key) + " needs exactly one {Head} and one {Tail}");
    }
    t.relation_sentences[static_cast<std::size_t>(*rel)] = std::string(value);
    seen_rel[static_cast<std::size_t>(*rel)] = true;
  });
  for (auto r : kAllRelations) {
    if (!seen_rel[static_cast<std::size_t>(r)]) {
      throw ConfigError("relations.tsv in " + dir.string() + " has no sentence for " + std::string(to_string(r)));
    }
  }

  std::array<bool, 3> seen_type{};
  for_each_tsv_row(dir / "knowledge_types.tsv", [&](std::string_view key, std::string_view value, int) {
    auto kt = parse_knowledge_type(key);
    if (!kt) throw ConfigError("knowledge_types.tsv: unknown knowledge type " + std::string(key));
    t.type_labels[static_cast<std::size_t>(*kt)] = std::string(value);
    seen_type[static_cast<std::size_t>(*kt)] = true;
  });
  for (auto kt : kAllKnowledgeTypes) {
    if (!seen_type[static_cast<std::size_t>(kt)]) {
      throw ConfigError("knowledge_types.tsv has no label for " + std::string(to_string(kt)));
    }
  }
  return t;
}

std::string render_relation_sentence(const TemplateSet& t, Relation r, std::string_view head, std::string_view tail) {
  return fill(t.sentence(r), {{"{Head}", head}, {"{Tail}", tail}});
}

SentenceFrame sentence_frame(const TemplateSet& t, Relation r, std::string_view head) {
  const auto& s = t.sentence(r);
  const auto pos = s.find("{Tail}");
  return {fill(s.substr(0, pos), {{"{Head}", head}}), fill(s.substr(pos + 6), {{"{Head}", head}})};
}

std::string substitute_name(std::string_view s, std::string_view name) {
  return text::replace_all(text::replace_all(s, kPersonPlaceholder, name), kNamePlaceholder, name);
}

std::string render_head_prompt(const TemplateSet& t, std::span<const HeadItem> seed_sample, KnowledgeType kt,
                               const PromptSpec& spec) {
  if (spec.kind != PromptKind::HeadDistill) throw SchemaError("render_head_prompt needs a head_distill prompt spec");
  if (static_cast<int>(seed_sample.size()) != spec.example_count) {
    throw SchemaError("head prompt expects " + std::to_string(spec.example_count) + " examples, got " +
                      std::to_string(seed_sample.size()));
  }
  std::vector<std::string> lines;
  lines.reserve(seed_sample.size());
  for (const auto& seed : seed_sample) {
    if (seed.knowledge_type != kt) {
      throw SchemaError("seed \"" + seed.text + "\" is " + std::string(to_string(seed.knowledge_type)) +
                        ", prompt type is " + std::string(to_string(kt)));
    }
    lines.push_back(seed.text);
  }
  const auto n = std::to_string(spec.example_count);
  return fill(t.head_prompt, {{"{TYPE}", t.label(kt)}, {"{EXAMPLES}", numbered(lines)}, {"{N}", n}});
}

std::string render_tail_prompt(const TemplateSet& t, std::span<const Triple> examples, const HeadItem& head,
                               Relation rel, std::string_view name, const PromptSpec& spec) {
  if (spec.kind != PromptKind::TailDistill) throw SchemaError("render_tail_prompt needs a tail_distill prompt spec");
  if (!is_valid_pair(head.knowledge_type, rel)) {
    throw SchemaError("relation " + std::string(to_string(rel)) + " is not valid for " +
                      std::string(to_string(head.knowledge_type)) + " head items");
  }
  if (name.empty()) throw SchemaError("tail prompt needs a non-empty name");
  if (static_cast<int>(examples.size()) != spec.example_count) {
    throw SchemaError("tail prompt expects " + std::to_string(spec.example_count) + " examples, got " +
                      std::to_string(examples.size()));
  }
  std::vector<std::string> lines;
  lines.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.relation != rel) {
      throw SchemaError("example triple has relation " + std::string(to_string(ex.relation)) + ", expected " +
                        std::string(to_string(rel)));
    }
    lines.push_back(render_relation_sentence(t, rel, ex.head.text, ex.tail));
  }
  const auto query = render_relation_sentence(t, rel, head.text, t.tail_blank);
  const auto n = std::to_string(spec.tails_per_request);
  auto body = fill(t.tail_prompt, {{"{EXAMPLES}", numbered(lines)},
                                   {"{HEAD}", query},
                                   {"{N}", n},
                                   {"{TYPE}", t.label(head.knowledge_type)}});
  // {NAME} last: the name itself never contains slot syntax.
  return substitute_name(fill(body, {{"{NAME}", name}}), name);
}

std::string render_judge_prompt(const TemplateSet& t, const Triple& triple, std::string_view name) {
  auto sentence = render_relation_sentence(t, triple.relation, triple.head.text, triple.tail);
  if (!name.empty()) sentence = substitute_name(sentence, name);
  return fill(t.judge_prompt, {{"{SENTENCE}", sentence}});
}

}  // namespace ckg
