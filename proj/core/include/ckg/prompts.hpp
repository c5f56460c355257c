#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "ckg/schema.hpp"

namespace ckg {

// Prompt assets for one language. Loaded from a directory holding
//   head_prompt.txt      slots {TYPE} {EXAMPLES} {N}
//   tail_prompt.txt      slots {EXAMPLES} {HEAD} {NAME} {N} {TYPE}
//   judge_prompt.txt     slot  {SENTENCE}
//   relations.tsv        <relation>\t<sentence with {Head} and {Tail}>
//   knowledge_types.tsv  <knowledge type>\t<label used for {TYPE}>
// Lines starting with '#' in the .tsv files are comments.
struct TemplateSet {
  std::string head_prompt;
  std::string tail_prompt;
  std::string judge_prompt;
  std::array<std::string, 7> relation_sentences;
  std::array<std::string, 3> type_labels;
  // Rendered in place of {Tail} in the query sentence that closes a tail prompt.
  std::string tail_blank = "____";

  static TemplateSet load(const std::filesystem::path& dir);

  const std::string& sentence(Relation r) const { return relation_sentences[static_cast<std::size_t>(r)]; }
  const std::string& label(KnowledgeType kt) const { return type_labels[static_cast<std::size_t>(kt)]; }
};

// Relation sentence with both slots filled; the subject placeholder is kept.
std::string render_relation_sentence(const TemplateSet& t, Relation r, std::string_view head,
                                     std::string_view tail);

// The parts of a relation sentence before and after the {Tail} slot, with
// the head filled in.
struct SentenceFrame {
  std::string prefix;
  std::string suffix;
};
SentenceFrame sentence_frame(const TemplateSet& t, Relation r, std::string_view head);

// Replaces both subject placeholder spellings with `name`.
std::string substitute_name(std::string_view s, std::string_view name);

std::string render_head_prompt(const TemplateSet& t, std::span<const HeadItem> seed_sample,
                               KnowledgeType kt, const PromptSpec& spec);

std::string render_tail_prompt(const TemplateSet& t, std::span<const Triple> examples, const HeadItem& head,
                               Relation rel, std::string_view name, const PromptSpec& spec);

// `name` replaces the subject placeholder when non-empty.
std::string render_judge_prompt(const TemplateSet& t, const Triple& triple, std::string_view name = {});

}  // namespace ckg
