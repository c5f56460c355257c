#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ckg/schema.hpp"

namespace ckg {

// Seed files are UTF-8 JSON lines:
//   head seeds    {"text": "...", "knowledge_type": "voluntary"}
//   triple seeds  {"head": "...", "knowledge_type": "state", "relation": "xNeed", "tail": "..."}
// "[NAME]" in seed text is rewritten to the stored placeholder "PersonX".
// Name pools hold one name per line.

struct SeedIssue {
  std::filesystem::path file;
  int line = 0;
  std::string message;

  std::string describe() const;
};

struct HeadSeedFile {
  std::vector<HeadItem> items;
  std::vector<SeedIssue> issues;
};

struct TripleSeedFile {
  std::vector<Triple> items;
  std::vector<SeedIssue> issues;
};

// Parse every line, collecting problems instead of throwing. Duplicate
// records are reported as issues and dropped.
HeadSeedFile read_head_seeds(const std::filesystem::path& path);
TripleSeedFile read_triple_seeds(const std::filesystem::path& path);

// Strict variants: throw SchemaError describing the first issue.
std::vector<HeadItem> load_head_seeds(const std::filesystem::path& path);
std::vector<Triple> load_triple_seeds(const std::filesystem::path& path);

// Blank lines and '#' comments are skipped; throws ConfigError when empty.
std::vector<std::string> load_name_pool(const std::filesystem::path& path);

void write_head_seeds(const std::filesystem::path& path, const std::vector<HeadItem>& items);

}  // namespace ckg
