#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ckg/graph_store.hpp"
#include "ckg/random.hpp"

namespace ckg {

enum class ExportFormat : std::uint8_t { Tsv, Jsonl };
std::string_view to_string(ExportFormat f);
std::optional<ExportFormat> parse_export_format(std::string_view s);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;

  // Throws PlanError unless every fraction is in [0, 1] and they sum to 1.
  void validate() const;
};

struct ExportedFile {
  std::string name;
  std::int64_t lines = 0;
  std::string sha256;
};

struct ExportManifest {
  Edition edition = Edition::Raw;
  ExportFormat format = ExportFormat::Tsv;
  std::int64_t total = 0;
  std::vector<ExportedFile> files;
  // SHA-256 over "<name>\t<sha256>\n" for every file in order.
  std::string digest;
};

// Writes the edition's triples under `dir`, one per line:
//   tsv    head \t relation \t tail
//   jsonl  {"id", "head", "knowledge_type", "relation", "tail", ...}
// Without a split the output is triples.<ext>; with one it is
// train/dev/test.<ext>, a random partition of the canonical order with
// llround(n * train) and llround(n * dev) lines and the rest in test. Lines
// inside each file keep canonical order. A manifest.json sits beside the
// files. Throws IoError when the directory cannot be written.
ExportManifest export_triples(const GraphStore& store, Edition edition, ExportFormat format,
                              const std::optional<SplitFractions>& split, Rng& rng, const std::filesystem::path& dir);

}  // namespace ckg
