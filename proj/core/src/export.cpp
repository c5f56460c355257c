#include "ckg/export.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ckg/digest.hpp"
#include "ckg/error.hpp"
#include "triple_json.hpp"

namespace ckg {

namespace {

std::string render_line(const Triple& t, ExportFormat f) {
  if (f == ExportFormat::Jsonl) return detail::triple_to_json(t).dump();
  std::string s;
  s.reserve(t.head.text.size() + t.tail.size() + 16);
  s.append(t.head.text).append("\t").append(to_string(t.relation)).append("\t").append(t.tail);
  return s;
}

ExportedFile write_file(const std::filesystem::path& dir, const std::string& name, const std::vector<Triple>& rows,
                        ExportFormat f) {
  auto path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  Sha256 h;
  for (const auto& t : rows) {
    auto line = render_line(t, f);
    line.push_back('\n');
    out << line;
    h.update(line);
  }
  if (!out.flush()) throw IoError("cannot write " + path.string());
  return ExportedFile{name, static_cast<std::int64_t>(rows.size()), h.hex_digest()};
}

}  // namespace

std::string_view to_string(ExportFormat f) { return f == ExportFormat::Tsv ? "tsv" : "jsonl"; }

std::optional<ExportFormat> parse_export_format(std::string_view s) {
  if (s == "tsv") return ExportFormat::Tsv;
  if (s == "jsonl") return ExportFormat::Jsonl;
  return std::nullopt;
}

void SplitFractions::validate() const {
  for (double f : {train, dev, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw PlanError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + dev + test - 1.0) > 1e-9) throw PlanError("split fractions must sum to 1");
}

ExportManifest export_triples(const GraphStore& store, Edition edition, ExportFormat format,
                              const std::optional<SplitFractions>& split, Rng& rng,
                              const std::filesystem::path& dir) {
  if (split) split->validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create export directory " + dir.string());

  auto rows = store.edition_triples(edition);
  ExportManifest m;
  m.edition = edition;
  m.format = format;
  m.total = static_cast<std::int64_t>(rows.size());
  const std::string ext = format == ExportFormat::Tsv ? ".tsv" : ".jsonl";

  if (!split) {
    m.files.push_back(write_file(dir, "triples" + ext, rows, format));
  } else {
    const auto n = static_cast<double>(rows.size());
    auto n_train = static_cast<std::size_t>(std::llround(n * split->train));
    auto n_dev = static_cast<std::size_t>(std::llround(n * split->dev));
    n_train = std::min(n_train, rows.size());
    n_dev = std::min(n_dev, rows.size() - n_train);
    // Assign each canonical row to a part, then keep canonical order inside each part.
    std::vector<std::uint8_t> part(rows.size(), 2);
    auto perm = rng.sample_indices(rows.size(), rows.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      if (k < n_train) part[perm[k]] = 0;
      else if (k < n_train + n_dev) part[perm[k]] = 1;
    }
    std::array<std::vector<Triple>, 3> parts;
    for (std::size_t i = 0; i < rows.size(); ++i) parts[part[i]].push_back(rows[i]);
    const std::array<const char*, 3> names = {"train", "dev", "test"};
    for (std::size_t p = 0; p < 3; ++p) m.files.push_back(write_file(dir, names[p] + ext, parts[p], format));
  }

  Sha256 combined;
  for (const auto& f : m.files) combined.update(f.name + "\t" + f.sha256 + "\n");
  m.digest = combined.hex_digest();

  nlohmann::json j{{"edition", std::string(to_string(edition))},
                   {"format", std::string(to_string(format))},
                   {"total", m.total},
                   {"digest", m.digest},
                   {"files", nlohmann::json::array()}};
  for (const auto& f : m.files) j["files"].push_back({{"name", f.name}, {"lines", f.lines}, {"sha256", f.sha256}});
  auto mpath = dir / "manifest.json";
  std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + mpath.string());
  out << j.dump(2) << '\n';
  if (!out.flush()) throw IoError("cannot write " + mpath.string());
  return m;
}

}  // namespace ckg
