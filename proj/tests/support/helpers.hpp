#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "ckg/prompts.hpp"
#include "ckg/random.hpp"
#include "ckg/schema.hpp"
#include "ckg/text.hpp"

namespace ckg::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ckg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string asset_dir() { return CKG_ASSET_DIR; }
inline std::string fixture_dir() { return CKG_FIXTURE_DIR; }

inline TemplateSet zh_templates() { return TemplateSet::load(asset_dir() + "/templates/zh"); }
inline TemplateSet en_templates() { return TemplateSet::load(asset_dir() + "/templates/en"); }

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline HeadItem head(const std::string& text, KnowledgeType kt = KnowledgeType::Voluntary) {
  return HeadItem::make(text, kt);
}

inline Triple triple(const std::string& h, Relation r, const std::string& tail,
                     KnowledgeType kt = KnowledgeType::Voluntary) {
  return Triple::make(HeadItem::make(h, kt), r, tail);
}

inline Triple hindered(const std::string& h, const std::string& tail) {
  return Triple::make(HeadItem::make(h, KnowledgeType::Voluntary), Relation::HinderedBy, tail);
}

struct PlantedTriple {
  Triple triple;
  bool valid = true;
};

inline constexpr std::string_view kPlantedMarker = "乱";

// HinderedBy triples over random words from a fixed alphabet; invalid ones
// carry kPlantedMarker somewhere in the tail. No two share a key.
inline std::vector<PlantedTriple> planted_hindered(std::size_t n, double invalid_rate, std::uint64_t seed) {
  static const auto alphabet = text::split_code_points(
      "吃喝读写画唱跑跳游爬买卖洗扫修种烤煮切搬借还寄送拍看听说想学练考拿放开关推拉追躲等找问答笑哭睡醒");
  Rng rng(seed);
  auto word = [&](int len) {
    std::string w;
    for (int i = 0; i < len; ++i) w += alphabet[rng.below(alphabet.size())];
    return w;
  };
  std::vector<PlantedTriple> out;
  std::set<std::string> keys;
  while (out.size() < n) {
    const bool valid = rng.uniform() >= invalid_rate;
    auto tail = word(2 + static_cast<int>(rng.below(3)));
    if (!valid) {
      auto cps = text::split_code_points(tail);
      auto at = rng.below(cps.size() + 1);
      std::string marked;
      for (std::size_t i = 0; i <= cps.size(); ++i) {
        if (i == at) marked += kPlantedMarker;
        if (i < cps.size()) marked += cps[i];
      }
      tail = marked;
    }
    auto t = Triple::make(HeadItem::make("PersonX" + word(3), KnowledgeType::Voluntary), Relation::HinderedBy, tail);
    if (keys.insert(t.key()).second) out.push_back({std::move(t), valid});
  }
  return out;
}

}  // namespace ckg::testing
