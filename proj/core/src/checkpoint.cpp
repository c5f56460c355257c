#include <fstream>

#include <json.hpp>

#include "ckg/distiller.hpp"
#include "ckg/error.hpp"

namespace ckg {

void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::json j = {{"version", 1},
                      {"completed", std::vector<std::string>(completed.begin(), completed.end())},
                      {"request_count", request_count},
                      {"rng_state", rng_state}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  Checkpoint cp;
  if (!std::filesystem::exists(path)) return cp;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  try {
    auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != 1) throw PlanError("unsupported checkpoint version in " + path.string());
    for (const auto& id : j.at("completed")) cp.completed.insert(id.get<std::string>());
    cp.request_count = j.at("request_count").get<std::int64_t>();
    cp.rng_state = j.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw PlanError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return cp;
}

}  // namespace ckg
