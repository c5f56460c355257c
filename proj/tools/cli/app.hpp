#pragma once

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

namespace ckg::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

// Runs `ckg <args...>` in-process. `args` excludes the program name.
// `cancel` is polled between batches and by `serve`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* cancel = nullptr);

}  // namespace ckg::app
