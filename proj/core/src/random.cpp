#include "ckg/random.hpp"

#include <limits>
#include <numeric>
#include <sstream>

#include "ckg/error.hpp"

namespace ckg {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw PlanError("Rng::below(0)");
  const auto max = std::numeric_limits<std::uint64_t>::max();
  const auto limit = max - (max % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  if (k > n) throw PlanError("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + below(n - i)]);
  }
  idx.resize(k);
  return idx;
}

Rng Rng::fork(std::uint64_t salt) {
  // splitmix64 finalizer to decorrelate nearby salts
  std::uint64_t z = next() ^ (salt + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

std::string Rng::state() const {
  std::ostringstream ss;
  ss << engine_;
  return ss.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream ss(state);
  ss >> engine_;
  if (!ss) throw PlanError("corrupt rng state");
}

}  // namespace ckg
