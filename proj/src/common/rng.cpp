#include "ptdt/common/rng.hpp"

#include <sstream>

#include "ptdt/common/errors.hpp"

namespace ptdt {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t l : labels) s = splitmix64(s ^ splitmix64(l + 0x632be59bd9b4e019ULL));
  return s;
}

std::vector<double> standard_normal(Rng& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ParseError("invalid RNG state", 0);
}

}  // namespace ptdt
