#include "ptdt/common/hash.hpp"

#include <cstdio>

namespace ptdt {

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(state_));
  return buf;
}

std::string hash_hex(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.hex();
}

}  // namespace ptdt
