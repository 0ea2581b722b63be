#include "dircast/digest.hpp"

#include <cstdio>

namespace dircast {

std::string Fnv1a64::hex() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_));
    return buf;
}

}  // namespace dircast
