#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dircast {

// FNV-1a 64-bit, used to fingerprint configs and data for report metadata.
// Not cryptographic; collisions only matter for accidental mixups.
class Fnv1a64 {
public:
    Fnv1a64& update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            hash_ ^= c;
            hash_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    std::uint64_t value() const { return hash_; }
    std::string hex() const;

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a64_hex(std::string_view bytes) {
    return Fnv1a64().update(bytes).hex();
}

}  // namespace dircast
