#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vf {

// SHA-256 used to fingerprint stage artifacts so completed pipeline stages
// can be skipped on rerun.
class Sha256 {
public:
    Sha256();
    void update(const void* data, size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::string hex_digest(); // finalizes; object not reusable afterwards

private:
    void process_block(const uint8_t* block);

    uint32_t h_[8];
    uint8_t buf_[64];
    size_t buf_len_ = 0;
    uint64_t total_ = 0;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);

} // namespace vf
