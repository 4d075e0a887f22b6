#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace vitoria {

/// Lowercase hex SHA-256 of the input.
std::string sha256_hex(std::string_view data);

/// Lowercase hex HMAC-SHA256 of `message` under `key`.
std::string hmac_sha256_hex(std::span<const std::uint8_t> key, std::string_view message);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Incremental SHA-256 for streams too large to buffer.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view data);
    /// Lowercase hex digest; the hasher restarts afterwards.
    std::string hex_final();

private:
    void* ctx_;
};

}  // namespace vitoria
