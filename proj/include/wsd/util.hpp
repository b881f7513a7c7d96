#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wsd {

// Raised for malformed configuration or command-line usage. Exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised for malformed corpus/KB/run-file data. Exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Splits on a single-character delimiter; keeps empty fields.
std::vector<std::string> split(std::string_view s, char delim);

// Splits a comma-joined list, trimming items and dropping empties.
std::vector<std::string> split_list(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// SHA-256 of the input, lowercase hex.
std::string sha256_hex(std::string_view data);

// FNV-1a 64-bit, used for seed mixing only (never for persisted keys).
std::uint64_t fnv1a64(std::string_view data);

// Deterministic integer in [0, n) drawn from a caller-owned generator state.
// std::uniform_int_distribution is implementation-defined, so sampling that
// must reproduce across platforms goes through this instead.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    std::uint64_t bounded(std::uint64_t n);  // n > 0

private:
    std::uint64_t state_;
};

// Round-half-up of num/den to 2 decimals, formatted "0.82"; den > 0.
std::string format_ratio_2dp(long long num, long long den);
std::string format_double_2dp(double x);

// ISO-8601 UTC timestamp for run metadata.
std::string utc_timestamp();

}  // namespace wsd
