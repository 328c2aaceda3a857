#pragma once

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mind {

// Error hierarchy. Each leaf maps onto one CLI exit code (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    ValidationError(std::size_t index, const std::string& what)
        : Error("record " + std::to_string(index) + ": " + what), index_(index) {}
    explicit ValidationError(const std::string& what) : Error(what), index_(0) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class BackendError : public Error {
public:
    BackendError(int status, std::string body_excerpt)
        : Error("backend returned status " + std::to_string(status) + ": " + body_excerpt),
          status_(status), body_(std::move(body_excerpt)) {}
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class AssemblyError : public Error {
public:
    using Error::Error;
};

class NumericFault : public Error {
public:
    using Error::Error;
};

class ExtractionFailed : public Error {
public:
    explicit ExtractionFailed(std::string raw)
        : Error("EXTRACTION_FAILED: no option letter in output: " + raw), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

enum class Polarity { positive, negative };

inline std::string_view polarity_code(Polarity p) { return p == Polarity::positive ? "pos" : "neg"; }

inline Polarity parse_polarity(std::string_view s) {
    if (s == "pos") return Polarity::positive;
    if (s == "neg") return Polarity::negative;
    throw Error("unknown polarity '" + std::string(s) + "'");
}

inline std::string to_hex(const unsigned char* data, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(2 * n, '0');
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xF];
    }
    return out;
}

/// Lowercase hex SHA-256 of `text`.
inline std::string sha256_hex(std::string_view text) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    return to_hex(md.data(), len);
}

using Timestamp = std::chrono::sys_seconds;

inline std::string format_timestamp(Timestamp ts) {
    const std::time_t t = std::chrono::system_clock::to_time_t(ts);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline Timestamp parse_timestamp(const std::string& s) {
    std::tm tm{};
    int y, mo, d, h, mi, sec;
    char z = 0;
    if (s.size() != 20 || std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &sec, &z) != 7 ||
        z != 'Z')
        throw Error("malformed timestamp '" + s + "'");
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    const Timestamp ts{std::chrono::seconds{timegm(&tm)}};
    if (format_timestamp(ts) != s) throw Error("timestamp out of range '" + s + "'");
    return ts;
}

/// Derives an independent, reproducible engine for a named sub-stream of a root seed.
inline std::mt19937_64 substream(std::uint64_t root_seed, std::string_view name) {
    const std::string digest = sha256_hex(name);
    std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                      static_cast<std::uint32_t>(std::stoul(digest.substr(0, 8), nullptr, 16)),
                      static_cast<std::uint32_t>(std::stoul(digest.substr(8, 8), nullptr, 16))};
    return std::mt19937_64(seq);
}

}  // namespace mind
