// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace tubesal {

// Error hierarchy. Messages name the offending shapes/keys/offsets so a
// failure can be diagnosed from the what() string alone.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed input file; carries the byte offset where parsing stopped.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t byte_offset)
        : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// A metric that has no defined value on the given inputs (e.g. single-class
// ground truth for AUC).
class MetricError : public Error {
public:
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);
std::vector<std::size_t> row_major_strides(const Shape& s);

// Deterministic xoshiro256++ generator. All stochastic behaviour in the
// project (init, sampling, dropout, synthesis) goes through this type so
// runs are reproducible bit-for-bit across builds of the same binary.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer in [0, n), n > 0.
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller.
    double normal();
    // Normal(0, stddev) resampled until |z| <= clip stddevs.
    double trunc_normal(double stddev, double clip = 2.0);

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stateless seed derivation for independent substreams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace tubesal
