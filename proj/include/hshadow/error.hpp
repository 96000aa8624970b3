// Copyright 2026 The hshadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Exception hierarchy and the warning sink shared by every module.
 *
 * Errors that originate from bad input files or malformed data derive from
 * DataError so front ends can map them to a single exit status.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace hshadow {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Precondition or argument outside the operation's domain.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Unsupported or incomplete multi-mode / run configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class IntegrationError : public Error {
  public:
    IntegrationError(const std::string &what, double achieved)
        : Error(what + " (achieved tolerance " + std::to_string(achieved) +
                ")"),
          achieved_tolerance(achieved) {}
    double achieved_tolerance;
};

/// Bin design ran out of iterations without reaching full rank.
class DesignError : public Error {
  public:
    DesignError(const std::string &what, int best_rank, int target_rank,
                double final_range, int iterations)
        : Error(what), best_rank(best_rank), target_rank(target_rank),
          final_range(final_range), iterations(iterations) {}
    int best_rank;
    int target_rank;
    double final_range;
    int iterations;
};

class SingularFrameError : public Error {
  public:
    SingularFrameError(double lambda_min, double threshold)
        : Error("frame operator is singular in strict mode: lambda_min = " +
                std::to_string(lambda_min) + " <= threshold " +
                std::to_string(threshold) + "; use pseudo-inverse mode"),
          lambda_min(lambda_min) {}
    double lambda_min;
};

class DataError : public Error {
  public:
    using Error::Error;
};

/// Text/JSON input that does not parse. `line` is 1-based, 0 when unknown.
class ParseError : public DataError {
  public:
    ParseError(const std::string &what, std::size_t line = 0)
        : DataError(line ? "line " + std::to_string(line) + ": " + what
                         : what),
          line(line) {}
    std::size_t line;
};

/// Parsed object that violates a documented invariant.
class InvariantError : public DataError {
  public:
    InvariantError(std::string check, const std::string &detail)
        : DataError("invariant violated (" + check + "): " + detail),
          check(std::move(check)) {}
    std::string check;
};

/// A measurement record referencing an outcome outside the POVM.
class MalformedRecordError : public DataError {
  public:
    MalformedRecordError(std::size_t ordinal, const std::string &detail)
        : DataError("malformed record #" + std::to_string(ordinal) + ": " +
                    detail),
          ordinal(ordinal) {}
    std::size_t ordinal;
};

class CacheMismatchError : public DataError {
  public:
    using DataError::DataError;
};

using WarningHandler = std::function<void(const std::string &)>;

inline WarningHandler &warning_handler() {
    static WarningHandler handler = [](const std::string &msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

/// Replaces the process-wide warning sink and returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
    return std::exchange(warning_handler(), std::move(handler));
}

inline void warn(const std::string &msg) {
    if (warning_handler()) {
        warning_handler()(msg);
    }
}

} // namespace hshadow
