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
 * Measurement records and their CSV files.
 *
 * Record file: header "t,mode,k,i", one shot per line.
 * Raw file:    header "t,mode,k,x", x a quadrature value.
 * Both are UTF-8, comma separated, LF line endings.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "povm.hpp"

namespace hshadow {

struct MeasurementRecord {
    std::uint64_t t = 0; ///< shot ordinal
    int mode = 0;
    int k = 0; ///< phase index
    int i = 0; ///< bin index

    friend bool operator==(const MeasurementRecord &,
                           const MeasurementRecord &) = default;
};

inline constexpr std::string_view kRecordHeader = "t,mode,k,i";
inline constexpr std::string_view kRawHeader = "t,mode,k,x";

inline std::string format_records(const std::vector<MeasurementRecord> &records) {
    std::string out;
    out.reserve(records.size() * 16 + 16);
    out += kRecordHeader;
    out += '\n';
    char buf[96];
    for (const auto &r : records) {
        char *p = buf;
        p = std::to_chars(p, buf + sizeof buf, r.t).ptr;
        *p++ = ',';
        p = std::to_chars(p, buf + sizeof buf, r.mode).ptr;
        *p++ = ',';
        p = std::to_chars(p, buf + sizeof buf, r.k).ptr;
        *p++ = ',';
        p = std::to_chars(p, buf + sizeof buf, r.i).ptr;
        *p++ = '\n';
        out.append(buf, p);
    }
    return out;
}

inline void write_records(const std::string &path,
                          const std::vector<MeasurementRecord> &records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    out << format_records(records);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char *name) {
    T value{};
    const auto *end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError("bad " + std::string(name) + " field '" +
                             std::string(field) + "'",
                         line);
    }
    return value;
}

/// Calls fn(fields, line_number) for each data row after checking the header.
template <class Fn>
void for_each_row(std::istream &in, std::string_view header, Fn &&fn) {
    std::string line;
    std::size_t lineno = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            throw ParseError("CRLF line endings are not accepted", lineno);
        }
        if (!seen_header) {
            if (line != header) {
                throw ParseError("expected header '" + std::string(header) +
                                     "'",
                                 lineno);
            }
            seen_header = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != 4) {
            throw ParseError("expected 4 fields, got " +
                                 std::to_string(fields.size()),
                             lineno);
        }
        fn(fields, lineno);
    }
}

} // namespace detail

inline std::vector<MeasurementRecord> parse_records(std::istream &in) {
    std::vector<MeasurementRecord> out;
    detail::for_each_row(in, kRecordHeader, [&](const auto &f, std::size_t ln) {
        MeasurementRecord r;
        r.t = detail::parse_number<std::uint64_t>(f[0], ln, "t");
        r.mode = detail::parse_number<int>(f[1], ln, "mode");
        r.k = detail::parse_number<int>(f[2], ln, "k");
        r.i = detail::parse_number<int>(f[3], ln, "i");
        if (r.mode < 0 || r.k < 0 || r.i < 0) {
            throw ParseError("negative index", ln);
        }
        out.push_back(r);
    });
    return out;
}

/// An empty file yields an empty stream.
inline std::vector<MeasurementRecord> ingest_records(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return parse_records(in);
}

struct BinnedRaw {
    std::vector<MeasurementRecord> records;
    std::size_t total = 0;   ///< data rows read
    std::size_t dropped = 0; ///< strict-finite rows outside the edges

    [[nodiscard]] double drop_fraction() const {
        return total ? static_cast<double>(dropped) / total : 0.0;
    }
};

/**
 * Bin index for quadrature value x, or -1 when x lies outside the edges in
 * strict-finite mode. Bins are right-open; x equal to the last edge goes
 * to the last bin. Extend-tails mode clamps into the edge bins.
 */
inline int locate_bin(const BinningScheme &binning, double x) {
    const auto &e = binning.edges();
    const int M = binning.bins();
    if (x < e.front() || x > e.back()) {
        if (binning.tail_mode() == TailMode::StrictFinite) {
            return -1;
        }
        return x < e.front() ? 0 : M - 1;
    }
    const auto it = std::upper_bound(e.begin(), e.end(), x);
    const int idx = static_cast<int>(it - e.begin()) - 1;
    return std::min(idx, M - 1);
}

inline BinnedRaw bin_raw(std::istream &in, const PhaseGrid &grid,
                         const BinningScheme &binning) {
    BinnedRaw out;
    detail::for_each_row(in, kRawHeader, [&](const auto &f, std::size_t ln) {
        MeasurementRecord r;
        r.t = detail::parse_number<std::uint64_t>(f[0], ln, "t");
        r.mode = detail::parse_number<int>(f[1], ln, "mode");
        r.k = detail::parse_number<int>(f[2], ln, "k");
        const double x = detail::parse_number<double>(f[3], ln, "x");
        if (r.mode < 0) {
            throw ParseError("negative mode", ln);
        }
        if (r.k < 0 || r.k >= grid.size()) {
            throw ParseError("phase index " + std::to_string(r.k) +
                                 " out of range",
                             ln);
        }
        if (!std::isfinite(x)) {
            throw ParseError("non-finite quadrature value", ln);
        }
        ++out.total;
        r.i = locate_bin(binning, x);
        if (r.i < 0) {
            ++out.dropped;
            return;
        }
        out.records.push_back(r);
    });
    return out;
}

inline BinnedRaw bin_raw(const std::string &path, const PhaseGrid &grid,
                         const BinningScheme &binning) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return bin_raw(in, grid, binning);
}

} // namespace hshadow
