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
 * JSON forms of binning schemes, POVM caches and estimate reports.
 */

#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "povm.hpp"
#include "shadow.hpp"
#include "states.hpp"

namespace hshadow::io {

using nlohmann::json;

inline constexpr int kCacheVersion = 1;

inline json binning_to_json(const BinningScheme &b) {
    return {{"edges", b.edges()},
            {"weights", b.weights()},
            {"tail_mode", std::string(to_string(b.tail_mode()))}};
}

inline BinningScheme binning_from_json(const json &j) {
    try {
        std::vector<double> weights;
        if (j.contains("weights")) {
            weights = j.at("weights").get<std::vector<double>>();
        }
        const auto mode = j.contains("tail_mode")
                              ? parse_tail_mode(j.at("tail_mode").get<std::string>())
                              : TailMode::ExtendTails;
        return {j.at("edges").get<std::vector<double>>(), mode,
                std::move(weights)};
    } catch (const json::exception &e) {
        throw DataError(std::string("binning scheme: ") + e.what());
    }
}

inline BinningScheme load_binning(const std::string &path) {
    return binning_from_json(read_json_file(path));
}

inline json povm_to_json(const PovmSet &povm) {
    json elements = json::array();
    for (const auto &e : povm.elements()) {
        elements.push_back(
            {{"i", e.i}, {"k", e.k}, {"matrix", matrix_to_json(e.matrix)}});
    }
    return {{"version", kCacheVersion},
            {"n_max", povm.n_max()},
            {"N", povm.phases()},
            {"tail_mode", std::string(to_string(povm.binning().tail_mode()))},
            {"edges", povm.binning().edges()},
            {"weights", povm.binning().weights()},
            {"cache_key", povm.cache_key()},
            {"elements", std::move(elements)}};
}

/// Throws CacheMismatchError when the stored key disagrees with its content.
inline PovmSet povm_from_json(const json &j) {
    try {
        if (j.at("version").get<int>() != kCacheVersion) {
            throw CacheMismatchError("unsupported POVM cache version");
        }
        const int n_max = j.at("n_max").get<int>();
        fock::check_index(n_max);
        BinningScheme binning(j.at("edges").get<std::vector<double>>(),
                              parse_tail_mode(j.at("tail_mode").get<std::string>()),
                              j.at("weights").get<std::vector<double>>());
        PhaseGrid grid(j.at("N").get<int>());
        const auto stored = j.at("cache_key").get<std::string>();
        const auto key = povm_cache_key(n_max, grid.size(), binning.edges(),
                                        binning.tail_mode());
        if (stored != key) {
            throw CacheMismatchError("POVM cache key " + stored +
                                     " does not match its content (" + key +
                                     ")");
        }
        std::vector<PovmElement> elements;
        for (const auto &e : j.at("elements")) {
            elements.push_back({e.at("i").get<int>(), e.at("k").get<int>(),
                                matrix_from_json(e.at("matrix"), n_max + 1)});
        }
        std::sort(elements.begin(), elements.end(),
                  [](const PovmElement &a, const PovmElement &b) {
                      return std::pair(a.k, a.i) < std::pair(b.k, b.i);
                  });
        return {grid, std::move(binning), n_max, std::move(elements)};
    } catch (const json::exception &e) {
        throw ParseError(std::string("POVM cache: ") + e.what(), 0);
    } catch (const DomainError &e) {
        throw DataError(std::string("POVM cache: ") + e.what());
    }
}

inline void save_povm(const std::string &path, const PovmSet &povm) {
    write_text_file(path, povm_to_json(povm).dump() + "\n");
}

inline PovmSet load_povm(const std::string &path) {
    return povm_from_json(read_json_file(path));
}

/**
 * Directory of POVM caches named by key. `get` returns the cached set when
 * present and builds and stores it otherwise.
 */
class PovmCache {
  public:
    explicit PovmCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    [[nodiscard]] std::filesystem::path path_for(const std::string &key) const {
        return dir_ / ("povm-" + key + ".json");
    }

    PovmSet get(const PhaseGrid &grid, const BinningScheme &binning,
                int n_max) {
        const auto key = povm_cache_key(n_max, grid.size(), binning.edges(),
                                        binning.tail_mode());
        const auto p = path_for(key);
        if (std::filesystem::exists(p)) {
            auto povm = load_povm(p.string());
            if (povm.cache_key() != key ||
                povm.binning().weights() != binning.weights()) {
                throw CacheMismatchError("cache file " + p.string() +
                                         " holds a different POVM");
            }
            ++hits_;
            return povm;
        }
        auto povm = build_povm(grid, binning, n_max);
        save_povm(p.string(), povm);
        ++misses_;
        return povm;
    }

    [[nodiscard]] int hits() const { return hits_; }
    [[nodiscard]] int misses() const { return misses_; }

  private:
    std::filesystem::path dir_;
    int hits_ = 0;
    int misses_ = 0;
};

inline json report_to_json(const EstimateReport &r, std::uint64_t seed,
                           const std::string &povm_key) {
    return {{"observable_label", r.label},
            {"mean", r.mean},
            {"stderr", r.standard_error},
            {"T", r.shots},
            {"variant", r.variant.name()},
            {"seed", seed},
            {"povm_cache_key", povm_key}};
}

} // namespace hshadow::io
