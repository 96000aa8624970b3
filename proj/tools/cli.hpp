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
 * Command-line front end. `run` takes the arguments after the program name
 * and returns the process exit code, so tests drive it in-process.
 *
 * Exit codes: 0 success, 1 other failure, 2 design failure, 3 negative
 * completeness verdict, 64 usage, 65 data error.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <hshadow/hshadow.hpp>

namespace hshadow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitDesign = 2;
inline constexpr int kExitNotComplete = 3;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitData = 65;

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

/// Where the POVM comes from: a cache file or an explicit parameter set.
struct PovmArgs {
    std::string cache;
    int n_max = -1;
    int phases = -1;
    int bins = -1;
    std::string scheme;
    std::vector<double> edges;
    double range = 0.0;
    double offset = kDesignOffset;
    std::string tail = "extend-tails";
};

inline void add_povm_options(CLI::App *sub, PovmArgs &a) {
    sub->add_option("--povm-cache", a.cache,
                    "POVM cache file; loaded if present, written otherwise");
    sub->add_option("--nmax", a.n_max, "photon-number cutoff");
    sub->add_option("--phases", a.phases, "number of LO phases N");
    sub->add_option("--bins", a.bins, "number of equal-width bins M");
    sub->add_option("--scheme", a.scheme, "binning scheme JSON file");
    sub->add_option("--edges", a.edges, "explicit bin edges")->delimiter(',');
    sub->add_option("--l", a.range, "half-range L for --bins (default sqrt(2 nmax+1)+1)");
    sub->add_option("--offset", a.offset, "edge shift for --bins, in bin widths");
    sub->add_option("--tail-mode", a.tail, "extend-tails or strict-finite");
}

inline BinningScheme resolve_binning(const PovmArgs &a) {
    const auto mode = parse_tail_mode(a.tail);
    const int sources = int(!a.scheme.empty()) + int(!a.edges.empty()) +
                        int(a.bins > 0);
    if (sources != 1) {
        throw ConfigError("give exactly one of --scheme, --edges, --bins");
    }
    if (!a.scheme.empty()) {
        return io::load_binning(a.scheme);
    }
    if (!a.edges.empty()) {
        return {a.edges, mode};
    }
    const double L = a.range > 0.0 ? a.range : default_initial_range(a.n_max);
    return BinningScheme::equal_spaced(a.bins, L, mode, a.offset);
}

inline PovmSet resolve_povm(const PovmArgs &a) {
    if (!a.cache.empty() && std::filesystem::exists(a.cache)) {
        auto povm = io::load_povm(a.cache);
        if ((a.n_max >= 0 && a.n_max != povm.n_max()) ||
            (a.phases > 0 && a.phases != povm.phases())) {
            throw CacheMismatchError("cache " + a.cache +
                                     " was built for other parameters");
        }
        return povm;
    }
    if (a.n_max < 0 || a.phases < 1) {
        throw ConfigError("--nmax and --phases are required without a cache");
    }
    auto povm = build_povm(PhaseGrid(a.phases), resolve_binning(a), a.n_max);
    if (!a.cache.empty()) {
        io::save_povm(a.cache, povm);
    }
    return povm;
}

/// vacuum | coherent:re[,im] | fock:n | thermal:nbar | cat:alpha:+1|-1 | file:path
inline DensityMatrix parse_state(const std::string &text, int n_max) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string rest =
        colon == std::string::npos ? "" : text.substr(colon + 1);
    auto num = [&](const std::string &s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception &) {
            used = std::string::npos;
        }
        if (used != s.size()) {
            throw ConfigError("bad number '" + s + "' in state '" + text + "'");
        }
        return v;
    };
    if (kind == "vacuum" && rest.empty()) {
        return fock_state(0, n_max);
    }
    if (kind == "coherent") {
        const auto comma = rest.find(',');
        const double re = num(rest.substr(0, comma));
        const double im =
            comma == std::string::npos ? 0.0 : num(rest.substr(comma + 1));
        return coherent({re, im}, n_max);
    }
    if (kind == "fock") {
        return fock_state(static_cast<int>(num(rest)), n_max);
    }
    if (kind == "thermal") {
        return thermal(num(rest), n_max);
    }
    if (kind == "cat") {
        const auto c2 = rest.find(':');
        if (c2 == std::string::npos) {
            throw ConfigError("cat state needs cat:alpha:parity");
        }
        return cat(num(rest.substr(0, c2)),
                   static_cast<int>(num(rest.substr(c2 + 1))), n_max);
    }
    if (kind == "file") {
        auto rho = density_from_file(rest);
        if (rho.n_max != n_max) {
            throw DataError("state file cutoff " + std::to_string(rho.n_max) +
                            " differs from POVM cutoff " +
                            std::to_string(n_max));
        }
        return rho;
    }
    throw ConfigError("unknown state text '" + text + "'");
}

/// n | identity | file:path
inline Observable parse_observable(const std::string &text, int n_max) {
    if (text == "n") {
        return number_operator(n_max);
    }
    if (text == "identity") {
        return identity_observable(n_max);
    }
    if (text.rfind("file:", 0) == 0) {
        auto x = observable_from_file(text.substr(5));
        if (x.n_max() != n_max) {
            throw DataError("observable cutoff differs from POVM cutoff");
        }
        return x;
    }
    throw ConfigError("unknown observable text '" + text + "'");
}

struct ScanRow {
    int value = 0;
    double variance = 0.0;
    bool complete = false;
};

/**
 * Exact single-shot variance of the n-hat estimator on a coherent state.
 * Uses the designed scheme and strict inverse when one exists; otherwise
 * the default-range scheme with a pseudo-inverse (complete = false).
 */
inline ScanRow scan_point(int n_max, int phases, int bins, double alpha,
                          TailMode mode, const std::string &cache_dir) {
    ScanRow row;
    std::optional<BinningScheme> scheme;
    if (necessary_condition(phases, n_max)) {
        DesignOptions opts;
        opts.tail_mode = mode;
        try {
            scheme = design_bins(n_max, phases, bins, opts).scheme;
            row.complete = true;
        } catch (const DesignError &) {
        }
    }
    if (!scheme) {
        scheme = BinningScheme::equal_spaced(
            bins, default_initial_range(n_max), mode, kDesignOffset);
    }
    const PhaseGrid grid(phases);
    const auto povm = cache_dir.empty()
                          ? build_povm(grid, *scheme, n_max)
                          : io::PovmCache(cache_dir).get(grid, *scheme, n_max);
    const auto frame = frame_operator(povm);
    const auto inv =
        row.complete
            ? invert_frame(frame, InversionMode::Strict, kDefaultInversionThreshold)
            : invert_frame(frame, InversionMode::Pseudo,
                           1e-10 * frame.lambda_max());
    const auto table = snapshots(povm, inv);
    const auto rho = coherent(alpha, n_max);
    row.variance = exact_variance(rho, number_operator(n_max), table, povm);
    return row;
}

namespace detail {

inline std::vector<int> parse_range(const std::string &s) {
    std::vector<int> parts;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(':', pos);
        const std::string tok = s.substr(pos, next - pos);
        int v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            throw ConfigError("bad --range '" + s + "', expected a:b[:step]");
        }
        parts.push_back(v);
        if (next == std::string::npos) {
            break;
        }
        pos = next + 1;
    }
    if (parts.size() == 2) {
        parts.push_back(1);
    }
    if (parts.size() != 3 || parts[2] < 1 || parts[1] < parts[0]) {
        throw ConfigError("bad --range '" + s + "', expected a:b[:step]");
    }
    std::vector<int> grid;
    for (int v = parts[0]; v <= parts[1]; v += parts[2]) {
        grid.push_back(v);
    }
    return grid;
}

inline std::string json_scalar(const json &v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_array()) {
        std::string s;
        for (const auto &e : v) {
            s += (s.empty() ? "" : ",") + json_scalar(e);
        }
        return s;
    }
    return v.dump();
}

inline bool given(const std::vector<std::string> &args, const std::string &flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string &a) {
        return a == flag || a.rfind(flag + "=", 0) == 0;
    });
}

} // namespace detail

struct Options {
    PovmArgs povm;
    // design-bins
    double l0 = 0.0;
    double dl = 0.5;
    int max_iter = 100;
    double rtol = 1e-10;
    // simulate / estimate
    std::string state = "vacuum";
    std::uint64_t shots = 1000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    int mode = 0;
    std::string records;
    std::string observable = "n";
    std::string variant = "plain-mean";
    std::string inversion = "strict";
    double threshold = kDefaultInversionThreshold;
    // variance-scan
    std::string sweep;
    std::string range;
    double alpha = 1.0;
    std::string cache_dir;
    // shared
    std::string out;
    bool as_json = false;
    std::string config;
};

inline void build_app(CLI::App &app, Options &o) {
    app.require_subcommand(1);
    app.add_option("--config", o.config,
                   "JSON file of option values; keys are long option names, "
                   "optionally nested under a subcommand name");

    auto *design = app.add_subcommand("design-bins", "search an informationally complete binning");
    design->add_option("--nmax", o.povm.n_max, "photon-number cutoff")->required();
    design->add_option("--phases", o.povm.phases, "number of LO phases N")->required();
    design->add_option("--bins", o.povm.bins, "number of bins M")->required();
    design->add_option("--l0", o.l0, "initial half-range (default sqrt(2 nmax+1)+1)");
    design->add_option("--dl", o.dl, "half-range increment");
    design->add_option("--max-iter", o.max_iter, "range increments to try");
    design->add_option("--tail-mode", o.povm.tail, "extend-tails or strict-finite");
    design->add_option("--rtol", o.rtol, "relative rank tolerance");
    design->add_option("--out", o.out, "binning scheme JSON output");

    auto *build = app.add_subcommand("build-povm", "build and cache a POVM");
    add_povm_options(build, o.povm);
    build->add_option("--out", o.out, "cache file to write");

    auto *check = app.add_subcommand("check-ic", "certify informational completeness");
    add_povm_options(check, o.povm);
    check->add_option("--rtol", o.rtol, "relative rank tolerance");
    check->add_flag("--json", o.as_json, "machine-readable output");

    auto *sim = app.add_subcommand("simulate", "sample homodyne outcome records");
    add_povm_options(sim, o.povm);
    sim->add_option("--state", o.state, "vacuum|coherent:re[,im]|fock:n|thermal:nbar|cat:alpha:+-1|file:path");
    sim->add_option("--T", o.shots, "number of shots")->check(CLI::PositiveNumber);
    sim->add_option("--seed", o.seed, "random seed");
    sim->add_option("--workers", o.workers, "sampling threads")->check(CLI::PositiveNumber);
    sim->add_option("--mode", o.mode, "mode index written to records");
    sim->add_option("--out", o.out, "records CSV (stdout when omitted)");

    auto *est = app.add_subcommand("estimate", "estimate an observable from records");
    add_povm_options(est, o.povm);
    est->add_option("--records", o.records, "records CSV")->required();
    est->add_option("--observable", o.observable, "n|identity|file:path");
    est->add_option("--variant", o.variant, "plain-mean or median-of-means[:B]");
    est->add_option("--inversion", o.inversion, "strict or pseudo");
    est->add_option("--threshold", o.threshold, "eigenvalue cutoff for inversion");
    est->add_option("--seed", o.seed, "seed echoed into the report");
    est->add_flag("--json", o.as_json, "machine-readable output");
    est->add_option("--out", o.out, "also write the JSON report here");

    auto *scan = app.add_subcommand("variance-scan", "exact estimator variance over a parameter grid");
    scan->add_option("--sweep", o.sweep, "phases, bins or nmax")
        ->required()
        ->check(CLI::IsMember({"phases", "bins", "nmax"}));
    scan->add_option("--range", o.range, "a:b[:step]")->required();
    o.povm.n_max = -1;
    scan->add_option("--nmax", o.povm.n_max, "fixed cutoff (default 5)");
    scan->add_option("--phases", o.povm.phases, "fixed N (default 32)");
    scan->add_option("--bins", o.povm.bins, "fixed M (default 50)");
    scan->add_option("--alpha", o.alpha, "coherent amplitude");
    scan->add_option("--tail-mode", o.povm.tail, "extend-tails or strict-finite");
    scan->add_option("--workers", o.workers, "parallel grid points")->check(CLI::PositiveNumber);
    scan->add_option("--cache-dir", o.cache_dir, "POVM cache directory");
    scan->add_option("--out", o.out, "CSV output (stdout when omitted)");
}

namespace detail {

/// Appends `--key value` for config entries not already on the command line.
inline std::vector<std::string> apply_config(std::vector<std::string> args,
                                             const std::string &path) {
    const auto doc = read_json_file(path);
    if (!doc.is_object()) {
        throw DataError("config " + path + " is not a JSON object");
    }
    Options scratch;
    CLI::App app;
    build_app(app, scratch);
    std::string subname;
    for (std::size_t j = 0; j < args.size(); ++j) {
        if (args[j] == "--config") {
            ++j;
            continue;
        }
        if (!args[j].empty() && args[j][0] != '-') {
            subname = args[j];
            break;
        }
    }
    if (subname.empty()) {
        return args;
    }
    CLI::App *sub = nullptr;
    try {
        sub = app.get_subcommand(subname);
    } catch (const CLI::Error &) {
        return args;
    }
    auto inject = [&](const std::string &key, const json &v, bool strict) {
        const std::string flag = "--" + key;
        const auto *opt = sub->get_option_no_throw(flag);
        if (opt == nullptr) {
            if (strict) {
                throw ConfigError("config key '" + key +
                                  "' is not an option of " + subname);
            }
            return;
        }
        if (given(args, flag)) {
            return;
        }
        if (v.is_boolean()) {
            if (v.get<bool>()) {
                args.push_back(flag);
            }
            return;
        }
        args.push_back(flag);
        args.push_back(json_scalar(v));
    };
    for (const auto &[key, v] : doc.items()) {
        if (!v.is_object()) {
            inject(key, v, false);
        }
    }
    if (doc.contains(subname)) {
        for (const auto &[key, v] : doc.at(subname).items()) {
            inject(key, v, true);
        }
    }
    return args;
}

inline void emit(const std::string &path, const std::string &text,
                 std::ostream &out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_text_file(path, text);
    }
}

} // namespace detail

inline int cmd_design(const Options &o, std::ostream &out) {
    DesignOptions opts;
    opts.initial_range = o.l0;
    opts.range_step = o.dl;
    opts.max_iter = o.max_iter;
    opts.tail_mode = parse_tail_mode(o.povm.tail);
    opts.rtol = o.rtol;
    const auto res = design_bins(o.povm.n_max, o.povm.phases, o.povm.bins, opts);
    auto doc = io::binning_to_json(res.scheme);
    doc["n_max"] = o.povm.n_max;
    doc["N"] = o.povm.phases;
    doc["range"] = res.range;
    doc["iterations"] = res.iterations;
    doc["rank"] = res.report.rank;
    doc["target"] = res.report.target;
    if (!o.out.empty()) {
        write_text_file(o.out, doc.dump(2) + "\n");
    }
    out << "informationally complete: rank " << res.report.rank << "/"
        << res.report.target << " at L=" << format_double(res.range)
        << " after " << res.iterations << " range(s) tried\n";
    if (o.out.empty()) {
        out << doc.dump(2) << "\n";
    }
    return kExitOk;
}

inline int cmd_build(const Options &o, std::ostream &out) {
    const auto povm = resolve_povm(o.povm);
    if (!o.out.empty()) {
        io::save_povm(o.out, povm);
    }
    const auto res = normalization_residual(povm);
    out << "povm " << povm.cache_key() << ": n_max=" << povm.n_max()
        << " N=" << povm.phases() << " M=" << povm.bins()
        << " max normalization residual="
        << format_double(*std::max_element(res.begin(), res.end())) << "\n";
    return kExitOk;
}

inline int cmd_check(const Options &o, std::ostream &out) {
    const auto povm = resolve_povm(o.povm);
    const auto rep = is_informationally_complete(povm, o.rtol);
    const auto &sv = rep.spectrum;
    const std::size_t tail = std::min<std::size_t>(5, static_cast<std::size_t>(sv.size()));
    std::vector<double> smallest;
    for (std::size_t j = static_cast<std::size_t>(sv.size()) - tail;
         j < static_cast<std::size_t>(sv.size()); ++j) {
        smallest.push_back(sv(static_cast<Index>(j)));
    }
    if (o.as_json) {
        json doc = {{"complete", rep.complete},
                    {"rank", rep.rank},
                    {"target", rep.target},
                    {"spectrum_tail", smallest},
                    {"frame_lambda_min", rep.frame_lambda_min},
                    {"povm_cache_key", povm.cache_key()}};
        out << doc.dump(2) << "\n";
    } else {
        out << "rank " << rep.rank << "/" << rep.target << "\n"
            << "smallest singular values:";
        for (double s : smallest) {
            out << " " << format_double(s);
        }
        out << "\nframe lambda_min " << format_double(rep.frame_lambda_min)
            << "\n"
            << (rep.complete ? "informationally complete"
                             : "not informationally complete")
            << "\n";
    }
    return rep.complete ? kExitOk : kExitNotComplete;
}

inline int cmd_simulate(const Options &o, std::ostream &out) {
    const auto povm = resolve_povm(o.povm);
    const auto rho = parse_state(o.state, povm.n_max());
    const auto dist = outcome_distribution(rho, povm);
    const auto recs = sample(dist, o.shots, o.seed, o.mode, o.workers);
    detail::emit(o.out, format_records(recs), out);
    return kExitOk;
}

inline int cmd_estimate(const Options &o, std::ostream &out) {
    const auto povm = resolve_povm(o.povm);
    const auto records = ingest_records(o.records);
    const auto frame = frame_operator(povm);
    const auto inv = invert_frame(frame, parse_inversion_mode(o.inversion),
                                  o.threshold);
    const auto table = snapshots(povm, inv);
    const auto x = parse_observable(o.observable, povm.n_max());
    const auto rep =
        estimate_observable(records, table, x, parse_variant(o.variant));
    const auto doc = io::report_to_json(rep, o.seed, povm.cache_key());
    if (!o.out.empty()) {
        write_text_file(o.out, doc.dump(2) + "\n");
    }
    if (o.as_json) {
        out << doc.dump(2) << "\n";
    } else {
        out << rep.label << " = " << format_double(rep.mean) << " +/- "
            << format_double(rep.standard_error) << " (T=" << rep.shots
            << ", " << rep.variant.name() << ")\n";
    }
    return kExitOk;
}

inline int cmd_scan(const Options &o, std::ostream &out) {
    const auto grid = detail::parse_range(o.range);
    const int n_max = o.povm.n_max >= 0 ? o.povm.n_max : 5;
    const int phases = o.povm.phases > 0 ? o.povm.phases : 32;
    const int bins = o.povm.bins > 0 ? o.povm.bins : 50;
    const auto mode = parse_tail_mode(o.povm.tail);
    std::vector<ScanRow> rows(grid.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t j = next++; j < grid.size(); j = next++) {
            try {
                const int v = grid[j];
                rows[j] = scan_point(o.sweep == "nmax" ? v : n_max,
                                     o.sweep == "phases" ? v : phases,
                                     o.sweep == "bins" ? v : bins, o.alpha,
                                     mode, o.cache_dir);
                rows[j].value = v;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    const unsigned n = std::min<unsigned>(
        o.workers, static_cast<unsigned>(std::max<std::size_t>(1, grid.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto &t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    std::string csv = "param,value,variance,ic_flag\n";
    for (const auto &r : rows) {
        csv += o.sweep + "," + std::to_string(r.value) + "," +
               format_double(r.variance) + "," + (r.complete ? "1" : "0") +
               "\n";
    }
    detail::emit(o.out, csv, out);
    return kExitOk;
}

/// Runs one command line; `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream &out,
               std::ostream &err) {
    std::mutex warn_mutex;
    const auto previous = set_warning_handler([&](const std::string &msg) {
        std::lock_guard lock(warn_mutex);
        err << "warning: " << msg << "\n";
    });
    struct Restore {
        WarningHandler h;
        ~Restore() { set_warning_handler(std::move(h)); }
    } restore{previous};

    Options o;
    CLI::App app{"Classical shadow estimation from binned homodyne data",
                 "hshadow"};
    build_app(app, o);
    try {
        for (std::size_t j = 0; j + 1 < args.size(); ++j) {
            if (args[j] == "--config") {
                args = detail::apply_config(args, args[j + 1]);
                break;
            }
            if (args[j].rfind("--config=", 0) == 0) {
                args = detail::apply_config(args, args[j].substr(9));
                break;
            }
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::Error &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError &e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    const auto *sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "design-bins") {
            return cmd_design(o, out);
        }
        if (name == "build-povm") {
            return cmd_build(o, out);
        }
        if (name == "check-ic") {
            return cmd_check(o, out);
        }
        if (name == "simulate") {
            return cmd_simulate(o, out);
        }
        if (name == "estimate") {
            return cmd_estimate(o, out);
        }
        return cmd_scan(o, out);
    } catch (const DesignError &e) {
        err << "error: " << e.what() << "\n";
        return kExitDesign;
    } catch (const SingularFrameError &e) {
        err << "error: " << e.what() << "\n";
        return kExitNotComplete;
    } catch (const DataError &e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const DomainError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace hshadow::cli
