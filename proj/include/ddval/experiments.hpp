#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddval/fl.hpp"
#include "ddval/session.hpp"
#include "ddval/synth.hpp"
#include "ddval/valuation.hpp"

namespace ddval::exp {

// Default seed list (12 repetitions).
std::vector<std::uint64_t> default_seeds();

struct MeanCi {
    double mean = 0.0;
    double ci95 = 0.0;  // 1.96 * standard error
    std::size_t n = 0;
};
MeanCi mean_ci(const std::vector<double>& values);

// --- value-points experiment (label flips, per-point valuation) -----------

struct ValueConfig {
    synth::SynthConfig synth;
    fl::FlConfig fl;
    int k = kDefaultK;
    std::vector<std::uint64_t> seeds = default_seeds();

    // 6 clients, 2000 points each, flip fractions 0.05 * client index.
    static ValueConfig flip_experiment_defaults();
};

struct ValueReport {
    nlohmann::json json;        // full report (config, per-seed strata, pooled)
    std::string points_csv;     // per-point rows for the first seed
    std::string strata_csv;     // pooled flip-count strata
    // Per seed: mean normalized SV by flip count (index = flips, up to the
    // highest observed stratum).
    std::vector<std::vector<double>> per_seed_flip_means;
    std::size_t seeds_monotone_0_to_4 = 0;  // strictly decreasing through 4 flips
};
ValueReport run_value_points(const ValueConfig& config);

// --- institutional comparison (canonical vs DDVal/OR/SaFE) ----------------

struct CompareConfig {
    synth::SynthConfig synth;   // mode is overridden per arm
    fl::FlConfig fl;
    int k = kDefaultK;
    std::vector<std::uint64_t> seeds = default_seeds();
    fl::SafeConfig safe;

    static CompareConfig defaults();
};

struct CompareSeedRow {
    std::uint64_t seed = 0;
    std::string mode;
    std::vector<double> canonical;
    std::vector<double> ddval;
    std::vector<double> one_round;
    std::vector<double> safe;
    double cos_ddval = 0.0;
    double cos_or = 0.0;
    double cos_safe = 0.0;
    std::size_t coalition_retrainings = 0;
};

struct CompareReport {
    nlohmann::json json;
    std::string csv;
    std::vector<CompareSeedRow> rows;
    MeanCi ddval_iid, ddval_noniid, or_iid, or_noniid, safe_iid, safe_noniid;
    std::size_t noniid_seeds_ddval_ge_or = 0;
};
CompareReport run_compare_institutional(const CompareConfig& config);

// --- scalability -----------------------------------------------------------

struct ScaleConfig {
    std::vector<std::size_t> ddval_points = {4000, 8000, 16000, 32000};
    std::size_t ddval_test = 200;
    std::size_t dim = 32;
    std::size_t n_labels = 8;
    int k = kDefaultK;
    int repeats = 3;  // median-of

    std::vector<std::size_t> baseline_clients = {2, 3, 4, 5};
    std::size_t points_per_client = 500;
    int baseline_rounds = 5;
    std::uint64_t seed = 1;
};

struct ScaleRow {
    std::string method;
    std::size_t n_points = 0;
    std::size_t n_clients = 0;
    std::vector<double> run_seconds;  // raw per-run times
    double median_seconds = 0.0;
    std::size_t utility_evaluations = 0;
};

struct ScaleReport {
    nlohmann::json json;
    std::string csv;
    std::vector<ScaleRow> rows;
    double ddval_largest_pair_ratio = 0.0;  // time(2N) / time(N)
    double ddval_growth_exponent = 0.0;     // log-log fit slope
};
ScaleReport run_scale(const ScaleConfig& config);

// --- ledger demo ------------------------------------------------------------

struct LedgerDemoConfig {
    session::SessionConfig session;
    double gas_price_gwei = 33.0;
    double eth_usd = 1859.0;

    static LedgerDemoConfig defaults();
};

struct LedgerDemoReport {
    nlohmann::json json;
    std::string trace_jsonl;
    session::SessionResult session;
};
LedgerDemoReport run_ledger_demo(const LedgerDemoConfig& config);

// --- config (de)serialization and schema checking --------------------------

nlohmann::json to_json(const synth::SynthConfig& c);
nlohmann::json to_json(const fl::FlConfig& c);
void from_json_into(const nlohmann::json& j, synth::SynthConfig& c);
void from_json_into(const nlohmann::json& j, fl::FlConfig& c);

// Minimal structural validator for the shipped report schemas (supports
// type / properties / required / items). Returns an error description or
// empty string when the document conforms.
std::string validate_schema(const nlohmann::json& schema, const nlohmann::json& doc);

}  // namespace ddval::exp
