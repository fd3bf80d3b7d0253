#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ddval/types.hpp"

namespace ddval {

constexpr int kDefaultK = 10;
constexpr int kMaxExactPlayers = 24;      // exhaustive-enumeration cap
constexpr double kNormalizeEps = 1e-12;   // |sum phi| below this is degenerate

// Utilities of every nonempty player subset, keyed by bitmask. Player i is
// bit (1 << i). Input to the exact Shapley enumeration.
class CoalitionTable {
public:
    explicit CoalitionTable(int n_players);

    int n_players() const { return n_players_; }
    void set(std::uint32_t mask, double utility);
    double get(std::uint32_t mask) const;  // U(0) == 0
    bool has(std::uint32_t mask) const;
    bool complete() const;                 // all 2^N - 1 nonempty subsets present
    std::size_t size() const { return n_set_; }

private:
    int n_players_;
    std::vector<double> utilities_;
    std::vector<bool> present_;
    std::size_t n_set_ = 0;
};

// Exact Shapley values by enumeration over all subsets, U(empty) = 0.
// Sub-masks are walked in a player-independent order so interchangeable
// players come out exactly equal. Throws if the table is incomplete.
std::vector<double> canonical_shapley(const CoalitionTable& table);

struct KnnSvOptions {
    // Test points are processed in fixed-size chunks merged in chunk order,
    // so the result is independent of the thread count.
    int threads = 1;
    std::size_t chunk = 16;
};

// Per-point Shapley values of the k-nearest-neighbor surrogate utility over
// the given feature vectors. For each test point: training points are sorted
// by ascending Euclidean distance (ties by ascending point_id), the two-term
// backward recursion fills one value per training point, and results are
// averaged per label dimension and across test points.
std::map<std::uint64_t, double> compute_knn_svs(std::span<const DataPoint> train,
                                                std::span<const DataPoint> test, int k,
                                                const KnnSvOptions& options = {});

// Brute-force oracle utility of a coalition of training points on one test
// point: the number of label matches among the min(k, |S|) nearest coalition
// members, divided by k. The recursion above yields exactly the Shapley
// values of this game; tests enumerate it to cross-check.
double knn_utility(std::span<const DataPoint> train, std::uint32_t coalition_mask,
                   const DataPoint& test_point, int k, std::size_t label_index = 0);

// Builds the full 2^N - 1 table of knn_utility values for small N.
CoalitionTable knn_coalition_table(std::span<const DataPoint> train, const DataPoint& test_point,
                                   int k, std::size_t label_index = 0);

// Rescales raw SVs so they sum to coalition_auroc - 0.5. Throws
// std::domain_error when |sum raw_sv| < kNormalizeEps.
std::map<std::uint64_t, double> normalize_to_auc(const std::map<std::uint64_t, double>& raw_sv,
                                                 double coalition_auroc);

// Sums member values per group. Every point must be assigned a group.
std::map<std::string, double> aggregate_group(
    const std::map<std::uint64_t, double>& normalized_sv,
    const std::map<std::uint64_t, std::string>& grouping);

// Full per-run valuation output.
struct ValuationReport {
    std::map<std::uint64_t, double> raw_sv;
    std::map<std::uint64_t, double> normalized_sv;
    std::map<std::string, double> group_sv;  // per-client aggregates
    double coalition_auroc = 0.0;
    int k_param = kDefaultK;
    std::size_t n_test = 0;
    std::size_t n_train = 0;
    std::size_t dim = 0;
    std::size_t n_labels = 0;
};

// Runs the valuation pipeline over extracted deep features: KNN-SVs,
// AUROC normalization, per-client aggregation.
ValuationReport value_points(std::span<const DataPoint> train_features,
                             std::span<const DataPoint> test_features, int k,
                             double coalition_auroc, const KnnSvOptions& options = {});

// report.cpp
std::string report_to_json(const ValuationReport& report);
std::string report_to_csv(const ValuationReport& report, std::span<const DataPoint> train);

}  // namespace ddval
