#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ddval/model.hpp"
#include "ddval/types.hpp"
#include "ddval/valuation.hpp"

namespace ddval::fl {

struct FlConfig {
    std::size_t d_h = 32;
    double lr = 1.0;
    int epochs = 1;
    std::size_t batch_size = 32;
    int window = 10;     // stagnation window W
    int max_rounds = 40;
    std::uint64_t seed = 0;
};

struct ClientSplit {
    std::uint32_t client_id = 0;
    Dataset data;
};

struct RoundRecord {
    int round_index = 0;  // 1-based
    std::map<std::uint32_t, std::vector<double>> per_client_delta;
    std::vector<double> aggregated_params;
    double validation_auc = 0.0;
};

// One client's local pass: `epochs` epochs of mini-batch SGD on per-label
// BCE, batches drawn in a seed-determined shuffle order. Returns
// (updated params - input params); the input model is untouched.
std::vector<double> train_local(const LinearModel& model, std::span<const DataPoint> data,
                                int epochs, double lr, std::size_t batch_size,
                                std::uint64_t seed);

// model + weighted mean of deltas, weights normalized (client data counts).
LinearModel fed_avg_round(const LinearModel& model,
                          const std::vector<std::vector<double>>& deltas,
                          const std::vector<double>& weights);

// Macro AUROC of the model's scores on the test set.
double validate(const LinearModel& model, std::span<const DataPoint> test);

struct FederatedRun {
    LinearModel initial;
    LinearModel final_model;
    std::vector<RoundRecord> rounds;
};

// FedAvg loop with the stagnation-window ending condition; stops at the
// window trigger or at max_rounds. Deltas are always combined in ascending
// client_id order, so results do not depend on client scheduling.
FederatedRun run_federated(const std::vector<ClientSplit>& clients,
                           std::span<const DataPoint> test, const FlConfig& config);

// Round history as JSON lines: one record per round with the per-client
// delta L2 norms and the validation AUC.
std::string rounds_to_jsonl(const std::vector<RoundRecord>& rounds);

// One deep feature per point: the post-tanh hidden activations, with labels
// and lineage carried over.
Dataset extract_deep_features(const LinearModel& model, std::span<const DataPoint> data);

struct ClientSvResult {
    std::vector<double> client_svs;       // ascending client_id order
    std::vector<std::uint32_t> client_ids;
    std::size_t utility_evaluations = 0;  // coalitions evaluated (2^N - 1)
};

// One-Round approximation: synthesizes every coalition's model as
// initial + sum over rounds of the weighted mean of the members' recorded
// deltas, scores each on the test set (AUROC - 0.5), and solves the exact
// Shapley values of that table.
ClientSvResult or_approx_client_svs(const LinearModel& initial,
                                    const std::vector<RoundRecord>& history,
                                    const std::vector<ClientSplit>& clients,
                                    std::span<const DataPoint> test);

struct SafeConfig {
    int iterations = 200;
    double lr = 2.0;
};

// SaFE approximation: fits one per-label logistic classifier per client on
// that client's deep features, combines coalition members by data-count
// weighted parameter averaging, scores combined classifiers on the test
// features (AUROC - 0.5), and solves the exact Shapley values.
ClientSvResult safe_approx_client_svs(const std::vector<ClientSplit>& client_features,
                                      std::span<const DataPoint> test_features,
                                      const SafeConfig& config = {});

}  // namespace ddval::fl
