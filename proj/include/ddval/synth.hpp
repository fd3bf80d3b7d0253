#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddval/fl.hpp"
#include "ddval/types.hpp"

namespace ddval::synth {

enum class Mode { IID, NonIID };

// Gaussian-cluster generator with label-dependent means. Label 0 plays the
// "finding present" role; labels 1..L-1 are condition indicators whose union
// (plus a small undefined-finding probability) drives label 0.
struct SynthConfig {
    std::size_t n_clients = 3;
    std::size_t points_per_client = 2000;
    std::size_t n_test = 400;
    std::size_t d_in = 20;
    std::size_t n_labels = 8;
    Mode mode = Mode::IID;
    std::vector<double> flip_fractions;  // per client; empty = no flips
    std::uint64_t seed = 0;

    double condition_marginal = 0.22;   // base P(condition l = 1)
    double condition_shift = 1.2;       // feature-space shift per active label
    double noise_sigma = 1.0;
    double p_undef_finding = 0.05;      // finding=1 with no condition set
    double noniid_mean_shift = 1.0;     // per-client base mean offset (NonIID)
    double noniid_marginal_offset = 0.12;
    std::size_t max_subject_points = 3; // scans per subject, uniform in [1, max]
};

struct GenResult {
    std::vector<fl::ClientSplit> clients;
    Dataset test;
    // Resolved P(condition l) per client (n_clients x (n_labels - 1));
    // identical rows in IID mode.
    std::vector<std::vector<double>> client_condition_marginals;
};

// Fully seed-determined. Throws on invalid config (degenerate noise, flip
// fraction outside [0, 1], too few points).
GenResult gen_synthetic(const SynthConfig& config);

// Independently flips each of the L label entries of each point with
// probability `fraction`; increments per-point flip counts.
Dataset flip_labels(const Dataset& data, double fraction, std::uint64_t seed);

// Splits a flat dataset into n_clients disjoint, exhaustive parts without
// splitting any subject. IID shuffles subjects; NonIID orders them by
// dominant condition label so client label distributions skew apart.
std::vector<fl::ClientSplit> partition(const Dataset& points, std::size_t n_clients, Mode mode,
                                       std::uint64_t seed);

std::string dataset_to_csv(const Dataset& data);

}  // namespace ddval::synth
