#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ddval/synth.hpp"

using namespace ddval;

namespace {

double condition_marginal(const Dataset& data, std::size_t label) {
    double total = 0.0;
    for (const DataPoint& p : data) total += p.labels[label];
    return total / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("generation is deterministic under the seed") {
    synth::SynthConfig cfg;
    cfg.n_clients = 2;
    cfg.points_per_client = 100;
    cfg.n_test = 50;
    cfg.seed = 77;
    const auto a = synth::gen_synthetic(cfg);
    const auto b = synth::gen_synthetic(cfg);
    CHECK(synth::dataset_to_csv(a.test) == synth::dataset_to_csv(b.test));
    for (std::size_t c = 0; c < cfg.n_clients; ++c) {
        CHECK(synth::dataset_to_csv(a.clients[c].data) ==
              synth::dataset_to_csv(b.clients[c].data));
    }
    cfg.seed = 78;
    const auto c2 = synth::gen_synthetic(cfg);
    CHECK(synth::dataset_to_csv(a.test) != synth::dataset_to_csv(c2.test));
}

TEST_CASE("point and subject bookkeeping") {
    synth::SynthConfig cfg;
    cfg.n_clients = 3;
    cfg.points_per_client = 200;
    cfg.seed = 5;
    const auto gen = synth::gen_synthetic(cfg);

    std::set<std::uint64_t> ids;
    std::map<std::uint64_t, std::uint32_t> subject_owner;
    for (const auto& client : gen.clients) {
        CHECK(client.data.size() == cfg.points_per_client);
        for (const DataPoint& p : client.data) {
            CHECK(ids.insert(p.point_id).second);  // globally unique
            CHECK(p.x.size() == cfg.d_in);
            CHECK(p.labels.size() == cfg.n_labels);
            auto [it, inserted] = subject_owner.try_emplace(p.subject_id, p.client_id);
            CHECK(it->second == p.client_id);  // subject never spans clients
        }
    }
    for (const DataPoint& p : gen.test) CHECK(ids.insert(p.point_id).second);
}

TEST_CASE("iid mode: per-client marginals match the base marginal") {
    synth::SynthConfig cfg;
    cfg.n_clients = 3;
    cfg.points_per_client = 4000;
    cfg.seed = 101;
    const auto gen = synth::gen_synthetic(cfg);
    const double sigma = std::sqrt(cfg.condition_marginal * (1 - cfg.condition_marginal) /
                                   static_cast<double>(cfg.points_per_client));
    for (const auto& client : gen.clients) {
        for (std::size_t l = 1; l < cfg.n_labels; ++l) {
            CHECK(std::abs(condition_marginal(client.data, l) - cfg.condition_marginal) <=
                  3.5 * sigma);
        }
    }
}

TEST_CASE("non-iid mode: marginals shift by the configured offset") {
    synth::SynthConfig cfg;
    cfg.n_clients = 3;
    cfg.points_per_client = 4000;
    cfg.mode = synth::Mode::NonIID;
    cfg.noniid_marginal_offset = 0.12;
    cfg.seed = 102;
    const auto gen = synth::gen_synthetic(cfg);
    bool any_shifted = false;
    for (std::size_t c = 0; c < cfg.n_clients; ++c) {
        for (std::size_t l = 1; l < cfg.n_labels; ++l) {
            const double resolved = gen.client_condition_marginals[c][l - 1];
            // Resolved marginal sits one offset away from the base...
            CHECK(std::abs(std::abs(resolved - cfg.condition_marginal) -
                           cfg.noniid_marginal_offset) < 1e-12);
            if (resolved != cfg.condition_marginal) any_shifted = true;
            // ...and the empirical marginal tracks the resolved one.
            const double sigma =
                std::sqrt(resolved * (1 - resolved) / static_cast<double>(cfg.points_per_client));
            CHECK(std::abs(condition_marginal(gen.clients[c].data, l) - resolved) <=
                  3.5 * sigma);
        }
    }
    CHECK(any_shifted);
    // Clients get different marginal profiles.
    CHECK(gen.client_condition_marginals[0] != gen.client_condition_marginals[1]);
}

TEST_CASE("flip_labels") {
    synth::SynthConfig cfg;
    cfg.n_clients = 1;
    cfg.points_per_client = 10000;
    cfg.seed = 31;
    const Dataset data = synth::gen_synthetic(cfg).clients.front().data;

    SUBCASE("fraction 0 changes nothing") {
        const Dataset out = synth::flip_labels(data, 0.0, 1);
        for (std::size_t i = 0; i < data.size(); ++i) {
            CHECK(out[i].labels == data[i].labels);
            CHECK(out[i].flipped_labels == 0);
        }
    }
    SUBCASE("fraction 1 inverts every label") {
        const Dataset out = synth::flip_labels(data, 1.0, 1);
        for (std::size_t i = 0; i < data.size(); ++i) {
            CHECK(out[i].flipped_labels == cfg.n_labels);
            for (std::size_t l = 0; l < cfg.n_labels; ++l) {
                CHECK(out[i].labels[l] == (data[i].labels[l] ^ 1));
            }
        }
    }
    SUBCASE("fraction 0.25 with L=8 flips 2 labels on average") {
        const Dataset out = synth::flip_labels(data, 0.25, 7);
        double mean = 0.0;
        for (const DataPoint& p : out) mean += p.flipped_labels;
        mean /= static_cast<double>(out.size());
        CHECK(std::abs(mean - 2.0) <= 0.1);
    }
    SUBCASE("flip counts follow Binomial(L, fraction)") {
        const double fraction = 0.25;
        const Dataset out = synth::flip_labels(data, fraction, 3);
        std::vector<double> observed(cfg.n_labels + 1, 0.0);
        for (const DataPoint& p : out) observed[p.flipped_labels] += 1.0;
        // Chi-square against the binomial pmf, pooling tiny tail bins.
        double chi2 = 0.0;
        double tail_expected = 0.0;
        double tail_observed = 0.0;
        for (std::size_t k = 0; k <= cfg.n_labels; ++k) {
            double pmf = 1.0;
            for (std::size_t i = 0; i < k; ++i) {
                pmf *= static_cast<double>(cfg.n_labels - i) / static_cast<double>(i + 1);
            }
            pmf *= std::pow(fraction, static_cast<double>(k)) *
                   std::pow(1 - fraction, static_cast<double>(cfg.n_labels - k));
            const double expected = pmf * static_cast<double>(out.size());
            if (expected < 10.0) {
                tail_expected += expected;
                tail_observed += observed[k];
                continue;
            }
            chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
        }
        if (tail_expected > 0.0) {
            chi2 += (tail_observed - tail_expected) * (tail_observed - tail_expected) /
                    tail_expected;
        }
        CHECK(chi2 < 30.0);  // ~0.999 quantile at <= 8 dof
    }
    SUBCASE("fraction outside [0,1] rejected") {
        CHECK_THROWS_AS(synth::flip_labels(data, 1.5, 1), std::invalid_argument);
    }
}

TEST_CASE("partition") {
    synth::SynthConfig cfg;
    cfg.n_clients = 1;
    cfg.points_per_client = 600;
    cfg.seed = 55;
    Dataset flat = synth::gen_synthetic(cfg).clients.front().data;

    SUBCASE("single client keeps everything") {
        const auto parts = synth::partition(flat, 1, synth::Mode::IID, 1);
        CHECK(parts.size() == 1);
        CHECK(parts.front().data.size() == flat.size());
    }
    SUBCASE("partition law: disjoint and exhaustive, subjects whole") {
        for (synth::Mode mode : {synth::Mode::IID, synth::Mode::NonIID}) {
            const auto parts = synth::partition(flat, 4, mode, 9);
            std::set<std::uint64_t> seen;
            std::map<std::uint64_t, std::uint32_t> subject_owner;
            std::size_t total = 0;
            for (const auto& part : parts) {
                CHECK_FALSE(part.data.empty());
                total += part.data.size();
                for (const DataPoint& p : part.data) {
                    CHECK(seen.insert(p.point_id).second);
                    CHECK(p.client_id == part.client_id);
                    auto [it, inserted] = subject_owner.try_emplace(p.subject_id, p.client_id);
                    CHECK(it->second == p.client_id);
                }
            }
            CHECK(total == flat.size());
        }
    }
    SUBCASE("non-iid split skews dominant labels apart") {
        const auto parts = synth::partition(flat, 3, synth::Mode::NonIID, 9);
        // First and last client should differ in at least one condition
        // marginal by a wide margin (sorted by dominant label).
        double max_gap = 0.0;
        for (std::size_t l = 1; l < cfg.n_labels; ++l) {
            max_gap = std::max(max_gap,
                               std::abs(condition_marginal(parts.front().data, l) -
                                        condition_marginal(parts.back().data, l)));
        }
        CHECK(max_gap > 0.15);
    }
    SUBCASE("fewer subjects than clients rejected") {
        Dataset tiny(flat.begin(), flat.begin() + 2);
        tiny[0].subject_id = tiny[1].subject_id = 42;
        CHECK_THROWS_AS(synth::partition(tiny, 2, synth::Mode::IID, 1), std::invalid_argument);
    }
}

TEST_CASE("invalid configs rejected") {
    synth::SynthConfig cfg;
    cfg.noise_sigma = 0.0;
    CHECK_THROWS_AS(synth::gen_synthetic(cfg), std::invalid_argument);
    cfg.noise_sigma = 1.0;
    cfg.flip_fractions = {0.5};  // wrong size for 3 clients
    CHECK_THROWS_AS(synth::gen_synthetic(cfg), std::invalid_argument);
    cfg.flip_fractions = {0.1, 0.2, 1.7};
    CHECK_THROWS_AS(synth::gen_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("dataset CSV layout") {
    synth::SynthConfig cfg;
    cfg.n_clients = 1;
    cfg.points_per_client = 3;
    cfg.d_in = 2;
    cfg.n_labels = 2;
    cfg.seed = 1;
    const Dataset data = synth::gen_synthetic(cfg).clients.front().data;
    const std::string csv = synth::dataset_to_csv(data);
    CHECK(csv.rfind("point_id,subject_id,client_id,f_0,f_1,y_0,y_1,flips", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
