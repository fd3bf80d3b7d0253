// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ddval/experiments.hpp"
#include "ddval/fl.hpp"
#include "ddval/kernels.hpp"
#include "ddval/ledger.hpp"
#include "ddval/rng.hpp"
#include "ddval/session.hpp"
#include "ddval/stagnation.hpp"
#include "ddval/synth.hpp"
#include "ddval/valuation.hpp"

using namespace ddval;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Dataset random_points(Rng& rng, std::size_t n, std::size_t dim, std::size_t n_labels,
                      std::uint64_t first_id) {
    Dataset out;
    for (std::size_t i = 0; i < n; ++i) {
        DataPoint p;
        p.point_id = first_id + i;
        p.subject_id = p.point_id;
        p.client_id = static_cast<std::uint32_t>(rng.index(4));
        p.x.resize(dim);
        for (double& v : p.x) v = rng.gaussian();
        p.labels.resize(n_labels);
        for (auto& y : p.labels) y = rng.bernoulli(0.5) ? 1 : 0;
        out.push_back(std::move(p));
    }
    return out;
}

// 1. KNN-SV exactness against the brute-force Shapley enumeration.
void criterion_1() {
    const auto t0 = Clock::now();
    Rng rng(20240601);
    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng.index(6);  // N <= 8, with N >= K
        const int k = 1 + static_cast<int>(rng.index(3));
        const Dataset train = random_points(rng, n, 3, 1, 1);
        const Dataset test = random_points(rng, 1, 3, 1, 1000);
        const auto sv = compute_knn_svs(train, test, k);
        const std::vector<double> exact =
            canonical_shapley(knn_coalition_table(train, test.front(), k));
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(sv.at(train[i].point_id) - exact[i]));
        }
        ++checked;
    }
    const double secs = elapsed(t0);
    report(1, worst <= 1e-9 && secs < 10.0, "KNN-SV equals exact Shapley on 200 random games",
           "max |diff| = " + std::to_string(worst) + ", " + std::to_string(secs) + " s");
}

// 2. Group rationality of the AUROC normalization.
void criterion_2() {
    Rng rng(20240602);
    double worst = 0.0;
    int runs = 0;
    while (runs < 100) {
        const std::size_t n = 5 + rng.index(30);
        const Dataset train = random_points(rng, n, 4, 2, 1);
        const Dataset test = random_points(rng, 3, 4, 2, 2000);
        const auto raw = compute_knn_svs(train, test, 3);
        double raw_sum = 0.0;
        for (const auto& [id, v] : raw) raw_sum += v;
        if (std::abs(raw_sum) < 1e-9) continue;  // degenerate draw, resample
        const double auc = 0.5 + 0.4 * rng.uniform01();
        const auto normalized = normalize_to_auc(raw, auc);
        double sum = 0.0;
        for (const auto& [id, v] : normalized) sum += v;
        worst = std::max(worst, std::abs(sum - (auc - 0.5)));
        ++runs;
    }
    report(2, worst <= 1e-9, "sum of normalized SVs equals AUROC - 0.5 on 100 runs",
           "max |sum - (auc-0.5)| = " + std::to_string(worst));
}

// 3. Same data, same value, bitwise.
void criterion_3() {
    Rng rng(20240603);
    bool all_equal = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6 + rng.index(20);
        Dataset train = random_points(rng, n, 4, 2, 1);
        const std::size_t src = rng.index(n);
        DataPoint dup = train[src];
        dup.point_id = 5000 + trial;
        dup.subject_id = dup.point_id;
        dup.client_id = train[src].client_id + 1;  // different owner
        train.push_back(dup);
        const Dataset test = random_points(rng, 4, 4, 2, 3000);
        const auto sv = compute_knn_svs(train, test, 1 + static_cast<int>(rng.index(5)));
        if (sv.at(train[src].point_id) != sv.at(dup.point_id)) {
            all_equal = false;
            break;
        }
    }
    report(3, all_equal, "duplicated points across clients get bitwise-equal raw SVs",
           "100 randomized trials");
}

// 4. Label-flip direction on the 6-client experiment.
void criterion_4() {
    const auto t0 = Clock::now();
    const exp::ValueConfig cfg = exp::ValueConfig::flip_experiment_defaults();
    const exp::ValueReport rep = exp::run_value_points(cfg);
    const double secs = elapsed(t0);
    const bool pass = rep.seeds_monotone_0_to_4 >= 10 && secs < 900.0;
    report(4, pass, "mean SV strictly decreasing through 4 flips in >= 10/12 seeds",
           std::to_string(rep.seeds_monotone_0_to_4) + "/12 seeds, " + std::to_string(secs) +
               " s");
}

// 5. Institutional accuracy against canonical retraining.
void criterion_5() {
    const auto t0 = Clock::now();
    const exp::CompareConfig cfg = exp::CompareConfig::defaults();
    const exp::CompareReport rep = exp::run_compare_institutional(cfg);
    const double secs = elapsed(t0);
    const bool pass = rep.ddval_iid.mean >= 0.95 && rep.ddval_noniid.mean >= 0.95 &&
                      rep.noniid_seeds_ddval_ge_or >= 10 && secs < 1800.0;
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "ddval iid %.5f, non-iid %.5f; or non-iid %.5f; ddval>=or in %zu/12 non-iid "
                  "seeds; %.1f s",
                  rep.ddval_iid.mean, rep.ddval_noniid.mean, rep.or_noniid.mean,
                  rep.noniid_seeds_ddval_ge_or, secs);
    report(5, pass, "DDVal institutional cosine >= 0.95 and >= OR on non-IID", detail);
}

// 6. Loglinear scaling of the valuation and exponential coalition counts.
void criterion_6() {
    exp::ScaleConfig cfg;  // {4k, 8k, 16k, 32k} by default
    cfg.baseline_clients = {2, 3, 4};
    cfg.points_per_client = 200;
    cfg.baseline_rounds = 3;
    const exp::ScaleReport rep = exp::run_scale(cfg);

    bool counters_ok = true;
    std::size_t expected = 3;  // 2^2 - 1
    for (const auto& row : rep.rows) {
        if (row.method != "one_round") continue;
        if (row.utility_evaluations != expected) counters_ok = false;
        expected = 2 * expected + 1;
    }
    const bool pass = rep.ddval_largest_pair_ratio <= 2.6 && counters_ok;
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "time(2N)/time(N) = %.3f at N = %zu, growth exponent %.2f, OR counters "
                  "3/7/15: %s",
                  rep.ddval_largest_pair_ratio, cfg.ddval_points[cfg.ddval_points.size() - 2],
                  rep.ddval_growth_exponent, counters_ok ? "ok" : "wrong");
    report(6, pass, "DDVal time ratio <= 2.6 and OR evaluations double per client", detail);
}

// 7. Ledger end-to-end with exact settlement and exercised rejections.
void criterion_7() {
    const auto t0 = Clock::now();
    session::SessionConfig cfg;
    cfg.n_peers = 3;
    cfg.synth.points_per_client = 400;
    cfg.synth.n_test = 150;
    cfg.synth.seed = 42;
    cfg.fl.window = 3;
    cfg.fl.seed = 42;
    cfg.fund = 1'000'000;
    const session::SessionResult r = session::run_swarm_session(cfg);

    std::int64_t transferred = 0;
    for (const auto& t : r.settlement) transferred += t.amount;
    const bool session_ok = r.completed && !r.diverged && !r.timed_out &&
                            transferred == cfg.fund &&
                            ledger::conserves_tokens(r.final_state.token) &&
                            r.peer_contribution_vectors.size() == 3 &&
                            r.peer_contribution_vectors[1] == r.peer_contribution_vectors[0] &&
                            r.peer_contribution_vectors[2] == r.peer_contribution_vectors[0];

    // Access-control and phase-safety rejections, each with its own code.
    using namespace ledger;
    ContractState s;
    bool rejects_ok = apply_tx(s, {1, SignalReadyTx{}}).status == TxStatus::NotCreated;
    s = apply_tx(s, {1, CreateTx{{1, 2}, {}, 2}}).state;
    rejects_ok &= apply_tx(s, {9, SignalReadyTx{}}).status == TxStatus::NotWhitelisted;
    rejects_ok &= apply_tx(s, {1, SubmitRoundTx{1, {}, 0}}).status == TxStatus::WrongPhase;
    rejects_ok &= apply_tx(s, {1, ReportContributionTx{1}}).status == TxStatus::WrongPhase;
    s = apply_tx(s, {1, SignalReadyTx{}}).state;
    s = apply_tx(s, {2, SignalReadyTx{}}).state;
    s = apply_tx(s, {1, SubmitRoundTx{1, {}, 100}}).state;
    rejects_ok &= apply_tx(s, {1, SubmitRoundTx{1, {}, 100}}).status == TxStatus::DuplicateRound;
    rejects_ok &= apply_tx(s, {1, SubmitRoundTx{2, {}, 100}}).status == TxStatus::BadRound;
    rejects_ok &= apply_tx(s, {1, PayoutTx{}}).status == TxStatus::WrongPhase;
    s = apply_tx(s, {2, SubmitRoundTx{1, {}, 100}}).state;
    s = apply_tx(s, {1, SubmitRoundTx{2, {}, 100}}).state;
    s = apply_tx(s, {2, SubmitRoundTx{2, {}, 100}}).state;
    s = apply_tx(s, {1, SubmitRoundTx{3, {}, 100}}).state;
    s = apply_tx(s, {2, SubmitRoundTx{3, {}, 100}}).state;  // window 2 -> Valuation
    rejects_ok &= s.swarm.phase == Phase::Valuation;
    rejects_ok &= apply_tx(s, {1, SubmitRoundTx{4, {}, 100}}).status == TxStatus::WrongPhase;
    s = apply_tx(s, {1, FundTx{100}}).state;
    rejects_ok &= apply_tx(s, {1, PayoutTx{}}).status == TxStatus::MissingReports;
    s = apply_tx(s, {1, ReportContributionTx{10}}).state;
    rejects_ok &= apply_tx(s, {1, ReportContributionTx{10}}).status == TxStatus::DuplicateReport;
    s = apply_tx(s, {2, ReportContributionTx{10}}).state;
    s = apply_tx(s, {1, PayoutTx{}}).state;
    rejects_ok &= apply_tx(s, {1, PayoutTx{}}).status == TxStatus::AlreadyPaid;

    const double secs = elapsed(t0);
    report(7, session_ok && rejects_ok && secs < 300.0,
           "3-peer session settles exactly with identical replicas",
           (session_ok ? "session ok" : std::string("session failed: ") + r.failure) +
               (rejects_ok ? ", rejection matrix ok" : ", rejection matrix wrong") + ", " +
               std::to_string(secs) + " s");
}

// 8. Gas estimator reference value and linearity.
void criterion_8() {
    const double deploy = ledger::estimate_gas_cost(1'473'028, 33.0, 1859.0);
    const double a = ledger::estimate_gas_cost(1'000'033, 33.0, 1859.0);
    const double b = ledger::estimate_gas_cost(473'000, 33.0, 1859.0);
    const double linear_err =
        std::abs(ledger::estimate_gas_cost(1'000'033 + 473'000, 33.0, 1859.0) - (a + b));
    const bool pass = std::abs(deploy - 90.37) <= 0.01 && linear_err <= 1e-9;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "1,473,028 gas @ 33 Gwei, 1859 USD/ETH -> %.4f USD; "
                                          "linearity error %.2e",
                  deploy, linear_err);
    report(8, pass, "deployment cost 90.37 +- 0.01 USD and cost is linear in gas", detail);
}

// 9. Analytic gradients against central finite differences.
void criterion_9() {
    Rng rng(20240609);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const ModelShape shape{2 + rng.index(4), 2 + rng.index(4), 1 + rng.index(3)};
        LinearModel model = LinearModel::init(shape, rng.bits());
        const Dataset batch = random_points(rng, 1 + rng.index(6), shape.d_in, shape.n_labels, 1);
        std::vector<double> grad(model.params().size());
        model.loss_and_gradient(batch, grad);
        const double h = 1e-6;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double saved = model.params()[i];
            model.params()[i] = saved + h;
            const double up = model.loss(batch);
            model.params()[i] = saved - h;
            const double down = model.loss(batch);
            model.params()[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({1e-8, std::abs(fd), std::abs(grad[i])});
            worst = std::max(worst, std::abs(fd - grad[i]) / denom);
        }
    }
    report(9, worst <= 1e-5, "gradients match finite differences on 50 random instances",
           "max relative error = " + std::to_string(worst));
}

// 10. Ending condition: stagnation stops at W+1, improvement never stops.
void criterion_10() {
    synth::SynthConfig sc;
    sc.n_clients = 2;
    sc.points_per_client = 80;
    sc.n_test = 60;
    sc.seed = 10;
    const synth::GenResult data = synth::gen_synthetic(sc);
    fl::FlConfig fc;
    fc.lr = 0.0;  // constant AUC
    fc.window = 6;
    fc.max_rounds = 100;
    const auto run = fl::run_federated(data.clients, data.test, fc);
    const bool constant_ok = run.rounds.size() == 7;

    StagnationWindow<double> w(6);
    bool improving_ok = true;
    for (int r = 1; r <= 1000; ++r) {
        if (w.observe(0.5 + 1e-4 * r)) {
            improving_ok = false;
            break;
        }
    }
    report(10, constant_ok && improving_ok,
           "constant AUC stops at W+1; improving AUC never stops before the cap",
           "constant run: " + std::to_string(run.rounds.size()) + " rounds (W=6); improving: " +
               (improving_ok ? "no stop in 1000 rounds" : "stopped early"));
}

}  // namespace

int main() {
    std::printf("ddval acceptance suite (kernels: %s)\n",
                std::string(kernels::active_name()).c_str());
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures == 0) {
        std::printf("all 10 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
