#include "ddval/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ddval/metrics.hpp"
#include "ddval/rng.hpp"

namespace ddval::exp {
namespace {

using Clock = std::chrono::steady_clock;

double time_call(const std::function<void()>& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string mode_name(synth::Mode m) { return m == synth::Mode::IID ? "iid" : "non_iid"; }

}  // namespace

std::vector<std::uint64_t> default_seeds() {
    std::vector<std::uint64_t> seeds(12);
    std::iota(seeds.begin(), seeds.end(), 1);
    return seeds;
}

MeanCi mean_ci(const std::vector<double>& values) {
    MeanCi out;
    out.n = values.size();
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        const double se = std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                          std::sqrt(static_cast<double>(values.size()));
        out.ci95 = 1.96 * se;
    }
    return out;
}

nlohmann::json to_json(const synth::SynthConfig& c) {
    return {{"n_clients", c.n_clients},
            {"points_per_client", c.points_per_client},
            {"n_test", c.n_test},
            {"d_in", c.d_in},
            {"n_labels", c.n_labels},
            {"mode", mode_name(c.mode)},
            {"flip_fractions", c.flip_fractions},
            {"seed", c.seed},
            {"condition_marginal", c.condition_marginal},
            {"condition_shift", c.condition_shift},
            {"noise_sigma", c.noise_sigma},
            {"p_undef_finding", c.p_undef_finding},
            {"noniid_mean_shift", c.noniid_mean_shift},
            {"noniid_marginal_offset", c.noniid_marginal_offset},
            {"max_subject_points", c.max_subject_points}};
}

nlohmann::json to_json(const fl::FlConfig& c) {
    return {{"d_h", c.d_h},         {"lr", c.lr},
            {"epochs", c.epochs},   {"batch_size", c.batch_size},
            {"window", c.window},   {"max_rounds", c.max_rounds},
            {"seed", c.seed}};
}

void from_json_into(const nlohmann::json& j, synth::SynthConfig& c) {
    c.n_clients = j.value("n_clients", c.n_clients);
    c.points_per_client = j.value("points_per_client", c.points_per_client);
    c.n_test = j.value("n_test", c.n_test);
    c.d_in = j.value("d_in", c.d_in);
    c.n_labels = j.value("n_labels", c.n_labels);
    if (j.contains("mode")) {
        const std::string m = j.at("mode");
        if (m == "iid") {
            c.mode = synth::Mode::IID;
        } else if (m == "non_iid") {
            c.mode = synth::Mode::NonIID;
        } else {
            throw std::invalid_argument("config: unknown mode '" + m + "'");
        }
    }
    if (j.contains("flip_fractions")) {
        c.flip_fractions = j.at("flip_fractions").get<std::vector<double>>();
    }
    c.seed = j.value("seed", c.seed);
    c.condition_marginal = j.value("condition_marginal", c.condition_marginal);
    c.condition_shift = j.value("condition_shift", c.condition_shift);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.p_undef_finding = j.value("p_undef_finding", c.p_undef_finding);
    c.noniid_mean_shift = j.value("noniid_mean_shift", c.noniid_mean_shift);
    c.noniid_marginal_offset = j.value("noniid_marginal_offset", c.noniid_marginal_offset);
    c.max_subject_points = j.value("max_subject_points", c.max_subject_points);
}

void from_json_into(const nlohmann::json& j, fl::FlConfig& c) {
    c.d_h = j.value("d_h", c.d_h);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.window = j.value("window", c.window);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    c.seed = j.value("seed", c.seed);
}

// --- value-points ----------------------------------------------------------

ValueConfig ValueConfig::flip_experiment_defaults() {
    ValueConfig cfg;
    cfg.synth.n_clients = 6;
    cfg.synth.points_per_client = 2000;
    cfg.synth.n_test = 400;
    cfg.synth.flip_fractions = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
    cfg.fl.max_rounds = 25;
    cfg.fl.window = 8;
    return cfg;
}

namespace {

struct SeedValuation {
    std::uint64_t seed = 0;
    double coalition_auroc = 0.0;
    ValuationReport report;
    Dataset train_features;
};

SeedValuation run_pipeline(const synth::SynthConfig& synth_base, const fl::FlConfig& fl_base,
                           int k, std::uint64_t seed) {
    SeedValuation out;
    out.seed = seed;
    synth::SynthConfig sc = synth_base;
    sc.seed = seed;
    fl::FlConfig fc = fl_base;
    fc.seed = derive_seed(seed, 0xf1);

    const synth::GenResult data = synth::gen_synthetic(sc);
    const fl::FederatedRun run = fl::run_federated(data.clients, data.test, fc);
    out.coalition_auroc = run.rounds.back().validation_auc;

    for (const fl::ClientSplit& c : data.clients) {
        Dataset f = fl::extract_deep_features(run.final_model, c.data);
        out.train_features.insert(out.train_features.end(), std::make_move_iterator(f.begin()),
                                  std::make_move_iterator(f.end()));
    }
    const Dataset test_features = fl::extract_deep_features(run.final_model, data.test);
    out.report = value_points(out.train_features, test_features, k, out.coalition_auroc);
    return out;
}

}  // namespace

ValueReport run_value_points(const ValueConfig& config) {
    ValueReport out;
    nlohmann::json per_seed = nlohmann::json::array();
    std::map<int, std::vector<double>> flip_means_by_stratum;   // stratum -> per-seed means
    std::map<std::pair<int, int>, std::vector<double>> pattern_means;

    for (std::uint64_t seed : config.seeds) {
        const SeedValuation sv = run_pipeline(config.synth, config.fl, config.k, seed);

        std::map<int, std::pair<double, std::size_t>> strata;  // flips -> (sum, count)
        std::map<std::pair<int, int>, std::pair<double, std::size_t>> patterns;
        for (const DataPoint& p : sv.train_features) {
            const double v = sv.report.normalized_sv.at(p.point_id);
            auto& s = strata[p.flipped_labels];
            s.first += v;
            ++s.second;
            int conditions = 0;
            for (std::size_t l = 1; l < p.labels.size(); ++l) conditions += p.labels[l];
            auto& q = patterns[{p.labels[0], conditions}];
            q.first += v;
            ++q.second;
        }

        const int max_stratum = strata.rbegin()->first;
        std::vector<double> means;
        nlohmann::json strata_json = nlohmann::json::array();
        for (int f = 0; f <= max_stratum; ++f) {
            auto it = strata.find(f);
            const double mean = it == strata.end()
                                    ? std::numeric_limits<double>::quiet_NaN()
                                    : it->second.first / static_cast<double>(it->second.second);
            means.push_back(mean);
            if (it != strata.end()) {
                strata_json.push_back({{"flips", f},
                                       {"count", it->second.second},
                                       {"mean_normalized_sv", mean}});
                flip_means_by_stratum[f].push_back(mean);
            }
        }
        bool monotone = strata.count(4) > 0;
        for (int f = 1; f <= 4 && monotone; ++f) {
            monotone = strata.count(f) && strata.count(f - 1) && means[f] < means[f - 1];
        }
        if (monotone) ++out.seeds_monotone_0_to_4;
        out.per_seed_flip_means.push_back(means);

        for (const auto& [key, agg] : patterns) {
            pattern_means[key].push_back(agg.first / static_cast<double>(agg.second));
        }

        per_seed.push_back({{"seed", seed},
                            {"coalition_auroc", sv.coalition_auroc},
                            {"flip_strata", std::move(strata_json)},
                            {"monotone_0_to_4", monotone}});

        if (seed == config.seeds.front()) {
            out.points_csv = report_to_csv(sv.report, sv.train_features);
        }
    }

    nlohmann::json pooled = nlohmann::json::array();
    out.strata_csv = "flips,mean_normalized_sv,ci95,n_seeds\n";
    for (const auto& [f, means] : flip_means_by_stratum) {
        const MeanCi mc = mean_ci(means);
        pooled.push_back(
            {{"flips", f}, {"mean_normalized_sv", mc.mean}, {"ci95", mc.ci95}, {"n_seeds", mc.n}});
        out.strata_csv += std::to_string(f) + ',' + fmt_double(mc.mean) + ',' +
                          fmt_double(mc.ci95) + ',' + std::to_string(mc.n) + '\n';
    }
    nlohmann::json patterns_json = nlohmann::json::array();
    for (const auto& [key, means] : pattern_means) {
        const MeanCi mc = mean_ci(means);
        patterns_json.push_back({{"finding_existing", key.first != 0},
                                 {"condition_labels", key.second},
                                 {"mean_normalized_sv", mc.mean},
                                 {"ci95", mc.ci95}});
    }

    out.json = {
        {"experiment", "value-points"},
        {"config",
         {{"synth", to_json(config.synth)},
          {"fl", to_json(config.fl)},
          {"k", config.k},
          {"seeds", config.seeds}}},
        {"results",
         {{"per_seed", std::move(per_seed)},
          {"pooled_flip_strata", std::move(pooled)},
          {"label_pattern_strata", std::move(patterns_json)},
          {"interpretation",
           "mean normalized SV should decrease as the per-point flip count rises"},
          {"seeds_monotone_0_to_4", out.seeds_monotone_0_to_4},
          {"n_seeds", config.seeds.size()}}},
    };
    return out;
}

// --- institutional comparison ----------------------------------------------

CompareConfig CompareConfig::defaults() {
    CompareConfig cfg;
    cfg.synth.n_clients = 3;
    cfg.synth.points_per_client = 2000;
    cfg.synth.n_test = 400;
    cfg.fl.max_rounds = 25;
    cfg.fl.window = 8;
    return cfg;
}

namespace {

CompareSeedRow compare_one_seed(const CompareConfig& config, synth::Mode mode,
                                std::uint64_t seed) {
    CompareSeedRow row;
    row.seed = seed;
    row.mode = mode_name(mode);

    synth::SynthConfig sc = config.synth;
    sc.mode = mode;
    sc.seed = seed;
    fl::FlConfig fc = config.fl;
    fc.seed = derive_seed(seed, 0xf1);

    const synth::GenResult data = synth::gen_synthetic(sc);
    const int n = static_cast<int>(data.clients.size());

    // Grand-coalition run; reused by every approximation.
    const fl::FederatedRun grand = fl::run_federated(data.clients, data.test, fc);
    const double grand_auc = grand.rounds.back().validation_auc;
    ++row.coalition_retrainings;

    // Canonical: full retraining per proper coalition.
    CoalitionTable table(n);
    const std::uint32_t full = (1u << n) - 1;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        if (mask == full) {
            table.set(mask, grand_auc - 0.5);
            continue;
        }
        std::vector<fl::ClientSplit> subset;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) subset.push_back(data.clients[i]);
        }
        const fl::FederatedRun run = fl::run_federated(subset, data.test, fc);
        table.set(mask, run.rounds.back().validation_auc - 0.5);
        ++row.coalition_retrainings;
    }
    row.canonical = canonical_shapley(table);

    // DDVal: hierarchical aggregation of per-point KNN-SVs.
    Dataset train_features;
    std::vector<fl::ClientSplit> client_features;
    for (const fl::ClientSplit& c : data.clients) {
        fl::ClientSplit fs;
        fs.client_id = c.client_id;
        fs.data = fl::extract_deep_features(grand.final_model, c.data);
        train_features.insert(train_features.end(), fs.data.begin(), fs.data.end());
        client_features.push_back(std::move(fs));
    }
    const Dataset test_features = fl::extract_deep_features(grand.final_model, data.test);
    const ValuationReport report = value_points(train_features, test_features, config.k, grand_auc);
    for (const fl::ClientSplit& c : data.clients) {
        row.ddval.push_back(report.group_sv.at("client_" + std::to_string(c.client_id)));
    }

    row.one_round =
        fl::or_approx_client_svs(grand.initial, grand.rounds, data.clients, data.test).client_svs;
    row.safe = fl::safe_approx_client_svs(client_features, test_features, config.safe).client_svs;

    row.cos_ddval = cosine_similarity(row.ddval, row.canonical);
    row.cos_or = cosine_similarity(row.one_round, row.canonical);
    row.cos_safe = cosine_similarity(row.safe, row.canonical);
    return row;
}

}  // namespace

CompareReport run_compare_institutional(const CompareConfig& config) {
    if (config.synth.n_clients > 10) {
        throw std::invalid_argument("run_compare_institutional: too many clients for retraining");
    }
    CompareReport out;
    std::vector<double> dd_iid, dd_non, or_iid, or_non, sf_iid, sf_non;

    for (synth::Mode mode : {synth::Mode::IID, synth::Mode::NonIID}) {
        for (std::uint64_t seed : config.seeds) {
            CompareSeedRow row = compare_one_seed(config, mode, seed);
            if (mode == synth::Mode::IID) {
                dd_iid.push_back(row.cos_ddval);
                or_iid.push_back(row.cos_or);
                sf_iid.push_back(row.cos_safe);
            } else {
                dd_non.push_back(row.cos_ddval);
                or_non.push_back(row.cos_or);
                sf_non.push_back(row.cos_safe);
                if (row.cos_ddval >= row.cos_or) ++out.noniid_seeds_ddval_ge_or;
            }
            out.rows.push_back(std::move(row));
        }
    }
    out.ddval_iid = mean_ci(dd_iid);
    out.ddval_noniid = mean_ci(dd_non);
    out.or_iid = mean_ci(or_iid);
    out.or_noniid = mean_ci(or_non);
    out.safe_iid = mean_ci(sf_iid);
    out.safe_noniid = mean_ci(sf_non);

    nlohmann::json rows_json = nlohmann::json::array();
    out.csv = "seed,mode,cos_ddval,cos_or,cos_safe,coalition_retrainings\n";
    for (const CompareSeedRow& r : out.rows) {
        rows_json.push_back({{"seed", r.seed},
                             {"mode", r.mode},
                             {"canonical", r.canonical},
                             {"ddval", r.ddval},
                             {"one_round", r.one_round},
                             {"safe", r.safe},
                             {"cos_ddval", r.cos_ddval},
                             {"cos_or", r.cos_or},
                             {"cos_safe", r.cos_safe},
                             {"coalition_retrainings", r.coalition_retrainings}});
        out.csv += std::to_string(r.seed) + ',' + r.mode + ',' + fmt_double(r.cos_ddval) + ',' +
                   fmt_double(r.cos_or) + ',' + fmt_double(r.cos_safe) + ',' +
                   std::to_string(r.coalition_retrainings) + '\n';
    }
    auto mc_json = [](const MeanCi& m) {
        return nlohmann::json{{"mean", m.mean}, {"ci95", m.ci95}, {"n", m.n}};
    };
    out.json = {
        {"experiment", "compare-institutional"},
        {"config",
         {{"synth", to_json(config.synth)},
          {"fl", to_json(config.fl)},
          {"k", config.k},
          {"seeds", config.seeds}}},
        {"results",
         {{"rows", std::move(rows_json)},
          {"cosine_similarity",
           {{"ddval", {{"iid", mc_json(out.ddval_iid)}, {"non_iid", mc_json(out.ddval_noniid)}}},
            {"one_round", {{"iid", mc_json(out.or_iid)}, {"non_iid", mc_json(out.or_noniid)}}},
            {"safe", {{"iid", mc_json(out.safe_iid)}, {"non_iid", mc_json(out.safe_noniid)}}}}},
          {"noniid_seeds_ddval_ge_or", out.noniid_seeds_ddval_ge_or},
          {"n_seeds", config.seeds.size()}}},
    };
    return out;
}

// --- scalability -------------------------------------------------------------

ScaleReport run_scale(const ScaleConfig& config) {
    if (config.ddval_points.empty()) throw std::invalid_argument("run_scale: no sizes");
    for (std::size_t i = 1; i < config.ddval_points.size(); ++i) {
        if (config.ddval_points[i] <= config.ddval_points[i - 1]) {
            throw std::invalid_argument("run_scale: point counts must be ascending");
        }
    }
    ScaleReport out;

    for (std::size_t n_points : config.ddval_points) {
        synth::SynthConfig sc;
        sc.n_clients = 1;
        sc.points_per_client = n_points;
        sc.n_test = config.ddval_test;
        sc.d_in = config.dim;
        sc.n_labels = config.n_labels;
        sc.seed = config.seed;
        const synth::GenResult data = synth::gen_synthetic(sc);

        ScaleRow row;
        row.method = "ddval";
        row.n_points = n_points;
        for (int rep = 0; rep < config.repeats; ++rep) {
            row.run_seconds.push_back(time_call([&] {
                compute_knn_svs(data.clients.front().data, data.test, config.k);
            }));
        }
        std::vector<double> sorted = row.run_seconds;
        std::sort(sorted.begin(), sorted.end());
        row.median_seconds = sorted[sorted.size() / 2];
        out.rows.push_back(std::move(row));
    }

    for (std::size_t n_clients : config.baseline_clients) {
        synth::SynthConfig sc;
        sc.n_clients = n_clients;
        sc.points_per_client = config.points_per_client;
        sc.n_test = config.ddval_test;
        sc.n_labels = config.n_labels;
        sc.seed = config.seed;
        const synth::GenResult data = synth::gen_synthetic(sc);
        fl::FlConfig fc;
        fc.max_rounds = config.baseline_rounds;
        fc.window = config.baseline_rounds + 1;  // cap dominates
        fc.seed = derive_seed(config.seed, 0xf1);
        const fl::FederatedRun run = fl::run_federated(data.clients, data.test, fc);

        ScaleRow or_row;
        or_row.method = "one_round";
        or_row.n_clients = n_clients;
        or_row.n_points = n_clients * config.points_per_client;
        for (int rep = 0; rep < config.repeats; ++rep) {
            fl::ClientSvResult r;
            or_row.run_seconds.push_back(time_call([&] {
                r = fl::or_approx_client_svs(run.initial, run.rounds, data.clients, data.test);
            }));
            or_row.utility_evaluations = r.utility_evaluations;
        }
        std::vector<double> s1 = or_row.run_seconds;
        std::sort(s1.begin(), s1.end());
        or_row.median_seconds = s1[s1.size() / 2];
        out.rows.push_back(std::move(or_row));

        std::vector<fl::ClientSplit> client_features;
        for (const fl::ClientSplit& c : data.clients) {
            fl::ClientSplit fs;
            fs.client_id = c.client_id;
            fs.data = fl::extract_deep_features(run.final_model, c.data);
            client_features.push_back(std::move(fs));
        }
        const Dataset test_features = fl::extract_deep_features(run.final_model, data.test);
        ScaleRow safe_row;
        safe_row.method = "safe";
        safe_row.n_clients = n_clients;
        safe_row.n_points = n_clients * config.points_per_client;
        for (int rep = 0; rep < config.repeats; ++rep) {
            fl::ClientSvResult r;
            safe_row.run_seconds.push_back(time_call([&] {
                r = fl::safe_approx_client_svs(client_features, test_features);
            }));
            safe_row.utility_evaluations = r.utility_evaluations;
        }
        std::vector<double> s2 = safe_row.run_seconds;
        std::sort(s2.begin(), s2.end());
        safe_row.median_seconds = s2[s2.size() / 2];
        out.rows.push_back(std::move(safe_row));
    }

    // Growth summary for the ddval rows.
    std::vector<std::pair<double, double>> loglog;  // (log n, log t)
    double prev_time = 0.0;
    for (const ScaleRow& r : out.rows) {
        if (r.method != "ddval") continue;
        loglog.emplace_back(std::log2(static_cast<double>(r.n_points)),
                            std::log2(r.median_seconds));
        if (prev_time > 0.0) out.ddval_largest_pair_ratio = r.median_seconds / prev_time;
        prev_time = r.median_seconds;
    }
    if (loglog.size() >= 2) {
        double mx = 0, my = 0;
        for (auto [x, y] : loglog) {
            mx += x;
            my += y;
        }
        mx /= static_cast<double>(loglog.size());
        my /= static_cast<double>(loglog.size());
        double num = 0, den = 0;
        for (auto [x, y] : loglog) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        out.ddval_growth_exponent = num / den;
    }

    nlohmann::json rows_json = nlohmann::json::array();
    out.csv = "method,n_points,n_clients,median_seconds,utility_evaluations,raw_seconds\n";
    for (const ScaleRow& r : out.rows) {
        rows_json.push_back({{"method", r.method},
                             {"n_points", r.n_points},
                             {"n_clients", r.n_clients},
                             {"run_seconds", r.run_seconds},
                             {"median_seconds", r.median_seconds},
                             {"utility_evaluations", r.utility_evaluations}});
        std::string raw;
        for (double v : r.run_seconds) {
            if (!raw.empty()) raw += ';';
            raw += fmt_double(v);
        }
        out.csv += r.method + ',' + std::to_string(r.n_points) + ',' +
                   std::to_string(r.n_clients) + ',' + fmt_double(r.median_seconds) + ',' +
                   std::to_string(r.utility_evaluations) + ',' + raw + '\n';
    }
    out.json = {
        {"experiment", "scale"},
        {"config",
         {{"ddval_points", config.ddval_points},
          {"ddval_test", config.ddval_test},
          {"dim", config.dim},
          {"n_labels", config.n_labels},
          {"k", config.k},
          {"repeats", config.repeats},
          {"baseline_clients", config.baseline_clients},
          {"points_per_client", config.points_per_client},
          {"baseline_rounds", config.baseline_rounds},
          {"seed", config.seed}}},
        {"timings",
         {{"rows", std::move(rows_json)},
          {"ddval_largest_pair_ratio", out.ddval_largest_pair_ratio},
          {"ddval_growth_exponent", out.ddval_growth_exponent}}},
    };
    return out;
}

// --- ledger demo --------------------------------------------------------------

LedgerDemoConfig LedgerDemoConfig::defaults() {
    LedgerDemoConfig cfg;
    cfg.session.n_peers = 3;
    cfg.session.synth.points_per_client = 600;
    cfg.session.synth.n_test = 200;
    cfg.session.fl.window = 5;
    cfg.session.fund = 1'000'000;
    return cfg;
}

LedgerDemoReport run_ledger_demo(const LedgerDemoConfig& config) {
    LedgerDemoReport out;
    out.session = session::run_swarm_session(config.session);
    out.trace_jsonl = session::trace_to_jsonl(out.session.trace);

    const session::SessionResult& s = out.session;
    std::int64_t paid = 0;
    std::int64_t refunded = 0;
    nlohmann::json transfers = nlohmann::json::array();
    for (const ledger::Transfer& t : s.settlement) {
        transfers.push_back({{"to", t.to}, {"amount", t.amount}, {"is_refund", t.is_refund}});
        (t.is_refund ? refunded : paid) += t.amount;
    }

    const int n_inst = static_cast<int>(config.session.n_peers);
    nlohmann::json gas = {
        {"gas_price_gwei", config.gas_price_gwei},
        {"eth_usd", config.eth_usd},
        {"deployment",
         {{"gas", ledger::deployment_gas(n_inst)},
          {"usd", ledger::estimate_gas_cost(ledger::deployment_gas(n_inst),
                                            config.gas_price_gwei, config.eth_usd)}}},
        {"fund",
         {{"gas", ledger::kGasFund},
          {"usd",
           ledger::estimate_gas_cost(ledger::kGasFund, config.gas_price_gwei, config.eth_usd)}}},
        {"report_per_institution",
         {{"gas", ledger::kGasReport},
          {"usd",
           ledger::estimate_gas_cost(ledger::kGasReport, config.gas_price_gwei, config.eth_usd)}}},
        {"payout",
         {{"gas", ledger::kGasPayout},
          {"usd",
           ledger::estimate_gas_cost(ledger::kGasPayout, config.gas_price_gwei, config.eth_usd)}}},
    };

    nlohmann::json contribution_vectors = nlohmann::json::array();
    for (const auto& v : s.peer_contribution_vectors) contribution_vectors.push_back(v);

    out.json = {
        {"experiment", "ledger-demo"},
        {"config",
         {{"n_peers", config.session.n_peers},
          {"synth", to_json(config.session.synth)},
          {"fl", to_json(config.session.fl)},
          {"k", config.session.k},
          {"fund", config.session.fund},
          {"timeout_ms", config.session.timeout_ms},
          {"gas_price_gwei", config.gas_price_gwei},
          {"eth_usd", config.eth_usd}}},
        {"results",
         {{"completed", s.completed},
          {"timed_out", s.timed_out},
          {"diverged", s.diverged},
          {"failure", s.failure},
          {"final_phase", std::string(ledger::phase_name(s.final_state.swarm.phase))},
          {"fund", s.final_state.token.total_fund},
          {"transfers", std::move(transfers)},
          {"total_paid", paid},
          {"total_refunded", refunded},
          {"conservation_exact",
           paid + refunded == s.final_state.token.total_fund &&
               ledger::conserves_tokens(s.final_state.token)},
          {"peer_contribution_vectors", std::move(contribution_vectors)},
          {"reports_identical", !s.diverged},
          {"gas", std::move(gas)}}},
        {"timings",
         {{"training_seconds", s.training_seconds},
          {"overhead_seconds", s.overhead_seconds},
          {"phase_seconds", s.phase_seconds}}},
    };
    return out;
}

// --- schema validation ----------------------------------------------------------

namespace {

std::string type_of(const nlohmann::json& v) {
    if (v.is_object()) return "object";
    if (v.is_array()) return "array";
    if (v.is_string()) return "string";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
    if (v.is_number()) return "number";
    return "null";
}

std::string validate_node(const nlohmann::json& schema, const nlohmann::json& doc,
                          const std::string& path) {
    if (schema.contains("type")) {
        const std::string want = schema.at("type");
        const std::string got = type_of(doc);
        const bool ok = want == got || (want == "number" && got == "integer");
        if (!ok) return path + ": expected " + want + ", got " + got;
    }
    if (schema.contains("required")) {
        for (const auto& key : schema.at("required")) {
            if (!doc.contains(key.get<std::string>())) {
                return path + ": missing required key '" + key.get<std::string>() + "'";
            }
        }
    }
    if (schema.contains("properties") && doc.is_object()) {
        for (const auto& [key, sub] : schema.at("properties").items()) {
            if (!doc.contains(key)) continue;
            const std::string err = validate_node(sub, doc.at(key), path + "/" + key);
            if (!err.empty()) return err;
        }
    }
    if (schema.contains("items") && doc.is_array()) {
        std::size_t i = 0;
        for (const auto& item : doc) {
            const std::string err =
                validate_node(schema.at("items"), item, path + "[" + std::to_string(i) + "]");
            if (!err.empty()) return err;
            ++i;
        }
    }
    return "";
}

}  // namespace

std::string validate_schema(const nlohmann::json& schema, const nlohmann::json& doc) {
    return validate_node(schema, doc, "$");
}

}  // namespace ddval::exp
