#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddval/experiments.hpp"

namespace fs = std::filesystem;

namespace {

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::vector<std::uint64_t> seed_override(const std::vector<std::uint64_t>& cli_seeds,
                                         const nlohmann::json& cfg,
                                         std::vector<std::uint64_t> defaults) {
    if (!cli_seeds.empty()) return cli_seeds;
    if (cfg.contains("seeds")) return cfg.at("seeds").get<std::vector<std::uint64_t>>();
    return defaults;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ddval: data point valuation for federated and swarm learning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::uint64_t> seeds;
    app.add_option("--config", config_path, "JSON config file")->capture_default_str();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", seeds, "seed list override");

    auto* value_cmd =
        app.add_subcommand("value", "per-point valuation with label-flip strata (RQ1)");
    auto* compare_cmd = app.add_subcommand(
        "compare", "institutional contributions: canonical vs DDVal/OR/SaFE (RQ2)");
    auto* scale_cmd = app.add_subcommand("scale", "valuation runtime scaling (RQ3)");
    auto* ledger_cmd =
        app.add_subcommand("ledger-demo", "end-to-end swarm session with token payout (RQ4)");
    auto* gas_cmd = app.add_subcommand("gas", "transaction cost estimate");

    std::size_t peers = 3;
    int window = 5;
    std::int64_t fund = 1'000'000;
    int timeout_ms = 120'000;
    ledger_cmd->add_option("--peers", peers, "institution count")->capture_default_str();
    ledger_cmd->add_option("--window", window, "stagnation window W")->capture_default_str();
    ledger_cmd->add_option("--fund", fund, "token fund (integer base units)")
        ->capture_default_str();
    ledger_cmd->add_option("--timeout-ms", timeout_ms, "per-wait peer timeout")
        ->capture_default_str();

    std::int64_t gas_units = ddval::ledger::kGasDeployBase3;
    double gwei = 33.0;
    double eth_usd = 1859.0;
    int institutions = 0;
    gas_cmd->add_option("--gas", gas_units, "gas units")->capture_default_str();
    gas_cmd->add_option("--gwei", gwei, "gas price in Gwei")->capture_default_str();
    gas_cmd->add_option("--ethusd", eth_usd, "ETH price in USD")->capture_default_str();
    gas_cmd->add_option("--institutions", institutions,
                        "print the full cost table for this many institutions");

    CLI11_PARSE(app, argc, argv);

    try {
        const nlohmann::json cfg = load_config(config_path);
        const fs::path out(out_dir);

        if (value_cmd->parsed()) {
            ddval::exp::ValueConfig c = ddval::exp::ValueConfig::flip_experiment_defaults();
            if (cfg.contains("synth")) ddval::exp::from_json_into(cfg.at("synth"), c.synth);
            if (cfg.contains("fl")) ddval::exp::from_json_into(cfg.at("fl"), c.fl);
            c.k = cfg.value("k", c.k);
            c.seeds = seed_override(seeds, cfg, c.seeds);
            const ddval::exp::ValueReport report = ddval::exp::run_value_points(c);
            write_file(out / "value_report.json", report.json.dump(2) + "\n");
            write_file(out / "value_points.csv", report.points_csv);
            write_file(out / "value_strata.csv", report.strata_csv);
            std::cout << "value: " << report.seeds_monotone_0_to_4 << "/" << c.seeds.size()
                      << " seeds strictly decreasing through 4 flips; reports in " << out
                      << std::endl;
            return 0;
        }
        if (compare_cmd->parsed()) {
            ddval::exp::CompareConfig c = ddval::exp::CompareConfig::defaults();
            if (cfg.contains("synth")) ddval::exp::from_json_into(cfg.at("synth"), c.synth);
            if (cfg.contains("fl")) ddval::exp::from_json_into(cfg.at("fl"), c.fl);
            c.k = cfg.value("k", c.k);
            c.seeds = seed_override(seeds, cfg, c.seeds);
            const ddval::exp::CompareReport report = ddval::exp::run_compare_institutional(c);
            write_file(out / "compare_report.json", report.json.dump(2) + "\n");
            write_file(out / "compare_seeds.csv", report.csv);
            std::cout << "compare: ddval iid " << report.ddval_iid.mean << " non-iid "
                      << report.ddval_noniid.mean << ", or non-iid " << report.or_noniid.mean
                      << ", safe non-iid " << report.safe_noniid.mean << "; reports in " << out
                      << std::endl;
            for (const auto& row : report.rows) {
                if (std::abs(row.cos_ddval) > 1.0 + 1e-12) {
                    std::cerr << "invariant violation: cosine outside [-1,1]" << std::endl;
                    return 1;
                }
            }
            return 0;
        }
        if (scale_cmd->parsed()) {
            ddval::exp::ScaleConfig c;
            if (cfg.contains("ddval_points")) {
                c.ddval_points = cfg.at("ddval_points").get<std::vector<std::size_t>>();
            }
            if (cfg.contains("baseline_clients")) {
                c.baseline_clients = cfg.at("baseline_clients").get<std::vector<std::size_t>>();
            }
            c.ddval_test = cfg.value("ddval_test", c.ddval_test);
            c.dim = cfg.value("dim", c.dim);
            c.n_labels = cfg.value("n_labels", c.n_labels);
            c.k = cfg.value("k", c.k);
            c.repeats = cfg.value("repeats", c.repeats);
            c.points_per_client = cfg.value("points_per_client", c.points_per_client);
            c.baseline_rounds = cfg.value("baseline_rounds", c.baseline_rounds);
            if (!seeds.empty()) c.seed = seeds.front();
            const ddval::exp::ScaleReport report = ddval::exp::run_scale(c);
            write_file(out / "scale_report.json", report.json.dump(2) + "\n");
            write_file(out / "scale_rows.csv", report.csv);
            std::cout << "scale: ddval largest-pair ratio " << report.ddval_largest_pair_ratio
                      << ", growth exponent " << report.ddval_growth_exponent << "; reports in "
                      << out << std::endl;
            return 0;
        }
        if (ledger_cmd->parsed()) {
            ddval::exp::LedgerDemoConfig c = ddval::exp::LedgerDemoConfig::defaults();
            if (cfg.contains("synth")) {
                ddval::exp::from_json_into(cfg.at("synth"), c.session.synth);
            }
            if (cfg.contains("fl")) ddval::exp::from_json_into(cfg.at("fl"), c.session.fl);
            c.session.n_peers = peers;
            c.session.fl.window = window;
            c.session.fund = fund;
            c.session.timeout_ms = timeout_ms;
            c.session.k = cfg.value("k", c.session.k);
            if (!seeds.empty()) {
                c.session.synth.seed = seeds.front();
                c.session.fl.seed = seeds.front();
            }
            c.gas_price_gwei = cfg.value("gas_price_gwei", c.gas_price_gwei);
            c.eth_usd = cfg.value("eth_usd", c.eth_usd);
            const ddval::exp::LedgerDemoReport report = ddval::exp::run_ledger_demo(c);
            write_file(out / "ledger_demo_report.json", report.json.dump(2) + "\n");
            write_file(out / "ledger_trace.jsonl", report.trace_jsonl);
            const auto& res = report.json.at("results");
            std::cout << "ledger-demo: phase " << res.at("final_phase").get<std::string>()
                      << ", paid " << res.at("total_paid") << ", refunded "
                      << res.at("total_refunded") << " of fund " << res.at("fund")
                      << "; reports in " << out << std::endl;
            if (!res.at("completed").get<bool>() || !res.at("conservation_exact").get<bool>() ||
                res.at("diverged").get<bool>()) {
                std::cerr << "invariant violation: "
                          << (report.session.failure.empty() ? "conservation/divergence check"
                                                             : report.session.failure)
                          << std::endl;
                return 1;
            }
            return 0;
        }
        if (gas_cmd->parsed()) {
            if (institutions > 0) {
                const std::int64_t deploy = ddval::ledger::deployment_gas(institutions);
                const double deploy_usd = ddval::ledger::estimate_gas_cost(deploy, gwei, eth_usd);
                const double fund_usd =
                    ddval::ledger::estimate_gas_cost(ddval::ledger::kGasFund, gwei, eth_usd);
                const double report_usd =
                    ddval::ledger::estimate_gas_cost(ddval::ledger::kGasReport, gwei, eth_usd);
                const double payout_usd =
                    ddval::ledger::estimate_gas_cost(ddval::ledger::kGasPayout, gwei, eth_usd);
                nlohmann::json table = {
                    {"institutions", institutions},
                    {"gas_price_gwei", gwei},
                    {"eth_usd", eth_usd},
                    {"deployment", {{"gas", deploy}, {"usd", deploy_usd}}},
                    {"fund", {{"gas", ddval::ledger::kGasFund}, {"usd", fund_usd}}},
                    {"report_per_institution",
                     {{"gas", ddval::ledger::kGasReport}, {"usd", report_usd}}},
                    {"payout", {{"gas", ddval::ledger::kGasPayout}, {"usd", payout_usd}}},
                    {"total_usd", deploy_usd + fund_usd + payout_usd +
                                      institutions * report_usd},
                };
                std::cout << table.dump(2) << std::endl;
            } else {
                std::cout << ddval::ledger::estimate_gas_cost(gas_units, gwei, eth_usd)
                          << std::endl;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
