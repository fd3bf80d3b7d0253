#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ddval/experiments.hpp"

using namespace ddval;

namespace {

nlohmann::json load_schema(const std::string& name) {
    const std::string path = std::string(DDVAL_SOURCE_DIR) + "/schemas/" + name;
    std::ifstream in(path);
    REQUIRE(in);
    nlohmann::json j;
    in >> j;
    return j;
}

exp::ValueConfig tiny_value_config() {
    exp::ValueConfig cfg;
    cfg.synth.n_clients = 2;
    cfg.synth.points_per_client = 150;
    cfg.synth.n_test = 80;
    cfg.synth.flip_fractions = {0.0, 0.30};
    cfg.fl.max_rounds = 6;
    cfg.fl.window = 10;
    cfg.seeds = {1, 2};
    return cfg;
}

}  // namespace

TEST_CASE("mean and confidence interval") {
    const exp::MeanCi mc = exp::mean_ci({1.0, 2.0, 3.0, 4.0});
    CHECK(mc.mean == doctest::Approx(2.5));
    // sd = sqrt(5/3), se = sd/2, ci = 1.96 se
    CHECK(mc.ci95 == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(mc.n == 4);
    CHECK(exp::mean_ci({7.0}).ci95 == 0.0);
}

TEST_CASE("schema validator basics") {
    const nlohmann::json schema = {
        {"type", "object"},
        {"required", {"a", "b"}},
        {"properties",
         {{"a", {{"type", "number"}}},
          {"b", {{"type", "array"}, {"items", {{"type", "integer"}}}}}}}};
    CHECK(exp::validate_schema(schema, {{"a", 1.5}, {"b", {1, 2}}}) == "");
    CHECK(exp::validate_schema(schema, {{"a", 1.5}}) != "");
    CHECK(exp::validate_schema(schema, {{"a", "x"}, {"b", {1}}}) != "");
    CHECK(exp::validate_schema(schema, {{"a", 1}, {"b", {1, "x"}}}) != "");
}

TEST_CASE("value-points experiment") {
    const exp::ValueConfig cfg = tiny_value_config();
    const exp::ValueReport report = exp::run_value_points(cfg);

    SUBCASE("report validates against the published schema") {
        CHECK(exp::validate_schema(load_schema("value_report.schema.json"), report.json) == "");
    }
    SUBCASE("outputs carry the full provenance and expected layout") {
        CHECK(report.json.at("config").at("seeds").get<std::vector<std::uint64_t>>() ==
              cfg.seeds);
        CHECK(report.points_csv.rfind("point_id,client_id,subject_id", 0) == 0);
        CHECK(report.strata_csv.rfind("flips,", 0) == 0);
        CHECK(report.per_seed_flip_means.size() == cfg.seeds.size());
        // Flipped stratum exists beyond stratum 0 for the 0.30-flip client.
        CHECK(report.per_seed_flip_means.front().size() > 1);
    }
    SUBCASE("rerunning the same config reproduces the report bitwise") {
        const exp::ValueReport again = exp::run_value_points(cfg);
        CHECK(report.json.dump() == again.json.dump());
        CHECK(report.points_csv == again.points_csv);
    }
}

TEST_CASE("zero-flip config yields a single stratum") {
    exp::ValueConfig cfg = tiny_value_config();
    cfg.synth.flip_fractions = {0.0, 0.0};
    cfg.seeds = {1};
    const exp::ValueReport report = exp::run_value_points(cfg);
    CHECK(report.per_seed_flip_means.front().size() == 1);
    CHECK(report.json.at("results").at("pooled_flip_strata").size() == 1);
}

TEST_CASE("institutional comparison experiment") {
    exp::CompareConfig cfg = exp::CompareConfig::defaults();
    cfg.synth.points_per_client = 800;
    cfg.synth.n_test = 300;
    cfg.fl.max_rounds = 15;
    cfg.fl.window = 6;
    cfg.seeds = {1, 2};
    const exp::CompareReport report = exp::run_compare_institutional(cfg);

    REQUIRE(report.rows.size() == 4);  // 2 modes x 2 seeds
    for (const auto& row : report.rows) {
        CHECK(row.coalition_retrainings == 7);
        CHECK(row.canonical.size() == 3);
        for (double c : {row.cos_ddval, row.cos_or, row.cos_safe}) {
            CHECK(c >= -1.0);
            CHECK(c <= 1.0);
        }
    }
    // At desk scale both deep-feature methods track the canonical values.
    CHECK(report.ddval_iid.mean >= 0.9);
    CHECK(report.safe_iid.mean >= 0.9);
    CHECK(exp::validate_schema(load_schema("compare_report.schema.json"), report.json) == "");
    CHECK(report.csv.rfind("seed,mode,cos_ddval", 0) == 0);
}

TEST_CASE("scale experiment") {
    exp::ScaleConfig cfg;
    cfg.ddval_points = {400, 800};
    cfg.ddval_test = 50;
    cfg.repeats = 1;
    cfg.baseline_clients = {2, 3};
    cfg.points_per_client = 120;
    cfg.baseline_rounds = 3;
    const exp::ScaleReport report = exp::run_scale(cfg);

    REQUIRE(report.rows.size() == 2 + 2 * 2);
    CHECK(report.rows[0].method == "ddval");
    CHECK(report.rows[0].n_points == 400);
    CHECK(report.rows[0].run_seconds.size() == 1);  // raw times included
    std::size_t or_2 = 0, or_3 = 0;
    for (const auto& row : report.rows) {
        if (row.method == "one_round" && row.n_clients == 2) or_2 = row.utility_evaluations;
        if (row.method == "one_round" && row.n_clients == 3) or_3 = row.utility_evaluations;
    }
    CHECK(or_2 == 3);
    CHECK(or_3 == 7);  // doubles plus one per added client: 2^N - 1
    CHECK(report.ddval_largest_pair_ratio > 0.0);
    CHECK(exp::validate_schema(load_schema("scale_report.schema.json"), report.json) == "");
    CHECK(report.csv.rfind("method,n_points,n_clients", 0) == 0);
    CHECK_THROWS_AS(exp::run_scale(exp::ScaleConfig{{800, 400}}), std::invalid_argument);
}

TEST_CASE("one-round cost grows steeply with the client count") {
    // Coalition count quadruples from 4 to 6 clients; even with timer noise
    // the measured cost should comfortably exceed 1.8x.
    exp::ScaleConfig cfg;
    cfg.ddval_points = {200};
    cfg.ddval_test = 400;
    cfg.repeats = 3;
    cfg.baseline_clients = {4, 6};
    cfg.points_per_client = 150;
    cfg.baseline_rounds = 6;
    const exp::ScaleReport report = exp::run_scale(cfg);
    double t4 = 0.0, t6 = 0.0;
    std::size_t e4 = 0, e6 = 0;
    for (const auto& row : report.rows) {
        if (row.method != "one_round") continue;
        if (row.n_clients == 4) {
            t4 = row.median_seconds;
            e4 = row.utility_evaluations;
        }
        if (row.n_clients == 6) {
            t6 = row.median_seconds;
            e6 = row.utility_evaluations;
        }
    }
    CHECK(e4 == 15);
    CHECK(e6 == 63);
    CHECK(t6 >= 1.8 * t4);
}

TEST_CASE("ledger demo experiment") {
    exp::LedgerDemoConfig cfg = exp::LedgerDemoConfig::defaults();
    cfg.session.synth.points_per_client = 250;
    cfg.session.synth.n_test = 100;
    cfg.session.fl.window = 3;
    const exp::LedgerDemoReport report = exp::run_ledger_demo(cfg);

    const auto& res = report.json.at("results");
    CHECK(res.at("completed").get<bool>());
    CHECK(res.at("conservation_exact").get<bool>());
    CHECK_FALSE(res.at("diverged").get<bool>());
    CHECK(res.at("total_paid").get<std::int64_t>() +
              res.at("total_refunded").get<std::int64_t>() ==
          cfg.session.fund);
    CHECK(std::abs(res.at("gas").at("deployment").at("usd").get<double>() - 90.37) < 0.01);
    CHECK(exp::validate_schema(load_schema("ledger_demo_report.schema.json"), report.json) ==
          "");

    // Trace lines parse as JSON.
    std::size_t lines = 0;
    std::size_t start = 0;
    while (start < report.trace_jsonl.size()) {
        const std::size_t end = report.trace_jsonl.find('\n', start);
        REQUIRE(end != std::string::npos);
        const nlohmann::json line =
            nlohmann::json::parse(report.trace_jsonl.substr(start, end - start));
        CHECK(line.contains("tx_index"));
        CHECK(line.contains("sender"));
        CHECK(line.contains("type"));
        CHECK(line.contains("phase"));
        start = end + 1;
        ++lines;
    }
    CHECK(lines == report.session.trace.size());
}

TEST_CASE("config round trip") {
    synth::SynthConfig sc;
    sc.n_clients = 5;
    sc.mode = synth::Mode::NonIID;
    sc.flip_fractions = {0, 0, 0, 0, 0.1};
    const nlohmann::json j = exp::to_json(sc);
    synth::SynthConfig back;
    exp::from_json_into(j, back);
    CHECK(back.n_clients == 5);
    CHECK(back.mode == synth::Mode::NonIID);
    CHECK(back.flip_fractions == sc.flip_fractions);

    fl::FlConfig fc;
    fc.lr = 0.75;
    fc.window = 4;
    fl::FlConfig fback;
    exp::from_json_into(exp::to_json(fc), fback);
    CHECK(fback.lr == 0.75);
    CHECK(fback.window == 4);

    nlohmann::json bad = j;
    bad["mode"] = "weird";
    CHECK_THROWS_AS(exp::from_json_into(bad, back), std::invalid_argument);
}
