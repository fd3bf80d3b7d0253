#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddval/session.hpp"

using namespace ddval;

namespace {

session::SessionConfig small_session(std::uint64_t seed = 3) {
    session::SessionConfig cfg;
    cfg.n_peers = 3;
    cfg.synth.points_per_client = 300;
    cfg.synth.n_test = 120;
    cfg.synth.seed = seed;
    cfg.fl.window = 3;
    cfg.fl.seed = seed;
    cfg.fund = 1'000'000;
    cfg.timeout_ms = 120'000;
    return cfg;
}

}  // namespace

TEST_CASE("blob codecs round trip") {
    const std::vector<double> delta = {1.5, -2.25, 0.0, 1e-300, 3.14159};
    const ledger::Blob b = session::encode_delta(delta, 42);
    const auto [decoded, count] = session::decode_delta(b);
    CHECK(decoded == delta);
    CHECK(count == 42);

    Dataset points;
    DataPoint p;
    p.point_id = 7;
    p.subject_id = 8;
    p.client_id = 2;
    p.flipped_labels = 3;
    p.x = {0.5, -0.5};
    p.labels = {1, 0, 1};
    points.push_back(p);
    const Dataset back = session::decode_features(session::encode_features(points));
    REQUIRE(back.size() == 1);
    CHECK(back[0].point_id == 7);
    CHECK(back[0].subject_id == 8);
    CHECK(back[0].client_id == 2);
    CHECK(back[0].flipped_labels == 3);
    CHECK(back[0].x == p.x);
    CHECK(back[0].labels == p.labels);

    ledger::Blob truncated = b;
    truncated.resize(truncated.size() - 1);
    CHECK_THROWS_AS(session::decode_delta(truncated), std::invalid_argument);
}

TEST_CASE("three-peer session completes with exact settlement") {
    const session::SessionConfig cfg = small_session();
    const session::SessionResult r = session::run_swarm_session(cfg);

    REQUIRE(r.failure == "");
    CHECK(r.completed);
    CHECK_FALSE(r.timed_out);
    CHECK_FALSE(r.diverged);
    CHECK(r.final_state.swarm.phase == ledger::Phase::Finished);

    // Conservation in integer units.
    CHECK(ledger::conserves_tokens(r.final_state.token));
    std::int64_t transferred = 0;
    for (const ledger::Transfer& t : r.settlement) transferred += t.amount;
    CHECK(transferred == cfg.fund);

    // All peers computed bitwise-identical contribution vectors.
    REQUIRE(r.peer_contribution_vectors.size() == 3);
    CHECK(r.peer_contribution_vectors[1] == r.peer_contribution_vectors[0]);
    CHECK(r.peer_contribution_vectors[2] == r.peer_contribution_vectors[0]);

    // The reported contributions on-chain match the peers' own components.
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(r.final_state.token.reported.at(0xA000 + p) ==
              r.peer_contribution_vectors[0][p]);
    }

    // Trace covers the full protocol.
    REQUIRE_FALSE(r.trace.empty());
    CHECK(r.trace.front().type == "create");
    CHECK(r.trace.back().type == "payout");
    CHECK(r.trace.back().resulting_phase == "Finished");

    // Valuation report is populated and normalized.
    CHECK(r.valuation.n_train == 3 * cfg.synth.points_per_client);
    double sum = 0.0;
    for (const auto& [id, v] : r.valuation.normalized_sv) sum += v;
    CHECK(sum == doctest::Approx(r.valuation.coalition_auroc - 0.5).epsilon(1e-9));
}

TEST_CASE("session is reproducible for a fixed seed") {
    const session::SessionConfig cfg = small_session(11);
    const session::SessionResult a = session::run_swarm_session(cfg);
    const session::SessionResult b = session::run_swarm_session(cfg);
    REQUIRE(a.failure == "");
    REQUIRE(b.failure == "");
    CHECK(a.peer_contribution_vectors == b.peer_contribution_vectors);
    CHECK(ledger::state_to_json(a.final_state) == ledger::state_to_json(b.final_state));
}

TEST_CASE("ledger overhead stays below 10% of training time") {
    session::SessionConfig cfg = small_session(5);
    cfg.synth.points_per_client = 700;
    cfg.synth.n_test = 200;
    const session::SessionResult r = session::run_swarm_session(cfg);
    REQUIRE(r.failure == "");
    CHECK(r.overhead_seconds < 0.10 * r.training_seconds);
}

TEST_CASE("a silent peer keeps the session in Setup until the timeout") {
    session::SessionConfig cfg = small_session();
    cfg.active_peers = 2;   // third institution never signals ready
    cfg.timeout_ms = 400;
    const session::SessionResult r = session::run_swarm_session(cfg);
    CHECK(r.timed_out);
    CHECK_FALSE(r.completed);
    CHECK(r.final_state.swarm.phase == ledger::Phase::Setup);
    CHECK(r.failure.find("timeout") != std::string::npos);
}

TEST_CASE("replaying the session log reproduces the final state") {
    const session::SessionConfig cfg = small_session(7);
    const session::SessionResult r = session::run_swarm_session(cfg);
    REQUIRE(r.failure == "");
    // The trace records every accepted transaction; rebuilding the same
    // transaction sequence through the pure transition function must land on
    // the same serialized state. (Peers already did this internally; here we
    // confirm the exported trace is consistent with the final state.)
    CHECK(r.trace.size() == r.final_state.swarm.rounds.size() +
                                r.final_state.swarm.feature_hashes.size() +
                                r.final_state.token.reported.size() +
                                /*create+fund+payout*/ 3 + /*ready*/ 3);
}

TEST_CASE("sessions require at least two peers") {
    session::SessionConfig cfg = small_session();
    cfg.n_peers = 1;
    CHECK_THROWS_AS(session::run_swarm_session(cfg), std::invalid_argument);
}
