#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddval/fl.hpp"
#include "ddval/ledger.hpp"
#include "ddval/synth.hpp"
#include "ddval/valuation.hpp"

namespace ddval::session {

struct SessionConfig {
    std::size_t n_peers = 3;
    synth::SynthConfig synth;
    fl::FlConfig fl;
    int k = kDefaultK;
    std::int64_t fund = 1'000'000;
    int timeout_ms = 60'000;
    // Peers with index >= active_peers are whitelisted but never started
    // (fault injection for the barrier/timeout paths).
    std::size_t active_peers = static_cast<std::size_t>(-1);
};

struct TraceEntry {
    std::size_t tx_index = 0;
    ledger::Address sender = 0;
    std::string type;
    std::string payload_hash;
    std::string resulting_phase;
};

struct SessionResult {
    bool completed = false;
    bool timed_out = false;
    bool diverged = false;
    std::string failure;  // empty when completed

    ledger::ContractState final_state;
    std::vector<TraceEntry> trace;
    // Per peer: the full institutional contribution vector it computed
    // (fixed point, ascending address order). Must be identical across peers.
    std::vector<std::vector<std::int64_t>> peer_contribution_vectors;
    std::vector<ledger::Transfer> settlement;
    ValuationReport valuation;  // peer 0's report (replicas are identical)

    double training_seconds = 0.0;
    double overhead_seconds = 0.0;  // ledger + blob store + (de)serialization
    std::map<std::string, double> phase_seconds;
};

// End-to-end swarm scenario: contract deployment, readiness barrier, funded
// token contract, training rounds exchanging gradient blobs by hash, feature
// publication, replicated DDVal valuation at every peer, contribution
// reports, and payout. Peer 0 doubles as the orchestrator.
SessionResult run_swarm_session(const SessionConfig& config);

std::string trace_to_jsonl(const std::vector<TraceEntry>& trace);

// Delta / feature blob codecs (explicit little-endian layout).
ledger::Blob encode_delta(std::span<const double> delta, std::uint64_t data_count);
std::pair<std::vector<double>, std::uint64_t> decode_delta(const ledger::Blob& blob);
ledger::Blob encode_features(const Dataset& points);
Dataset decode_features(const ledger::Blob& blob);

}  // namespace ddval::session
