#include "ddval/session.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <ctime>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "ddval/rng.hpp"

#include <nlohmann/json.hpp>

namespace ddval::session {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// CPU time of the calling thread; unlike wall time it is not inflated by
// preemption when peers share cores.
double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

// Nanosecond accumulator shared by the instrumentation below.
class TimeBucket {
public:
    void add(double seconds) {
        ns_.fetch_add(static_cast<std::int64_t>(seconds * 1e9), std::memory_order_relaxed);
    }
    double seconds() const {
        return static_cast<double>(ns_.load(std::memory_order_relaxed)) * 1e-9;
    }

private:
    std::atomic<std::int64_t> ns_{0};
};

class Timed {
public:
    explicit Timed(TimeBucket& bucket) : bucket_(bucket), t0_(thread_cpu_seconds()) {}
    ~Timed() { bucket_.add(thread_cpu_seconds() - t0_); }

private:
    TimeBucket& bucket_;
    double t0_;
};

void put_u64(ledger::Blob& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const ledger::Blob& b, std::size_t& pos) {
    if (pos + 8 > b.size()) throw std::invalid_argument("blob: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return v;
}

void put_f64(ledger::Blob& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(b, bits);
}

double get_f64(const ledger::Blob& b, std::size_t& pos) {
    const std::uint64_t bits = get_u64(b, pos);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

// Serialized transaction log with a canonical total order; peers submit
// transactions here and wait on state predicates.
class Chain {
public:
    explicit Chain(TimeBucket& overhead) : overhead_(overhead) {}

    ledger::TxStatus submit(const ledger::Transaction& tx, const std::string& payload_hash) {
        Timed timer(overhead_);
        std::unique_lock lock(mu_);
        ledger::Applied a = ledger::apply_tx(state_, tx);
        if (a.status == ledger::TxStatus::Accepted) {
            log_.push_back(tx);
            state_ = std::move(a.state);
            trace_.push_back(TraceEntry{log_.size() - 1, tx.sender,
                                        std::string(ledger::tx_type_name(tx.payload)),
                                        payload_hash,
                                        std::string(ledger::phase_name(state_.swarm.phase))});
            cv_.notify_all();
        }
        return a.status;
    }

    // Waits until pred(state) or timeout; false on timeout.
    template <typename Pred>
    bool wait_state(Pred pred, int timeout_ms) {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                            [&] { return pred(state_); });
    }

    ledger::ContractState snapshot() const {
        Timed timer(overhead_);
        std::lock_guard lock(mu_);
        return state_;
    }

    std::vector<ledger::Transaction> log_copy() const {
        std::lock_guard lock(mu_);
        return log_;
    }

    std::vector<TraceEntry> trace_copy() const {
        std::lock_guard lock(mu_);
        return trace_;
    }

private:
    TimeBucket& overhead_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::vector<ledger::Transaction> log_;
    ledger::ContractState state_;
    std::vector<TraceEntry> trace_;
};

class SharedStore {
public:
    explicit SharedStore(TimeBucket& overhead) : overhead_(overhead) {}

    ledger::Hash256 put(ledger::Blob blob) {
        Timed timer(overhead_);
        std::lock_guard lock(mu_);
        return store_.put(std::move(blob));
    }

    ledger::Blob get(const ledger::Hash256& h) const {
        Timed timer(overhead_);
        std::lock_guard lock(mu_);
        return store_.get(h);
    }

private:
    TimeBucket& overhead_;
    mutable std::mutex mu_;
    ledger::BlobStore store_;
};

constexpr ledger::Address kBaseAddress = 0xA000;

struct PeerSlot {
    std::vector<std::int64_t> contributions_fp;
    std::string replica_json;
    ValuationReport report;
    bool timed_out = false;
    std::string failure;
};

}  // namespace

ledger::Blob encode_delta(std::span<const double> delta, std::uint64_t data_count) {
    ledger::Blob b;
    b.reserve(16 + 8 * delta.size());
    put_u64(b, data_count);
    put_u64(b, delta.size());
    for (double v : delta) put_f64(b, v);
    return b;
}

std::pair<std::vector<double>, std::uint64_t> decode_delta(const ledger::Blob& blob) {
    std::size_t pos = 0;
    const std::uint64_t count = get_u64(blob, pos);
    const std::uint64_t n = get_u64(blob, pos);
    std::vector<double> delta(n);
    for (std::uint64_t i = 0; i < n; ++i) delta[i] = get_f64(blob, pos);
    return {std::move(delta), count};
}

ledger::Blob encode_features(const Dataset& points) {
    ledger::Blob b;
    put_u64(b, points.size());
    put_u64(b, points.empty() ? 0 : points.front().x.size());
    put_u64(b, points.empty() ? 0 : points.front().labels.size());
    for (const DataPoint& p : points) {
        put_u64(b, p.point_id);
        put_u64(b, p.subject_id);
        put_u64(b, p.client_id);
        put_u64(b, p.flipped_labels);
        for (double v : p.x) put_f64(b, v);
        for (std::uint8_t y : p.labels) b.push_back(y);
    }
    return b;
}

Dataset decode_features(const ledger::Blob& blob) {
    std::size_t pos = 0;
    const std::uint64_t n = get_u64(blob, pos);
    const std::uint64_t d = get_u64(blob, pos);
    const std::uint64_t l = get_u64(blob, pos);
    Dataset out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        DataPoint p;
        p.point_id = get_u64(blob, pos);
        p.subject_id = get_u64(blob, pos);
        p.client_id = static_cast<std::uint32_t>(get_u64(blob, pos));
        p.flipped_labels = static_cast<std::uint8_t>(get_u64(blob, pos));
        p.x.resize(d);
        for (std::uint64_t j = 0; j < d; ++j) p.x[j] = get_f64(blob, pos);
        if (pos + l > blob.size()) throw std::invalid_argument("blob: truncated labels");
        p.labels.assign(blob.begin() + pos, blob.begin() + pos + l);
        pos += l;
        out.push_back(std::move(p));
    }
    return out;
}

std::string trace_to_jsonl(const std::vector<TraceEntry>& trace) {
    std::string out;
    for (const TraceEntry& e : trace) {
        nlohmann::json line = {{"tx_index", e.tx_index},
                               {"sender", e.sender},
                               {"type", e.type},
                               {"payload_hash", e.payload_hash},
                               {"phase", e.resulting_phase}};
        out += line.dump() + '\n';
    }
    return out;
}

SessionResult run_swarm_session(const SessionConfig& config) {
    if (config.n_peers < 2) {
        throw std::invalid_argument("run_swarm_session: need at least 2 peers");
    }

    synth::SynthConfig synth_cfg = config.synth;
    synth_cfg.n_clients = config.n_peers;
    const synth::GenResult data = synth::gen_synthetic(synth_cfg);

    TimeBucket overhead;
    TimeBucket training;
    Chain chain(overhead);
    SharedStore store(overhead);

    const std::size_t n = config.n_peers;
    const std::size_t active = std::min(config.active_peers, n);
    std::vector<ledger::Address> addresses;
    for (std::size_t p = 0; p < n; ++p) addresses.push_back(kBaseAddress + p);

    const ModelShape shape{data.clients.front().data.front().x.size(), config.fl.d_h,
                           data.clients.front().data.front().labels.size()};
    const LinearModel initial = LinearModel::init(shape, config.fl.seed);

    std::vector<PeerSlot> slots(n);
    std::map<std::string, double> phase_seconds;
    std::mutex phase_mu;
    auto note_phase = [&](const std::string& name, double secs) {
        std::lock_guard lock(phase_mu);
        auto [it, inserted] = phase_seconds.try_emplace(name, 0.0);
        if (secs > it->second) it->second = secs;  // wall time of the slowest peer
    };

    auto peer_main = [&](std::size_t p) {
        PeerSlot& slot = slots[p];
        const ledger::Address me = addresses[p];
        const fl::ClientSplit& mine = data.clients[p];
        // Submissions go out in ascending address order within each protocol
        // step, so the transaction log (and with it every session output) is
        // identical from run to run. Computation still overlaps freely.
        auto lower_done = [&](const std::function<bool(const ledger::ContractState&,
                                                       ledger::Address)>& done) {
            return [&, done](const ledger::ContractState& s) {
                for (std::size_t q = 0; q < p; ++q) {
                    if (!done(s, addresses[q])) return false;
                }
                return true;
            };
        };
        try {
            // --- setup ---------------------------------------------------
            const auto setup_t0 = Clock::now();
            if (p == 0) {
                ledger::Blob model_blob = encode_delta(initial.params(), 0);
                const ledger::Hash256 mh = store.put(std::move(model_blob));
                ledger::CreateTx create{addresses, mh, config.fl.window};
                chain.submit({me, create}, ledger::hash_to_hex(mh));
                chain.submit({me, ledger::FundTx{config.fund}}, "");
            }
            if (!chain.wait_state(
                    lower_done([](const ledger::ContractState& s, ledger::Address a) {
                        return s.swarm.created && s.swarm.ready.count(a) > 0;
                    }),
                    config.timeout_ms) ||
                !chain.wait_state([](const ledger::ContractState& s) { return s.swarm.created; },
                                  config.timeout_ms)) {
                slot.timed_out = true;
                slot.failure = "timeout waiting for contract creation";
                return;
            }
            chain.submit({me, ledger::SignalReadyTx{}}, "");
            if (!chain.wait_state(
                    [](const ledger::ContractState& s) {
                        return s.swarm.phase == ledger::Phase::Training;
                    },
                    config.timeout_ms)) {
                slot.timed_out = true;
                slot.failure = "timeout waiting for readiness barrier";
                return;
            }
            note_phase("setup", seconds_since(setup_t0));

            // --- training ------------------------------------------------
            const auto training_t0 = Clock::now();
            LinearModel model = [&] {
                // Fetch the published initial model rather than trusting the
                // local construction.
                auto [params, ignored] =
                    decode_delta(store.get(chain.snapshot().swarm.initial_model_hash));
                return LinearModel(shape, std::move(params));
            }();
            double auc;
            {
                Timed timer(training);
                auc = fl::validate(model, data.test);
            }
            for (int r = 1;; ++r) {
                std::vector<double> delta;
                {
                    Timed timer(training);
                    delta = fl::train_local(
                        model, mine.data, config.fl.epochs, config.fl.lr, config.fl.batch_size,
                        derive_seed(config.fl.seed, static_cast<std::uint64_t>(r),
                                    mine.client_id));
                }
                const ledger::Hash256 gh = store.put(encode_delta(delta, mine.data.size()));
                if (!chain.wait_state(
                        lower_done([r](const ledger::ContractState& s, ledger::Address a) {
                            for (const ledger::RoundEntry& e : s.swarm.rounds) {
                                if (e.round == r && e.sender == a) return true;
                            }
                            return false;
                        }),
                        config.timeout_ms)) {
                    slot.timed_out = true;
                    slot.failure = "timeout waiting for submission slot in round " +
                                   std::to_string(r);
                    return;
                }
                chain.submit({me, ledger::SubmitRoundTx{r, gh, ledger::to_fixed_point(auc)}},
                             ledger::hash_to_hex(gh));
                if (!chain.wait_state(
                        [r](const ledger::ContractState& s) {
                            return s.swarm.completed_rounds >= r;
                        },
                        config.timeout_ms)) {
                    slot.timed_out = true;
                    slot.failure = "timeout waiting for round " + std::to_string(r);
                    return;
                }
                const ledger::ContractState snap = chain.snapshot();
                // Aggregate this round's deltas in ascending address order.
                std::vector<std::vector<double>> deltas;
                std::vector<double> weights;
                for (const ledger::Address a : addresses) {
                    for (const ledger::RoundEntry& e : snap.swarm.rounds) {
                        if (e.round != r || e.sender != a) continue;
                        auto [d, count] = decode_delta(store.get(e.gradient_hash));
                        deltas.push_back(std::move(d));
                        weights.push_back(static_cast<double>(count));
                    }
                }
                {
                    Timed timer(training);
                    model = fl::fed_avg_round(model, deltas, weights);
                    auc = fl::validate(model, data.test);
                }
                if (snap.swarm.phase == ledger::Phase::Valuation) break;
            }
            note_phase("training", seconds_since(training_t0));

            // --- valuation -----------------------------------------------
            const auto valuation_t0 = Clock::now();
            Dataset my_features;
            {
                Timed timer(training);
                my_features = fl::extract_deep_features(model, mine.data);
            }
            const ledger::Hash256 fh = store.put(encode_features(my_features));
            if (!chain.wait_state(
                    lower_done([](const ledger::ContractState& s, ledger::Address a) {
                        return s.swarm.feature_hashes.count(a) > 0;
                    }),
                    config.timeout_ms)) {
                slot.timed_out = true;
                slot.failure = "timeout waiting for feature submission slot";
                return;
            }
            chain.submit({me, ledger::SubmitFeaturesTx{fh}}, ledger::hash_to_hex(fh));
            if (!chain.wait_state(
                    [n](const ledger::ContractState& s) {
                        return s.swarm.feature_hashes.size() == n;
                    },
                    config.timeout_ms)) {
                slot.timed_out = true;
                slot.failure = "timeout waiting for feature publication";
                return;
            }
            const ledger::ContractState snap = chain.snapshot();
            Dataset train_features;
            for (const ledger::Address a : addresses) {
                Dataset part = decode_features(store.get(snap.swarm.feature_hashes.at(a)));
                train_features.insert(train_features.end(),
                                      std::make_move_iterator(part.begin()),
                                      std::make_move_iterator(part.end()));
            }
            {
                Timed timer(training);
                const Dataset test_features = fl::extract_deep_features(model, data.test);
                slot.report =
                    value_points(train_features, test_features, config.k, auc);
            }
            // Own institutional contribution, clamped and fixed-point.
            slot.contributions_fp.reserve(n);
            for (std::size_t q = 0; q < n; ++q) {
                const double v =
                    slot.report.group_sv.at("client_" + std::to_string(data.clients[q].client_id));
                slot.contributions_fp.push_back(
                    std::max<std::int64_t>(0, ledger::to_fixed_point(v)));
            }
            if (!chain.wait_state(
                    lower_done([](const ledger::ContractState& s, ledger::Address a) {
                        return s.token.reported.count(a) > 0;
                    }),
                    config.timeout_ms)) {
                slot.timed_out = true;
                slot.failure = "timeout waiting for report slot";
                return;
            }
            chain.submit({me, ledger::ReportContributionTx{slot.contributions_fp[p]}}, "");
            note_phase("valuation", seconds_since(valuation_t0));

            // --- settlement ----------------------------------------------
            const auto settle_t0 = Clock::now();
            if (p == 0) {
                if (!chain.wait_state(
                        [n](const ledger::ContractState& s) { return s.token.reported.size() == n; },
                        config.timeout_ms)) {
                    slot.timed_out = true;
                    slot.failure = "timeout waiting for contribution reports";
                    return;
                }
                chain.submit({me, ledger::PayoutTx{}}, "");
            }
            if (!chain.wait_state(
                    [](const ledger::ContractState& s) {
                        return s.swarm.phase == ledger::Phase::Finished;
                    },
                    config.timeout_ms)) {
                slot.timed_out = true;
                slot.failure = "timeout waiting for payout";
                return;
            }
            // Independent replica: replay the full log from scratch.
            slot.replica_json = ledger::state_to_json(ledger::replay(chain.log_copy()));
            note_phase("settlement", seconds_since(settle_t0));
        } catch (const std::exception& e) {
            slot.failure = std::string("peer exception: ") + e.what();
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t p = 0; p < active; ++p) {
        threads.emplace_back(peer_main, p);
    }
    for (auto& t : threads) t.join();

    SessionResult result;
    result.final_state = chain.snapshot();
    result.trace = chain.trace_copy();
    result.training_seconds = training.seconds();
    result.overhead_seconds = overhead.seconds();
    result.phase_seconds = phase_seconds;

    for (std::size_t p = 0; p < active; ++p) {
        if (slots[p].timed_out) {
            result.timed_out = true;
            result.failure = "peer " + std::to_string(p) + ": " + slots[p].failure;
        } else if (!slots[p].failure.empty() && result.failure.empty()) {
            result.failure = "peer " + std::to_string(p) + ": " + slots[p].failure;
        }
    }
    if (result.timed_out || !result.failure.empty()) return result;

    for (std::size_t p = 0; p < active; ++p) {
        result.peer_contribution_vectors.push_back(slots[p].contributions_fp);
    }
    for (std::size_t p = 1; p < active; ++p) {
        if (slots[p].contributions_fp != slots[0].contributions_fp ||
            slots[p].replica_json != slots[0].replica_json) {
            result.diverged = true;
            result.failure = "replica divergence at peer " + std::to_string(p);
            return result;
        }
    }
    result.valuation = slots[0].report;
    result.settlement = ledger::settle_payout(result.final_state.token.reported,
                                              result.final_state.token.depositors,
                                              result.final_state.token.total_fund);
    result.completed = result.final_state.swarm.phase == ledger::Phase::Finished;
    return result;
}

}  // namespace ddval::session
