#include "ddval/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

namespace ddval::ledger {

std::string hash_to_hex(const Hash256& h) {
    static const char* digits = "0123456789abcdef";
    std::string out(64, '0');
    for (std::size_t i = 0; i < h.size(); ++i) {
        out[2 * i] = digits[h[i] >> 4];
        out[2 * i + 1] = digits[h[i] & 0xf];
    }
    return out;
}

Hash256 sha256(std::span<const std::uint8_t> bytes) {
    Hash256 out{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr);
    return out;
}

std::int64_t to_fixed_point(double value) {
    return static_cast<std::int64_t>(
        std::llround(value * static_cast<double>(kFixedPointScale)));
}

Hash256 BlobStore::put(Blob blob) {
    Hash256 h = sha256(blob);
    blobs_.try_emplace(h, std::move(blob));
    return h;
}

const Blob& BlobStore::get(const Hash256& hash) const {
    auto it = blobs_.find(hash);
    if (it == blobs_.end()) {
        throw std::out_of_range("BlobStore::get: unknown hash " + hash_to_hex(hash));
    }
    return it->second;
}

bool BlobStore::contains(const Hash256& hash) const { return blobs_.count(hash) > 0; }

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Setup: return "Setup";
        case Phase::Training: return "Training";
        case Phase::Valuation: return "Valuation";
        case Phase::Finished: return "Finished";
    }
    return "?";
}

std::string_view tx_type_name(const TxPayload& payload) {
    struct Visitor {
        std::string_view operator()(const CreateTx&) const { return "create"; }
        std::string_view operator()(const SignalReadyTx&) const { return "signal_ready"; }
        std::string_view operator()(const SubmitRoundTx&) const { return "submit_round"; }
        std::string_view operator()(const SubmitFeaturesTx&) const { return "submit_features"; }
        std::string_view operator()(const ReportContributionTx&) const {
            return "report_contribution";
        }
        std::string_view operator()(const FundTx&) const { return "fund"; }
        std::string_view operator()(const PayoutTx&) const { return "payout"; }
    };
    return std::visit(Visitor{}, payload);
}

std::string_view tx_status_name(TxStatus s) {
    switch (s) {
        case TxStatus::Accepted: return "accepted";
        case TxStatus::AlreadyCreated: return "already_created";
        case TxStatus::NotCreated: return "not_created";
        case TxStatus::NotWhitelisted: return "not_whitelisted";
        case TxStatus::NotReady: return "not_ready";
        case TxStatus::WrongPhase: return "wrong_phase";
        case TxStatus::BadRound: return "bad_round";
        case TxStatus::DuplicateRound: return "duplicate_round";
        case TxStatus::DuplicateFeatures: return "duplicate_features";
        case TxStatus::DuplicateReport: return "duplicate_report";
        case TxStatus::MissingReports: return "missing_reports";
        case TxStatus::AlreadyPaid: return "already_paid";
        case TxStatus::BadAmount: return "bad_amount";
        case TxStatus::ContributionOverflow: return "contribution_overflow";
        case TxStatus::EmptyWhitelist: return "empty_whitelist";
    }
    return "?";
}

namespace {

struct ApplyVisitor {
    ContractState state;  // working copy
    Address sender;

    Applied reject(TxStatus status) && { return Applied{std::move(state), status}; }
    Applied accept() && { return Applied{std::move(state), TxStatus::Accepted}; }

    Applied operator()(const CreateTx& tx) && {
        if (state.swarm.created) return std::move(*this).reject(TxStatus::AlreadyCreated);
        if (tx.whitelist.empty()) return std::move(*this).reject(TxStatus::EmptyWhitelist);
        if (tx.window < 1) return std::move(*this).reject(TxStatus::BadRound);
        state.swarm.created = true;
        state.swarm.owner = sender;
        state.swarm.whitelist.insert(tx.whitelist.begin(), tx.whitelist.end());
        state.swarm.initial_model_hash = tx.initial_model_hash;
        state.swarm.window = tx.window;
        state.swarm.phase = Phase::Setup;
        return std::move(*this).accept();
    }

    Applied operator()(const SignalReadyTx&) && {
        if (!state.swarm.created) return std::move(*this).reject(TxStatus::NotCreated);
        if (!state.swarm.whitelist.count(sender)) {
            return std::move(*this).reject(TxStatus::NotWhitelisted);
        }
        if (state.swarm.phase != Phase::Setup) return std::move(*this).reject(TxStatus::WrongPhase);
        state.swarm.ready.insert(sender);
        if (state.swarm.ready.size() == state.swarm.whitelist.size()) {
            state.swarm.phase = Phase::Training;
        }
        return std::move(*this).accept();
    }

    Applied operator()(const SubmitRoundTx& tx) && {
        if (!state.swarm.created) return std::move(*this).reject(TxStatus::NotCreated);
        if (!state.swarm.whitelist.count(sender)) {
            return std::move(*this).reject(TxStatus::NotWhitelisted);
        }
        if (state.swarm.phase != Phase::Training) {
            return std::move(*this).reject(TxStatus::WrongPhase);
        }
        if (!state.swarm.ready.count(sender)) return std::move(*this).reject(TxStatus::NotReady);
        if (tx.round != state.swarm.current_round) {
            return std::move(*this).reject(TxStatus::BadRound);
        }
        for (const RoundEntry& e : state.swarm.rounds) {
            if (e.round == tx.round && e.sender == sender) {
                return std::move(*this).reject(TxStatus::DuplicateRound);
            }
        }
        state.swarm.rounds.push_back(
            RoundEntry{tx.round, sender, tx.gradient_hash, tx.test_result_fp});

        // Round completion: every whitelisted member has submitted. The
        // round's test result is the first submission in log order.
        std::size_t n_this_round = 0;
        std::int64_t first_result = 0;
        for (const RoundEntry& e : state.swarm.rounds) {
            if (e.round != tx.round) continue;
            if (n_this_round == 0) first_result = e.test_result_fp;
            ++n_this_round;
        }
        if (n_this_round == state.swarm.whitelist.size()) {
            ++state.swarm.completed_rounds;
            const int r = state.swarm.completed_rounds;
            if (r == 1 || first_result > state.swarm.best_result_fp) {
                state.swarm.best_result_fp = first_result;
                state.swarm.last_improvement_round = r;
            }
            if (r - state.swarm.last_improvement_round >= state.swarm.window) {
                state.swarm.phase = Phase::Valuation;
            } else {
                ++state.swarm.current_round;
            }
        }
        return std::move(*this).accept();
    }

    Applied operator()(const SubmitFeaturesTx& tx) && {
        if (!state.swarm.created) return std::move(*this).reject(TxStatus::NotCreated);
        if (!state.swarm.whitelist.count(sender)) {
            return std::move(*this).reject(TxStatus::NotWhitelisted);
        }
        if (state.swarm.phase != Phase::Valuation) {
            return std::move(*this).reject(TxStatus::WrongPhase);
        }
        if (state.swarm.feature_hashes.count(sender)) {
            return std::move(*this).reject(TxStatus::DuplicateFeatures);
        }
        state.swarm.feature_hashes.emplace(sender, tx.features_hash);
        return std::move(*this).accept();
    }

    Applied operator()(const ReportContributionTx& tx) && {
        if (!state.swarm.created) return std::move(*this).reject(TxStatus::NotCreated);
        if (!state.swarm.whitelist.count(sender)) {
            return std::move(*this).reject(TxStatus::NotWhitelisted);
        }
        if (state.swarm.phase != Phase::Valuation) {
            return std::move(*this).reject(TxStatus::WrongPhase);
        }
        if (state.token.reported.count(sender)) {
            return std::move(*this).reject(TxStatus::DuplicateReport);
        }
        if (tx.contribution_fp < 0 || tx.contribution_fp > kUtilityCapFp) {
            return std::move(*this).reject(TxStatus::ContributionOverflow);
        }
        std::int64_t total = tx.contribution_fp;
        for (const auto& [addr, c] : state.token.reported) total += c;
        if (total > kUtilityCapFp) {
            return std::move(*this).reject(TxStatus::ContributionOverflow);
        }
        state.token.reported.emplace(sender, tx.contribution_fp);
        return std::move(*this).accept();
    }

    Applied operator()(const FundTx& tx) && {
        if (tx.amount <= 0) return std::move(*this).reject(TxStatus::BadAmount);
        if (state.token.paid_out) return std::move(*this).reject(TxStatus::AlreadyPaid);
        state.token.depositors[sender] += tx.amount;
        state.token.total_fund += tx.amount;
        return std::move(*this).accept();
    }

    Applied operator()(const PayoutTx&) && {
        if (!state.swarm.created) return std::move(*this).reject(TxStatus::NotCreated);
        if (state.token.paid_out) return std::move(*this).reject(TxStatus::AlreadyPaid);
        if (state.swarm.phase != Phase::Valuation) {
            return std::move(*this).reject(TxStatus::WrongPhase);
        }
        for (Address a : state.swarm.whitelist) {
            if (!state.token.reported.count(a)) {
                return std::move(*this).reject(TxStatus::MissingReports);
            }
        }
        const std::vector<Transfer> transfers =
            settle_payout(state.token.reported, state.token.depositors, state.token.total_fund);
        for (const Transfer& t : transfers) {
            state.token.balances[t.to] += t.amount;
        }
        state.token.paid_out = true;
        state.swarm.phase = Phase::Finished;
        return std::move(*this).accept();
    }
};

}  // namespace

Applied apply_tx(const ContractState& state, const Transaction& tx) {
    return std::visit(ApplyVisitor{state, tx.sender}, tx.payload);
}

ContractState replay(std::span<const Transaction> log, std::vector<TxStatus>* statuses) {
    ContractState state;
    for (const Transaction& tx : log) {
        Applied a = apply_tx(state, tx);
        if (statuses) statuses->push_back(a.status);
        if (a.status == TxStatus::Accepted) state = std::move(a.state);
    }
    return state;
}

std::vector<Transfer> settle_payout(const std::map<Address, std::int64_t>& contributions_fp,
                                    const std::map<Address, std::int64_t>& deposits,
                                    std::int64_t fund) {
    if (fund < 0) throw std::invalid_argument("settle_payout: negative fund");
    std::int64_t contribution_sum = 0;
    for (const auto& [addr, c] : contributions_fp) {
        contribution_sum += std::max<std::int64_t>(0, c);
    }
    if (contribution_sum > kUtilityCapFp) {
        throw std::invalid_argument("settle_payout: contributions exceed the utility cap");
    }

    std::vector<Transfer> transfers;
    std::int64_t paid = 0;
    for (const auto& [addr, c] : contributions_fp) {
        const std::int64_t clamped = std::max<std::int64_t>(0, c);
        const std::int64_t amount = static_cast<std::int64_t>(
            static_cast<__int128>(fund) * clamped / kUtilityCapFp);
        transfers.push_back(Transfer{addr, amount, false});
        paid += amount;
    }

    // Pro-rata refund of the leftover; the division remainder goes to the
    // largest depositor (ties to the lowest address).
    const std::int64_t leftover = fund - paid;
    std::int64_t total_deposits = 0;
    for (const auto& [addr, d] : deposits) total_deposits += d;
    if (leftover > 0 && total_deposits > 0) {
        std::int64_t refunded = 0;
        Address largest = deposits.begin()->first;
        for (const auto& [addr, d] : deposits) {
            if (d > deposits.at(largest)) largest = addr;
        }
        for (const auto& [addr, d] : deposits) {
            const std::int64_t r = static_cast<std::int64_t>(
                static_cast<__int128>(leftover) * d / total_deposits);
            transfers.push_back(Transfer{addr, r, true});
            refunded += r;
        }
        const std::int64_t remainder = leftover - refunded;
        if (remainder > 0) {
            for (Transfer& t : transfers) {
                if (t.is_refund && t.to == largest) {
                    t.amount += remainder;
                    break;
                }
            }
        }
    }
    return transfers;
}

bool conserves_tokens(const TokenContractState& token) {
    std::int64_t deposits = 0;
    for (const auto& [addr, d] : token.depositors) deposits += d;
    std::int64_t balances = 0;
    for (const auto& [addr, b] : token.balances) balances += b;
    const std::int64_t undistributed = token.paid_out ? 0 : token.total_fund;
    return balances + undistributed == deposits;
}

std::string state_to_json(const ContractState& state) {
    nlohmann::json swarm;
    swarm["created"] = state.swarm.created;
    swarm["owner"] = state.swarm.owner;
    swarm["whitelist"] = state.swarm.whitelist;
    swarm["initial_model_hash"] = hash_to_hex(state.swarm.initial_model_hash);
    swarm["window"] = state.swarm.window;
    swarm["ready"] = state.swarm.ready;
    nlohmann::json rounds = nlohmann::json::array();
    for (const RoundEntry& e : state.swarm.rounds) {
        rounds.push_back({{"round", e.round},
                          {"sender", e.sender},
                          {"gradient_hash", hash_to_hex(e.gradient_hash)},
                          {"test_result_fp", e.test_result_fp}});
    }
    swarm["rounds"] = std::move(rounds);
    swarm["current_round"] = state.swarm.current_round;
    swarm["completed_rounds"] = state.swarm.completed_rounds;
    swarm["best_result_fp"] = state.swarm.best_result_fp;
    swarm["last_improvement_round"] = state.swarm.last_improvement_round;
    swarm["phase"] = phase_name(state.swarm.phase);
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [addr, h] : state.swarm.feature_hashes) {
        features[std::to_string(addr)] = hash_to_hex(h);
    }
    swarm["feature_hashes"] = std::move(features);

    nlohmann::json token;
    nlohmann::json depositors = nlohmann::json::object();
    for (const auto& [addr, d] : state.token.depositors) depositors[std::to_string(addr)] = d;
    token["depositors"] = std::move(depositors);
    token["total_fund"] = state.token.total_fund;
    nlohmann::json reported = nlohmann::json::object();
    for (const auto& [addr, c] : state.token.reported) reported[std::to_string(addr)] = c;
    token["reported"] = std::move(reported);
    token["paid_out"] = state.token.paid_out;
    nlohmann::json balances = nlohmann::json::object();
    for (const auto& [addr, b] : state.token.balances) balances[std::to_string(addr)] = b;
    token["balances"] = std::move(balances);

    return nlohmann::json{{"swarm", std::move(swarm)}, {"token", std::move(token)}}.dump();
}

double estimate_gas_cost(std::int64_t gas, double gas_price_gwei, double eth_usd) {
    if (gas < 0 || gas_price_gwei < 0.0 || eth_usd < 0.0) {
        throw std::invalid_argument("estimate_gas_cost: negative input");
    }
    return static_cast<double>(gas) * gas_price_gwei * 1e-9 * eth_usd;
}

std::int64_t deployment_gas(int n_institutions) {
    if (n_institutions < 1) throw std::invalid_argument("deployment_gas: need >= 1 institution");
    const int extra = std::max(0, n_institutions - 3);
    return kGasDeployBase3 + kGasPerInstitution * static_cast<std::int64_t>(extra);
}

}  // namespace ddval::ledger
