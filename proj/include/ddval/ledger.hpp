#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ddval::ledger {

// Fixed-point scale for on-chain real values (test results, contributions).
constexpr std::int64_t kFixedPointScale = 1'000'000'000;
// Maximum effective utility (AUROC - 0.5) in fixed point; a perfect model
// exhausts the fund.
constexpr std::int64_t kUtilityCapFp = kFixedPointScale / 2;

using Address = std::uint64_t;
using Hash256 = std::array<std::uint8_t, 32>;
using Blob = std::vector<std::uint8_t>;

std::string hash_to_hex(const Hash256& h);
Hash256 sha256(std::span<const std::uint8_t> bytes);

std::int64_t to_fixed_point(double value);

// Content-addressed in-process blob store (the file-exchange network role).
class BlobStore {
public:
    // Idempotent; returns the content hash.
    Hash256 put(Blob blob);
    // Throws std::out_of_range for unknown hashes.
    const Blob& get(const Hash256& hash) const;
    bool contains(const Hash256& hash) const;
    std::size_t size() const { return blobs_.size(); }

private:
    std::map<Hash256, Blob> blobs_;
};

enum class Phase { Setup, Training, Valuation, Finished };
std::string_view phase_name(Phase p);

// Transaction payloads.
struct CreateTx {
    std::vector<Address> whitelist;
    Hash256 initial_model_hash{};
    int window = 10;
};
struct SignalReadyTx {};
struct SubmitRoundTx {
    int round = 0;  // 1-based
    Hash256 gradient_hash{};
    std::int64_t test_result_fp = 0;
};
struct SubmitFeaturesTx {
    Hash256 features_hash{};
};
struct ReportContributionTx {
    std::int64_t contribution_fp = 0;
};
struct FundTx {
    std::int64_t amount = 0;
};
struct PayoutTx {};

using TxPayload = std::variant<CreateTx, SignalReadyTx, SubmitRoundTx, SubmitFeaturesTx,
                               ReportContributionTx, FundTx, PayoutTx>;

struct Transaction {
    Address sender = 0;
    TxPayload payload;
};

std::string_view tx_type_name(const TxPayload& payload);

enum class TxStatus {
    Accepted,
    AlreadyCreated,
    NotCreated,
    NotWhitelisted,
    NotReady,
    WrongPhase,
    BadRound,
    DuplicateRound,
    DuplicateFeatures,
    DuplicateReport,
    MissingReports,
    AlreadyPaid,
    BadAmount,
    ContributionOverflow,
    EmptyWhitelist,
};
std::string_view tx_status_name(TxStatus s);

struct RoundEntry {
    int round = 0;
    Address sender = 0;
    Hash256 gradient_hash{};
    std::int64_t test_result_fp = 0;
};

// Swarm-learning contract: whitelist, readiness barrier, per-round gradient
// hashes and test results, stagnation-window phase change, feature hashes.
struct SwarmContractState {
    bool created = false;
    Address owner = 0;
    std::set<Address> whitelist;
    Hash256 initial_model_hash{};
    int window = 10;
    std::set<Address> ready;
    std::vector<RoundEntry> rounds;  // append-only
    int current_round = 1;
    int completed_rounds = 0;
    std::int64_t best_result_fp = 0;
    int last_improvement_round = 0;
    Phase phase = Phase::Setup;
    std::map<Address, Hash256> feature_hashes;
};

// Token-economy contract: deposits, per-institution contribution reports,
// proportional payout with pro-rata refund of the leftover.
struct TokenContractState {
    std::map<Address, std::int64_t> depositors;
    std::int64_t total_fund = 0;
    std::map<Address, std::int64_t> reported;  // fixed-point contributions
    bool paid_out = false;
    std::map<Address, std::int64_t> balances;
};

struct ContractState {
    SwarmContractState swarm;
    TokenContractState token;
};

struct Applied {
    ContractState state;
    TxStatus status = TxStatus::Accepted;
};

// Pure transition function; rejected transactions return the input state
// unchanged together with a distinct status code.
Applied apply_tx(const ContractState& state, const Transaction& tx);

// Folds a transaction log over a fresh state. Statuses (one per tx) are
// appended to *statuses when given.
ContractState replay(std::span<const Transaction> log, std::vector<TxStatus>* statuses = nullptr);

// Canonical serialization for replica-equality checks.
std::string state_to_json(const ContractState& state);

// sum(balances) + undistributed fund == sum(deposits), in integer units.
bool conserves_tokens(const TokenContractState& token);

struct Transfer {
    Address to = 0;
    std::int64_t amount = 0;
    bool is_refund = false;
};

// Payout arithmetic: payout_i = floor(fund * contribution_i / U_max) with
// negative contributions clamped to zero; the leftover is refunded pro-rata
// by deposit, with the integer-division remainder going to the largest
// depositor. Transfers always sum exactly to `fund`.
std::vector<Transfer> settle_payout(const std::map<Address, std::int64_t>& contributions_fp,
                                    const std::map<Address, std::int64_t>& deposits,
                                    std::int64_t fund);

// --- gas-cost model -------------------------------------------------------

// Ethereum transaction cost: gas * gas_price_gwei * 1e-9 * eth_usd.
double estimate_gas_cost(std::int64_t gas, double gas_price_gwei, double eth_usd);

// Measured costs of the token-economy contract (gas units).
constexpr std::int64_t kGasDeployBase3 = 1'473'028;   // deployment, 3 institutions
constexpr std::int64_t kGasPerInstitution = 34'399;   // each institution beyond 3
constexpr std::int64_t kGasFund = 52'162;
constexpr std::int64_t kGasReport = 116'875;
constexpr std::int64_t kGasPayout = 118'016;

std::int64_t deployment_gas(int n_institutions);

}  // namespace ddval::ledger
