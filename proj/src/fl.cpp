#include "ddval/fl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ddval/kernels.hpp"
#include "ddval/metrics.hpp"
#include "ddval/rng.hpp"
#include "ddval/stagnation.hpp"

namespace ddval::fl {

std::vector<double> train_local(const LinearModel& model, std::span<const DataPoint> data,
                                int epochs, double lr, std::size_t batch_size,
                                std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("train_local: empty client data");
    if (lr < 0.0) throw std::invalid_argument("train_local: negative learning rate");
    if (batch_size == 0) throw std::invalid_argument("train_local: zero batch size");

    LinearModel local = model;
    Rng rng(derive_seed(seed, 0x747261696eULL));
    std::vector<std::uint32_t> order(data.size());
    std::iota(order.begin(), order.end(), 0u);
    std::vector<double> grad(local.params().size());
    std::vector<DataPoint> batch;
    batch.reserve(batch_size);

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            local.loss_and_gradient(batch, grad);
            local.add_delta(grad, -lr);
        }
    }

    std::vector<double> delta = local.params();
    const std::vector<double>& base = model.params();
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= base[i];
    return delta;
}

LinearModel fed_avg_round(const LinearModel& model,
                          const std::vector<std::vector<double>>& deltas,
                          const std::vector<double>& weights) {
    if (deltas.empty() || deltas.size() != weights.size()) {
        throw std::invalid_argument("fed_avg_round: deltas/weights mismatch");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("fed_avg_round: weight sum is zero");
    LinearModel out = model;
    for (std::size_t c = 0; c < deltas.size(); ++c) {
        out.add_delta(deltas[c], weights[c] / total);
    }
    return out;
}

double validate(const LinearModel& model, std::span<const DataPoint> test) {
    if (test.empty()) throw std::invalid_argument("validate: empty test set");
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<std::uint8_t>> labels;
    scores.reserve(test.size());
    labels.reserve(test.size());
    for (const DataPoint& p : test) {
        scores.push_back(model.probabilities(p.x));
        labels.push_back(p.labels);
    }
    return macro_auroc(scores, labels);
}

FederatedRun run_federated(const std::vector<ClientSplit>& clients,
                           std::span<const DataPoint> test, const FlConfig& config) {
    if (clients.empty()) throw std::invalid_argument("run_federated: no clients");
    if (config.window < 1) throw std::invalid_argument("run_federated: window must be >= 1");
    if (config.max_rounds < 1) throw std::invalid_argument("run_federated: max_rounds must be >= 1");
    for (std::size_t i = 1; i < clients.size(); ++i) {
        if (clients[i].client_id <= clients[i - 1].client_id) {
            throw std::invalid_argument("run_federated: clients must be in ascending id order");
        }
    }

    const std::size_t d_in = clients.front().data.front().x.size();
    const std::size_t n_labels = clients.front().data.front().labels.size();
    const ModelShape shape{d_in, config.d_h, n_labels};
    LinearModel global = LinearModel::init(shape, config.seed);
    const LinearModel initial = global;

    std::vector<double> weights;
    for (const ClientSplit& c : clients) {
        weights.push_back(static_cast<double>(c.data.size()));
    }

    std::vector<RoundRecord> rounds;
    StagnationWindow<double> window(config.window);
    for (int r = 1; r <= config.max_rounds; ++r) {
        RoundRecord rec;
        rec.round_index = r;
        std::vector<std::vector<double>> deltas;
        deltas.reserve(clients.size());
        for (const ClientSplit& c : clients) {
            std::vector<double> d = train_local(
                global, c.data, config.epochs, config.lr, config.batch_size,
                derive_seed(config.seed, static_cast<std::uint64_t>(r), c.client_id));
            rec.per_client_delta.emplace(c.client_id, d);
            deltas.push_back(std::move(d));
        }
        global = fed_avg_round(global, deltas, weights);
        rec.aggregated_params = global.params();
        rec.validation_auc = validate(global, test);
        const bool stop = window.observe(rec.validation_auc);
        rounds.push_back(std::move(rec));
        if (stop) break;
    }
    return FederatedRun{initial, global, std::move(rounds)};
}

std::string rounds_to_jsonl(const std::vector<RoundRecord>& rounds) {
    std::string out;
    for (const RoundRecord& r : rounds) {
        nlohmann::json norms = nlohmann::json::object();
        for (const auto& [cid, delta] : r.per_client_delta) {
            norms["client_" + std::to_string(cid)] =
                std::sqrt(kernels::dot(delta.data(), delta.data(), delta.size()));
        }
        nlohmann::json line = {{"round", r.round_index},
                               {"delta_norms", std::move(norms)},
                               {"validation_auc", r.validation_auc}};
        out += line.dump() + '\n';
    }
    return out;
}

Dataset extract_deep_features(const LinearModel& model, std::span<const DataPoint> data) {
    if (data.empty()) throw std::invalid_argument("extract_deep_features: empty data");
    Dataset out;
    out.reserve(data.size());
    for (const DataPoint& p : data) {
        DataPoint f;
        f.point_id = p.point_id;
        f.subject_id = p.subject_id;
        f.client_id = p.client_id;
        f.flipped_labels = p.flipped_labels;
        f.labels = p.labels;
        f.x.resize(model.shape().d_h);
        model.hidden(p.x, f.x);
        out.push_back(std::move(f));
    }
    return out;
}

ClientSvResult or_approx_client_svs(const LinearModel& initial,
                                    const std::vector<RoundRecord>& history,
                                    const std::vector<ClientSplit>& clients,
                                    std::span<const DataPoint> test) {
    const int n = static_cast<int>(clients.size());
    if (n < 1 || n > kMaxExactPlayers) {
        throw std::invalid_argument("or_approx_client_svs: client count outside enumeration cap");
    }
    for (const RoundRecord& r : history) {
        for (const ClientSplit& c : clients) {
            if (!r.per_client_delta.count(c.client_id)) {
                throw std::invalid_argument("or_approx_client_svs: missing delta for client " +
                                            std::to_string(c.client_id) + " in round " +
                                            std::to_string(r.round_index));
            }
        }
    }

    CoalitionTable table(n);
    std::size_t evals = 0;
    const std::uint32_t full = (1u << n) - 1;
    std::vector<double> round_avg(initial.params().size());
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        LinearModel approx = initial;
        double weight_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) weight_sum += static_cast<double>(clients[i].data.size());
        }
        for (const RoundRecord& r : history) {
            std::fill(round_avg.begin(), round_avg.end(), 0.0);
            for (int i = 0; i < n; ++i) {
                if (!(mask & (1u << i))) continue;
                const std::vector<double>& d = r.per_client_delta.at(clients[i].client_id);
                kernels::axpy(static_cast<double>(clients[i].data.size()) / weight_sum,
                              d.data(), round_avg.data(), round_avg.size());
            }
            approx.add_delta(round_avg);
        }
        table.set(mask, validate(approx, test) - 0.5);
        ++evals;
    }

    ClientSvResult result;
    result.client_svs = canonical_shapley(table);
    for (const ClientSplit& c : clients) result.client_ids.push_back(c.client_id);
    result.utility_evaluations = evals;
    return result;
}

namespace {

// Per-label logistic classifier on deep features: W is n_labels x dim plus a
// bias per label, fit by full-batch gradient descent (deterministic).
struct LinearClassifier {
    std::size_t dim = 0;
    std::size_t n_labels = 0;
    std::vector<double> w;  // n_labels * dim
    std::vector<double> b;  // n_labels
};

LinearClassifier fit_classifier(std::span<const DataPoint> data, const SafeConfig& config) {
    LinearClassifier clf;
    clf.dim = data.front().x.size();
    clf.n_labels = data.front().labels.size();
    clf.w.assign(clf.n_labels * clf.dim, 0.0);
    clf.b.assign(clf.n_labels, 0.0);

    std::vector<double> gw(clf.w.size());
    std::vector<double> gb(clf.b.size());
    const double inv = 1.0 / static_cast<double>(data.size());
    for (int it = 0; it < config.iterations; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (const DataPoint& p : data) {
            for (std::size_t l = 0; l < clf.n_labels; ++l) {
                const double z =
                    kernels::dot(clf.w.data() + l * clf.dim, p.x.data(), clf.dim) + clf.b[l];
                const double g = (sigmoid(z) - static_cast<double>(p.labels[l])) * inv;
                kernels::axpy(g, p.x.data(), gw.data() + l * clf.dim, clf.dim);
                gb[l] += g;
            }
        }
        kernels::axpy(-config.lr, gw.data(), clf.w.data(), clf.w.size());
        kernels::axpy(-config.lr, gb.data(), clf.b.data(), clf.b.size());
    }
    return clf;
}

double classifier_utility(const LinearClassifier& clf, std::span<const DataPoint> test) {
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<std::uint8_t>> labels;
    scores.reserve(test.size());
    labels.reserve(test.size());
    for (const DataPoint& p : test) {
        std::vector<double> s(clf.n_labels);
        for (std::size_t l = 0; l < clf.n_labels; ++l) {
            s[l] = sigmoid(kernels::dot(clf.w.data() + l * clf.dim, p.x.data(), clf.dim) +
                           clf.b[l]);
        }
        scores.push_back(std::move(s));
        labels.push_back(p.labels);
    }
    return macro_auroc(scores, labels) - 0.5;
}

}  // namespace

ClientSvResult safe_approx_client_svs(const std::vector<ClientSplit>& client_features,
                                      std::span<const DataPoint> test_features,
                                      const SafeConfig& config) {
    const int n = static_cast<int>(client_features.size());
    if (n < 1 || n > kMaxExactPlayers) {
        throw std::invalid_argument("safe_approx_client_svs: client count outside cap");
    }
    for (const ClientSplit& c : client_features) {
        if (c.data.empty()) {
            throw std::invalid_argument("safe_approx_client_svs: client " +
                                        std::to_string(c.client_id) + " has no features");
        }
    }

    std::vector<LinearClassifier> classifiers;
    classifiers.reserve(client_features.size());
    for (const ClientSplit& c : client_features) {
        classifiers.push_back(fit_classifier(c.data, config));
    }

    CoalitionTable table(n);
    std::size_t evals = 0;
    const std::uint32_t full = (1u << n) - 1;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        LinearClassifier combined;
        combined.dim = classifiers.front().dim;
        combined.n_labels = classifiers.front().n_labels;
        combined.w.assign(combined.dim * combined.n_labels, 0.0);
        combined.b.assign(combined.n_labels, 0.0);
        double weight_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                weight_sum += static_cast<double>(client_features[i].data.size());
            }
        }
        for (int i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) continue;
            const double w = static_cast<double>(client_features[i].data.size()) / weight_sum;
            kernels::axpy(w, classifiers[i].w.data(), combined.w.data(), combined.w.size());
            kernels::axpy(w, classifiers[i].b.data(), combined.b.data(), combined.b.size());
        }
        table.set(mask, classifier_utility(combined, test_features));
        ++evals;
    }

    ClientSvResult result;
    result.client_svs = canonical_shapley(table);
    for (const ClientSplit& c : client_features) result.client_ids.push_back(c.client_id);
    result.utility_evaluations = evals;
    return result;
}

}  // namespace ddval::fl
