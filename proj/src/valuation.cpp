#include "ddval/valuation.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "ddval/kernels.hpp"

namespace ddval {

void validate_points(std::span<const DataPoint> points, std::size_t dim, std::size_t n_labels) {
    std::unordered_set<std::uint64_t> ids;
    ids.reserve(points.size());
    for (const DataPoint& p : points) {
        if (p.x.size() != dim) {
            throw std::invalid_argument("point " + std::to_string(p.point_id) +
                                        ": feature dimension mismatch");
        }
        if (p.labels.size() != n_labels) {
            throw std::invalid_argument("point " + std::to_string(p.point_id) +
                                        ": label dimension mismatch");
        }
        for (double v : p.x) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("point " + std::to_string(p.point_id) +
                                            ": non-finite feature value");
            }
        }
        for (std::uint8_t l : p.labels) {
            if (l > 1) {
                throw std::invalid_argument("point " + std::to_string(p.point_id) +
                                            ": label outside {0,1}");
            }
        }
        if (!ids.insert(p.point_id).second) {
            throw std::invalid_argument("duplicate point_id " + std::to_string(p.point_id));
        }
    }
}

CoalitionTable::CoalitionTable(int n_players) : n_players_(n_players) {
    if (n_players < 1 || n_players > kMaxExactPlayers) {
        throw std::invalid_argument("CoalitionTable: n_players outside [1, " +
                                    std::to_string(kMaxExactPlayers) + "]");
    }
    utilities_.assign(std::size_t{1} << n_players, 0.0);
    present_.assign(std::size_t{1} << n_players, false);
}

void CoalitionTable::set(std::uint32_t mask, double utility) {
    if (mask == 0 || mask >= utilities_.size()) {
        throw std::invalid_argument("CoalitionTable::set: bad mask");
    }
    if (!present_[mask]) ++n_set_;
    present_[mask] = true;
    utilities_[mask] = utility;
}

double CoalitionTable::get(std::uint32_t mask) const {
    if (mask == 0) return 0.0;
    if (mask >= utilities_.size() || !present_[mask]) {
        throw std::invalid_argument("CoalitionTable::get: missing mask");
    }
    return utilities_[mask];
}

bool CoalitionTable::has(std::uint32_t mask) const {
    return mask < present_.size() && (mask == 0 || present_[mask]);
}

bool CoalitionTable::complete() const {
    return n_set_ == utilities_.size() - 1;
}

std::vector<double> canonical_shapley(const CoalitionTable& table) {
    if (!table.complete()) {
        throw std::invalid_argument("canonical_shapley: incomplete coalition table");
    }
    const int n = table.n_players();

    // weight[s] = s! (N-1-s)! / N!, built by the stable ratio recurrence.
    std::vector<double> weight(static_cast<std::size_t>(n));
    weight[0] = 1.0 / static_cast<double>(n);
    for (int s = 1; s < n; ++s) {
        weight[s] = weight[s - 1] * static_cast<double>(s) / static_cast<double>(n - s);
    }

    // For each player, sub-masks over the other N-1 players are enumerated by
    // compressed index, so the addend sequence (by subset size) is identical
    // for every player. Interchangeable players therefore sum the same values
    // in the same order and come out bit-equal.
    std::vector<double> sv(static_cast<std::size_t>(n), 0.0);
    const std::uint32_t n_sub = 1u << (n - 1);
    for (int i = 0; i < n; ++i) {
        const std::uint32_t bit = 1u << i;
        const std::uint32_t low_mask = bit - 1;
        double acc = 0.0;
        for (std::uint32_t sub = 0; sub < n_sub; ++sub) {
            const std::uint32_t mask = (sub & low_mask) | ((sub & ~low_mask) << 1);
            const int s = std::popcount(sub);
            acc += weight[s] * (table.get(mask | bit) - table.get(mask));
        }
        sv[static_cast<std::size_t>(i)] = acc;
    }
    return sv;
}

namespace {

struct TrainView {
    std::vector<double> matrix;           // row-major n x dim
    std::vector<std::uint64_t> ids;       // per row
    std::vector<const DataPoint*> points; // per row
};

TrainView make_view(std::span<const DataPoint> train, std::size_t dim) {
    TrainView v;
    v.matrix.resize(train.size() * dim);
    v.ids.reserve(train.size());
    v.points.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        std::copy(train[i].x.begin(), train[i].x.end(), v.matrix.begin() + i * dim);
        v.ids.push_back(train[i].point_id);
        v.points.push_back(&train[i]);
    }
    return v;
}

// Ascending distance, ties broken by ascending point_id. The tie-break makes
// the ordering a total order, which gives permutation invariance and equal
// values for duplicated points.
void argsort_by_distance(std::span<const double> dist, const std::vector<std::uint64_t>& ids,
                         std::vector<std::uint32_t>& order) {
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return ids[a] < ids[b];
    });
}

// One test point, all label dimensions: runs the backward recursion once per
// label dimension on the shared distance ordering and adds the per-dimension
// values into acc (acc[i] accumulates over test points and dimensions).
void accumulate_test_point(const TrainView& view, std::size_t n_labels,
                           const DataPoint& test_point, int k, std::span<const double> dist,
                           std::vector<std::uint32_t>& order, std::vector<double>& phi,
                           std::vector<double>& acc) {
    const std::size_t n = view.ids.size();
    argsort_by_distance(dist, view.ids, order);

    const double kd = static_cast<double>(k);
    for (std::size_t l = 0; l < n_labels; ++l) {
        const std::uint8_t y_test = test_point.labels[l];
        auto match = [&](std::uint32_t row) -> double {
            return view.points[row]->labels[l] == y_test ? 1.0 : 0.0;
        };
        phi[n - 1] = match(order[n - 1]) / static_cast<double>(n);
        for (std::size_t i = n - 1; i-- > 0;) {
            const double num = match(order[i]) - match(order[i + 1]);
            const double ii = static_cast<double>(i + 1);  // 1-based rank
            phi[i] = phi[i + 1] + num / kd * std::min(kd, ii) / ii;
        }
        for (std::size_t i = 0; i < n; ++i) acc[order[i]] += phi[i];
    }
}

}  // namespace

std::map<std::uint64_t, double> compute_knn_svs(std::span<const DataPoint> train,
                                                std::span<const DataPoint> test, int k,
                                                const KnnSvOptions& options) {
    if (train.empty() || test.empty()) {
        throw std::invalid_argument("compute_knn_svs: empty train or test set");
    }
    if (k < 1) throw std::invalid_argument("compute_knn_svs: k must be >= 1");
    const std::size_t dim = train.front().x.size();
    const std::size_t n_labels = train.front().labels.size();
    if (n_labels == 0) throw std::invalid_argument("compute_knn_svs: no label dimensions");
    validate_points(train, dim, n_labels);
    validate_points(test, dim, n_labels);

    const TrainView view = make_view(train, dim);
    const std::size_t n = train.size();
    const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
    const std::size_t n_chunks = (test.size() + chunk - 1) / chunk;

    // Fixed chunking: each chunk produces its own partial sum and the chunks
    // are merged in index order, so the result does not depend on how many
    // threads processed them.
    std::vector<std::vector<double>> partial(n_chunks);
    auto run_chunk = [&](std::size_t c) {
        std::vector<std::uint32_t> order(n);
        std::vector<double> phi(n);
        auto& acc = partial[c];
        acc.assign(n, 0.0);
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(test.size(), begin + chunk);
        // Distances for the whole chunk in one pass over the train matrix.
        const std::size_t block = end - begin;
        std::vector<const double*> queries(block);
        for (std::size_t t = begin; t < end; ++t) queries[t - begin] = test[t].x.data();
        std::vector<double> dist(block * n);
        kernels::block_squared_distances(view.matrix.data(), n, dim, queries.data(), block,
                                         dist.data());
        for (std::size_t t = begin; t < end; ++t) {
            accumulate_test_point(view, n_labels, test[t], k,
                                  std::span<const double>(dist).subspan((t - begin) * n, n),
                                  order, phi, acc);
        }
    };

    const int n_threads = std::max(1, options.threads);
    if (n_threads == 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> workers;
        std::atomic<std::size_t> next{0};
        const int spawn = static_cast<int>(std::min<std::size_t>(n_threads, n_chunks));
        for (int w = 0; w < spawn; ++w) {
            workers.emplace_back([&] {
                for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
                    run_chunk(c);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    std::vector<double> total(n, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t i = 0; i < n; ++i) total[i] += partial[c][i];
    }
    const double norm = 1.0 / (static_cast<double>(test.size()) * static_cast<double>(n_labels));
    std::map<std::uint64_t, double> result;
    for (std::size_t i = 0; i < n; ++i) {
        result.emplace(view.ids[i], total[i] * norm);
    }
    return result;
}

double knn_utility(std::span<const DataPoint> train, std::uint32_t coalition_mask,
                   const DataPoint& test_point, int k, std::size_t label_index) {
    if (k < 1) throw std::invalid_argument("knn_utility: k must be >= 1");
    if (train.size() > kMaxExactPlayers) {
        throw std::invalid_argument("knn_utility: train set above enumeration cap");
    }
    if (coalition_mask == 0) return 0.0;
    const std::size_t dim = test_point.x.size();

    struct Member {
        double dist;
        std::uint64_t id;
        bool match;
    };
    std::vector<Member> members;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (!(coalition_mask & (1u << i))) continue;
        if (train[i].x.size() != dim) {
            throw std::invalid_argument("knn_utility: dimension mismatch");
        }
        members.push_back({kernels::squared_distance(train[i].x.data(), test_point.x.data(), dim),
                           train[i].point_id,
                           train[i].labels[label_index] == test_point.labels[label_index]});
    }
    std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.id < b.id;
    });
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), members.size());
    double matches = 0.0;
    for (std::size_t i = 0; i < take; ++i) matches += members[i].match ? 1.0 : 0.0;
    return matches / static_cast<double>(k);
}

CoalitionTable knn_coalition_table(std::span<const DataPoint> train, const DataPoint& test_point,
                                   int k, std::size_t label_index) {
    const int n = static_cast<int>(train.size());
    CoalitionTable table(n);
    const std::uint32_t full = (1u << n) - 1;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        table.set(mask, knn_utility(train, mask, test_point, k, label_index));
    }
    return table;
}

std::map<std::uint64_t, double> normalize_to_auc(const std::map<std::uint64_t, double>& raw_sv,
                                                 double coalition_auroc) {
    if (raw_sv.empty()) throw std::invalid_argument("normalize_to_auc: empty input");
    if (coalition_auroc < 0.0 || coalition_auroc > 1.0) {
        throw std::invalid_argument("normalize_to_auc: auroc outside [0,1]");
    }
    double sum = 0.0;
    for (const auto& [id, v] : raw_sv) sum += v;
    if (std::abs(sum) < kNormalizeEps) {
        throw std::domain_error("normalize_to_auc: sum of raw SVs is degenerate");
    }
    const double scale = (coalition_auroc - 0.5) / sum;
    std::map<std::uint64_t, double> out;
    for (const auto& [id, v] : raw_sv) out.emplace(id, v * scale);
    return out;
}

std::map<std::string, double> aggregate_group(
    const std::map<std::uint64_t, double>& normalized_sv,
    const std::map<std::uint64_t, std::string>& grouping) {
    std::map<std::string, double> out;
    for (const auto& [id, v] : normalized_sv) {
        auto it = grouping.find(id);
        if (it == grouping.end()) {
            throw std::invalid_argument("aggregate_group: point " + std::to_string(id) +
                                        " has no group");
        }
        out[it->second] += v;
    }
    return out;
}

ValuationReport value_points(std::span<const DataPoint> train_features,
                             std::span<const DataPoint> test_features, int k,
                             double coalition_auroc, const KnnSvOptions& options) {
    ValuationReport report;
    report.k_param = k;
    report.n_train = train_features.size();
    report.n_test = test_features.size();
    report.dim = feature_dim(train_features);
    report.n_labels = label_dim(train_features);
    report.coalition_auroc = coalition_auroc;
    report.raw_sv = compute_knn_svs(train_features, test_features, k, options);
    report.normalized_sv = normalize_to_auc(report.raw_sv, coalition_auroc);
    std::map<std::uint64_t, std::string> by_client;
    for (const DataPoint& p : train_features) {
        by_client.emplace(p.point_id, "client_" + std::to_string(p.client_id));
    }
    report.group_sv = aggregate_group(report.normalized_sv, by_client);
    return report;
}

}  // namespace ddval
