#include "ddval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ddval/rng.hpp"

namespace ddval::synth {
namespace {

constexpr std::uint64_t kTagDirections = 0x64697273ULL;
constexpr std::uint64_t kTagClientParams = 0x636c70ULL;
constexpr std::uint64_t kTagClientData = 0x63646174ULL;
constexpr std::uint64_t kTagTest = 0x74657374ULL;
constexpr std::uint64_t kTagFlip = 0x666c6970ULL;
constexpr std::uint64_t kTagPartition = 0x70617274ULL;

struct ClientParams {
    std::vector<double> base_mean;           // d_in
    std::vector<double> condition_marginal;  // n_labels - 1
};

std::vector<std::vector<double>> label_directions(const SynthConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, kTagDirections));
    std::vector<std::vector<double>> dirs(cfg.n_labels);
    for (auto& u : dirs) {
        u.resize(cfg.d_in);
        double norm2 = 0.0;
        for (double& v : u) {
            v = rng.gaussian();
            norm2 += v * v;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : u) v *= inv;
    }
    return dirs;
}

ClientParams client_params(const SynthConfig& cfg, std::size_t client) {
    ClientParams p;
    p.base_mean.assign(cfg.d_in, 0.0);
    p.condition_marginal.assign(cfg.n_labels - 1, cfg.condition_marginal);
    if (cfg.mode == Mode::NonIID) {
        Rng rng(derive_seed(cfg.seed, kTagClientParams, client));
        double norm2 = 0.0;
        for (double& v : p.base_mean) {
            v = rng.gaussian();
            norm2 += v * v;
        }
        const double inv = cfg.noniid_mean_shift / std::sqrt(norm2);
        for (double& v : p.base_mean) v *= inv;
        for (double& m : p.condition_marginal) {
            const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
            m = std::clamp(m + sign * cfg.noniid_marginal_offset, 0.02, 0.9);
        }
    }
    return p;
}

DataPoint sample_point(const SynthConfig& cfg, const ClientParams& params,
                       const std::vector<std::vector<double>>& dirs, Rng& rng) {
    DataPoint p;
    p.labels.assign(cfg.n_labels, 0);
    bool any_condition = false;
    for (std::size_t l = 1; l < cfg.n_labels; ++l) {
        if (rng.bernoulli(params.condition_marginal[l - 1])) {
            p.labels[l] = 1;
            any_condition = true;
        }
    }
    p.labels[0] = (any_condition || rng.bernoulli(cfg.p_undef_finding)) ? 1 : 0;

    p.x = params.base_mean;
    for (std::size_t l = 0; l < cfg.n_labels; ++l) {
        if (!p.labels[l]) continue;
        for (std::size_t i = 0; i < cfg.d_in; ++i) {
            p.x[i] += cfg.condition_shift * dirs[l][i];
        }
    }
    for (std::size_t i = 0; i < cfg.d_in; ++i) {
        p.x[i] += cfg.noise_sigma * rng.gaussian();
    }
    return p;
}

void check_config(const SynthConfig& cfg) {
    if (cfg.n_clients == 0 || cfg.points_per_client == 0 || cfg.n_test == 0) {
        throw std::invalid_argument("gen_synthetic: zero-sized dataset");
    }
    if (cfg.d_in == 0 || cfg.n_labels < 2) {
        throw std::invalid_argument("gen_synthetic: need d_in >= 1 and n_labels >= 2");
    }
    if (!(cfg.noise_sigma > 0.0)) {
        throw std::invalid_argument("gen_synthetic: degenerate noise covariance");
    }
    if (!cfg.flip_fractions.empty() && cfg.flip_fractions.size() != cfg.n_clients) {
        throw std::invalid_argument("gen_synthetic: flip_fractions size mismatch");
    }
    for (double f : cfg.flip_fractions) {
        if (f < 0.0 || f > 1.0) {
            throw std::invalid_argument("gen_synthetic: flip fraction outside [0,1]");
        }
    }
    if (cfg.max_subject_points == 0) {
        throw std::invalid_argument("gen_synthetic: max_subject_points must be >= 1");
    }
}

}  // namespace

GenResult gen_synthetic(const SynthConfig& cfg) {
    check_config(cfg);
    const auto dirs = label_directions(cfg);

    GenResult result;
    std::uint64_t next_point_id = 1;
    std::uint64_t next_subject_id = 1;

    for (std::size_t c = 0; c < cfg.n_clients; ++c) {
        const ClientParams params = client_params(cfg, c);
        result.client_condition_marginals.push_back(params.condition_marginal);
        Rng rng(derive_seed(cfg.seed, kTagClientData, c));
        fl::ClientSplit split;
        split.client_id = static_cast<std::uint32_t>(c);
        while (split.data.size() < cfg.points_per_client) {
            const std::size_t subject_size = std::min(
                cfg.points_per_client - split.data.size(),
                1 + static_cast<std::size_t>(rng.index(cfg.max_subject_points)));
            const std::uint64_t subject = next_subject_id++;
            for (std::size_t s = 0; s < subject_size; ++s) {
                DataPoint p = sample_point(cfg, params, dirs, rng);
                p.point_id = next_point_id++;
                p.subject_id = subject;
                p.client_id = split.client_id;
                split.data.push_back(std::move(p));
            }
        }
        if (!cfg.flip_fractions.empty() && cfg.flip_fractions[c] > 0.0) {
            split.data = flip_labels(split.data, cfg.flip_fractions[c],
                                     derive_seed(cfg.seed, kTagFlip, c));
        }
        result.clients.push_back(std::move(split));
    }

    // Shared test set: a uniform mixture over the client generators.
    Rng rng(derive_seed(cfg.seed, kTagTest));
    std::vector<ClientParams> all_params;
    for (std::size_t c = 0; c < cfg.n_clients; ++c) all_params.push_back(client_params(cfg, c));
    for (std::size_t t = 0; t < cfg.n_test; ++t) {
        const std::size_t c = static_cast<std::size_t>(rng.index(cfg.n_clients));
        DataPoint p = sample_point(cfg, all_params[c], dirs, rng);
        p.point_id = next_point_id++;
        p.subject_id = next_subject_id++;
        p.client_id = 0xffffffffu;  // not owned by a training client
        result.test.push_back(std::move(p));
    }
    return result;
}

Dataset flip_labels(const Dataset& data, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) {
        throw std::invalid_argument("flip_labels: fraction outside [0,1]");
    }
    Rng rng(derive_seed(seed, kTagFlip));
    Dataset out = data;
    for (DataPoint& p : out) {
        for (std::uint8_t& y : p.labels) {
            if (rng.bernoulli(fraction)) {
                y ^= 1;
                ++p.flipped_labels;
            }
        }
    }
    return out;
}

std::vector<fl::ClientSplit> partition(const Dataset& points, std::size_t n_clients, Mode mode,
                                       std::uint64_t seed) {
    if (n_clients == 0) throw std::invalid_argument("partition: n_clients must be >= 1");

    // Subjects in first-seen order; each stays whole.
    std::vector<std::uint64_t> subject_order;
    std::map<std::uint64_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto [it, inserted] = members.try_emplace(points[i].subject_id);
        if (inserted) subject_order.push_back(points[i].subject_id);
        it->second.push_back(i);
    }
    if (subject_order.size() < n_clients) {
        throw std::invalid_argument("partition: fewer subjects than clients");
    }

    Rng rng(derive_seed(seed, kTagPartition));
    if (mode == Mode::IID) {
        rng.shuffle(subject_order);
    } else {
        // Skew by dominant condition label: subjects with the same dominant
        // condition end up contiguous, so clients get disjoint label mixes.
        auto dominant = [&](std::uint64_t subject) {
            const std::vector<std::size_t>& idx = members.at(subject);
            const std::size_t n_labels = points[idx.front()].labels.size();
            std::size_t best = 0;
            std::size_t best_count = 0;
            for (std::size_t l = 1; l < n_labels; ++l) {
                std::size_t count = 0;
                for (std::size_t i : idx) count += points[i].labels[l];
                if (count > best_count) {
                    best_count = count;
                    best = l;
                }
            }
            return best;
        };
        std::stable_sort(subject_order.begin(), subject_order.end(),
                         [&](std::uint64_t a, std::uint64_t b) { return dominant(a) < dominant(b); });
    }

    // Contiguous subject chunks balanced by point count.
    std::vector<fl::ClientSplit> out(n_clients);
    for (std::size_t c = 0; c < n_clients; ++c) {
        out[c].client_id = static_cast<std::uint32_t>(c);
    }
    const double per_client =
        static_cast<double>(points.size()) / static_cast<double>(n_clients);
    std::size_t assigned_points = 0;
    std::size_t client = 0;
    for (std::size_t s = 0; s < subject_order.size(); ++s) {
        if (client + 1 < n_clients) {
            const std::size_t remaining = subject_order.size() - s;
            const std::size_t needed_after = n_clients - client - 1;
            const bool quota_met = static_cast<double>(assigned_points) >=
                                   per_client * static_cast<double>(client + 1);
            // Advance when the current client's share is filled, or when the
            // remaining subjects are exactly enough to give one to each of
            // the clients still waiting.
            if (remaining == needed_after || (quota_met && remaining > needed_after)) {
                ++client;
            }
        }
        for (std::size_t i : members.at(subject_order[s])) {
            DataPoint p = points[i];
            p.client_id = out[client].client_id;
            out[client].data.push_back(std::move(p));
            ++assigned_points;
        }
    }
    for (const auto& split : out) {
        if (split.data.empty()) {
            throw std::invalid_argument("partition: produced an empty client");
        }
    }
    return out;
}

std::string dataset_to_csv(const Dataset& data) {
    if (data.empty()) return "";
    const std::size_t d = data.front().x.size();
    const std::size_t l = data.front().labels.size();
    std::string out = "point_id,subject_id,client_id";
    for (std::size_t i = 0; i < d; ++i) out += ",f_" + std::to_string(i);
    for (std::size_t i = 0; i < l; ++i) out += ",y_" + std::to_string(i);
    out += ",flips\n";
    char buf[32];
    for (const DataPoint& p : data) {
        out += std::to_string(p.point_id) + ',' + std::to_string(p.subject_id) + ',' +
               std::to_string(p.client_id);
        for (double v : p.x) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out += buf;
        }
        for (std::uint8_t y : p.labels) out += y ? ",1" : ",0";
        out += ',' + std::to_string(static_cast<int>(p.flipped_labels)) + '\n';
    }
    return out;
}

}  // namespace ddval::synth
