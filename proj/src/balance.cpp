#include "vf/balance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "vf/error.hpp"
#include "vf/rng.hpp"

namespace vf {

namespace {

void check_matrix(const LabeledMatrix& d) {
    if (d.rows.size() != d.labels.size() || d.rows.size() != d.stay_ids.size())
        fail(Errc::dimension_mismatch, "rows/labels/stay_ids lengths differ");
    for (const auto& r : d.rows)
        if (r.size() != d.rows.front().size()) fail(Errc::dimension_mismatch, "ragged feature rows");
}

// The deceased class is the one A-SUWO oversamples.
constexpr int MINORITY_LABEL = 1;

// z-scores fit on the full input matrix; constant features pass through.
std::vector<std::vector<double>> standardize(const LabeledMatrix& d) {
    const size_t n = d.size();
    const size_t dim = d.rows.empty() ? 0 : d.rows.front().size();
    std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
    for (const auto& r : d.rows)
        for (size_t j = 0; j < dim; ++j) mu[j] += r[j];
    for (auto& v : mu) v /= static_cast<double>(n);
    for (const auto& r : d.rows)
        for (size_t j = 0; j < dim; ++j) sd[j] += (r[j] - mu[j]) * (r[j] - mu[j]);
    for (auto& v : sd) {
        v = std::sqrt(v / static_cast<double>(n));
        if (!(v > 0.0)) v = 1.0;
    }
    std::vector<std::vector<double>> z(n, std::vector<double>(dim));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < dim; ++j) z[i][j] = (d.rows[i][j] - mu[j]) / sd[j];
    return z;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

MinorityClusterSet cluster_minority(const LabeledMatrix& d, double linkage_threshold) {
    check_matrix(d);
    MinorityClusterSet out;
    std::vector<size_t> majority;
    for (size_t i = 0; i < d.size(); ++i) {
        if (d.labels[i] == MINORITY_LABEL)
            out.minority_rows.push_back(i);
        else
            majority.push_back(i);
    }
    const size_t m = out.minority_rows.size();
    if (m < 2) fail(Errc::too_few_minority, "need at least 2 minority rows");

    const auto z = standardize(d);

    // Point distances in minority-local index space.
    std::vector<std::vector<double>> dmat(m, std::vector<double>(m, 0.0));
    for (size_t a = 0; a < m; ++a)
        for (size_t b = a + 1; b < m; ++b)
            dmat[a][b] = dmat[b][a] = dist(z[out.minority_rows[a]], z[out.minority_rows[b]]);

    struct Cluster {
        std::vector<size_t> members; // local indices, sorted
        bool alive = true;
    };
    std::vector<Cluster> clusters(m);
    for (size_t i = 0; i < m; ++i) clusters[i].members = {i};

    // Cluster slots are never reused, so cached linkages and rejected pairs
    // stay valid by (slot_a, slot_b) key.
    std::map<std::pair<size_t, size_t>, double> linkage;
    std::map<std::pair<size_t, size_t>, bool> rejected;

    auto avg_linkage = [&](size_t a, size_t b) {
        const auto key = std::minmax(a, b);
        const auto it = linkage.find(key);
        if (it != linkage.end()) return it->second;
        double acc = 0.0;
        for (const size_t i : clusters[a].members)
            for (const size_t j : clusters[b].members) acc += dmat[i][j];
        const double v = acc / static_cast<double>(clusters[a].members.size() * clusters[b].members.size());
        linkage[key] = v;
        return v;
    };

    auto overlaps_majority = [&](const std::vector<size_t>& members) {
        const size_t dim = z.empty() ? 0 : z.front().size();
        std::vector<double> center(dim, 0.0);
        for (const size_t i : members)
            for (size_t j = 0; j < dim; ++j) center[j] += z[out.minority_rows[i]][j];
        for (auto& v : center) v /= static_cast<double>(members.size());
        double radius = 0.0;
        for (const size_t i : members) radius = std::max(radius, dist(z[out.minority_rows[i]], center));
        for (const size_t g : majority)
            if (dist(z[g], center) < radius) return true;
        return false;
    };

    while (true) {
        double best_d = std::numeric_limits<double>::infinity();
        size_t best_a = 0, best_b = 0;
        bool found = false;
        for (size_t a = 0; a < clusters.size(); ++a) {
            if (!clusters[a].alive) continue;
            for (size_t b = a + 1; b < clusters.size(); ++b) {
                if (!clusters[b].alive || rejected.count({a, b}) != 0) continue;
                const double v = avg_linkage(a, b);
                // Tie-break on the smallest member indices involved.
                if (!found || v < best_d ||
                    (v == best_d && std::minmax(clusters[a].members.front(), clusters[b].members.front()) <
                                        std::minmax(clusters[best_a].members.front(), clusters[best_b].members.front()))) {
                    best_d = v;
                    best_a = a;
                    best_b = b;
                    found = true;
                }
            }
        }
        if (!found || best_d > linkage_threshold) break;

        std::vector<size_t> merged;
        std::merge(clusters[best_a].members.begin(), clusters[best_a].members.end(),
                   clusters[best_b].members.begin(), clusters[best_b].members.end(), std::back_inserter(merged));
        if (overlaps_majority(merged)) {
            rejected[{best_a, best_b}] = true;
            continue;
        }
        clusters[best_a].alive = false;
        clusters[best_b].alive = false;
        clusters.push_back({std::move(merged), true});
    }

    for (const auto& c : clusters) {
        if (!c.alive) continue;
        std::vector<size_t> global;
        global.reserve(c.members.size());
        for (const size_t i : c.members) global.push_back(out.minority_rows[i]);
        out.clusters.push_back(std::move(global));
    }
    std::sort(out.clusters.begin(), out.clusters.end());
    return out;
}

MinorityClusterSet weight_clusters(MinorityClusterSet c, const LabeledMatrix& d, int knn,
                                   double smoothing_weight) {
    check_matrix(d);
    const auto z = standardize(d);
    const size_t n = d.size();

    auto misclass_prob = [&](size_t g) {
        std::vector<std::pair<double, size_t>> nd;
        nd.reserve(n - 1);
        for (size_t o = 0; o < n; ++o) {
            if (o == g) continue;
            nd.emplace_back(dist(z[g], z[o]), o);
        }
        const size_t k = std::min(static_cast<size_t>(knn), nd.size());
        std::partial_sort(nd.begin(), nd.begin() + static_cast<long>(k), nd.end());
        size_t wrong = 0;
        for (size_t i = 0; i < k; ++i) wrong += d.labels[nd[i].second] != MINORITY_LABEL;
        return static_cast<double>(wrong) / static_cast<double>(k);
    };

    c.weights.assign(c.clusters.size(), 0.0);
    for (size_t ci = 0; ci < c.clusters.size(); ++ci) {
        double acc = 0.0;
        for (const size_t g : c.clusters[ci]) acc += misclass_prob(g);
        acc /= static_cast<double>(c.clusters[ci].size());
        c.weights[ci] = acc > 0.0 ? acc : smoothing_weight;
    }
    const double total = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
    for (auto& w : c.weights) w /= total;
    return c;
}

void assign_quotas(MinorityClusterSet& c, size_t need) {
    const size_t k = c.weights.size();
    c.quota.assign(k, 0);
    if (k == 0 || need == 0) return;
    std::vector<std::pair<double, size_t>> remainders(k);
    size_t assigned = 0;
    for (size_t i = 0; i < k; ++i) {
        const double exact = c.weights[i] * static_cast<double>(need);
        c.quota[i] = static_cast<size_t>(std::floor(exact));
        assigned += c.quota[i];
        remainders[i] = {exact - std::floor(exact), i};
    }
    // Largest remainder first; ties to the smallest cluster index.
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; assigned < need; ++i, ++assigned) ++c.quota[remainders[i % k].second];
}

LabeledMatrix oversample(const MinorityClusterSet& c, const LabeledMatrix& d, uint64_t seed, int knn) {
    check_matrix(d);
    LabeledMatrix out = d;
    const auto z = standardize(d);
    Rng rng(derive_seed(seed, 0xA5));
    size_t synth_id = 0;

    for (size_t ci = 0; ci < c.clusters.size(); ++ci) {
        const auto& members = c.clusters[ci];
        // Neighbor lists within the cluster, nearest first, ties on index.
        std::vector<std::vector<size_t>> neighbors(members.size());
        for (size_t a = 0; a < members.size(); ++a) {
            std::vector<std::pair<double, size_t>> nd;
            for (size_t b = 0; b < members.size(); ++b) {
                if (a == b) continue;
                nd.emplace_back(dist(z[members[a]], z[members[b]]), members[b]);
            }
            std::sort(nd.begin(), nd.end());
            const size_t k = std::min(static_cast<size_t>(knn), nd.size());
            for (size_t i = 0; i < k; ++i) neighbors[a].push_back(nd[i].second);
        }

        const size_t quota = ci < c.quota.size() ? c.quota[ci] : 0;
        for (size_t q = 0; q < quota; ++q) {
            const size_t ai = rng.below(members.size());
            const size_t a = members[ai];
            const size_t b = neighbors[ai].empty() ? a : neighbors[ai][rng.below(neighbors[ai].size())];
            const double lambda = rng.uniform01();
            std::vector<double> row(d.rows[a].size());
            for (size_t j = 0; j < row.size(); ++j)
                row[j] = d.rows[a][j] + lambda * (d.rows[b][j] - d.rows[a][j]);
            out.rows.push_back(std::move(row));
            out.labels.push_back(MINORITY_LABEL);
            char buf[24];
            std::snprintf(buf, sizeof buf, "syn:%05zu", synth_id++);
            out.stay_ids.emplace_back(buf);
        }
    }
    return out;
}

LabeledMatrix balance_dataset(const LabeledMatrix& d, uint64_t seed, const BalanceConfig& cfg) {
    check_matrix(d);
    size_t ones = 0;
    for (const int l : d.labels) ones += l != 0;
    const size_t zeros = d.size() - ones;
    if (ones == 0 || zeros == 0) fail(Errc::one_class_only, "both classes must be present");
    // The deceased class is the one A-SUWO adds to; nothing to do if it
    // already matches (or exceeds) the alive class.
    if (ones >= zeros) return d;

    const size_t need = zeros - ones;
    MinorityClusterSet c = cluster_minority(d, cfg.linkage_threshold);
    c = weight_clusters(std::move(c), d, cfg.knn, cfg.smoothing_weight);
    assign_quotas(c, need);
    return oversample(c, d, seed, cfg.knn);
}

} // namespace vf
