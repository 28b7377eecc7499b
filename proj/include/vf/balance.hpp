#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace vf {

struct LabeledMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels; // 1 = deceased
    std::vector<std::string> stay_ids;

    size_t size() const { return rows.size(); }
};

// Partition of the minority rows produced by the overlap-aware agglomerative
// step, plus the adaptive weights and synthetic-sample quotas layered on top.
struct MinorityClusterSet {
    std::vector<size_t> minority_rows;         // global row indices, input order
    std::vector<std::vector<size_t>> clusters; // global row indices, each sorted
    std::vector<double> weights;               // per cluster, sums to 1
    std::vector<size_t> quota;                 // per cluster synthetic counts
};

struct BalanceConfig {
    double linkage_threshold = std::numeric_limits<double>::infinity();
    int knn = 5;
    double smoothing_weight = 1e-3; // floor for clusters the kNN gets fully right
};

// Average-linkage agglomeration over z-scored minority rows. A merge is
// rejected when the merged cluster's bounding hypersphere strictly contains
// any majority row; distance ties break on the smallest member index.
MinorityClusterSet cluster_minority(const LabeledMatrix& d, double linkage_threshold);

// Cluster weight proportional to the mean leave-one-out kNN misclassification
// probability of its members against the full dataset.
MinorityClusterSet weight_clusters(MinorityClusterSet c, const LabeledMatrix& d, int knn = 5,
                                   double smoothing_weight = 1e-3);

// Largest-remainder split of `need` synthetic samples across cluster weights.
void assign_quotas(MinorityClusterSet& c, size_t need);

// Fills each cluster's quota with x + lambda (x' - x) draws, x' one of the
// base row's knn nearest same-cluster neighbors. Returns originals plus
// synthetics; class counts come out 1:1.
LabeledMatrix oversample(const MinorityClusterSet& c, const LabeledMatrix& d, uint64_t seed, int knn = 5);

// cluster -> weight -> quota -> oversample. Already-balanced input is
// returned unchanged; majority rows are never touched.
LabeledMatrix balance_dataset(const LabeledMatrix& d, uint64_t seed, const BalanceConfig& cfg = {});

} // namespace vf
