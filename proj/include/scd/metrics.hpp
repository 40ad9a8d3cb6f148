#pragma once
/**
 * @brief Discovery quality metrics.
 *
 * Cluster accuracy maps each cluster to its plurality ground-truth label
 * (many clusters may share a label). Dataset Reconstruction Accuracy (DRA)
 * is the fraction of all N = l + o training points whose label is right:
 * every human-labeled point counts as correct, and every other point is
 * correct iff its ground truth equals the label of the group it was put in.
 *
 *     DRA = (l + o * sum_k w_k * a_k) / N,   w_k = size_k / o
 *
 * The implementation accumulates integer overlap counts, so it equals the
 * per-point indicator average exactly.
 */
#include "scd/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace scd {

struct ClusterOverlap {
    int cluster_id = 0;
    int mapped_label = 0;
    std::size_t overlap = 0;
    std::size_t size = 0;
    double accuracy = 0.0;  ///< overlap / size
    double weight = 0.0;    ///< size / total points covered
    bool frozen = false;    ///< label fixed earlier rather than by plurality now
};

struct OverlapMapping {
    std::vector<ClusterOverlap> clusters;  ///< ascending cluster id
    std::size_t total = 0;

    /// Size-weighted mean accuracy, sum_k w_k a_k.
    double weighted_accuracy() const {
        double s = 0.0;
        for (const auto& c : clusters) s += c.weight * c.accuracy;
        return s;
    }
    std::size_t correct() const {
        std::size_t s = 0;
        for (const auto& c : clusters) s += c.overlap;
        return s;
    }
};

/// Plurality mapping per cluster; ties go to the lower label.
inline OverlapMapping cluster_accuracy(std::span<const int> assignments, std::span<const int> true_labels) {
    require(assignments.size() == true_labels.size(), "cluster_accuracy: length mismatch");
    require(!assignments.empty(), "cluster_accuracy: empty input");
    std::map<int, std::map<int, std::size_t>> counts;
    for (std::size_t i = 0; i < assignments.size(); ++i) ++counts[assignments[i]][true_labels[i]];

    OverlapMapping out;
    out.total = assignments.size();
    for (const auto& [cluster, by_label] : counts) {
        ClusterOverlap c;
        c.cluster_id = cluster;
        for (const auto& [label, n] : by_label) {
            c.size += n;
            if (n > c.overlap) {  // map iterates labels ascending, so ties keep the lower one
                c.overlap = n;
                c.mapped_label = label;
            }
        }
        c.accuracy = static_cast<double>(c.overlap) / static_cast<double>(c.size);
        c.weight = static_cast<double>(c.size) / static_cast<double>(out.total);
        out.clusters.push_back(c);
    }
    return out;
}

/// A group of samples whose discovered label was fixed at acceptance time.
struct FrozenCluster {
    IndexList members;  ///< dataset indices
    int label = 0;      ///< ground-truth class the group is credited with
};

struct ReconstructionReport {
    std::size_t ell = 0;  ///< human-labeled points
    std::size_t o = 0;    ///< frozen + clustered points
    std::size_t n = 0;    ///< ell + o
    std::size_t correct = 0;
    double weighted_ood_accuracy = 0.0;  ///< sum_k w_k a_k over frozen and live clusters
    double dra = 1.0;
    std::vector<ClusterOverlap> clusters;  ///< frozen groups first, then live clusters

    /// Accuracy restricted to the live (non-frozen) clusters, size-weighted.
    double live_cluster_accuracy() const {
        std::size_t size = 0, overlap = 0;
        for (const auto& c : clusters)
            if (!c.frozen) {
                size += c.size;
                overlap += c.overlap;
            }
        return size ? static_cast<double>(overlap) / static_cast<double>(size) : 0.0;
    }
};

/**
 * DRA over `ell` human-labeled points, frozen groups, and the current pool
 * (dataset indices `pool`, cluster ids `pool_assignments`). `true_labels`
 * is indexed by dataset index.
 */
inline ReconstructionReport dataset_reconstruction_accuracy(std::size_t ell, std::span<const Index> pool,
                                                            std::span<const int> pool_assignments,
                                                            std::span<const int> true_labels,
                                                            std::span<const FrozenCluster> frozen = {}) {
    require(pool.size() == pool_assignments.size(), "dra: pool and assignments differ in length");
    std::set<Index> seen;
    for (Index i : pool) {
        require(i < true_labels.size(), "dra: pool index out of range");
        require(seen.insert(i).second, "dra: duplicate pool index");
    }
    for (const auto& g : frozen)
        for (Index i : g.members) {
            require(i < true_labels.size(), "dra: frozen index out of range");
            require(seen.insert(i).second, "dra: frozen member " + std::to_string(i) + " overlaps the pool or another group");
        }

    ReconstructionReport r;
    r.ell = ell;
    r.o = seen.size();
    r.n = ell + r.o;
    require(r.n > 0, "dra: no points to score");

    int frozen_id = 0;
    for (const auto& g : frozen) {
        ClusterOverlap c;
        c.cluster_id = frozen_id++;
        c.mapped_label = g.label;
        c.size = g.members.size();
        c.frozen = true;
        for (Index i : g.members) c.overlap += true_labels[i] == g.label;
        c.accuracy = c.size ? static_cast<double>(c.overlap) / static_cast<double>(c.size) : 0.0;
        r.clusters.push_back(c);
    }
    if (!pool.empty()) {
        std::vector<int> pool_truth;
        pool_truth.reserve(pool.size());
        for (Index i : pool) pool_truth.push_back(true_labels[i]);
        for (auto c : cluster_accuracy(pool_assignments, pool_truth).clusters) r.clusters.push_back(c);
    }
    for (auto& c : r.clusters) {
        c.weight = r.o ? static_cast<double>(c.size) / static_cast<double>(r.o) : 0.0;
        r.correct += c.overlap;
        r.weighted_ood_accuracy += c.weight * c.accuracy;
    }
    r.correct += ell;
    r.dra = static_cast<double>(r.correct) / static_cast<double>(r.n);
    return r;
}

/// Closed-form DRA from counts and per-cluster (weight, accuracy).
inline double dra_formula(double ell, double o, std::span<const double> weights, std::span<const double> accuracies) {
    require(weights.size() == accuracies.size(), "dra_formula: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * accuracies[k];
    return (ell + o * s) / (ell + o);
}

/// Normalized mutual information, arithmetic-mean normalization. 0 when either side has one value.
inline double nmi(std::span<const int> assignments, std::span<const int> true_labels) {
    require(assignments.size() == true_labels.size(), "nmi: length mismatch");
    require(!assignments.empty(), "nmi: empty input");
    const auto n = static_cast<double>(assignments.size());
    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> pab;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        pa[assignments[i]] += 1.0;
        pb[true_labels[i]] += 1.0;
        pab[{assignments[i], true_labels[i]}] += 1.0;
    }
    if (pa.size() < 2 || pb.size() < 2) return 0.0;
    auto entropy = [n](const std::map<int, double>& p) {
        double h = 0.0;
        for (const auto& [_, c] : p) h -= c / n * std::log(c / n);
        return h;
    };
    double mi = 0.0;
    for (const auto& [key, c] : pab) mi += c / n * std::log(c * n / (pa[key.first] * pb[key.second]));
    const double denom = 0.5 * (entropy(pa) + entropy(pb));
    return std::clamp(mi / denom, 0.0, 1.0);
}

}  // namespace scd
