#pragma once
/**
 * @brief Candidate-cluster features (learnability, density, size) and the
 * policies that pick which cluster becomes a new class.
 *
 * Learnability trains a fresh classifier to predict cluster membership and
 * scores each cluster by its held-out recall. Clusters too small to split
 * score 0 and are flagged unscoreable.
 */
#include "scd/clustering.hpp"
#include "scd/learner.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scd {

struct ClusterFeatures {
    int cluster_id = 0;
    std::size_t size = 0;
    double learnability = 0.0;
    double density = 0.0;
    bool scoreable = true;
};

struct SelectionPolicy {
    enum class Kind { learnability, random, density, threshold };
    Kind kind = Kind::learnability;
    double min_accuracy = 0.95;  ///< threshold policy only
    std::uint64_t seed = 0;      ///< random policy only

    void validate() const {
        require(min_accuracy >= 0.0 && min_accuracy <= 1.0, "policy: min_accuracy must be in [0,1]");
    }
};

inline std::string to_string(SelectionPolicy::Kind k) {
    switch (k) {
        case SelectionPolicy::Kind::learnability: return "learnability";
        case SelectionPolicy::Kind::random: return "random";
        case SelectionPolicy::Kind::density: return "density";
        case SelectionPolicy::Kind::threshold: return "threshold";
    }
    return "?";
}

inline std::optional<SelectionPolicy::Kind> policy_kind_from_string(const std::string& s) {
    using K = SelectionPolicy::Kind;
    if (s == "learnability") return K::learnability;
    if (s == "random") return K::random;
    if (s == "density") return K::density;
    if (s == "threshold") return K::threshold;
    return std::nullopt;
}

struct LearnabilityConfig {
    double holdout_fraction = 0.2;
    std::size_t min_cluster_size = 5;
    std::vector<int> hidden_dims{32};
    int epochs = 10;
    AdamConfig adam{};
    /// Score on embeddings instead of raw features (ablation).
    bool use_embeddings = false;
    /// Add the already-labeled classes as extra targets in the learnability problem.
    bool include_existing = false;

    void validate() const {
        require(holdout_fraction > 0.0 && holdout_fraction < 1.0, "learnability: holdout_fraction must be in (0,1)");
        require(min_cluster_size >= 2, "learnability: min_cluster_size must be >= 2");
        require(epochs >= 1, "learnability: epochs must be >= 1");
        for (int h : hidden_dims) require(h >= 1, "learnability: hidden dims must be >= 1");
        adam.validate();
    }
};

/**
 * Per-cluster held-out recall of a fresh classifier trained to predict the
 * cluster ids in `assignments` from `features`. Result index = cluster id.
 *
 * `extra_features` / `extra_labels` optionally add context classes (ids
 * >= the number of clusters) that are trained on but not scored.
 */
inline std::vector<double> learnability_scores(const Matrix& features, std::span<const int> assignments,
                                               const LearnabilityConfig& cfg, std::uint64_t seed,
                                               const Matrix* extra_features = nullptr,
                                               std::span<const int> extra_labels = {}) {
    cfg.validate();
    require(static_cast<std::size_t>(features.rows()) == assignments.size(), "learnability: size mismatch");
    require(!assignments.empty(), "learnability: no samples");
    const int k = *std::max_element(assignments.begin(), assignments.end()) + 1;
    for (int a : assignments) require(a >= 0, "learnability: negative cluster id");

    // Canonical ids in order of first appearance make the result independent of cluster naming.
    std::vector<int> canonical_of(static_cast<std::size_t>(k), -1);
    std::vector<int> original_of;
    std::vector<int> canon(assignments.size());
    for (Index i = 0; i < assignments.size(); ++i) {
        auto& id = canonical_of[static_cast<std::size_t>(assignments[i])];
        if (id < 0) {
            id = static_cast<int>(original_of.size());
            original_of.push_back(assignments[i]);
        }
        canon[i] = id;
    }
    const auto populated = original_of.size();
    require(populated >= 2, "learnability: need at least two clusters");
    std::vector<IndexList> members(populated);
    for (Index i = 0; i < canon.size(); ++i) members[static_cast<std::size_t>(canon[i])].push_back(i);

    const int n_clusters = static_cast<int>(populated);
    int n_targets = n_clusters;
    if (extra_features) {
        require(extra_features->cols() == features.cols() &&
                    static_cast<std::size_t>(extra_features->rows()) == extra_labels.size(),
                "learnability: context features do not match");
        for (int y : extra_labels) {
            require(y >= 0, "learnability: negative context label");
            n_targets = std::max(n_targets, n_clusters + y + 1);
        }
    }

    IndexList train_rows, test_rows;
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto m = members[c];
        if (m.size() < cfg.min_cluster_size) {
            // Too small to stratify: train on everything, never scored.
            train_rows.insert(train_rows.end(), m.begin(), m.end());
            continue;
        }
        Rng rng(derive_seed(seed, 0x100 + c));
        rng.shuffle(m);
        auto n_test = static_cast<std::size_t>(std::lround(cfg.holdout_fraction * static_cast<double>(m.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, m.size() - 1);
        test_rows.insert(test_rows.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_test));
        train_rows.insert(train_rows.end(), m.begin() + static_cast<std::ptrdiff_t>(n_test), m.end());
    }
    std::sort(train_rows.begin(), train_rows.end());

    Matrix x_train = take_rows(features, train_rows);
    std::vector<int> y_train;
    for (Index i : train_rows) y_train.push_back(canon[i]);
    if (extra_features && extra_features->rows() > 0) {
        Matrix joined(x_train.rows() + extra_features->rows(), x_train.cols());
        joined << x_train, *extra_features;
        x_train = std::move(joined);
        for (int y : extra_labels) y_train.push_back(n_clusters + y);
    }

    NetworkConfig net{static_cast<int>(features.cols()), cfg.hidden_dims, std::max(2, n_targets)};
    Model model = init_model(net, derive_seed(seed, 1));
    AdamConfig adam = cfg.adam;
    adam.seed = derive_seed(seed, 2);
    train_epochs(model, x_train, y_train, adam, cfg.epochs);

    std::vector<double> scores(static_cast<std::size_t>(k), 0.0);
    if (test_rows.empty()) return scores;
    const Matrix p = predict_proba(model, take_rows(features, test_rows));
    std::vector<std::size_t> hits(populated, 0), totals(populated, 0);
    for (std::size_t r = 0; r < test_rows.size(); ++r) {
        const auto truth = static_cast<std::size_t>(canon[test_rows[r]]);
        Eigen::Index arg = 0;
        p.row(eidx(r)).maxCoeff(&arg);
        ++totals[truth];
        hits[truth] += static_cast<std::size_t>(arg) == truth;
    }
    for (std::size_t c = 0; c < populated; ++c)
        if (totals[c] > 0)
            scores[static_cast<std::size_t>(original_of[c])] =
                static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
    return scores;
}

/// Mean Euclidean distance of members to their centroid; lower is denser.
inline std::vector<double> density_scores(const Matrix& points, const Clustering& clustering) {
    const auto k = static_cast<std::size_t>(clustering.centroids.rows());
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < clustering.assignments.size(); ++i) {
        const auto c = static_cast<std::size_t>(clustering.assignments[i]);
        sum[c] += std::sqrt(squared_distance(points, eidx(i), clustering.centroids, eidx(c)));
        ++count[c];
    }
    for (std::size_t c = 0; c < k; ++c) sum[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0;
    return sum;
}

/**
 * Apply a policy. Single-pick policies return one cluster id; the threshold
 * policy returns every cluster whose learnability exceeds min_accuracy
 * (possibly none), in ascending id order.
 */
inline std::vector<int> select(std::span<const ClusterFeatures> features, const SelectionPolicy& policy) {
    require(!features.empty(), "select: empty feature list");
    policy.validate();
    using K = SelectionPolicy::Kind;
    std::vector<ClusterFeatures> sorted(features.begin(), features.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.cluster_id < b.cluster_id; });

    switch (policy.kind) {
        case K::learnability: {
            // Higher learnability, then larger size, then lower id.
            const auto* best = &sorted.front();
            for (const auto& f : sorted)
                if (f.learnability > best->learnability ||
                    (f.learnability == best->learnability && f.size > best->size))
                    best = &f;
            return {best->cluster_id};
        }
        case K::density: {
            const auto* best = &sorted.front();
            for (const auto& f : sorted)
                if (f.density < best->density || (f.density == best->density && f.size > best->size)) best = &f;
            return {best->cluster_id};
        }
        case K::random: {
            Rng rng(policy.seed);
            return {sorted[static_cast<std::size_t>(rng.below(sorted.size()))].cluster_id};
        }
        case K::threshold: {
            std::vector<int> out;
            for (const auto& f : sorted)
                if (f.learnability > policy.min_accuracy) out.push_back(f.cluster_id);
            return out;
        }
    }
    return {};
}

}  // namespace scd

namespace scd {

/// Assemble per-cluster feature records. Clusters below `min_cluster_size` are unscoreable with learnability 0.
inline std::vector<ClusterFeatures> cluster_features(const Clustering& clustering, std::span<const double> learnability,
                                                     std::span<const double> density, std::size_t min_cluster_size) {
    const auto k = static_cast<std::size_t>(clustering.centroids.rows());
    std::vector<std::size_t> sizes(k, 0);
    for (int a : clustering.assignments) ++sizes[static_cast<std::size_t>(a)];
    std::vector<ClusterFeatures> out;
    for (std::size_t c = 0; c < k; ++c) {
        ClusterFeatures f;
        f.cluster_id = static_cast<int>(c);
        f.size = sizes[c];
        f.scoreable = sizes[c] >= min_cluster_size;
        f.learnability = f.scoreable && c < learnability.size() ? learnability[c] : 0.0;
        f.density = c < density.size() ? density[c] : 0.0;
        out.push_back(f);
    }
    return out;
}

}  // namespace scd
