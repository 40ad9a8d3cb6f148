#pragma once
/**
 * @brief k-means with k-means++ seeding, restarts selected by inertia,
 * silhouette scoring, and silhouette-maximizing choice of k.
 *
 * Tie rules: an equidistant point goes to the lower centroid index; equal
 * inertia across restarts keeps the lower trial index.
 */
#include "scd/common.hpp"
#include "scd/parallel.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace scd {

struct KMeansConfig {
    int k = 15;
    int restarts = 10;
    int max_iters = 300;
    double tol = 1e-4;  ///< stop when relative inertia improvement falls below this
    std::uint64_t seed = 0;

    void validate() const {
        require(k >= 1, "kmeans: k must be >= 1");
        require(restarts >= 1, "kmeans: restarts must be >= 1");
        require(max_iters >= 1, "kmeans: max_iters must be >= 1");
        require(tol >= 0.0, "kmeans: tol must be >= 0");
    }
};

struct Clustering {
    Matrix centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations_run = 0;
    /// Inertia after the initial assignment and after every iteration.
    std::vector<double> inertia_trace;
};

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

/// k-means++: first centroid uniform, then proportional to squared distance to the nearest chosen one.
inline Matrix kmeanspp_init(const Matrix& points, int k, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(points.rows());
    require(k >= 1, "kmeans++: k must be >= 1");
    require(static_cast<std::size_t>(k) <= n, "kmeans++: k = " + std::to_string(k) + " exceeds " +
                                                  std::to_string(n) + " points");
    Rng rng(seed);
    Matrix centroids(k, points.cols());
    std::vector<bool> chosen(n, false);
    auto first = static_cast<Index>(rng.below(n));
    centroids.row(0) = points.row(eidx(first));
    chosen[first] = true;

    std::vector<double> d2(n);
    for (Index i = 0; i < n; ++i) d2[i] = squared_distance(points, eidx(i), centroids, 0);

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        Index pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            for (Index i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                cum += d2[i];
                pick = i;
                if (cum > target) break;
            }
        } else {
            // Every point coincides with a chosen centroid; fall back to an unchosen index.
            IndexList rest;
            for (Index i = 0; i < n; ++i)
                if (!chosen[i]) rest.push_back(i);
            pick = rest[static_cast<std::size_t>(rng.below(rest.size()))];
        }
        centroids.row(c) = points.row(eidx(pick));
        chosen[pick] = true;
        for (Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points, eidx(i), centroids, c));
    }
    return centroids;
}

namespace detail {

/// Nearest-centroid assignment; returns inertia and fills per-point squared distances.
inline double assign_points(const Matrix& points, const Matrix& centroids, std::vector<int>& assignments,
                            std::vector<double>& dist2) {
    const auto n = points.rows();
    assignments.resize(static_cast<std::size_t>(n));
    dist2.resize(static_cast<std::size_t>(n));
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            const double d = squared_distance(points, i, centroids, c);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignments[static_cast<std::size_t>(i)] = best;
        dist2[static_cast<std::size_t>(i)] = best_d;
        inertia += best_d;
    }
    return inertia;
}

}  // namespace detail

/// Sum of squared distances from each point to its assigned centroid.
inline double compute_inertia(const Matrix& points, const Matrix& centroids, std::span<const int> assignments) {
    double s = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        s += squared_distance(points, eidx(i), centroids, assignments[i]);
    return s;
}

/**
 * Lloyd iterations from the given centroids. Stops at an assignment
 * fixpoint, after max_iters, or when the relative inertia improvement
 * drops below tol. An empty cluster is reseeded at the point farthest from
 * its current centroid.
 */
inline Clustering lloyd_fit(const Matrix& points, const Matrix& init_centroids, int max_iters, double tol) {
    require(points.rows() > 0, "lloyd: zero points");
    require(init_centroids.cols() == points.cols(), "lloyd: centroid width does not match point width");
    require(init_centroids.rows() >= 1, "lloyd: need at least one centroid");
    require(max_iters >= 1, "lloyd: max_iters must be >= 1");

    const auto n = static_cast<std::size_t>(points.rows());
    const auto k = init_centroids.rows();
    Clustering out;
    out.centroids = init_centroids;
    std::vector<double> dist2;
    out.inertia = detail::assign_points(points, out.centroids, out.assignments, dist2);
    out.inertia_trace.push_back(out.inertia);

    std::vector<int> next_assign;
    std::vector<double> next_dist2;
    for (int it = 1; it <= max_iters; ++it) {
        Matrix updated = Matrix::Zero(k, points.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            updated.row(out.assignments[i]) += points.row(eidx(i));
            ++counts[static_cast<std::size_t>(out.assignments[i])];
        }
        std::vector<bool> taken(n, false);
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                updated.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (!taken[i] && (far == n || dist2[i] > dist2[far])) far = i;
            if (far == n) far = 0;
            taken[far] = true;
            updated.row(c) = points.row(eidx(far));
        }

        const double inertia = detail::assign_points(points, updated, next_assign, next_dist2);
        const bool fixpoint = next_assign == out.assignments;
        const double previous = out.inertia;
        out.centroids = std::move(updated);
        out.assignments.swap(next_assign);
        dist2.swap(next_dist2);
        out.inertia = inertia;
        out.inertia_trace.push_back(inertia);
        out.iterations_run = it;
        if (fixpoint || previous - inertia <= tol * previous) break;
    }
    return out;
}

/// Every restart trial, indexed by trial number (sub-seed = cfg.seed + trial).
inline std::vector<Clustering> fit_trials(const Matrix& points, const KMeansConfig& cfg) {
    cfg.validate();
    require(points.rows() >= cfg.k, "kmeans: k = " + std::to_string(cfg.k) + " exceeds " +
                                        std::to_string(points.rows()) + " points");
    return parallel_map(static_cast<std::size_t>(cfg.restarts), [&](std::size_t t) {
        const Matrix init = kmeanspp_init(points, cfg.k, cfg.seed + t);
        return lloyd_fit(points, init, cfg.max_iters, cfg.tol);
    });
}

/// Index of the minimum-inertia trial, lowest index on ties.
inline std::size_t best_trial(std::span<const Clustering> trials) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < trials.size(); ++t)
        if (trials[t].inertia < trials[best].inertia) best = t;
    return best;
}

inline Clustering fit_with_restarts(const Matrix& points, const KMeansConfig& cfg) {
    auto trials = fit_trials(points, cfg);
    return std::move(trials[best_trial(trials)]);
}

/**
 * Mean silhouette (b - a) / max(a, b). Members of singleton clusters score
 * 0, and a point with a = b = 0 scores 0.
 */
inline double silhouette_score(const Matrix& points, std::span<const int> assignments) {
    const auto n = assignments.size();
    require(static_cast<std::size_t>(points.rows()) == n && n > 0, "silhouette: size mismatch or empty input");
    const int k = *std::max_element(assignments.begin(), assignments.end()) + 1;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) {
        require(a >= 0, "silhouette: negative cluster id");
        ++sizes[static_cast<std::size_t>(a)];
    }
    int nonempty = 0;
    for (auto s : sizes) nonempty += s > 0;
    require(nonempty >= 2, "silhouette: need at least two clusters");
    for (auto s : sizes) require(s > 0, "silhouette: empty cluster id");

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(assignments[i]);
        if (sizes[own] == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sums[static_cast<std::size_t>(assignments[j])] += std::sqrt(squared_distance(points, eidx(i), points, eidx(j)));
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

/// Position of the largest score; the first one wins ties.
inline std::size_t first_argmax(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

struct KChoice {
    int k = 0;
    std::vector<double> silhouettes;  ///< one per candidate k, starting at k_min
};

/// Fit each k in [k_min, k_max] and keep the one with the highest silhouette (smaller k on ties).
inline KChoice choose_k(const Matrix& points, int k_min, int k_max, KMeansConfig cfg) {
    require(k_min >= 2, "choose_k: k_min must be >= 2");
    require(k_max >= k_min, "choose_k: k_max must be >= k_min");
    require(points.rows() > k_max, "choose_k: need more points than k_max");
    KChoice out;
    for (int k = k_min; k <= k_max; ++k) {
        cfg.k = k;
        const auto fit = fit_with_restarts(points, cfg);
        // Reseeding keeps every cluster nonempty, but duplicate points can still tie; compact ids first.
        std::vector<int> ids(static_cast<std::size_t>(k), -1);
        std::vector<int> compact(fit.assignments.size());
        int next = 0;
        for (std::size_t i = 0; i < compact.size(); ++i) {
            auto& id = ids[static_cast<std::size_t>(fit.assignments[i])];
            if (id < 0) id = next++;
            compact[i] = id;
        }
        out.silhouettes.push_back(next >= 2 ? silhouette_score(points, compact) : -1.0);
    }
    out.k = k_min + static_cast<int>(first_argmax(out.silhouettes));
    return out;
}

}  // namespace scd
