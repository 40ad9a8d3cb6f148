#pragma once
/**
 * @brief Discovery loops: static (cluster the whole pool once), dynamic
 * (accept one cluster per round, retrain, re-embed, re-cluster), and the
 * class-count experiment.
 *
 * DRA bookkeeping for dynamic runs: an accepted cluster is frozen with the
 * plurality ground-truth label it had when accepted; whatever remains in the
 * pool is re-clustered with the current model at every evaluation.
 */
#include "scd/clustering.hpp"
#include "scd/dataset.hpp"
#include "scd/learner.hpp"
#include "scd/metrics.hpp"
#include "scd/ood.hpp"
#include "scd/selection.hpp"

#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace scd {

struct DataSource {
    enum class Kind { idx, csv, gaussian };
    Kind kind = Kind::gaussian;
    std::string images_path;
    std::string labels_path;
    std::string csv_path;
    GaussianMixtureSpec gaussian{};
};

inline Dataset load_source(const DataSource& src) {
    switch (src.kind) {
        case DataSource::Kind::idx: return load_idx(src.images_path, src.labels_path);
        case DataSource::Kind::csv: return load_csv(src.csv_path);
        case DataSource::Kind::gaussian: return synth_gaussian(src.gaussian);
    }
    throw InvalidArgument("unknown data source kind");
}

struct OodMode {
    bool oracle = true;
    double quantile = 0.95;  ///< detector mode only
};

struct ExperimentConfig {
    DataSource data;
    SplitSpec split;
    /// Hidden layers of the representation learner; input and output widths come from the data.
    std::vector<int> hidden_dims{128};
    AdamConfig adam;
    KMeansConfig kmeans;
    SelectionPolicy policy;
    LearnabilityConfig learnability;
    int epochs_initial = 1;
    int epochs_per_round = 1;
    std::optional<int> rounds;  ///< defaults to the number of held-out classes
    OodMode ood;
    std::uint64_t seed = 0;

    int effective_rounds() const { return rounds.value_or(static_cast<int>(split.held_out_classes.size())); }

    void validate() const {
        require(epochs_initial >= 0, "config: epochs_initial must be >= 0");
        require(epochs_per_round >= 0, "config: epochs_per_round must be >= 0");
        require(!rounds || *rounds >= 0, "config: rounds must be >= 0");
        require(ood.quantile > 0.0 && ood.quantile < 1.0, "config: ood quantile must be in (0,1)");
        for (int h : hidden_dims) require(h >= 1, "config: hidden dims must be >= 1");
        require(!hidden_dims.empty(), "config: at least one hidden layer is required");
        adam.validate();
        kmeans.validate();
        policy.validate();
        learnability.validate();
    }
};

/// Every seed a run consumes, derived from the master seed.
struct SeedRegistry {
    std::uint64_t master = 0;
    std::uint64_t split = 0;
    std::uint64_t init = 0;
    std::uint64_t shuffle = 0;
    std::uint64_t kmeans = 0;
    std::uint64_t policy = 0;
    std::uint64_t learnability = 0;
    std::uint64_t expand = 0;

    static SeedRegistry from(std::uint64_t master) {
        return {master,
                derive_seed(master, 1),
                derive_seed(master, 2),
                derive_seed(master, 3),
                derive_seed(master, 4),
                derive_seed(master, 5),
                derive_seed(master, 6),
                derive_seed(master, 7)};
    }
};

struct AcceptedCluster {
    int round = 0;
    IndexList members;
    int visible_label = 0;
    int plurality_label = 0;  ///< ground truth at acceptance, used only for scoring
    double purity = 0.0;
    double learnability = 0.0;
    std::size_t size = 0;
};

struct RoundRecord {
    int round = 0;
    double dra = 0.0;
    double mean_cluster_accuracy = 0.0;  ///< size-weighted over live pool clusters
    std::size_t ood_pool_size = 0;
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    ReconstructionReport report;
    std::vector<ClusterFeatures> candidates;  ///< empty for evaluation-only rounds
    std::vector<ClusterOverlap> candidate_overlap;  ///< ground-truth view of the candidates
    std::vector<int> accepted_ids;
};

struct DiscoveryState {
    ExperimentConfig config;
    SeedRegistry seeds;
    Dataset dataset;
    Model model;
    int round = 0;
    std::vector<AcceptedCluster> accepted;
    std::optional<OodDetector> detector;
    std::vector<RoundRecord> history;
    std::string stop_reason;

    std::size_t human_count() const {
        std::size_t n = 0;
        for (Index i = 0; i < dataset.size(); ++i)
            n += dataset.labels[i] && dataset.provenance[i].kind == Provenance::Kind::human;
        return n;
    }

    /// Labeled, non-human samples grouped by the ground truth they are credited with.
    std::vector<FrozenCluster> frozen_groups() const {
        std::vector<FrozenCluster> out;
        std::map<int, IndexList> routed;
        for (Index i = 0; i < dataset.size(); ++i)
            if (dataset.labels[i] && dataset.provenance[i].kind == Provenance::Kind::routed)
                routed[*dataset.labels[i]].push_back(i);
        for (auto& [visible, members] : routed)
            out.push_back({std::move(members), dataset.visible_to_true[static_cast<std::size_t>(visible)]});
        for (const auto& a : accepted) out.push_back({a.members, a.plurality_label});
        return out;
    }
};

namespace detail {

inline std::vector<int> visible_labels(const Dataset& d, std::span<const Index> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (Index i : rows) out.push_back(*d.labels[i]);
    return out;
}

inline std::vector<double> train_on_labeled(DiscoveryState& s, int epochs) {
    if (epochs <= 0) return {};
    const auto rows = s.dataset.labeled_indices();
    AdamConfig adam = s.config.adam;
    adam.seed = s.seeds.shuffle;
    return train_epochs(s.model, take_rows(s.dataset.features, rows), visible_labels(s.dataset, rows), adam, epochs);
}

struct PoolClustering {
    IndexList pool;
    Matrix embeddings;
    Clustering clustering;
};

inline PoolClustering cluster_pool(const DiscoveryState& s, std::uint64_t tag) {
    PoolClustering out;
    out.pool = s.dataset.unlabeled_indices();
    if (out.pool.empty()) return out;
    out.embeddings = embed(s.model, take_rows(s.dataset.features, out.pool));
    KMeansConfig km = s.config.kmeans;
    km.k = std::min<int>(km.k, static_cast<int>(out.pool.size()));
    km.seed = derive_seed(s.seeds.kmeans, tag);
    out.clustering = fit_with_restarts(out.embeddings, km);
    return out;
}

inline std::uint64_t eval_tag(int round) { return 1000 + static_cast<std::uint64_t>(round); }
inline std::uint64_t select_tag(int round) { return 2000 + static_cast<std::uint64_t>(round); }

}  // namespace detail

/**
 * Load and split the data, build and train the initial model, and route the
 * incoming (unlabeled) samples: ground truth decides in oracle mode, the
 * calibrated confidence detector decides otherwise. Samples judged
 * in-distribution join the training data under their (true or predicted)
 * class; the rest form the discovery pool.
 */
inline DiscoveryState prepare(const ExperimentConfig& cfg, const Dataset* preloaded = nullptr) {
    cfg.validate();
    DiscoveryState s;
    s.config = cfg;
    s.seeds = SeedRegistry::from(cfg.seed);
    SplitSpec split = cfg.split;
    split.seed = s.seeds.split;
    s.dataset = make_split(preloaded ? *preloaded : load_source(cfg.data), split);
    require(s.dataset.n_classes_visible >= 2, "config: at least two retained classes are required");

    NetworkConfig net{static_cast<int>(s.dataset.dim()), cfg.hidden_dims, s.dataset.n_classes_visible};
    s.model = init_model(net, s.seeds.init);
    detail::train_on_labeled(s, cfg.epochs_initial);

    // Route incoming samples of retained classes; held-out samples stay pooled in oracle mode.
    const auto incoming = s.dataset.unlabeled_indices();
    std::vector<int> true_to_visible(static_cast<std::size_t>(s.dataset.n_true_classes()), -1);
    for (int v = 0; v < s.dataset.n_classes_visible; ++v)
        true_to_visible[static_cast<std::size_t>(s.dataset.visible_to_true[static_cast<std::size_t>(v)])] = v;
    if (cfg.ood.oracle) {
        for (Index i : incoming) {
            const int v = true_to_visible[static_cast<std::size_t>(s.dataset.true_labels[i])];
            if (v >= 0) {
                s.dataset.labels[i] = v;
                s.dataset.provenance[i] = Provenance::routed();
            }
        }
    } else if (!incoming.empty()) {
        const auto labeled = s.dataset.labeled_indices();
        s.detector = calibrate(s.model, take_rows(s.dataset.features, labeled), cfg.ood.quantile);
        const auto part = partition(*s.detector, s.model, take_rows(s.dataset.features, incoming));
        for (std::size_t j = 0; j < part.in_dist.size(); ++j) {
            const Index i = incoming[part.in_dist[j]];
            s.dataset.labels[i] = part.predicted_labels[j];
            s.dataset.provenance[i] = Provenance::routed();
        }
    }
    return s;
}

/**
 * Score the state: re-cluster the residual pool with the current model and
 * combine it with the frozen groups. Does not modify the state.
 */
inline ReconstructionReport evaluate_state(const DiscoveryState& s) {
    const auto pc = detail::cluster_pool(s, detail::eval_tag(s.round));
    return dataset_reconstruction_accuracy(s.human_count(), pc.pool, pc.clustering.assignments,
                                           s.dataset.true_labels, s.frozen_groups());
}

inline RoundRecord make_record(const DiscoveryState& s, ReconstructionReport report) {
    RoundRecord r;
    r.round = s.round;
    r.dra = report.dra;
    r.mean_cluster_accuracy = report.live_cluster_accuracy();
    r.ood_pool_size = s.dataset.unlabeled_indices().size();
    r.report = std::move(report);
    return r;
}

namespace detail {

inline AcceptedCluster accept(DiscoveryState& s, const IndexList& members, double learnability) {
    std::vector<int> truth;
    for (Index i : members) truth.push_back(s.dataset.true_labels[i]);
    const std::vector<int> one(members.size(), 0);
    const auto overlap = cluster_accuracy(one, truth).clusters.front();
    AcceptedCluster a;
    a.round = s.round;
    a.members = members;
    a.visible_label = add_class(s.dataset, members, s.round);
    a.plurality_label = overlap.mapped_label;
    a.purity = overlap.accuracy;
    a.learnability = learnability;
    a.size = members.size();
    s.accepted.push_back(a);
    return a;
}

}  // namespace detail

struct StaticResult {
    DiscoveryState state;
    ReconstructionReport report;
};

/**
 * Cluster the whole pool once and give every cluster its own new label.
 * With epochs_initial = 0 the embedder is untrained (random-embedding baseline).
 */
inline StaticResult run_static(const ExperimentConfig& cfg, const Dataset* preloaded = nullptr) {
    DiscoveryState s = prepare(cfg, preloaded);
    const auto pc = detail::cluster_pool(s, detail::eval_tag(0));
    if (pc.pool.empty()) throw InvalidArgument("run_static: the out-of-distribution pool is empty");
    auto report = dataset_reconstruction_accuracy(s.human_count(), pc.pool, pc.clustering.assignments,
                                                  s.dataset.true_labels, s.frozen_groups());
    s.history.push_back(make_record(s, report));

    s.round = 1;
    std::map<int, IndexList> members;
    for (std::size_t j = 0; j < pc.pool.size(); ++j) members[pc.clustering.assignments[j]].push_back(pc.pool[j]);
    for (auto& [_, m] : members) detail::accept(s, m, 0.0);
    s.stop_reason = "static";
    return {std::move(s), std::move(report)};
}

/// Cluster, score, and accept for one round. Returns false (with stop_reason set) if nothing was accepted.
inline bool discovery_round(DiscoveryState& s) {
    const auto& cfg = s.config;
    const auto pool_size = s.dataset.unlabeled_indices().size();
    if (pool_size < 2 * cfg.learnability.min_cluster_size || pool_size < 2) {
        s.stop_reason = "pool exhausted (" + std::to_string(pool_size) + " samples left)";
        return false;
    }
    ++s.round;
    const auto pc = detail::cluster_pool(s, detail::select_tag(s.round));
    const auto& cl = pc.clustering;

    const auto density = density_scores(pc.embeddings, cl);
    std::vector<double> learn;
    {
        const Matrix raw = take_rows(s.dataset.features, pc.pool);
        const Matrix& x = cfg.learnability.use_embeddings ? pc.embeddings : raw;
        std::optional<Matrix> context;
        std::vector<int> context_labels;
        if (cfg.learnability.include_existing) {
            const auto rows = s.dataset.labeled_indices();
            const Matrix feats = take_rows(s.dataset.features, rows);
            context = cfg.learnability.use_embeddings ? embed(s.model, feats) : feats;
            context_labels = detail::visible_labels(s.dataset, rows);
        }
        learn = learnability_scores(x, cl.assignments, cfg.learnability,
                                    derive_seed(s.seeds.learnability, static_cast<std::uint64_t>(s.round)),
                                    context ? &*context : nullptr, context_labels);
    }
    auto features = cluster_features(cl, learn, density, cfg.learnability.min_cluster_size);

    SelectionPolicy policy = cfg.policy;
    policy.seed = derive_seed(s.seeds.policy, static_cast<std::uint64_t>(s.round));
    const auto picked = select(features, policy);

    RoundRecord pending;
    pending.candidates = features;
    {
        std::vector<int> truth;
        for (Index i : pc.pool) truth.push_back(s.dataset.true_labels[i]);
        pending.candidate_overlap = cluster_accuracy(cl.assignments, truth).clusters;
    }
    pending.accepted_ids = picked;
    if (picked.empty()) {
        s.stop_reason = "no cluster passed the acceptance threshold in round " + std::to_string(s.round);
        --s.round;
        return false;
    }
    for (int id : picked) {
        IndexList members;
        for (std::size_t j = 0; j < pc.pool.size(); ++j)
            if (cl.assignments[j] == id) members.push_back(pc.pool[j]);
        detail::accept(s, members, features[static_cast<std::size_t>(id)].learnability);
    }
    expand_outputs(s.model, s.dataset.n_classes_visible, derive_seed(s.seeds.expand, static_cast<std::uint64_t>(s.round)));
    const auto losses = detail::train_on_labeled(s, cfg.epochs_per_round);

    auto record = make_record(s, evaluate_state(s));
    record.candidates = std::move(pending.candidates);
    record.candidate_overlap = std::move(pending.candidate_overlap);
    record.accepted_ids = std::move(pending.accepted_ids);
    if (!losses.empty()) record.train_loss = losses.back();
    s.history.push_back(std::move(record));
    return true;
}

/// Round-0 evaluation followed by up to `rounds` accept-and-retrain rounds.
inline DiscoveryState run_dynamic(const ExperimentConfig& cfg, const Dataset* preloaded = nullptr) {
    DiscoveryState s = prepare(cfg, preloaded);
    if (s.dataset.unlabeled_indices().empty())
        throw InvalidArgument("run_dynamic: the out-of-distribution pool is empty");
    s.history.push_back(make_record(s, evaluate_state(s)));
    const int rounds = cfg.effective_rounds();
    for (int r = 0; r < rounds; ++r)
        if (!discovery_round(s)) break;
    if (s.stop_reason.empty()) s.stop_reason = "completed " + std::to_string(s.round) + " rounds";
    return s;
}

struct ClassCountRow {
    int class_count = 0;
    double cluster_accuracy = 0.0;  ///< size-weighted over the evaluation pool
    std::size_t pool_size = 0;
    std::size_t per_class = 0;
};

/**
 * Train on the first c non-evaluation classes (equal per-class caps) and
 * cluster the fixed pool of `eval_held_out` classes, for each c.
 */
inline std::vector<ClassCountRow> run_class_count_experiment(const ExperimentConfig& base, std::vector<int> class_counts,
                                                             const std::set<int>& eval_held_out,
                                                             const Dataset* preloaded = nullptr) {
    require(!class_counts.empty(), "classcount: no class counts given");
    require(!eval_held_out.empty(), "classcount: evaluation classes are empty");
    const Dataset full = preloaded ? *preloaded : load_source(base.data);
    const int n_classes = full.n_true_classes();
    std::vector<int> available;
    for (int c = 0; c < n_classes; ++c)
        if (!eval_held_out.count(c)) available.push_back(c);
    for (int c : class_counts)
        require(c >= 2 && c <= static_cast<int>(available.size()),
                "classcount: class count " + std::to_string(c) + " must be in [2, " +
                    std::to_string(available.size()) + "]");

    std::vector<std::size_t> per_class(static_cast<std::size_t>(n_classes), 0);
    for (int y : full.true_labels) ++per_class[static_cast<std::size_t>(y)];
    int cap = base.split.per_class_cap.value_or(std::numeric_limits<int>::max());
    const int max_count = *std::max_element(class_counts.begin(), class_counts.end());
    for (int c : eval_held_out) cap = std::min<int>(cap, static_cast<int>(per_class[static_cast<std::size_t>(c)]));
    for (int j = 0; j < max_count; ++j)
        cap = std::min<int>(cap, static_cast<int>(per_class[static_cast<std::size_t>(available[static_cast<std::size_t>(j)])]));

    std::vector<ClassCountRow> rows;
    for (int count : class_counts) {
        std::set<int> training(available.begin(), available.begin() + count);
        IndexList keep;
        for (Index i = 0; i < full.size(); ++i)
            if (training.count(full.true_labels[i]) || eval_held_out.count(full.true_labels[i])) keep.push_back(i);
        std::vector<int> truth;
        for (Index i : keep) truth.push_back(full.true_labels[i]);
        const Dataset subset = make_labeled_dataset(take_rows(full.features, keep), std::move(truth));

        ExperimentConfig cfg = base;
        cfg.split.per_class_cap = cap;
        cfg.split.incoming_fraction = 0.0;
        cfg.split.held_out_classes.clear();
        for (int c = 0; c < subset.n_true_classes(); ++c)
            if (!training.count(c)) cfg.split.held_out_classes.insert(c);
        cfg.ood.oracle = true;

        const DiscoveryState s = prepare(cfg, &subset);
        const auto pc = detail::cluster_pool(s, detail::eval_tag(0));
        require(!pc.pool.empty(), "classcount: evaluation pool is empty");
        std::vector<int> pool_truth;
        for (Index i : pc.pool) pool_truth.push_back(s.dataset.true_labels[i]);
        const auto mapping = cluster_accuracy(pc.clustering.assignments, pool_truth);
        rows.push_back({count, static_cast<double>(mapping.correct()) / static_cast<double>(mapping.total),
                        pc.pool.size(), static_cast<std::size_t>(cap)});
    }
    return rows;
}

}  // namespace scd
