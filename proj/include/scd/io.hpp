#pragma once
/**
 * @brief JSON experiment configs, run reports, and CSV outputs.
 *
 * Configs are strict: unknown keys are errors. Relative data paths resolve
 * against the config file's directory. A report embeds the complete config
 * (defaults filled in), so it can be fed back to `discover --config`.
 *
 * CSV headers are frozen:
 *   curves.csv     round,dra,mean_cluster_accuracy,ood_pool_size,train_loss
 *   clusters.csv   round,source,cluster_id,size,mapped_label,accuracy,learnability,density,scoreable,accepted
 *   classcount.csv class_count,cluster_accuracy,pool_size,per_class
 */
#include "scd/engine.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace scd {

using json = nlohmann::ordered_json;

/// A config file is malformed or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    return p.is_absolute() || base.empty() ? path : (base / p).lexically_normal().string();
}

inline std::string number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10f", v);
    return buf;
}

}  // namespace detail

/// Parse a config object. `base_dir` anchors relative data paths.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    using detail::read;
    detail::check_keys(j, "config",
                       {"data", "split", "network", "adam", "kmeans", "policy", "learnability", "epochs_initial",
                        "epochs_per_round", "rounds", "ood", "seed"});
    ExperimentConfig c;
    if (!j.contains("data")) throw ConfigError("config: missing required field 'data'");

    const auto& d = j.at("data");
    detail::check_keys(d, "data", {"kind", "images", "labels", "path", "n_classes", "dim", "separation", "per_class_n", "seed"});
    std::string kind = "gaussian";
    read(d, "kind", kind, "data");
    if (kind == "idx") {
        c.data.kind = DataSource::Kind::idx;
        read(d, "images", c.data.images_path, "data");
        read(d, "labels", c.data.labels_path, "data");
        if (c.data.images_path.empty()) throw ConfigError("data.images: required for kind 'idx'");
        if (c.data.labels_path.empty()) throw ConfigError("data.labels: required for kind 'idx'");
        c.data.images_path = detail::resolve(c.data.images_path, base_dir);
        c.data.labels_path = detail::resolve(c.data.labels_path, base_dir);
    } else if (kind == "csv") {
        c.data.kind = DataSource::Kind::csv;
        read(d, "path", c.data.csv_path, "data");
        if (c.data.csv_path.empty()) throw ConfigError("data.path: required for kind 'csv'");
        c.data.csv_path = detail::resolve(c.data.csv_path, base_dir);
    } else if (kind == "gaussian") {
        c.data.kind = DataSource::Kind::gaussian;
        auto& g = c.data.gaussian;
        read(d, "n_classes", g.n_classes, "data");
        read(d, "dim", g.dim, "data");
        read(d, "separation", g.separation, "data");
        read(d, "per_class_n", g.per_class_n, "data");
        read(d, "seed", g.seed, "data");
    } else {
        throw ConfigError("data.kind: unknown kind '" + kind + "' (expected idx, csv, or gaussian)");
    }

    if (j.contains("split")) {
        const auto& s = j.at("split");
        detail::check_keys(s, "split", {"held_out_classes", "per_class_cap", "incoming_fraction"});
        std::vector<int> held;
        read(s, "held_out_classes", held, "split");
        c.split.held_out_classes = {held.begin(), held.end()};
        if (s.contains("per_class_cap") && !s.at("per_class_cap").is_null()) {
            int cap = 0;
            read(s, "per_class_cap", cap, "split");
            c.split.per_class_cap = cap;
        }
        read(s, "incoming_fraction", c.split.incoming_fraction, "split");
    }
    if (j.contains("network")) {
        detail::check_keys(j.at("network"), "network", {"hidden_dims"});
        read(j.at("network"), "hidden_dims", c.hidden_dims, "network");
    }
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        detail::check_keys(a, "adam", {"learning_rate", "beta1", "beta2", "epsilon", "batch_size"});
        read(a, "learning_rate", c.adam.learning_rate, "adam");
        read(a, "beta1", c.adam.beta1, "adam");
        read(a, "beta2", c.adam.beta2, "adam");
        read(a, "epsilon", c.adam.epsilon, "adam");
        read(a, "batch_size", c.adam.batch_size, "adam");
    }
    if (j.contains("kmeans")) {
        const auto& k = j.at("kmeans");
        detail::check_keys(k, "kmeans", {"k", "restarts", "max_iters", "tol"});
        read(k, "k", c.kmeans.k, "kmeans");
        read(k, "restarts", c.kmeans.restarts, "kmeans");
        read(k, "max_iters", c.kmeans.max_iters, "kmeans");
        read(k, "tol", c.kmeans.tol, "kmeans");
    }
    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        detail::check_keys(p, "policy", {"kind", "min_accuracy"});
        std::string pk = "learnability";
        read(p, "kind", pk, "policy");
        const auto parsed = policy_kind_from_string(pk);
        if (!parsed) throw ConfigError("policy.kind: unknown policy '" + pk + "'");
        c.policy.kind = *parsed;
        read(p, "min_accuracy", c.policy.min_accuracy, "policy");
    }
    if (j.contains("learnability")) {
        const auto& l = j.at("learnability");
        detail::check_keys(l, "learnability",
                           {"holdout_fraction", "min_cluster_size", "hidden_dims", "epochs", "learning_rate",
                            "batch_size", "use_embeddings", "include_existing"});
        read(l, "holdout_fraction", c.learnability.holdout_fraction, "learnability");
        read(l, "min_cluster_size", c.learnability.min_cluster_size, "learnability");
        read(l, "hidden_dims", c.learnability.hidden_dims, "learnability");
        read(l, "epochs", c.learnability.epochs, "learnability");
        read(l, "learning_rate", c.learnability.adam.learning_rate, "learnability");
        read(l, "batch_size", c.learnability.adam.batch_size, "learnability");
        read(l, "use_embeddings", c.learnability.use_embeddings, "learnability");
        read(l, "include_existing", c.learnability.include_existing, "learnability");
    }
    read(j, "epochs_initial", c.epochs_initial, "config");
    read(j, "epochs_per_round", c.epochs_per_round, "config");
    if (j.contains("rounds") && !j.at("rounds").is_null()) {
        int r = 0;
        read(j, "rounds", r, "config");
        c.rounds = r;
    }
    if (j.contains("ood")) {
        const auto& o = j.at("ood");
        detail::check_keys(o, "ood", {"mode", "quantile"});
        std::string mode = "oracle";
        read(o, "mode", mode, "ood");
        if (mode != "oracle" && mode != "detector")
            throw ConfigError("ood.mode: expected 'oracle' or 'detector', got '" + mode + "'");
        c.ood.oracle = mode == "oracle";
        read(o, "quantile", c.ood.quantile, "ood");
    }
    read(j, "seed", c.seed, "config");
    c.split.oracle_split = c.ood.oracle;

    try {
        c.validate();
        if (c.data.kind == DataSource::Kind::gaussian) c.data.gaussian.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    json d;
    switch (c.data.kind) {
        case DataSource::Kind::idx:
            d = {{"kind", "idx"}, {"images", c.data.images_path}, {"labels", c.data.labels_path}};
            break;
        case DataSource::Kind::csv: d = {{"kind", "csv"}, {"path", c.data.csv_path}}; break;
        case DataSource::Kind::gaussian: {
            const auto& g = c.data.gaussian;
            d = {{"kind", "gaussian"},       {"n_classes", g.n_classes},     {"dim", g.dim},
                 {"separation", g.separation}, {"per_class_n", g.per_class_n}, {"seed", g.seed}};
            break;
        }
    }
    json j;
    j["data"] = d;
    j["split"] = {{"held_out_classes", std::vector<int>(c.split.held_out_classes.begin(), c.split.held_out_classes.end())},
                  {"per_class_cap", c.split.per_class_cap ? json(*c.split.per_class_cap) : json(nullptr)},
                  {"incoming_fraction", c.split.incoming_fraction}};
    j["network"] = {{"hidden_dims", c.hidden_dims}};
    j["adam"] = {{"learning_rate", c.adam.learning_rate},
                 {"beta1", c.adam.beta1},
                 {"beta2", c.adam.beta2},
                 {"epsilon", c.adam.epsilon},
                 {"batch_size", c.adam.batch_size}};
    j["kmeans"] = {{"k", c.kmeans.k}, {"restarts", c.kmeans.restarts}, {"max_iters", c.kmeans.max_iters}, {"tol", c.kmeans.tol}};
    j["policy"] = {{"kind", to_string(c.policy.kind)}, {"min_accuracy", c.policy.min_accuracy}};
    const auto& l = c.learnability;
    j["learnability"] = {{"holdout_fraction", l.holdout_fraction}, {"min_cluster_size", l.min_cluster_size},
                         {"hidden_dims", l.hidden_dims},           {"epochs", l.epochs},
                         {"learning_rate", l.adam.learning_rate},  {"batch_size", l.adam.batch_size},
                         {"use_embeddings", l.use_embeddings},     {"include_existing", l.include_existing}};
    j["epochs_initial"] = c.epochs_initial;
    j["epochs_per_round"] = c.epochs_per_round;
    j["rounds"] = c.rounds ? json(*c.rounds) : json(nullptr);
    j["ood"] = {{"mode", c.ood.oracle ? "oracle" : "detector"}, {"quantile", c.ood.quantile}};
    j["seed"] = c.seed;
    return j;
}

/// Read a config file, or the config embedded in a report file.
inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    const auto base = std::filesystem::absolute(path).parent_path();
    if (j.is_object() && j.contains("format") && j.contains("config")) return config_from_json(j.at("config"), base);
    return config_from_json(j, base);
}

/**
 * Checks that need the data: sources exist, held-out classes exist, and
 * the pool is at least k samples. Throws ConfigError.
 */
inline void validate_against_data(const ExperimentConfig& cfg) {
    Dataset split;
    try {
        SplitSpec s = cfg.split;
        s.seed = SeedRegistry::from(cfg.seed).split;
        split = make_split(load_source(cfg.data), s);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (split.n_classes_visible < 2) throw ConfigError("split: at least two retained classes are required");
    std::size_t pool = 0;
    for (Index i = 0; i < split.size(); ++i) {
        const bool held = cfg.split.held_out_classes.count(split.true_labels[i]) > 0;
        pool += !split.labels[i] && (held || !cfg.ood.oracle);
    }
    if (pool == 0) throw ConfigError("split: the out-of-distribution pool is empty (no held-out classes)");
    if (static_cast<std::size_t>(cfg.kmeans.k) > pool)
        throw ConfigError("kmeans.k = " + std::to_string(cfg.kmeans.k) + " exceeds the pool size " + std::to_string(pool));
}

inline json overlap_json(const ClusterOverlap& c) {
    return {{"cluster_id", c.cluster_id}, {"mapped_label", c.mapped_label}, {"overlap", c.overlap},
            {"size", c.size},             {"accuracy", c.accuracy},         {"weight", c.weight},
            {"frozen", c.frozen}};
}

inline json features_json(const ClusterFeatures& f) {
    return {{"cluster_id", f.cluster_id}, {"size", f.size}, {"learnability", f.learnability},
            {"density", f.density},       {"scoreable", f.scoreable}};
}

inline json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json report_to_json(const DiscoveryState& s, const std::string& mode, double wall_clock_seconds) {
    json j;
    j["format"] = "scd-report/1";
    j["mode"] = mode;
    j["config"] = config_to_json(s.config);
    j["seeds"] = {{"master", s.seeds.master}, {"split", s.seeds.split},   {"init", s.seeds.init},
                  {"shuffle", s.seeds.shuffle}, {"kmeans", s.seeds.kmeans}, {"policy", s.seeds.policy},
                  {"learnability", s.seeds.learnability}, {"expand", s.seeds.expand}};
    j["detector"] = s.detector ? json{{"threshold", s.detector->threshold},
                                      {"quantile", s.detector->quantile},
                                      {"calibration_size", s.detector->calibration_size}}
                               : json(nullptr);
    j["dra_accounting"] =
        "accepted clusters keep their acceptance-time plurality label; the residual pool is re-clustered "
        "with kmeans.k at each evaluation";
    json rounds = json::array();
    for (const auto& r : s.history) {
        json rr = {{"round", r.round},
                   {"dra", r.dra},
                   {"mean_cluster_accuracy", r.mean_cluster_accuracy},
                   {"ood_pool_size", r.ood_pool_size},
                   {"train_loss", nan_safe(r.train_loss)},
                   {"ell", r.report.ell},
                   {"o", r.report.o},
                   {"n", r.report.n},
                   {"weighted_ood_accuracy", r.report.weighted_ood_accuracy}};
        rr["clusters"] = json::array();
        for (const auto& c : r.report.clusters) rr["clusters"].push_back(overlap_json(c));
        rr["candidates"] = json::array();
        for (const auto& f : r.candidates) rr["candidates"].push_back(features_json(f));
        rr["accepted"] = r.accepted_ids;
        rounds.push_back(rr);
    }
    j["rounds"] = rounds;
    json acc = json::array();
    for (const auto& a : s.accepted)
        acc.push_back({{"round", a.round},
                       {"size", a.size},
                       {"visible_label", a.visible_label},
                       {"plurality_label", a.plurality_label},
                       {"purity", a.purity},
                       {"learnability", a.learnability}});
    j["accepted"] = acc;
    j["final_dra"] = s.history.empty() ? json(nullptr) : json(s.history.back().dra);
    j["stop_reason"] = s.stop_reason;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
}

inline std::string curves_csv(const DiscoveryState& s) {
    std::ostringstream out;
    out << "round,dra,mean_cluster_accuracy,ood_pool_size,train_loss\n";
    for (const auto& r : s.history)
        out << r.round << ',' << detail::number(r.dra) << ',' << detail::number(r.mean_cluster_accuracy) << ','
            << r.ood_pool_size << ',' << detail::number(r.train_loss) << '\n';
    return out.str();
}

inline std::string clusters_csv(const DiscoveryState& s) {
    std::ostringstream out;
    out << "round,source,cluster_id,size,mapped_label,accuracy,learnability,density,scoreable,accepted\n";
    for (const auto& r : s.history) {
        for (const auto& c : r.report.clusters) {
            if (c.frozen) continue;
            out << r.round << ",evaluation," << c.cluster_id << ',' << c.size << ',' << c.mapped_label << ','
                << detail::number(c.accuracy) << ",,,,\n";
        }
        for (const auto& f : r.candidates) {
            const ClusterOverlap* ov = nullptr;
            for (const auto& c : r.candidate_overlap)
                if (c.cluster_id == f.cluster_id) ov = &c;
            const bool accepted =
                std::find(r.accepted_ids.begin(), r.accepted_ids.end(), f.cluster_id) != r.accepted_ids.end();
            out << r.round << ",candidate," << f.cluster_id << ',' << f.size << ','
                << (ov ? std::to_string(ov->mapped_label) : "") << ',' << (ov ? detail::number(ov->accuracy) : "")
                << ',' << detail::number(f.learnability) << ',' << detail::number(f.density) << ','
                << (f.scoreable ? 1 : 0) << ',' << (accepted ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

inline std::string classcount_csv(std::span<const ClassCountRow> rows) {
    std::ostringstream out;
    out << "class_count,cluster_accuracy,pool_size,per_class\n";
    for (const auto& r : rows)
        out << r.class_count << ',' << detail::number(r.cluster_accuracy) << ',' << r.pool_size << ',' << r.per_class
            << '\n';
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace scd
