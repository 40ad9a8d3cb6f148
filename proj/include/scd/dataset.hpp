#pragma once
/**
 * @brief Labeled datasets with provenance: IDX/CSV loading, a Gaussian
 * mixture generator, held-out-class splits, and discovered-class addition.
 *
 * A Dataset carries the hidden ground truth (`true_labels`) next to the
 * labels the learner is allowed to see. Unlabeled samples form the pool
 * that discovery draws new classes from.
 */
#include "scd/common.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace scd {

/// Where a sample's visible label came from.
struct Provenance {
    enum class Kind : std::uint8_t { human, routed, discovered };
    Kind kind = Kind::human;
    int round = 0;  ///< discovery round, only meaningful for `discovered`

    static Provenance human() { return {}; }
    static Provenance routed() { return {Kind::routed, 0}; }
    static Provenance discovered(int round) { return {Kind::discovered, round}; }

    bool operator==(const Provenance&) const = default;
};

struct Dataset {
    Matrix features;
    std::vector<std::optional<int>> labels;
    std::vector<int> true_labels;
    std::vector<Provenance> provenance;
    int n_classes_visible = 0;
    /// Visible label -> ground-truth class, -1 for discovered classes.
    std::vector<int> visible_to_true;

    std::size_t size() const { return true_labels.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

    /// Number of distinct ground-truth classes (max label + 1).
    int n_true_classes() const {
        return true_labels.empty() ? 0 : *std::max_element(true_labels.begin(), true_labels.end()) + 1;
    }

    IndexList labeled_indices() const {
        IndexList out;
        for (Index i = 0; i < size(); ++i)
            if (labels[i]) out.push_back(i);
        return out;
    }

    IndexList unlabeled_indices() const {
        IndexList out;
        for (Index i = 0; i < size(); ++i)
            if (!labels[i]) out.push_back(i);
        return out;
    }

    /// Throws InvalidArgument if any structural invariant is broken.
    void check() const {
        const auto n = size();
        require(static_cast<std::size_t>(features.rows()) == n && labels.size() == n && provenance.size() == n,
                "dataset: inconsistent sample counts");
        require(visible_to_true.size() == static_cast<std::size_t>(n_classes_visible),
                "dataset: visible class map has wrong length");
        for (Index i = 0; i < n; ++i) {
            if (labels[i]) require(*labels[i] >= 0 && *labels[i] < n_classes_visible, "dataset: label out of range");
            require(true_labels[i] >= 0, "dataset: negative ground-truth label");
        }
    }
};

/// Build a fully human-labeled dataset from features and ground truth.
inline Dataset make_labeled_dataset(Matrix features, std::vector<int> true_labels) {
    require(static_cast<std::size_t>(features.rows()) == true_labels.size(),
            "dataset: feature rows and label count differ");
    Dataset d;
    d.features = std::move(features);
    d.true_labels = std::move(true_labels);
    d.labels.assign(d.true_labels.begin(), d.true_labels.end());
    d.provenance.assign(d.true_labels.size(), Provenance::human());
    d.n_classes_visible = d.n_true_classes();
    d.visible_to_true.resize(static_cast<std::size_t>(d.n_classes_visible));
    for (int c = 0; c < d.n_classes_visible; ++c) d.visible_to_true[static_cast<std::size_t>(c)] = c;
    d.check();
    return d;
}

// ---------------------------------------------------------------------------
// IDX

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::uint64_t offset, const std::string& path) {
    if (offset + 4 > buf.size()) throw FormatError(path + ": truncated header", offset);
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace detail

/**
 * Load an IDX image file (magic 2051) and label file (magic 2049).
 * Pixels are scaled to [0, 1] by dividing by 255.
 */
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);

    const auto img_magic = detail::read_be32(img, 0, images_path);
    if (img_magic != 2051)
        throw FormatError(images_path + ": bad magic " + std::to_string(img_magic) + " (expected 2051)", 0);
    const auto lab_magic = detail::read_be32(lab, 0, labels_path);
    if (lab_magic != 2049)
        throw FormatError(labels_path + ": bad magic " + std::to_string(lab_magic) + " (expected 2049)", 0);

    const std::uint64_t n = detail::read_be32(img, 4, images_path);
    const std::uint64_t rows = detail::read_be32(img, 8, images_path);
    const std::uint64_t cols = detail::read_be32(img, 12, images_path);
    const std::uint64_t n_labels = detail::read_be32(lab, 4, labels_path);
    if (n != n_labels)
        throw FormatError("sample count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) +
                              " labels",
                          4);

    const std::uint64_t pixels = rows * cols;
    const std::uint64_t img_need = 16 + n * pixels;
    if (img.size() < img_need) throw FormatError(images_path + ": truncated pixel data", img.size());
    if (lab.size() < 8 + n) throw FormatError(labels_path + ": truncated label data", lab.size());

    Matrix features(eidx(n), eidx(pixels));
    std::vector<int> truth(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const unsigned char* row = img.data() + 16 + i * pixels;
        for (std::uint64_t j = 0; j < pixels; ++j) features(eidx(i), eidx(j)) = row[j] / 255.0;
        truth[i] = lab[8 + i];
    }
    return make_labeled_dataset(std::move(features), std::move(truth));
}

/// Load a CSV with a header row; the last column is an integer label.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": missing header row", 0);
    std::uint64_t offset = line.size() + 1;
    const auto n_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (n_cols < 2) throw FormatError(path + ": need at least one feature column and a label column", 0);

    std::vector<double> values;
    std::vector<int> truth;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            offset += 1;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                if (col + 1 == n_cols) {
                    const int label = std::stoi(cell, &used);
                    if (label < 0) throw FormatError(path + ": negative label", offset);
                    truth.push_back(label);
                } else {
                    values.push_back(std::stod(cell, &used));
                }
            } catch (const std::logic_error&) {
                throw FormatError(path + ": unparsable cell '" + cell + "'", offset);
            }
            ++col;
        }
        if (col != n_cols) throw FormatError(path + ": expected " + std::to_string(n_cols) + " columns", offset);
        offset += line.size() + 1;
    }
    const auto n = truth.size();
    Matrix features(eidx(n), eidx(n_cols - 1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j + 1 < n_cols; ++j) features(eidx(i), eidx(j)) = values[i * (n_cols - 1) + j];
    return make_labeled_dataset(std::move(features), std::move(truth));
}

// ---------------------------------------------------------------------------
// Synthetic data

struct GaussianMixtureSpec {
    int n_classes = 2;
    int dim = 2;
    double separation = 1.0;  ///< radius of the sphere the class centers lie on
    int per_class_n = 100;
    std::uint64_t seed = 0;

    void validate() const {
        require(n_classes >= 2, "gaussian: n_classes must be >= 2");
        require(dim >= 1, "gaussian: dim must be >= 1");
        require(separation >= 0.0, "gaussian: separation must be >= 0");
        require(per_class_n >= 1, "gaussian: per_class_n must be >= 1");
    }
};

/// Class centers on a sphere of radius `separation`, unit-variance isotropic noise.
inline Dataset synth_gaussian(const GaussianMixtureSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Matrix centers(spec.n_classes, spec.dim);
    for (int c = 0; c < spec.n_classes; ++c) {
        RowVector dir(spec.dim);
        do {
            for (int j = 0; j < spec.dim; ++j) dir(j) = rng.normal();
        } while (dir.norm() == 0.0);
        centers.row(c) = dir / dir.norm() * spec.separation;
    }
    const auto n = static_cast<Eigen::Index>(spec.n_classes) * spec.per_class_n;
    Matrix features(n, spec.dim);
    std::vector<int> truth(static_cast<std::size_t>(n));
    Eigen::Index row = 0;
    for (int c = 0; c < spec.n_classes; ++c) {
        for (int i = 0; i < spec.per_class_n; ++i, ++row) {
            for (int j = 0; j < spec.dim; ++j) features(row, j) = centers(c, j) + rng.normal();
            truth[static_cast<std::size_t>(row)] = c;
        }
    }
    return make_labeled_dataset(std::move(features), std::move(truth));
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
    std::set<int> held_out_classes;
    std::optional<int> per_class_cap;
    /// Ground truth (true) or the confidence detector (false) routes incoming data.
    bool oracle_split = true;
    /// Fraction of each retained class whose labels are also stripped into the
    /// incoming pool. Only meaningful when the detector routes data.
    double incoming_fraction = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Strip labels from held-out classes and remap retained labels densely.
 * When a cap is set, every class keeps at most that many samples (chosen
 * by a per-class seed, so a class's subsample does not depend on which other
 * classes are present; original order preserved).
 */
inline Dataset make_split(const Dataset& data, const SplitSpec& spec) {
    const int n_classes = data.n_true_classes();
    for (int c : spec.held_out_classes)
        require(c >= 0 && c < n_classes, "split: held-out class " + std::to_string(c) + " does not exist");
    require(static_cast<int>(spec.held_out_classes.size()) < n_classes || n_classes == 0,
            "split: held-out classes cover every class");
    require(!spec.per_class_cap || *spec.per_class_cap >= 1, "split: per_class_cap must be >= 1");
    require(spec.incoming_fraction >= 0.0 && spec.incoming_fraction < 1.0, "split: incoming_fraction must be in [0,1)");

    std::vector<IndexList> by_class(static_cast<std::size_t>(n_classes));
    for (Index i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.true_labels[i])].push_back(i);

    std::vector<bool> keep(data.size(), true);
    if (spec.per_class_cap) {
        const auto cap = static_cast<std::size_t>(*spec.per_class_cap);
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto members = by_class[c];
            if (members.size() <= cap) continue;
            Rng class_rng(derive_seed(spec.seed, c));
            class_rng.shuffle(members);
            for (std::size_t j = cap; j < members.size(); ++j) keep[members[j]] = false;
        }
    }

    std::vector<bool> incoming(data.size(), false);
    if (spec.incoming_fraction > 0.0) {
        for (int c = 0; c < n_classes; ++c) {
            if (spec.held_out_classes.count(c)) continue;
            IndexList members;
            for (Index i : by_class[static_cast<std::size_t>(c)])
                if (keep[i]) members.push_back(i);
            Rng class_rng(derive_seed(spec.seed, 0x10000 + static_cast<std::uint64_t>(c)));
            class_rng.shuffle(members);
            const auto take = static_cast<std::size_t>(std::floor(spec.incoming_fraction * members.size()));
            for (std::size_t j = 0; j < take; ++j) incoming[members[j]] = true;
        }
    }

    std::vector<int> remap(static_cast<std::size_t>(n_classes), -1);
    Dataset out;
    for (int c = 0; c < n_classes; ++c) {
        if (spec.held_out_classes.count(c)) continue;
        remap[static_cast<std::size_t>(c)] = out.n_classes_visible++;
        out.visible_to_true.push_back(c);
    }

    IndexList rows;
    for (Index i = 0; i < data.size(); ++i)
        if (keep[i]) rows.push_back(i);
    out.features = take_rows(data.features, rows);
    for (Index i : rows) {
        const int truth = data.true_labels[i];
        out.true_labels.push_back(truth);
        out.provenance.push_back(Provenance::human());
        const int visible = remap[static_cast<std::size_t>(truth)];
        if (visible < 0 || incoming[i])
            out.labels.emplace_back(std::nullopt);
        else
            out.labels.emplace_back(visible);
    }
    out.check();
    return out;
}

/**
 * Give the unlabeled `members` a new visible class. Returns the new label.
 * Throws if any member already carries a label.
 */
inline int add_class(Dataset& data, std::span<const Index> members, int round) {
    require(round >= 1, "add_class: round must be >= 1");
    for (Index i : members) {
        require(i < data.size(), "add_class: index out of range");
        if (data.labels[i])
            throw InvalidArgument("add_class: sample " + std::to_string(i) + " is already labeled");
    }
    std::set<Index> unique(members.begin(), members.end());
    require(unique.size() == members.size(), "add_class: duplicate member index");
    const int label = data.n_classes_visible++;
    data.visible_to_true.push_back(-1);
    for (Index i : members) {
        data.labels[i] = label;
        data.provenance[i] = Provenance::discovered(round);
    }
    return label;
}

/// Value-returning form of add_class.
inline Dataset with_class(Dataset data, std::span<const Index> members, int round) {
    add_class(data, members, round);
    return data;
}

/// Write features/labels in IDX layout with unsigned-byte pixels (value * 255, rounded).
inline void write_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path,
                      std::uint32_t rows, std::uint32_t cols) {
    require(static_cast<std::uint64_t>(rows) * cols == data.dim(), "write_idx: rows*cols must equal feature width");
    auto put32 = [](std::ofstream& out, std::uint32_t v) {
        const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                    static_cast<char>(v)};
        out.write(b.data(), 4);
    };
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw Error("write_idx: cannot open output files");
    put32(img, 2051);
    put32(img, static_cast<std::uint32_t>(data.size()));
    put32(img, rows);
    put32(img, cols);
    put32(lab, 2049);
    put32(lab, static_cast<std::uint32_t>(data.size()));
    for (Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
            const double v = std::clamp(data.features(eidx(i), j), 0.0, 1.0);
            img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
        lab.put(static_cast<char>(static_cast<unsigned char>(data.true_labels[i])));
    }
}

}  // namespace scd
