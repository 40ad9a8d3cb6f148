#pragma once
// Reference computations for tests. Each one is written directly from the
// definition and shares no code with the library routines it checks.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace oracle {

/// Per-point indicator DRA: human points are right; a clustered point is right
/// iff its truth equals the most frequent truth of its cluster (lower label on ties).
inline double indicator_dra(std::size_t ell, const std::vector<int>& assign, const std::vector<int>& truth,
                            const std::vector<std::pair<std::vector<int>, int>>& frozen_truth_and_label = {}) {
    std::size_t correct = ell, total = ell;
    for (const auto& [members_truth, label] : frozen_truth_and_label) {
        for (int t : members_truth) {
            correct += t == label;
            ++total;
        }
    }
    for (std::size_t i = 0; i < assign.size(); ++i) {
        int best_label = -1, best_count = -1;
        for (int label = 0; label < 64; ++label) {
            int count = 0;
            for (std::size_t j = 0; j < assign.size(); ++j) count += assign[j] == assign[i] && truth[j] == label;
            if (count > best_count) {
                best_count = count;
                best_label = label;
            }
        }
        correct += truth[i] == best_label;
        ++total;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

/// Brute-force plurality: for each cluster id, try every label and keep the max count.
inline std::map<int, std::pair<int, double>> plurality(const std::vector<int>& assign, const std::vector<int>& truth) {
    std::map<int, std::pair<int, double>> out;
    const int max_cluster = *std::max_element(assign.begin(), assign.end());
    const int max_label = *std::max_element(truth.begin(), truth.end());
    for (int c = 0; c <= max_cluster; ++c) {
        int size = 0;
        for (int a : assign) size += a == c;
        if (size == 0) continue;
        int best = -1, best_label = 0;
        for (int l = 0; l <= max_label; ++l) {
            int n = 0;
            for (std::size_t i = 0; i < assign.size(); ++i) n += assign[i] == c && truth[i] == l;
            if (n > best) {
                best = n;
                best_label = l;
            }
        }
        out[c] = {best_label, static_cast<double>(best) / size};
    }
    return out;
}

/// numpy.quantile(x, p, method="lower").
inline double lower_quantile(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const double pos = (static_cast<double>(x.size()) - 1.0) * p;
    return x[static_cast<std::size_t>(std::floor(pos))];
}

/// Silhouette straight from the definition, using explicit loops over point pairs.
inline double silhouette(const std::vector<std::vector<double>>& pts, const std::vector<int>& assign) {
    const std::size_t n = pts.size();
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t d = 0; d < pts[i].size(); ++d) s += (pts[i][d] - pts[j][d]) * (pts[i][d] - pts[j][d]);
        return std::sqrt(s);
    };
    const int k = *std::max_element(assign.begin(), assign.end()) + 1;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0;
        int na = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && assign[j] == assign[i]) {
                a += dist(i, j);
                ++na;
            }
        if (na == 0) continue;
        a /= na;
        double b = 1e300;
        for (int c = 0; c < k; ++c) {
            if (c == assign[i]) continue;
            double s = 0;
            int m = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (assign[j] == c) {
                    s += dist(i, j);
                    ++m;
                }
            if (m) b = std::min(b, s / m);
        }
        const double den = std::max(a, b);
        total += den > 0 ? (b - a) / den : 0.0;
    }
    return total / static_cast<double>(n);
}

/// Minimum 2-means inertia by enumerating every 2-partition of a small point set.
inline double best_two_partition_inertia(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    const std::size_t d = pts[0].size();
    double best = 1e300;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
        double inertia = 0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> mean(d, 0.0);
            int m = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (((mask >> i) & 1) == static_cast<std::uint64_t>(side)) {
                    for (std::size_t j = 0; j < d; ++j) mean[j] += pts[i][j];
                    ++m;
                }
            for (auto& v : mean) v /= m;
            for (std::size_t i = 0; i < n; ++i)
                if (((mask >> i) & 1) == static_cast<std::uint64_t>(side))
                    for (std::size_t j = 0; j < d; ++j) inertia += (pts[i][j] - mean[j]) * (pts[i][j] - mean[j]);
        }
        best = std::min(best, inertia);
    }
    return best;
}

/// NMI from explicit entropy sums (natural log, arithmetic mean normalization).
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    const double n = static_cast<double>(a.size());
    std::map<int, double> ca, cb;
    std::map<std::pair<int, int>, double> cab;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]]++;
        cb[b[i]]++;
        cab[{a[i], b[i]}]++;
    }
    double ha = 0, hb = 0, mi = 0;
    for (auto& [_, c] : ca) ha -= (c / n) * std::log(c / n);
    for (auto& [_, c] : cb) hb -= (c / n) * std::log(c / n);
    for (auto& [k, c] : cab) {
        const double pxy = c / n, px = ca[k.first] / n, py = cb[k.second] / n;
        mi += pxy * std::log(pxy / (px * py));
    }
    if (ha == 0 || hb == 0) return 0;
    return mi / ((ha + hb) / 2);
}

/// Write an IDX pair byte by byte (big-endian headers).
inline void write_idx_pair(const std::string& images, const std::string& labels, std::uint32_t images_magic,
                           std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                           const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& label_bytes,
                           std::uint32_t labels_magic = 2049, std::uint32_t label_count = ~0u) {
    auto be = [](std::ofstream& f, std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    std::ofstream fi(images, std::ios::binary), fl(labels, std::ios::binary);
    be(fi, images_magic);
    be(fi, n);
    be(fi, rows);
    be(fi, cols);
    fi.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    be(fl, labels_magic);
    be(fl, label_count == ~0u ? n : label_count);
    fl.write(reinterpret_cast<const char*>(label_bytes.data()), static_cast<std::streamsize>(label_bytes.size()));
}

}  // namespace oracle
