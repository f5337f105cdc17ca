#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library code paths it checks.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ptg::oracle {

/// Two-pass scalar cosine: norms first, then the dot product, combined
/// through a single sqrt of the norm product.
inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double aa = 0.0, bb = 0.0;
    for (float x : a) aa += double(x) * double(x);
    for (float y : b) bb += double(y) * double(y);
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * double(b[i]);
    return dot / std::sqrt(aa * bb);
}

inline double challenge(const std::vector<float>& composed, const std::vector<float>& target) {
    return 1.0 - cosine(composed, target);
}

struct Row {
    std::string id;
    double score;
};

/// Pool by full sort; the size is ceil(num/den * n) in exact integer
/// arithmetic, at least 1.
inline std::set<std::string> top_pool(std::vector<Row> rows, std::uint64_t num, std::uint64_t den) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.score > b.score || (a.score == b.score && a.id < b.id);
    });
    std::uint64_t n = rows.size();
    std::uint64_t size = std::max<std::uint64_t>(1, (num * n + den - 1) / den);
    std::set<std::string> out;
    for (std::uint64_t i = 0; i < size; ++i) out.insert(rows[i].id);
    return out;
}

/// Position of `target` after sorting all (similarity, id) candidates.
inline std::size_t rank_by_sort(const std::vector<std::pair<std::string, std::vector<float>>>& gallery,
                                const std::vector<float>& query, const std::string& target,
                                const std::set<std::string>& excluded, double (*sim)(const std::vector<float>&, const std::vector<float>&)) {
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [id, v] : gallery) {
        if (excluded.contains(id)) continue;
        ranked.emplace_back(sim(query, v), id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i].second == target) return i;
    }
    return ranked.size();
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    const auto c2 = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sum_rows = 0, sum_cols = 0;
    for (const auto& [_, v] : table) index += c2(v);
    for (const auto& [_, v] : rows) sum_rows += c2(v);
    for (const auto& [_, v] : cols) sum_cols += c2(v);
    const double expected = sum_rows * sum_cols / c2(double(a.size()));
    const double max_index = (sum_rows + sum_cols) / 2;
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

inline double chi2_critical(double df, double alpha) {
    boost::math::chi_squared dist(df);
    return boost::math::quantile(boost::math::complement(dist, alpha));
}

/// Uniformity statistic for inclusion counts when each of `trials` draws takes
/// `per_trial` distinct items out of `counts.size()`. Counts of a draw without
/// replacement have covariance trials*p(1-p)*N/(N-1)*(I - J/N), so this
/// scaling makes the statistic asymptotically chi-square with N-1 dof.
inline double inclusion_chi2(const std::vector<std::uint64_t>& counts, std::uint64_t trials,
                             std::uint64_t per_trial) {
    const double n_items = double(counts.size());
    const double p = double(per_trial) / n_items;
    const double expected = double(trials) * p;
    const double scale = double(trials) * p * (1 - p) * n_items / (n_items - 1);
    double stat = 0;
    for (auto c : counts) stat += (double(c) - expected) * (double(c) - expected) / scale;
    return stat;
}

inline double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

/// sqrt(sum (x - mean)^2 / (n (n - 1))), the closed form of std/sqrt(n).
inline double standard_error(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double n = double(v.size());
    return std::sqrt(ss / (n * (n - 1)));
}

}  // namespace ptg::oracle
