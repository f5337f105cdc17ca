#pragma once

#include "ptg/challenge_scoring.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ptg {

/// Category label given to pairs without one, and to every pair when pools
/// are global.
inline constexpr std::string_view kDefaultCategory = "all";

struct DistributionSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample (n - 1)
    double min = 0.0;
    double max = 0.0;
    double skewness = 0.0;  // adjusted Fisher-Pearson; 0 when n < 3 or std == 0
    std::vector<std::size_t> histogram;  // 50 uniform bins over [min, max]
    std::vector<std::pair<double, double>> quantiles;  // (p, value) for 0.25, 0.5, 0.75, 0.9545
};

inline constexpr std::size_t kHistogramBins = 50;
inline constexpr double kSummaryQuantiles[] = {0.25, 0.5, 0.75, 0.9545};

DistributionSummary summarize(std::span<const double> scores);
DistributionSummary summarize(const ScoreTable& table);
nlohmann::json summary_to_json(const DistributionSummary& s);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

enum class SelectionStrategy { top_range_random, random, easy_bottom, top_k };

std::string_view to_string(SelectionStrategy s);
SelectionStrategy parse_strategy(std::string_view s);

struct SelectionConfig {
    SelectionStrategy strategy = SelectionStrategy::top_range_random;
    double pool_fraction = 0.0455;
    double easy_fraction = 0.25;
    int shots = 16;  // K, per category
    std::uint64_t seed = 0;
    bool per_category = true;
    std::string round_id;  // derived from scores and config when empty

    void validate() const;
};

/// ceil(fraction * n), at least 1 for n >= 1. Products within 1e-9 of an
/// integer are treated as that integer so 0.25 * 1000 is 250, not 251.
std::size_t pool_size(std::size_t n, double fraction);

/// Rows grouped by category (or all under kDefaultCategory) and ranked by
/// score descending, ties by pair_id ascending.
std::map<std::string, std::vector<const ScoredPair*>> rank_by_category(const ScoreTable& table,
                                                                       bool per_category);

/// Per category, the pair ids of the pool_size(N, fraction) highest ranked pairs,
/// in rank order.
std::map<std::string, std::vector<std::string>> build_pool(const ScoreTable& table,
                                                           double pool_fraction,
                                                           bool per_category = true);

enum class RoundStatus { selected, annotating, exported };

std::string_view to_string(RoundStatus s);
RoundStatus parse_round_status(std::string_view s);

struct CategorySelection {
    std::string category;
    std::size_t population = 0;
    std::vector<std::string> pool;    // candidate range of the strategy, in rank order
    std::vector<std::string> chosen;  // draw order

    bool operator==(const CategorySelection&) const = default;
};

struct RoundPair {
    std::string pair_id;
    std::string ref_image_id;
    std::string target_image_id;
    std::string category;
    double score = 0.0;

    bool operator==(const RoundPair&) const = default;
};

struct SelectionRound {
    std::string round_id;
    SelectionConfig config;
    std::vector<CategorySelection> categories;  // sorted by category label
    std::map<std::string, RoundPair> pairs;     // every chosen pair
    std::string created_at;
    RoundStatus status = RoundStatus::selected;
    std::vector<std::string> warnings;

    std::size_t chosen_count() const;
    /// Structural checks: unique chosen ids, chosen ⊆ pool for pool-based
    /// strategies, every chosen pair described. Throws invalid_argument.
    void validate() const;
};

/// Draws K pairs per category. All draws come from Rng(seed) split by the
/// category label, so categories do not perturb each other.
SelectionRound select(const ScoreTable& table, const SelectionConfig& config,
                      std::string created_at = {});

nlohmann::json config_to_json(const SelectionConfig& c);
SelectionConfig config_from_json(const nlohmann::json& j);
nlohmann::json round_to_json(const SelectionRound& r);
SelectionRound round_from_json(const nlohmann::json& j);

}  // namespace ptg
