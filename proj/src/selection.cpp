#include "ptg/selection.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"
#include "ptg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ptg {

DistributionSummary summarize(std::span<const double> scores) {
    const std::size_t n = scores.size();
    if (n < 2) throw Error(ErrorCode::invalid_argument, "summary needs at least 2 scores");

    DistributionSummary s;
    s.count = n;
    double sum = 0.0;
    s.min = scores[0];
    s.max = scores[0];
    for (double x : scores) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / static_cast<double>(n);
    if (s.min == s.max) s.mean = s.min;

    double m2 = 0.0, m3 = 0.0;
    for (double x : scores) {
        const double d = s.min == s.max ? 0.0 : x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    s.stddev = std::sqrt(m2 / static_cast<double>(n - 1));
    const double nd = static_cast<double>(n);
    const double pop_m2 = m2 / nd, pop_m3 = m3 / nd;
    if (n >= 3 && pop_m2 > 0.0) {
        const double g1 = pop_m3 / std::pow(pop_m2, 1.5);
        s.skewness = g1 * std::sqrt(nd * (nd - 1.0)) / (nd - 2.0);
    }

    s.histogram.assign(kHistogramBins, 0);
    const double span = s.max - s.min;
    for (double x : scores) {
        std::size_t bin = 0;
        if (span > 0.0) {
            bin = static_cast<std::size_t>((x - s.min) / span * kHistogramBins);
            bin = std::min(bin, kHistogramBins - 1);
        }
        ++s.histogram[bin];
    }

    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    for (double p : kSummaryQuantiles) s.quantiles.emplace_back(p, quantile_sorted(sorted, p));
    return s;
}

DistributionSummary summarize(const ScoreTable& table) {
    std::vector<double> scores;
    scores.reserve(table.rows.size());
    for (const auto& r : table.rows) scores.push_back(r.score);
    return summarize(scores);
}

nlohmann::json summary_to_json(const DistributionSummary& s) {
    nlohmann::json j;
    j["count"] = s.count;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["min"] = s.min;
    j["max"] = s.max;
    j["skewness"] = s.skewness;
    j["histogram"] = s.histogram;
    auto& q = j["quantiles"] = nlohmann::json::object();
    for (const auto& [p, v] : s.quantiles) q[std::to_string(p).substr(0, 6)] = v;
    return j;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::invalid_argument, "quantile of empty data");
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "quantile p outside [0,1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::string_view to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::top_range_random: return "top_range_random";
        case SelectionStrategy::random: return "random";
        case SelectionStrategy::easy_bottom: return "easy_bottom";
        case SelectionStrategy::top_k: return "top_k";
    }
    return "unknown";
}

SelectionStrategy parse_strategy(std::string_view s) {
    std::string norm(s);
    std::replace(norm.begin(), norm.end(), '-', '_');
    if (norm == "top_range_random") return SelectionStrategy::top_range_random;
    if (norm == "random") return SelectionStrategy::random;
    if (norm == "easy_bottom" || norm == "easy") return SelectionStrategy::easy_bottom;
    if (norm == "top_k") return SelectionStrategy::top_k;
    throw Error(ErrorCode::invalid_argument, "unknown strategy '" + std::string(s) + "'");
}

void SelectionConfig::validate() const {
    if (!(pool_fraction > 0.0 && pool_fraction < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "pool_fraction must lie in (0, 1)");
    }
    if (!(easy_fraction > 0.0 && easy_fraction < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "easy_fraction must lie in (0, 1)");
    }
    if (shots < 1) throw Error(ErrorCode::invalid_argument, "shots per category must be >= 1");
}

std::size_t pool_size(std::size_t n, double fraction) {
    if (n == 0) return 0;
    const double raw = fraction * static_cast<double>(n);
    const double nearest = std::round(raw);
    const double size = std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw);
    return std::clamp<std::size_t>(static_cast<std::size_t>(size), 1, n);
}

namespace {

bool ranks_before(const ScoredPair* a, const ScoredPair* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->pair.pair_id < b->pair.pair_id;
}

bool easier_before(const ScoredPair* a, const ScoredPair* b) {
    if (a->score != b->score) return a->score < b->score;
    return a->pair.pair_id < b->pair.pair_id;
}

std::vector<std::string> ids_of(const std::vector<const ScoredPair*>& rows, std::size_t begin,
                                std::size_t end) {
    std::vector<std::string> out;
    for (std::size_t i = begin; i < end && i < rows.size(); ++i) out.push_back(rows[i]->pair.pair_id);
    return out;
}

bool pool_based(SelectionStrategy s) {
    return s == SelectionStrategy::top_range_random || s == SelectionStrategy::easy_bottom;
}

}  // namespace

std::map<std::string, std::vector<const ScoredPair*>> rank_by_category(const ScoreTable& table,
                                                                       bool per_category) {
    std::map<std::string, std::vector<const ScoredPair*>> groups;
    for (const auto& row : table.rows) {
        const std::string cat = per_category && row.pair.category ? *row.pair.category
                                                                  : std::string(kDefaultCategory);
        groups[cat].push_back(&row);
    }
    for (auto& [_, rows] : groups) std::sort(rows.begin(), rows.end(), ranks_before);
    return groups;
}

std::map<std::string, std::vector<std::string>> build_pool(const ScoreTable& table,
                                                           double pool_fraction,
                                                           bool per_category) {
    if (!(pool_fraction > 0.0 && pool_fraction < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "pool_fraction must lie in (0, 1)");
    }
    if (table.rows.empty()) throw Error(ErrorCode::invalid_argument, "empty score table");
    std::map<std::string, std::vector<std::string>> pools;
    for (const auto& [cat, rows] : rank_by_category(table, per_category)) {
        pools[cat] = ids_of(rows, 0, pool_size(rows.size(), pool_fraction));
    }
    return pools;
}

std::string_view to_string(RoundStatus s) {
    switch (s) {
        case RoundStatus::selected: return "selected";
        case RoundStatus::annotating: return "annotating";
        case RoundStatus::exported: return "exported";
    }
    return "unknown";
}

RoundStatus parse_round_status(std::string_view s) {
    if (s == "selected") return RoundStatus::selected;
    if (s == "annotating") return RoundStatus::annotating;
    if (s == "exported") return RoundStatus::exported;
    throw Error(ErrorCode::invalid_argument, "unknown round status '" + std::string(s) + "'");
}

std::size_t SelectionRound::chosen_count() const {
    std::size_t n = 0;
    for (const auto& c : categories) n += c.chosen.size();
    return n;
}

void SelectionRound::validate() const {
    const auto fail = [&](const std::string& msg) {
        throw Error(ErrorCode::invalid_argument, "round '" + round_id + "': " + msg);
    };
    if (round_id.empty()) throw Error(ErrorCode::invalid_argument, "round_id is empty");
    if (categories.empty()) fail("no categories");
    std::set<std::string> seen_chosen;
    std::set<std::string> seen_cat;
    for (const auto& c : categories) {
        if (!seen_cat.insert(c.category).second) fail("duplicate category '" + c.category + "'");
        if (c.chosen.empty()) fail("category '" + c.category + "' has no chosen pairs");
        const std::set<std::string> pool(c.pool.begin(), c.pool.end());
        const std::set<std::string> chosen(c.chosen.begin(), c.chosen.end());
        for (const auto& id : c.chosen) {
            if (!seen_chosen.insert(id).second) fail("pair '" + id + "' chosen twice");
            auto it = pairs.find(id);
            if (it == pairs.end()) fail("chosen pair '" + id + "' has no description");
            if (it->second.category != c.category) fail("pair '" + id + "' category mismatch");
        }
        if (pool_based(config.strategy)) {
            const bool subset = pool.size() >= chosen.size();
            const auto& small = subset ? chosen : pool;
            const auto& big = subset ? pool : chosen;
            for (const auto& id : small) {
                if (!big.contains(id)) fail("pair '" + id + "' violates the pool boundary");
            }
        }
    }
    for (const auto& [id, p] : pairs) {
        if (id != p.pair_id) fail("pair key mismatch for '" + id + "'");
        if (!seen_chosen.contains(id)) fail("pair '" + id + "' described but not chosen");
    }
}

SelectionRound select(const ScoreTable& table, const SelectionConfig& config,
                      std::string created_at) {
    config.validate();
    if (table.rows.empty()) throw Error(ErrorCode::invalid_argument, "empty score table");

    SelectionRound round;
    round.config = config;
    round.created_at = created_at.empty() ? utc_timestamp_now() : std::move(created_at);
    round.status = RoundStatus::selected;
    if (config.round_id.empty()) {
        SelectionConfig anon = config;
        anon.round_id.clear();
        round.round_id = "round-" + sha256_hex(score_table_to_jsonl(table) +
                                               config_to_json(anon).dump())
                                        .substr(0, 12);
        round.config.round_id = round.round_id;
    } else {
        round.round_id = config.round_id;
    }

    const Rng root(config.seed);
    const auto k = static_cast<std::size_t>(config.shots);
    for (const auto& [cat, ranked] : rank_by_category(table, config.per_category)) {
        const std::size_t n = ranked.size();
        if (k > n) {
            throw Error(ErrorCode::invalid_argument,
                        "category '" + cat + "' has " + std::to_string(n) + " pairs, fewer than K=" +
                            std::to_string(k));
        }
        Rng rng = root.split(cat);
        CategorySelection sel;
        sel.category = cat;
        sel.population = n;

        // Candidate range in preference order; pool = its first `limit` entries.
        std::vector<const ScoredPair*> order = ranked;
        std::size_t limit = n;
        switch (config.strategy) {
            case SelectionStrategy::top_range_random:
                limit = pool_size(n, config.pool_fraction);
                break;
            case SelectionStrategy::easy_bottom:
                std::sort(order.begin(), order.end(), easier_before);
                limit = pool_size(n, config.easy_fraction);
                break;
            case SelectionStrategy::random:
                break;
            case SelectionStrategy::top_k:
                limit = k;
                break;
        }
        if (limit == 0) throw Error(ErrorCode::invalid_argument, "empty pool for '" + cat + "'");
        sel.pool = ids_of(order, 0, limit);

        if (config.strategy == SelectionStrategy::top_k) {
            sel.chosen = sel.pool;
        } else if (limit >= k) {
            sel.chosen = sample_without_replacement(sel.pool, k, rng);
        } else {
            sel.chosen = sel.pool;
            for (auto& id : ids_of(order, limit, k)) sel.chosen.push_back(std::move(id));
            round.warnings.push_back("category '" + cat + "': pool of " + std::to_string(limit) +
                                     " is smaller than K=" + std::to_string(k) +
                                     "; extended with the next-ranked pairs");
        }

        std::map<std::string_view, const ScoredPair*> by_id;
        for (const auto* r : ranked) by_id.emplace(r->pair.pair_id, r);
        for (const auto& id : sel.chosen) {
            const ScoredPair* r = by_id.at(id);
            round.pairs[id] = RoundPair{id, r->pair.ref_image_id, r->pair.target_image_id, cat,
                                        r->score};
        }
        round.categories.push_back(std::move(sel));
    }
    round.validate();
    return round;
}

nlohmann::json config_to_json(const SelectionConfig& c) {
    return {{"strategy", to_string(c.strategy)}, {"pool_fraction", c.pool_fraction},
            {"easy_fraction", c.easy_fraction},  {"shots", c.shots},
            {"seed", c.seed},                    {"per_category", c.per_category},
            {"round_id", c.round_id}};
}

SelectionConfig config_from_json(const nlohmann::json& j) {
    SelectionConfig c;
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.pool_fraction = j.at("pool_fraction").get<double>();
    c.easy_fraction = j.value("easy_fraction", 0.25);
    c.shots = j.at("shots").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.per_category = j.value("per_category", true);
    c.round_id = j.value("round_id", std::string());
    c.validate();
    return c;
}

nlohmann::json round_to_json(const SelectionRound& r) {
    nlohmann::json j;
    j["round_id"] = r.round_id;
    j["created_at"] = r.created_at;
    j["status"] = to_string(r.status);
    j["config"] = config_to_json(r.config);
    auto& cats = j["categories"] = nlohmann::json::array();
    for (const auto& c : r.categories) {
        cats.push_back({{"category", c.category},
                        {"population", c.population},
                        {"pool", c.pool},
                        {"chosen", c.chosen}});
    }
    auto& pairs = j["pairs"] = nlohmann::json::object();
    for (const auto& [id, p] : r.pairs) {
        pairs[id] = {{"ref", p.ref_image_id},
                     {"tgt", p.target_image_id},
                     {"category", p.category},
                     {"score", p.score}};
    }
    j["warnings"] = r.warnings;
    return j;
}

SelectionRound round_from_json(const nlohmann::json& j) {
    SelectionRound r;
    try {
        r.round_id = j.at("round_id").get<std::string>();
        r.created_at = j.value("created_at", std::string());
        r.status = parse_round_status(j.value("status", std::string("selected")));
        r.config = config_from_json(j.at("config"));
        for (const auto& c : j.at("categories")) {
            r.categories.push_back({c.at("category").get<std::string>(),
                                    c.value("population", std::size_t{0}),
                                    c.at("pool").get<std::vector<std::string>>(),
                                    c.at("chosen").get<std::vector<std::string>>()});
        }
        for (const auto& [id, p] : j.at("pairs").items()) {
            r.pairs[id] = RoundPair{id, p.at("ref").get<std::string>(),
                                    p.at("tgt").get<std::string>(),
                                    p.at("category").get<std::string>(),
                                    p.value("score", 0.0)};
        }
        r.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("malformed round: ") + e.what());
    }
    r.validate();
    return r;
}

}  // namespace ptg
