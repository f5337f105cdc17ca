#include "ptg/evaluation.hpp"

#include "jsonl.hpp"
#include "ptg/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace ptg {

std::size_t target_rank(const RetrievalQuery& query, const EmbeddingTable& gallery) {
    const EmbeddingVector* target = gallery.find(query.target_id);
    if (target == nullptr) {
        throw Error(ErrorCode::not_found, "query '" + query.query_id + "': target '" +
                                              query.target_id + "' not in gallery");
    }
    if (query.exclude_ids.contains(query.target_id)) {
        throw Error(ErrorCode::invalid_argument,
                    "query '" + query.query_id + "': target is excluded from the gallery");
    }
    const double target_sim = cosine_similarity(query.composed, *target);
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        const std::string& id = gallery.ids()[i];
        if (id == query.target_id || query.exclude_ids.contains(id)) continue;
        const double sim = cosine_similarity(query.composed, gallery.vector_at(i));
        if (sim > target_sim || (sim == target_sim && id < query.target_id)) ++ahead;
    }
    return ahead;
}

RecallReport recall_at_k(const std::vector<RetrievalQuery>& queries, const EmbeddingTable& gallery,
                         std::vector<int> ks, std::size_t threads) {
    if (queries.empty()) throw Error(ErrorCode::invalid_argument, "no queries");
    if (ks.empty()) throw Error(ErrorCode::invalid_argument, "no k values");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    for (const auto& q : queries) {
        std::size_t excluded = 0;
        for (const auto& id : q.exclude_ids) excluded += gallery.contains(id) ? 1 : 0;
        const std::size_t effective = gallery.size() - excluded;
        if (effective == 0) {
            throw Error(ErrorCode::invalid_argument,
                        "query '" + q.query_id + "': gallery empty after exclusions");
        }
        for (int k : ks) {
            if (k < 1 || static_cast<std::size_t>(k) > effective) {
                throw Error(ErrorCode::invalid_argument,
                            "k=" + std::to_string(k) + " outside [1, " + std::to_string(effective) +
                                "] for query '" + q.query_id + "'");
            }
        }
    }

    std::vector<std::size_t> ranks(queries.size());
    parallel_for(queries.size(), threads,
                 [&](std::size_t i) { ranks[i] = target_rank(queries[i], gallery); });

    RecallReport report;
    report.ks = ks;
    report.query_count = queries.size();
    std::map<std::string, std::map<int, std::size_t>> subset_hits;
    std::map<int, std::size_t> hits;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& subset = queries[i].subset;
        if (!subset.empty()) ++report.subset_counts[subset];
        for (int k : ks) {
            const bool hit = ranks[i] < static_cast<std::size_t>(k);
            hits[k] += hit;
            if (!subset.empty()) subset_hits[subset][k] += hit;
        }
    }
    for (int k : ks) {
        report.overall[k] = static_cast<double>(hits[k]) / static_cast<double>(queries.size());
    }
    for (const auto& [name, per_k] : subset_hits) {
        for (int k : ks) {
            report.subsets[name][k] =
                static_cast<double>(per_k.at(k)) / static_cast<double>(report.subset_counts[name]);
        }
    }
    if (!report.subsets.empty()) {
        for (int k : ks) {
            double sum = 0.0;
            for (const auto& [_, per_k] : report.subsets) sum += per_k.at(k);
            report.subset_mean[k] = sum / static_cast<double>(report.subsets.size());
        }
    }
    return report;
}

TrialStat trial_stat(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw Error(ErrorCode::invalid_argument, "standard error needs at least 2 trials");
    TrialStat s;
    s.values.assign(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(n);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) {
        s.mean = *lo;
        return s;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.standard_error = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    return s;
}

namespace {

std::map<int, TrialStat> aggregate_map(const std::vector<const std::map<int, double>*>& runs,
                                       const std::vector<int>& ks) {
    std::map<int, TrialStat> out;
    for (int k : ks) {
        std::vector<double> values;
        for (const auto* r : runs) values.push_back(r->at(k));
        out[k] = trial_stat(values);
    }
    return out;
}

}  // namespace

TrialAggregate aggregate_trials(const std::vector<RecallReport>& reports) {
    if (reports.size() < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 trial reports");
    const auto& first = reports.front();
    for (const auto& r : reports) {
        bool same = r.ks == first.ks && r.subsets.size() == first.subsets.size();
        for (auto a = r.subsets.begin(), b = first.subsets.begin(); same && a != r.subsets.end();
             ++a, ++b) {
            same = a->first == b->first;
        }
        if (!same) throw Error(ErrorCode::invalid_argument, "trial reports have mismatched shapes");
    }

    TrialAggregate agg;
    agg.ks = first.ks;
    agg.trials = reports.size();
    std::vector<const std::map<int, double>*> runs;
    for (const auto& r : reports) runs.push_back(&r.overall);
    agg.overall = aggregate_map(runs, agg.ks);
    if (!first.subsets.empty()) {
        runs.clear();
        for (const auto& r : reports) runs.push_back(&r.subset_mean);
        agg.subset_mean = aggregate_map(runs, agg.ks);
        for (const auto& [name, _] : first.subsets) {
            runs.clear();
            for (const auto& r : reports) runs.push_back(&r.subsets.at(name));
            agg.subsets[name] = aggregate_map(runs, agg.ks);
        }
    }
    return agg;
}

namespace {

nlohmann::json per_k_json(const std::map<int, double>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j["R@" + std::to_string(k)] = v;
    return j;
}

nlohmann::json per_k_json(const std::map<int, TrialStat>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, s] : m) {
        j["R@" + std::to_string(k)] = {
            {"mean", s.mean}, {"stderr", s.standard_error}, {"trials", s.values}};
    }
    return j;
}

}  // namespace

nlohmann::json report_to_json(const RecallReport& r) {
    nlohmann::json j;
    j["ks"] = r.ks;
    j["queries"] = r.query_count;
    j["overall"] = per_k_json(r.overall);
    if (!r.subsets.empty()) {
        auto& s = j["subsets"] = nlohmann::json::object();
        for (const auto& [name, m] : r.subsets) {
            s[name] = per_k_json(m);
            s[name]["queries"] = r.subset_counts.at(name);
        }
        j["subset_mean"] = per_k_json(r.subset_mean);
    }
    return j;
}

nlohmann::json aggregate_to_json(const TrialAggregate& a) {
    nlohmann::json j;
    j["ks"] = a.ks;
    j["trials"] = a.trials;
    j["overall"] = per_k_json(a.overall);
    if (!a.subsets.empty()) {
        auto& s = j["subsets"] = nlohmann::json::object();
        for (const auto& [name, m] : a.subsets) s[name] = per_k_json(m);
        j["subset_mean"] = per_k_json(a.subset_mean);
    }
    return j;
}

std::vector<RetrievalQuery> parse_queries_jsonl(std::string_view text, bool exclude_reference) {
    std::vector<RetrievalQuery> out;
    detail::for_each_jsonl(text, "queries", [&](const nlohmann::json& rec, std::size_t) {
        RetrievalQuery q;
        q.query_id = rec.at("query_id").get<std::string>();
        q.target_id = rec.at("target").get<std::string>();
        std::vector<float> v;
        for (const auto& x : rec.at("vec")) v.push_back(x.get<float>());
        q.composed = EmbeddingVector(std::move(v));
        q.subset = rec.value("subset", std::string());
        if (exclude_reference && rec.contains("ref") && !rec["ref"].is_null()) {
            q.exclude_ids.insert(rec["ref"].get<std::string>());
        }
        if (auto it = rec.find("exclude"); it != rec.end()) {
            for (const auto& id : *it) q.exclude_ids.insert(id.get<std::string>());
        }
        out.push_back(std::move(q));
    });
    if (out.empty()) throw Error(ErrorCode::invalid_argument, "no queries");
    return out;
}

std::vector<RetrievalQuery> load_queries(const std::string& path, bool exclude_reference) {
    return parse_queries_jsonl(read_file_bytes(path), exclude_reference);
}

}  // namespace ptg
