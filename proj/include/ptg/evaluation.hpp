#pragma once

#include "ptg/embedding_store.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ptg {

struct RetrievalQuery {
    std::string query_id;
    EmbeddingVector composed;  // f_c at inference time
    std::string target_id;
    std::set<std::string> exclude_ids;  // normally the reference image
    std::string subset;                 // empty when the dataset has no subsets
};

struct RecallReport {
    std::vector<int> ks;
    std::size_t query_count = 0;
    std::map<int, double> overall;                          // hits / queries
    std::map<std::string, std::map<int, double>> subsets;   // per named subset
    std::map<std::string, std::size_t> subset_counts;
    std::map<int, double> subset_mean;  // unweighted mean over subsets; empty if none
};

/// 0-based position of the target in the gallery ranked by cosine descending,
/// ties by id ascending, skipping excluded ids.
std::size_t target_rank(const RetrievalQuery& query, const EmbeddingTable& gallery);

/// Throws if a target is missing or excluded, if the gallery is empty after
/// exclusions, or if any k is outside [1, effective gallery size].
RecallReport recall_at_k(const std::vector<RetrievalQuery>& queries, const EmbeddingTable& gallery,
                         std::vector<int> ks, std::size_t threads = 1);

struct TrialStat {
    std::vector<double> values;
    double mean = 0.0;
    double standard_error = 0.0;  // sample std (n - 1) / sqrt(n)
};

/// n >= 2 values.
TrialStat trial_stat(std::span<const double> values);

struct TrialAggregate {
    std::vector<int> ks;
    std::size_t trials = 0;
    std::map<int, TrialStat> overall;
    std::map<int, TrialStat> subset_mean;
    std::map<std::string, std::map<int, TrialStat>> subsets;
};

/// Needs >= 2 reports with identical ks and subset names.
TrialAggregate aggregate_trials(const std::vector<RecallReport>& reports);

nlohmann::json report_to_json(const RecallReport& r);
nlohmann::json aggregate_to_json(const TrialAggregate& a);

/// Queries JSONL: {"query_id":…, "ref":…, "target":…, "vec":[…],
/// "subset":… (optional), "exclude":[…] (optional)}. The reference id is
/// excluded from ranking when `exclude_reference` is set.
std::vector<RetrievalQuery> parse_queries_jsonl(std::string_view text, bool exclude_reference = true);
std::vector<RetrievalQuery> load_queries(const std::string& path, bool exclude_reference = true);

/// Default ks by dataset style.
inline const std::vector<int> kFashionStyleKs = {10, 50};
inline const std::vector<int> kOpenWorldKs = {1, 5};

}  // namespace ptg
