#pragma once

#include "ptg/challenge_scoring.hpp"
#include "ptg/embedding_store.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ptg {

enum class CategoryMethod { explicit_labels, kmeans };

struct CategoryAssignment {
    CategoryMethod method = CategoryMethod::explicit_labels;
    std::map<std::string, std::string> labels;  // item id -> category

    // k-means only
    int k = 0;
    std::vector<std::vector<double>> centroids;  // centroid i is category "c<i>"
    int iterations_run = 0;
    double inertia = 0.0;
    /// Inertia after every assignment step, including the final one.
    std::vector<double> inertia_history;
};

struct KMeansOptions {
    int max_iterations = 100;
    double tolerance = 1e-6;  // on the largest centroid displacement
    std::size_t threads = 1;
};

/// Lloyd's algorithm with k-means++ seeding. An empty cluster takes the point
/// farthest from its centroid among clusters with more than one member.
/// Deterministic for a given seed and item order.
CategoryAssignment kmeans_categorize(const EmbeddingTable& items, int k, std::uint64_t seed,
                                     const KMeansOptions& options = {});

CategoryAssignment explicit_categories(std::map<std::string, std::string> labels);

enum class CategoryBasis { reference_image, target_image };

CategoryBasis parse_category_basis(std::string_view s);

/// Labels each pair with the category of its reference (or target) image.
std::vector<CandidatePair> assign_pair_categories(const std::vector<CandidatePair>& pairs,
                                                  const CategoryAssignment& assignment,
                                                  CategoryBasis basis = CategoryBasis::reference_image);

nlohmann::json assignment_to_json(const CategoryAssignment& a);
/// Categories JSONL: {"id":…, "category":…}.
CategoryAssignment load_categories_jsonl(const std::string& path);
std::string categories_to_jsonl(const CategoryAssignment& a);

}  // namespace ptg
