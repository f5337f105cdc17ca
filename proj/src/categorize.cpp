#include "ptg/categorize.hpp"

#include "jsonl.hpp"
#include "ptg/parallel.hpp"
#include "ptg/rng.hpp"

#include <cmath>
#include <limits>

namespace ptg {

namespace {

double squared_distance(std::span<const float> x, const std::vector<double>& c) {
    double d = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double t = x[i] - c[i];
        d += t * t;
    }
    return d;
}

std::vector<double> as_double(std::span<const float> x) { return {x.begin(), x.end()}; }

std::vector<std::vector<double>> kmeans_plus_plus(const EmbeddingTable& items, int k, Rng& rng) {
    const std::size_t n = items.size();
    std::vector<std::vector<double>> centroids;
    std::vector<bool> taken(n, false);
    std::size_t first = rng.below(n);
    taken[first] = true;
    centroids.push_back(as_double(items.vector_at(first).values()));

    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(items.vector_at(i).values(), centroids.back()));
            total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // rounding at the tail
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            // All points coincide with chosen centroids: pick an unused index.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i]) free.push_back(i);
            }
            pick = free[rng.below(free.size())];
        }
        taken[pick] = true;
        centroids.push_back(as_double(items.vector_at(pick).values()));
    }
    return centroids;
}

}  // namespace

CategoryAssignment kmeans_categorize(const EmbeddingTable& items, int k, std::uint64_t seed,
                                     const KMeansOptions& options) {
    if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
    const std::size_t n = items.size();
    if (n < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::invalid_argument, "k-means needs at least k=" + std::to_string(k) +
                                                     " items, got " + std::to_string(n));
    }
    const std::size_t dim = items.dim();
    Rng rng(seed);

    CategoryAssignment out;
    out.method = CategoryMethod::kmeans;
    out.k = k;
    out.centroids = kmeans_plus_plus(items, k, rng);

    std::vector<int> label(n, 0);
    std::vector<double> dist(n, 0.0);

    const auto assign = [&] {
        parallel_for(n, options.threads, [&](std::size_t i) {
            const auto x = items.vector_at(i).values();
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                const double d = squared_distance(x, out.centroids[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            label[i] = arg;
            dist[i] = best;
        });
        std::vector<std::size_t> sizes(k, 0);
        for (int l : label) ++sizes[l];
        for (int c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[label[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
            }
            --sizes[label[far]];
            ++sizes[c];
            label[far] = c;
            dist[far] = 0.0;
            out.centroids[c] = as_double(items.vector_at(far).values());
        }
        double inertia = 0.0;
        for (double d : dist) inertia += d;
        out.inertia_history.push_back(inertia);
        out.inertia = inertia;
    };

    for (int it = 1; it <= options.max_iterations; ++it) {
        assign();
        out.iterations_run = it;

        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = items.vector_at(i).values();
            auto& acc = next[label[i]];
            for (std::size_t d = 0; d < dim; ++d) acc[d] += x[d];
            ++counts[label[i]];
        }
        double displacement = 0.0;
        for (int c = 0; c < k; ++c) {
            for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
            double moved = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double t = next[c][d] - out.centroids[c][d];
                moved += t * t;
            }
            displacement = std::max(displacement, std::sqrt(moved));
        }
        out.centroids = std::move(next);
        if (displacement < options.tolerance) break;
    }
    assign();  // labels consistent with the final centroids

    for (std::size_t i = 0; i < n; ++i) out.labels[items.ids()[i]] = "c" + std::to_string(label[i]);
    return out;
}

CategoryAssignment explicit_categories(std::map<std::string, std::string> labels) {
    CategoryAssignment a;
    a.method = CategoryMethod::explicit_labels;
    a.labels = std::move(labels);
    return a;
}

CategoryBasis parse_category_basis(std::string_view s) {
    if (s == "reference_image" || s == "reference" || s == "ref") return CategoryBasis::reference_image;
    if (s == "target_image" || s == "target" || s == "tgt") return CategoryBasis::target_image;
    throw Error(ErrorCode::invalid_argument, "unknown category basis '" + std::string(s) + "'");
}

std::vector<CandidatePair> assign_pair_categories(const std::vector<CandidatePair>& pairs,
                                                  const CategoryAssignment& assignment,
                                                  CategoryBasis basis) {
    std::vector<CandidatePair> out = pairs;
    for (auto& p : out) {
        const std::string& image =
            basis == CategoryBasis::reference_image ? p.ref_image_id : p.target_image_id;
        auto it = assignment.labels.find(image);
        if (it == assignment.labels.end()) {
            throw Error(ErrorCode::not_found, "image '" + image + "' of pair '" + p.pair_id +
                                                  "' has no category");
        }
        p.category = it->second;
    }
    return out;
}

nlohmann::json assignment_to_json(const CategoryAssignment& a) {
    nlohmann::json j;
    j["method"] = a.method == CategoryMethod::kmeans ? "kmeans" : "explicit";
    j["labels"] = a.labels;
    if (a.method == CategoryMethod::kmeans) {
        j["k"] = a.k;
        j["centroids"] = a.centroids;
        j["iterations_run"] = a.iterations_run;
        j["inertia"] = a.inertia;
        j["inertia_history"] = a.inertia_history;
    }
    return j;
}

CategoryAssignment load_categories_jsonl(const std::string& path) {
    std::map<std::string, std::string> labels;
    detail::for_each_jsonl(read_file_bytes(path), path, [&](const nlohmann::json& rec, std::size_t) {
        auto id = rec.at("id").get<std::string>();
        if (!labels.emplace(id, rec.at("category").get<std::string>()).second) {
            throw Error(ErrorCode::conflict, "duplicate id '" + id + "'");
        }
    });
    return explicit_categories(std::move(labels));
}

std::string categories_to_jsonl(const CategoryAssignment& a) {
    std::string out;
    for (const auto& [id, cat] : a.labels) {
        out += nlohmann::json{{"id", id}, {"category", cat}}.dump() + "\n";
    }
    return out;
}

}  // namespace ptg
