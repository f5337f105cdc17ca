#include "ptg/challenge_scoring.hpp"

#include "jsonl.hpp"
#include "ptg/parallel.hpp"
#include "ptg/pseudo_triplets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

namespace ptg {

CaptionLookup caption_lookup_from_map(std::unordered_map<std::string, std::string> captions) {
    auto shared = std::make_shared<const std::unordered_map<std::string, std::string>>(
        std::move(captions));
    return [shared](const std::string& id) {
        auto it = shared->find(id);
        if (it == shared->end()) throw Error(ErrorCode::not_found, "no caption for '" + id + "'");
        return Caption{id, it->second, CaptionSource::file, {}};
    };
}

CaptionLookup caption_lookup_from_captioner(Captioner& captioner, std::string image_dir) {
    auto by_id = std::make_shared<std::unordered_map<std::string, std::string>>();
    for (const auto& f : list_images(image_dir)) {
        by_id->emplace(std::filesystem::path(f).stem().string(),
                       (std::filesystem::path(image_dir) / f).string());
    }
    return [&captioner, by_id](const std::string& id) {
        auto it = by_id->find(id);
        if (it == by_id->end()) throw Error(ErrorCode::not_found, "no image file for '" + id + "'");
        auto input = ImageInput::from_path(it->second);
        return captioner.caption(input);
    };
}

ChallengeScore score_pair(const CandidatePair& pair, const Caption& target_caption,
                          const ComposerBackend& backend, const EmbeddingTable& images) {
    const std::string& text = target_caption.text;
    const EmbeddingVector composed = backend.compose(composite_id(pair.ref_image_id, text),
                                                     pair.ref_image_id, text_key(text));
    const EmbeddingVector& target = images.at(pair.target_image_id);
    try {
        return {pair.pair_id, 1.0 - cosine_similarity(composed, target)};
    } catch (const Error& e) {
        throw Error(e.code(), "pair '" + pair.pair_id + "': " + e.what());
    }
}

ScoreTable score_all(const std::vector<CandidatePair>& pairs, const CaptionLookup& captions,
                     const ComposerBackend& backend, const EmbeddingTable& images,
                     const ScoreOptions& options) {
    std::vector<const CandidatePair*> order;
    order.reserve(pairs.size());
    {
        std::unordered_set<std::string_view> seen;
        for (const auto& p : pairs) {
            if (!seen.insert(p.pair_id).second) {
                throw Error(ErrorCode::conflict, "duplicate pair_id '" + p.pair_id + "'");
            }
            order.push_back(&p);
        }
    }
    std::sort(order.begin(), order.end(),
              [](const auto* a, const auto* b) { return a->pair_id < b->pair_id; });

    std::vector<std::optional<double>> scores(order.size());
    std::vector<std::string> errors(order.size());
    parallel_for(order.size(), options.threads, [&](std::size_t i) {
        const CandidatePair& p = *order[i];
        try {
            if (p.ref_image_id == p.target_image_id) {
                throw Error(ErrorCode::invalid_argument, "reference equals target");
            }
            scores[i] = score_pair(p, captions(p.target_image_id), backend, images).score;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    ScoreTable table;
    table.provenance = {std::string(to_string(backend.mode())), backend.digest(),
                        table_digest(images), options.seed};
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (scores[i]) {
            table.rows.push_back({*order[i], *scores[i]});
        } else {
            table.failures.push_back(order[i]->pair_id + ": " + errors[i]);
        }
    }
    if (options.strict && !table.failures.empty()) {
        std::string msg = std::to_string(table.failures.size()) + " pair(s) failed to score";
        for (std::size_t i = 0; i < table.failures.size() && i < 5; ++i) {
            msg += "; " + table.failures[i];
        }
        throw Error(ErrorCode::incomplete, msg);
    }
    return table;
}

namespace {

CandidatePair pair_from_json(const nlohmann::json& rec) {
    CandidatePair p;
    p.pair_id = rec.at("pair_id").get<std::string>();
    p.ref_image_id = rec.at("ref").get<std::string>();
    p.target_image_id = rec.at("tgt").get<std::string>();
    if (auto it = rec.find("category"); it != rec.end() && !it->is_null()) {
        p.category = it->get<std::string>();
    }
    if (p.pair_id.empty() || p.ref_image_id.empty() || p.target_image_id.empty()) {
        throw Error(ErrorCode::parse_error, "empty pair_id, ref, or tgt");
    }
    return p;
}

nlohmann::json pair_to_json(const CandidatePair& p) {
    nlohmann::json j;
    j["pair_id"] = p.pair_id;
    j["ref"] = p.ref_image_id;
    j["tgt"] = p.target_image_id;
    j["category"] = p.category ? nlohmann::json(*p.category) : nlohmann::json(nullptr);
    return j;
}

}  // namespace

std::vector<CandidatePair> parse_pairs_jsonl(std::string_view text) {
    std::vector<CandidatePair> out;
    detail::for_each_jsonl(text, "pairs", [&](const nlohmann::json& rec, std::size_t) {
        out.push_back(pair_from_json(rec));
    });
    return out;
}

std::vector<CandidatePair> load_pairs(const std::string& path) {
    return parse_pairs_jsonl(read_file_bytes(path));
}

std::string pairs_to_jsonl(const std::vector<CandidatePair>& pairs) {
    std::string out;
    for (const auto& p : pairs) out += pair_to_json(p).dump() + "\n";
    return out;
}

std::string score_table_to_jsonl(const ScoreTable& table) {
    std::string out;
    for (const auto& row : table.rows) {
        auto j = pair_to_json(row.pair);
        j["score"] = row.score;
        out += j.dump() + "\n";
    }
    return out;
}

ScoreTable parse_score_table_jsonl(std::string_view text) {
    ScoreTable table;
    std::unordered_set<std::string> seen;
    detail::for_each_jsonl(text, "scores", [&](const nlohmann::json& rec, std::size_t) {
        ScoredPair row{pair_from_json(rec), rec.at("score").get<double>()};
        if (!std::isfinite(row.score)) throw Error(ErrorCode::parse_error, "non-finite score");
        if (!seen.insert(row.pair.pair_id).second) {
            throw Error(ErrorCode::conflict, "duplicate pair_id '" + row.pair.pair_id + "'");
        }
        table.rows.push_back(std::move(row));
    });
    std::sort(table.rows.begin(), table.rows.end(),
              [](const auto& a, const auto& b) { return a.pair.pair_id < b.pair.pair_id; });
    return table;
}

ScoreTable load_score_table(const std::string& path) {
    return parse_score_table_jsonl(read_file_bytes(path));
}

void save_score_table(const ScoreTable& table, const std::string& path) {
    write_file_bytes(path, score_table_to_jsonl(table));
}

}  // namespace ptg
