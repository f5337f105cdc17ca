#pragma once

#include "ptg/captioner.hpp"
#include "ptg/composer.hpp"
#include "ptg/embedding_store.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ptg {

struct CandidatePair {
    std::string pair_id;
    std::string ref_image_id;
    std::string target_image_id;
    std::optional<std::string> category;

    bool operator==(const CandidatePair&) const = default;
};

struct ChallengeScore {
    std::string pair_id;
    double score = 0.0;  // 1 - cos(f_c, f_t), in [0, 2]
};

struct ScoredPair {
    CandidatePair pair;
    double score = 0.0;

    bool operator==(const ScoredPair&) const = default;
};

struct ScoreProvenance {
    std::string backend_mode;
    std::string backend_digest;
    std::string images_digest;
    std::optional<std::uint64_t> seed;
};

/// One row per candidate pair, ordered by pair_id ascending.
struct ScoreTable {
    std::vector<ScoredPair> rows;
    ScoreProvenance provenance;
    std::vector<std::string> failures;  // lenient mode only: "<pair_id>: <reason>"
};

/// Resolves the caption of a target image; used as the pseudo modification text.
using CaptionLookup = std::function<Caption(const std::string& target_image_id)>;

/// Captions from an id→caption map (e.g. a captions JSONL file).
CaptionLookup caption_lookup_from_map(std::unordered_map<std::string, std::string> captions);
/// Captions produced by `captioner` for `<image_dir>/<id>.<ext>`.
CaptionLookup caption_lookup_from_captioner(Captioner& captioner, std::string image_dir);

/// s = 1 - cos(f_c, f_t) with f_c = compose(ref, caption of target).
ChallengeScore score_pair(const CandidatePair& pair, const Caption& target_caption,
                          const ComposerBackend& backend, const EmbeddingTable& images);

struct ScoreOptions {
    bool strict = true;
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed;
};

ScoreTable score_all(const std::vector<CandidatePair>& pairs, const CaptionLookup& captions,
                     const ComposerBackend& backend, const EmbeddingTable& images,
                     const ScoreOptions& options = {});

/// Pairs JSONL: {"pair_id":…, "ref":…, "tgt":…, "category":… (optional)}.
std::vector<CandidatePair> parse_pairs_jsonl(std::string_view text);
std::vector<CandidatePair> load_pairs(const std::string& path);
std::string pairs_to_jsonl(const std::vector<CandidatePair>& pairs);

/// Score JSONL: {"pair_id":…, "ref":…, "tgt":…, "category":…, "score":…}.
std::string score_table_to_jsonl(const ScoreTable& table);
ScoreTable parse_score_table_jsonl(std::string_view text);
ScoreTable load_score_table(const std::string& path);
void save_score_table(const ScoreTable& table, const std::string& path);

}  // namespace ptg
