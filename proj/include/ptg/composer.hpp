#pragma once

#include "ptg/embedding_store.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace ptg {

enum class ComposerMode { precomputed, toy };

std::string_view to_string(ComposerMode mode);

/// Hex SHA-256 of a text; the key text embeddings and composites are stored under.
std::string text_key(std::string_view text);

/// "<ref_id>|<text_key(text)>", the id convention for precomputed composites.
std::string composite_id(std::string_view ref_image_id, std::string_view text);

/// The composition function mapping (reference image, text) to a query
/// embedding. Either a table of composites exported from a real backbone, or
/// a normalized linear blend of image and text embeddings for tests.
class ComposerBackend {
public:
    static ComposerBackend precomputed(std::shared_ptr<const EmbeddingTable> composites);
    /// alpha must lie in the open interval (0, 1); tables must share a dim.
    static ComposerBackend toy(std::shared_ptr<const EmbeddingTable> images,
                               std::shared_ptr<const EmbeddingTable> texts, double alpha = 0.5);

    ComposerMode mode() const noexcept { return mode_; }
    double alpha() const noexcept { return alpha_; }

    /// Precomputed: the vector stored under pair_id, verbatim.
    /// Toy: normalize(alpha * image[ref_image_id] + (1 - alpha) * text[text_id]).
    EmbeddingVector compose(std::string_view pair_id, std::string_view ref_image_id,
                            std::string_view text_id) const;

    /// Digests of the backing tables, for provenance.
    std::string digest() const;

private:
    ComposerMode mode_ = ComposerMode::toy;
    double alpha_ = 0.5;
    std::shared_ptr<const EmbeddingTable> composites_;
    std::shared_ptr<const EmbeddingTable> images_;
    std::shared_ptr<const EmbeddingTable> texts_;
};

}  // namespace ptg
