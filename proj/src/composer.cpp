#include "ptg/composer.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"

#include <cmath>

namespace ptg {

std::string_view to_string(ComposerMode mode) {
    return mode == ComposerMode::precomputed ? "precomputed" : "toy";
}

std::string text_key(std::string_view text) { return sha256_hex(text); }

std::string composite_id(std::string_view ref_image_id, std::string_view text) {
    return std::string(ref_image_id) + "|" + text_key(text);
}

ComposerBackend ComposerBackend::precomputed(std::shared_ptr<const EmbeddingTable> composites) {
    if (!composites) throw Error(ErrorCode::invalid_argument, "missing composite table");
    ComposerBackend b;
    b.mode_ = ComposerMode::precomputed;
    b.composites_ = std::move(composites);
    return b;
}

ComposerBackend ComposerBackend::toy(std::shared_ptr<const EmbeddingTable> images,
                                     std::shared_ptr<const EmbeddingTable> texts, double alpha) {
    if (!images || !texts) throw Error(ErrorCode::invalid_argument, "missing toy composer table");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "toy composer alpha must lie in (0, 1)");
    }
    if (images->dim() != texts->dim()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "toy composer image dim " + std::to_string(images->dim()) +
                        " != text dim " + std::to_string(texts->dim()));
    }
    ComposerBackend b;
    b.mode_ = ComposerMode::toy;
    b.alpha_ = alpha;
    b.images_ = std::move(images);
    b.texts_ = std::move(texts);
    return b;
}

EmbeddingVector ComposerBackend::compose(std::string_view pair_id, std::string_view ref_image_id,
                                         std::string_view text_id) const {
    if (mode_ == ComposerMode::precomputed) return composites_->at(pair_id);

    const auto ref = images_->at(ref_image_id).values();
    const auto txt = texts_->at(text_id).values();
    std::vector<double> mixed(ref.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        mixed[i] = alpha_ * ref[i] + (1.0 - alpha_) * txt[i];
        sq += mixed[i] * mixed[i];
    }
    if (sq == 0.0) {
        throw Error(ErrorCode::invalid_argument, "toy composite for '" + std::string(pair_id) +
                                                     "' has zero norm");
    }
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<float> out(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) out[i] = static_cast<float>(mixed[i] * inv);
    return EmbeddingVector(std::move(out));
}

std::string ComposerBackend::digest() const {
    if (mode_ == ComposerMode::precomputed) return table_digest(*composites_);
    return sha256_hex(table_digest(*images_) + table_digest(*texts_) + std::to_string(alpha_));
}

}  // namespace ptg
