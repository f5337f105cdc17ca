#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ptg {

/// Fixed-dimension float32 embedding. Construction rejects empty and
/// non-finite input; zero vectors are allowed here and rejected only where a
/// cosine is taken.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    float operator[](std::size_t i) const noexcept { return values_[i]; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<float> values_;
};

enum class ItemKind { image, masked_image, text };

struct ItemRef {
    std::string id;
    ItemKind kind = ItemKind::image;
};

/// Id-keyed embeddings sharing one dimension. Insertion order is preserved
/// and is the order used by the writers.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim);

    /// Throws dimension_mismatch (naming the id) or conflict on duplicates.
    void add(std::string id, EmbeddingVector vec);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    bool contains(std::string_view id) const;

    const EmbeddingVector* find(std::string_view id) const;
    /// Throws not_found naming the id.
    const EmbeddingVector& at(std::string_view id) const;

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const EmbeddingVector& vector_at(std::size_t index) const { return vectors_.at(index); }

    bool operator==(const EmbeddingTable& other) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class TableFormat { jsonl, binary };

/// `.jsonl` selects jsonl; anything else (`.ptge`, `.bin`) selects binary.
TableFormat format_for_path(std::string_view path);

EmbeddingTable load_table(const std::string& path, TableFormat format);
EmbeddingTable load_table(const std::string& path);
void save_table(const EmbeddingTable& table, const std::string& path, TableFormat format);
void save_table(const EmbeddingTable& table, const std::string& path);

/// In-memory codecs for the two on-disk formats.
EmbeddingTable parse_jsonl_table(std::string_view text);
std::string serialize_jsonl_table(const EmbeddingTable& table);
EmbeddingTable parse_binary_table(std::string_view bytes);
std::string serialize_binary_table(const EmbeddingTable& table);

/// SHA-256 of the binary serialization; identifies a table in provenance.
std::string table_digest(const EmbeddingTable& table);

/// dot(a,b) / (|a| |b|), accumulated in double and clamped to [-1, 1].
/// Throws dimension_mismatch or invalid_argument for a zero-norm input.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

double l2_norm(std::span<const float> v);

}  // namespace ptg
