#include "ptg/embedding_store.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace ptg {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'G', 'E'};
constexpr std::uint32_t kVersion = 1;

void check_finite(const std::vector<float>& values, std::string_view id) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorCode::invalid_argument,
                        "non-finite value at component " + std::to_string(i) +
                            (id.empty() ? std::string() : " of '" + std::string(id) + "'"));
        }
    }
}

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
    }
}

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get_le(const char* what) {
        need(sizeof(T), what);
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorCode::parse_error, "truncated binary table at offset " +
                                                    std::to_string(pos_) + " reading " + what);
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::invalid_argument, "embedding must have dim >= 1");
    check_finite(values_, {});
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::invalid_argument, "table dim must be positive");
}

void EmbeddingTable::add(std::string id, EmbeddingVector vec) {
    if (id.empty()) throw Error(ErrorCode::invalid_argument, "empty item id");
    if (dim_ == 0) dim_ = vec.dim();
    if (vec.dim() != dim_) {
        throw Error(ErrorCode::dimension_mismatch,
                    "dimension mismatch for '" + id + "': expected " + std::to_string(dim_) +
                        ", got " + std::to_string(vec.dim()));
    }
    if (index_.contains(id)) throw Error(ErrorCode::conflict, "duplicate id '" + id + "'");
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(vec));
}

bool EmbeddingTable::contains(std::string_view id) const {
    return index_.contains(std::string(id));
}

const EmbeddingVector* EmbeddingTable::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &vectors_[it->second];
}

const EmbeddingVector& EmbeddingTable::at(std::string_view id) const {
    if (const auto* v = find(id)) return *v;
    throw Error(ErrorCode::not_found, "no embedding for id '" + std::string(id) + "'");
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
    if (dim_ != other.dim_ || ids_ != other.ids_) return false;
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        const auto a = vectors_[i].values();
        const auto b = other.vectors_[i].values();
        if (std::memcmp(a.data(), b.data(), a.size_bytes()) != 0) return false;
    }
    return true;
}

TableFormat format_for_path(std::string_view path) {
    return path.ends_with(".jsonl") ? TableFormat::jsonl : TableFormat::binary;
}

EmbeddingTable parse_jsonl_table(std::string_view text) {
    EmbeddingTable table;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;

        const auto where = [&] { return "line " + std::to_string(line_no); };
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::parse_error, "malformed record at " + where() + ": " + e.what());
        }
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
            !rec.contains("vec") || !rec["vec"].is_array()) {
            throw Error(ErrorCode::parse_error,
                        "malformed record at " + where() + ": expected {\"id\": string, \"vec\": array}");
        }
        std::string id = rec["id"].get<std::string>();
        std::vector<float> values;
        values.reserve(rec["vec"].size());
        for (const auto& x : rec["vec"]) {
            if (!x.is_number()) {
                throw Error(ErrorCode::parse_error, "non-numeric vector component at " + where());
            }
            const double d = x.get<double>();
            if (!std::isfinite(d) || std::fabs(d) > std::numeric_limits<float>::max()) {
                throw Error(ErrorCode::invalid_argument,
                            "non-finite value in '" + id + "' at " + where());
            }
            values.push_back(static_cast<float>(d));
        }
        if (values.empty()) {
            throw Error(ErrorCode::parse_error, "empty vector for '" + id + "' at " + where());
        }
        table.add(std::move(id), EmbeddingVector(std::move(values)));
    }
    if (table.empty()) throw Error(ErrorCode::parse_error, "no records in JSONL table");
    return table;
}

std::string serialize_jsonl_table(const EmbeddingTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        nlohmann::json rec;
        rec["id"] = table.ids()[i];
        auto& vec = rec["vec"] = nlohmann::json::array();
        for (float v : table.vector_at(i).values()) vec.push_back(v);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

EmbeddingTable parse_binary_table(std::string_view bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::parse_error, "bad magic: not a PTGE table");
    }
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != kVersion) {
        throw Error(ErrorCode::parse_error, "unsupported PTGE version " + std::to_string(version));
    }
    const auto dim = r.get_le<std::uint32_t>("dim");
    const auto count = r.get_le<std::uint64_t>("count");
    if (dim == 0) throw Error(ErrorCode::parse_error, "PTGE header has dim 0");

    EmbeddingTable table(dim);
    for (std::uint64_t n = 0; n < count; ++n) {
        const std::size_t record_offset = r.offset();
        const auto id_len = r.get_le<std::uint32_t>("id length");
        std::string id(r.take(id_len, "id bytes"));
        std::vector<float> values(dim);
        for (auto& v : values) v = std::bit_cast<float>(r.get_le<std::uint32_t>("vector"));
        try {
            table.add(std::move(id), EmbeddingVector(std::move(values)));
        } catch (const Error& e) {
            throw Error(e.code(), std::string(e.what()) + " (record at offset " +
                                      std::to_string(record_offset) + ")");
        }
    }
    if (!r.at_end()) {
        throw Error(ErrorCode::parse_error,
                    "trailing bytes after last record at offset " + std::to_string(r.offset()));
    }
    return table;
}

std::string serialize_binary_table(const EmbeddingTable& table) {
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
    put_le<std::uint64_t>(out, table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& id = table.ids()[i];
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out += id;
        for (float v : table.vector_at(i).values()) put_le(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

EmbeddingTable load_table(const std::string& path, TableFormat format) {
    const std::string bytes = read_file_bytes(path);
    try {
        return format == TableFormat::jsonl ? parse_jsonl_table(bytes) : parse_binary_table(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

EmbeddingTable load_table(const std::string& path) { return load_table(path, format_for_path(path)); }

void save_table(const EmbeddingTable& table, const std::string& path, TableFormat format) {
    write_file_bytes(path, format == TableFormat::jsonl ? serialize_jsonl_table(table)
                                                        : serialize_binary_table(table));
}

void save_table(const EmbeddingTable& table, const std::string& path) {
    save_table(table, path, format_for_path(path));
}

std::string table_digest(const EmbeddingTable& table) {
    return sha256_hex(serialize_binary_table(table));
}

double l2_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * x;
    return std::sqrt(sum);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::dimension_mismatch, "cosine of vectors with dims " +
                                                       std::to_string(a.size()) + " and " +
                                                       std::to_string(b.size()));
    }
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if (aa == 0.0 || bb == 0.0) {
        throw Error(ErrorCode::invalid_argument, "cosine of a zero-norm vector");
    }
    const double c = dot / (std::sqrt(aa) * std::sqrt(bb));
    return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine_similarity(a.values(), b.values());
}

}  // namespace ptg
