#include "ptg/pseudo_triplets.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"
#include "ptg/parallel.hpp"
#include "ptg/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>

namespace fs = std::filesystem;

namespace ptg {

namespace {

bool has_image_extension(const fs::path& p) {
    static const std::set<std::string> kExt = {".png", ".jpg", ".jpeg", ".bmp", ".ppm",
                                               ".pgm", ".tif", ".tiff", ".webp"};
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return kExt.contains(ext);
}

std::uint64_t variant_seed(std::uint64_t seed, int variant) {
    return variant == 0 ? seed : seed ^ mix64(static_cast<std::uint64_t>(variant));
}

std::string variant_suffix(int variant) {
    return variant == 0 ? std::string() : "." + std::to_string(variant);
}

nlohmann::json plan_json(const MaskPlan& plan) { return nlohmann::json::parse(plan_to_json(plan)); }

struct ImageResult {
    std::vector<PseudoTriplet> triplets;
    std::optional<std::string> failure;
};

}  // namespace

std::vector<std::string> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::not_found, "not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
            files.push_back(entry.path().filename().string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

TripletManifest build_pseudo_triplets(const std::string& image_dir,
                                      const PseudoTripletConfig& config, std::uint64_t seed) {
    config.mask.validate();
    if (config.variants < 1) throw Error(ErrorCode::invalid_argument, "variants must be >= 1");

    const auto files = list_images(image_dir);
    if (files.empty()) throw Error(ErrorCode::invalid_argument, "empty corpus: " + image_dir);
    {
        std::set<std::string> stems;
        for (const auto& f : files) {
            if (!stems.insert(fs::path(f).stem().string()).second) {
                throw Error(ErrorCode::conflict, "two images share the id '" +
                                                     fs::path(f).stem().string() + "'");
            }
        }
    }

    if (!config.out_dir.empty()) {
        fs::create_directories(fs::path(config.out_dir) / "masked");
        fs::create_directories(fs::path(config.out_dir) / "plans");
    }

    Captioner captioner(config.captioner);
    std::vector<ImageResult> results(files.size());

    parallel_for(files.size(), config.workers, [&](std::size_t i) {
        const fs::path src = fs::path(image_dir) / files[i];
        const std::string id = src.stem().string();
        try {
            const auto input = ImageInput::from_path(src.string());
            const cv::Mat original = decode_image(input.bytes);
            // The caption describes the original so it can restore what the mask hides.
            const Caption cap = captioner.caption(input);

            for (int v = 0; v < config.variants; ++v) {
                MaskPlan plan = plan_mask(id, config.mask, variant_seed(seed, v));
                const std::string rel = "masked/" + id + variant_suffix(v) + ".png";
                if (!config.out_dir.empty()) {
                    write_png((fs::path(config.out_dir) / rel).string(),
                              apply_mask(original, plan, config.mask));
                    write_file_bytes((fs::path(config.out_dir) / "plans" /
                                      (id + variant_suffix(v) + ".json"))
                                         .string(),
                                     plan_to_json(plan) + "\n");
                }
                PseudoTriplet t;
                t.reference = {id + "#masked" + variant_suffix(v), ItemKind::masked_image};
                t.reference_path = rel;
                t.modification_text = cap.text;
                t.target = {id, ItemKind::image};
                t.target_path = src.string();
                t.plan = std::move(plan);
                results[i].triplets.push_back(std::move(t));
            }
        } catch (const std::exception& e) {
            results[i].failure = files[i] + ": " + e.what();
        }
    });

    TripletManifest manifest;
    manifest.corpus_id = fs::path(image_dir).lexically_normal().filename().string();
    if (manifest.corpus_id.empty()) {
        manifest.corpus_id = fs::path(image_dir).lexically_normal().parent_path().filename().string();
    }
    manifest.seed = seed;
    manifest.config = config;
    for (auto& r : results) {
        if (r.failure) manifest.failures.push_back(std::move(*r.failure));
        for (auto& t : r.triplets) manifest.triplets.push_back(std::move(t));
    }
    const double failed = static_cast<double>(manifest.failures.size()) / files.size();
    if (failed > config.max_failure_fraction) {
        throw Error(ErrorCode::incomplete,
                    std::to_string(manifest.failures.size()) + " of " + std::to_string(files.size()) +
                        " images failed (threshold " + std::to_string(config.max_failure_fraction) +
                        "); first: " + manifest.failures.front());
    }
    return manifest;
}

std::string manifest_to_jsonl(const TripletManifest& manifest) {
    std::string out;
    for (const auto& t : manifest.triplets) {
        nlohmann::json row;
        row["ref"] = t.reference_path;
        row["text"] = t.modification_text;
        row["tgt"] = t.target_path;
        row["plan"] = plan_json(t.plan);
        out += row.dump();
        out += '\n';
    }
    return out;
}

void write_manifest(const TripletManifest& manifest, const std::string& dir) {
    fs::create_directories(dir);
    write_file_bytes((fs::path(dir) / "manifest.jsonl").string(), manifest_to_jsonl(manifest));

    const auto& m = manifest.config.mask;
    nlohmann::json meta;
    meta["corpus_id"] = manifest.corpus_id;
    meta["seed"] = manifest.seed;
    meta["triplets"] = manifest.triplets.size();
    meta["failures"] = manifest.failures;
    meta["config"] = {
        {"grid_rows", m.grid_rows},
        {"grid_cols", m.grid_cols},
        {"mask_ratio", m.mask_ratio},
        {"fill", to_string(m.fill)},
        {"resize", {m.resize_width, m.resize_height}},
        {"variants", manifest.config.variants},
        {"captioner", manifest.config.captioner.endpoint == "stub" ? "stub" : "external"},
    };
    write_file_bytes((fs::path(dir) / "manifest.meta.json").string(), meta.dump(2) + "\n");
}

}  // namespace ptg
