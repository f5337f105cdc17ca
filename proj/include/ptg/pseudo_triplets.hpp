#pragma once

#include "ptg/captioner.hpp"
#include "ptg/embedding_store.hpp"
#include "ptg/mask_plan.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ptg {

struct PseudoTripletConfig {
    MaskConfig mask;
    CaptionerConfig captioner;
    /// Where masked PNGs and plan sidecars go; empty skips writing images.
    std::string out_dir;
    /// Differently seeded maskings per source image.
    int variants = 1;
    /// Abort when more than this fraction of the corpus fails.
    double max_failure_fraction = 0.10;
    std::size_t workers = 4;
};

/// <masked image, caption of the original, original image>.
struct PseudoTriplet {
    ItemRef reference;           // "<id>#masked", kind masked_image
    std::string reference_path;  // relative to the output directory
    std::string modification_text;
    ItemRef target;  // source image id, kind image
    std::string target_path;
    MaskPlan plan;
};

struct TripletManifest {
    std::vector<PseudoTriplet> triplets;  // ordered by source id, then variant
    std::string corpus_id;
    std::uint64_t seed = 0;
    PseudoTripletConfig config;
    std::vector<std::string> failures;  // "<file>: <reason>"
};

/// Image files (png, jpg, jpeg, bmp, ppm, pgm, tif, tiff, webp) directly
/// inside `dir`, sorted by filename.
std::vector<std::string> list_images(const std::string& dir);

/// Masks and captions every image in `image_dir`. Per-image failures are
/// logged and skipped; more than max_failure_fraction of them is an error.
TripletManifest build_pseudo_triplets(const std::string& image_dir,
                                      const PseudoTripletConfig& config, std::uint64_t seed);

/// One {"ref","text","tgt","plan"} row per triplet.
std::string manifest_to_jsonl(const TripletManifest& manifest);
/// Writes manifest.jsonl and manifest.meta.json (corpus, seed, config) into dir.
void write_manifest(const TripletManifest& manifest, const std::string& dir);

}  // namespace ptg
