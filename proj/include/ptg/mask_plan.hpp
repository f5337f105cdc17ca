#pragma once

#include <opencv2/core.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ptg {

enum class MaskFill { black, mean_color };

std::string_view to_string(MaskFill fill);
MaskFill parse_mask_fill(std::string_view s);

struct MaskConfig {
    int grid_rows = 8;
    int grid_cols = 8;
    double mask_ratio = 0.75;
    MaskFill fill = MaskFill::black;
    int resize_width = 256;
    int resize_height = 256;

    /// Throws invalid_argument unless 0 < mask_ratio < 1 and all dims positive.
    void validate() const;
    int patch_count() const { return grid_rows * grid_cols; }
    /// round(mask_ratio * patch_count).
    int masked_count() const;
};

struct MaskPlan {
    std::string image_id;
    int grid_rows = 8;
    int grid_cols = 8;
    std::vector<int> masked_indices;  // sorted, unique, row-major patch index
    std::uint64_t seed = 0;

    bool operator==(const MaskPlan&) const = default;
};

/// Chooses round(ratio * rows * cols) patches with a partial Fisher-Yates
/// shuffle driven by Rng(fnv1a64(image_id) ^ seed). Pure.
MaskPlan plan_mask(std::string_view image_id, const MaskConfig& config, std::uint64_t seed);

/// Resizes `image` (8-bit, 3 channel BGR as decoded by OpenCV) to the configured
/// size with area interpolation and fills the planned patches. Patch (r, c)
/// spans rows [r*H/R, (r+1)*H/R) and cols [c*W/C, (c+1)*W/C).
cv::Mat apply_mask(const cv::Mat& image, const MaskPlan& plan, const MaskConfig& config);

cv::Mat resize_for_masking(const cv::Mat& image, const MaskConfig& config);

/// Reads an image file as 8-bit BGR. Throws parse_error if undecodable.
cv::Mat read_image(const std::string& path);
cv::Mat decode_image(std::string_view bytes);
/// Lossless PNG encoding with fixed compression settings.
std::string encode_png(const cv::Mat& image);
void write_png(const std::string& path, const cv::Mat& image);

/// Sidecar JSON: {"id":…, "seed":…, "masked_indices":[…]} plus the grid shape.
std::string plan_to_json(const MaskPlan& plan);

}  // namespace ptg
