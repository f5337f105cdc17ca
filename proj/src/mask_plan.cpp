#include "ptg/mask_plan.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"
#include "ptg/rng.hpp"

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ptg {

std::string_view to_string(MaskFill fill) {
    return fill == MaskFill::black ? "black" : "mean_color";
}

MaskFill parse_mask_fill(std::string_view s) {
    if (s == "black") return MaskFill::black;
    if (s == "mean_color" || s == "mean-color" || s == "mean") return MaskFill::mean_color;
    throw Error(ErrorCode::invalid_argument, "unknown fill '" + std::string(s) + "'");
}

void MaskConfig::validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "mask_ratio must lie in (0, 1)");
    }
    if (grid_rows <= 0 || grid_cols <= 0) {
        throw Error(ErrorCode::invalid_argument, "grid dimensions must be positive");
    }
    if (resize_width <= 0 || resize_height <= 0) {
        throw Error(ErrorCode::invalid_argument, "resize dimensions must be positive");
    }
    if (resize_width < grid_cols || resize_height < grid_rows) {
        throw Error(ErrorCode::invalid_argument, "resize target smaller than the patch grid");
    }
}

int MaskConfig::masked_count() const {
    return static_cast<int>(std::lround(mask_ratio * patch_count()));
}

MaskPlan plan_mask(std::string_view image_id, const MaskConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(fnv1a64(image_id) ^ seed);
    std::vector<int> all(static_cast<std::size_t>(config.patch_count()));
    std::iota(all.begin(), all.end(), 0);
    auto chosen = sample_without_replacement(std::move(all),
                                             static_cast<std::size_t>(config.masked_count()), rng);
    std::sort(chosen.begin(), chosen.end());
    return MaskPlan{std::string(image_id), config.grid_rows, config.grid_cols, std::move(chosen),
                    seed};
}

cv::Mat resize_for_masking(const cv::Mat& image, const MaskConfig& config) {
    if (image.empty() || image.rows == 0 || image.cols == 0) {
        throw Error(ErrorCode::invalid_argument, "zero-area image");
    }
    if (image.type() != CV_8UC3) {
        throw Error(ErrorCode::invalid_argument, "expected an 8-bit 3-channel image");
    }
    const cv::Size target(config.resize_width, config.resize_height);
    if (image.size() == target) return image.clone();
    cv::Mat out;
    cv::resize(image, out, target, 0, 0, cv::INTER_AREA);
    return out;
}

namespace {

cv::Rect patch_rect(int index, int rows, int cols, const cv::Size& size) {
    const int r = index / cols;
    const int c = index % cols;
    const int y0 = r * size.height / rows, y1 = (r + 1) * size.height / rows;
    const int x0 = c * size.width / cols, x1 = (c + 1) * size.width / cols;
    return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace

cv::Mat apply_mask(const cv::Mat& image, const MaskPlan& plan, const MaskConfig& config) {
    config.validate();
    if (plan.grid_rows != config.grid_rows || plan.grid_cols != config.grid_cols) {
        throw Error(ErrorCode::invalid_argument, "plan grid does not match config grid");
    }
    const int patches = plan.grid_rows * plan.grid_cols;
    for (int idx : plan.masked_indices) {
        if (idx < 0 || idx >= patches) {
            throw Error(ErrorCode::invalid_argument, "masked index out of range");
        }
    }
    cv::Mat out = resize_for_masking(image, config);

    cv::Scalar fill(0, 0, 0);
    if (config.fill == MaskFill::mean_color) {
        // Mean over the pixels that stay visible.
        cv::Mat keep(out.size(), CV_8U, cv::Scalar(255));
        for (int idx : plan.masked_indices) {
            keep(patch_rect(idx, plan.grid_rows, plan.grid_cols, out.size())).setTo(0);
        }
        if (cv::countNonZero(keep) == 0) keep.setTo(255);
        const cv::Scalar m = cv::mean(out, keep);
        fill = cv::Scalar(std::round(m[0]), std::round(m[1]), std::round(m[2]));
    }
    for (int idx : plan.masked_indices) {
        out(patch_rect(idx, plan.grid_rows, plan.grid_cols, out.size())).setTo(fill);
    }
    return out;
}

cv::Mat decode_image(std::string_view bytes) {
    if (bytes.empty()) throw Error(ErrorCode::parse_error, "empty image data");
    const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8U, const_cast<char*>(bytes.data()));
    cv::Mat img = cv::imdecode(raw, cv::IMREAD_COLOR);
    if (img.empty()) throw Error(ErrorCode::parse_error, "undecodable image");
    return img;
}

cv::Mat read_image(const std::string& path) {
    try {
        return decode_image(read_file_bytes(path));
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

std::string encode_png(const cv::Mat& image) {
    std::vector<uchar> buf;
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", image, buf, params)) {
        throw Error(ErrorCode::io_error, "PNG encoding failed");
    }
    return std::string(buf.begin(), buf.end());
}

void write_png(const std::string& path, const cv::Mat& image) {
    write_file_bytes(path, encode_png(image));
}

std::string plan_to_json(const MaskPlan& plan) {
    nlohmann::json j;
    j["id"] = plan.image_id;
    j["seed"] = plan.seed;
    j["grid_rows"] = plan.grid_rows;
    j["grid_cols"] = plan.grid_cols;
    j["masked_indices"] = plan.masked_indices;
    return j.dump();
}

}  // namespace ptg
