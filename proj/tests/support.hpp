#pragma once

#include "ptg/embedding_store.hpp"
#include "ptg/mask_plan.hpp"

#include <opencv2/core.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace ptg::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("ptg-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim, float lo = -1.0f,
                                        float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(dim);
    for (auto& x : v) x = u(rng);
    return v;
}

inline EmbeddingTable random_table(std::mt19937_64& rng, std::size_t count, std::size_t dim,
                                   const std::string& prefix = "item") {
    EmbeddingTable t(dim);
    for (std::size_t i = 0; i < count; ++i) {
        t.add(prefix + std::to_string(i), EmbeddingVector(random_vector(rng, dim)));
    }
    return t;
}

/// Noise image with every channel value in [1, 255], so a black fill always
/// changes every masked pixel.
inline cv::Mat noise_image(std::uint64_t seed, int width = 256, int height = 256) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(1, 255);
    cv::Mat img(height, width, CV_8UC3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            auto& px = img.at<cv::Vec3b>(y, x);
            px = cv::Vec3b(static_cast<uchar>(u(rng)), static_cast<uchar>(u(rng)),
                           static_cast<uchar>(u(rng)));
        }
    }
    return img;
}

/// Writes `count` noise PNGs named img000.png, img001.png, … into dir.
inline void write_noise_corpus(const std::filesystem::path& dir, int count, int width = 64,
                               int height = 48) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img%03d.png", i);
        write_png((dir / name).string(), noise_image(1000 + i, width, height));
    }
}

}  // namespace ptg::testing
