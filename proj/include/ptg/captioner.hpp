#pragma once

#include <opencv2/core.hpp>

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

namespace ptg {

enum class CaptionSource { remote, stub, file };

std::string_view to_string(CaptionSource source);

struct Caption {
    std::string image_id;
    std::string text;  // trimmed, nonempty
    CaptionSource source = CaptionSource::stub;
    std::string content_hash;  // sha-256 hex of the encoded image bytes
};

struct CaptionerConfig {
    /// "stub", an http:// base URL, or the path of an id→caption JSONL file.
    std::string endpoint = "stub";
    std::chrono::milliseconds timeout{30'000};
    int retries = 2;
    std::chrono::milliseconds retry_backoff{200};
    /// JSONL {"hash":…, "caption":…}; empty disables the persistent cache.
    std::string cache_path;
    std::size_t max_in_flight = 4;
};

/// Encoded image bytes plus the id they are known by. Captions are keyed by
/// the hash of `bytes`, never by id (except in file mode).
struct ImageInput {
    std::string image_id;
    std::string bytes;

    static ImageInput from_path(const std::string& path);
    static ImageInput from_raster(std::string image_id, const cv::Mat& image);
};

/// Deterministic caption derived from a content hash.
std::string stub_caption_text(std::string_view content_hash);

class Captioner {
public:
    explicit Captioner(CaptionerConfig config);

    CaptionSource mode() const noexcept { return mode_; }
    const CaptionerConfig& config() const noexcept { return config_; }

    /// Thread-safe. Remote failures surface as remote_error after
    /// 1 + retries attempts; an empty remote caption counts as a failure.
    Caption caption(const ImageInput& image);
    Caption caption_path(const std::string& path) { return caption(ImageInput::from_path(path)); }

    /// Number of HTTP requests issued so far (remote mode).
    std::size_t requests_sent() const noexcept { return requests_sent_.load(); }

private:
    std::string fetch_remote(const ImageInput& image);
    void remember(const std::string& hash, const std::string& text);

    CaptionerConfig config_;
    CaptionSource mode_;
    std::unordered_map<std::string, std::string> file_captions_;  // by image id

    std::shared_mutex cache_mutex_;
    std::unordered_map<std::string, std::string> cache_;  // by content hash
    std::mutex writer_mutex_;

    std::unique_ptr<std::counting_semaphore<>> in_flight_;
    std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace ptg
