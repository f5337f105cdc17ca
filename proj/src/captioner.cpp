#include "ptg/captioner.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"
#include "ptg/mask_plan.hpp"

#include <httplib.h>
#include <json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace ptg {

namespace {

constexpr std::array<std::string_view, 16> kAdjectives = {
    "red",    "blue",   "striped", "small", "large",  "wooden", "shiny", "dark",
    "bright", "floral", "green",   "white", "vintage", "soft",  "long",  "round"};
constexpr std::array<std::string_view, 16> kNouns = {
    "dress", "bird",  "shirt", "table", "dog",    "car",   "lamp",   "jacket",
    "tree",  "chair", "cup",   "house", "flower", "shoe",  "street", "window"};

bool is_png(std::string_view bytes) {
    return bytes.size() >= 8 && bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8);
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::string_view to_string(CaptionSource source) {
    switch (source) {
        case CaptionSource::remote: return "remote";
        case CaptionSource::stub: return "stub";
        case CaptionSource::file: return "file";
    }
    return "unknown";
}

ImageInput ImageInput::from_path(const std::string& path) {
    return ImageInput{std::filesystem::path(path).stem().string(), read_file_bytes(path)};
}

ImageInput ImageInput::from_raster(std::string image_id, const cv::Mat& image) {
    return ImageInput{std::move(image_id), encode_png(image)};
}

std::string stub_caption_text(std::string_view content_hash) {
    const auto nibble = [&](std::size_t i) -> std::size_t {
        if (i >= content_hash.size()) return 0;
        const char c = content_hash[i];
        return static_cast<std::size_t>(c <= '9' ? c - '0' : c - 'a' + 10) & 0xf;
    };
    std::ostringstream os;
    os << "a " << kAdjectives[nibble(0)] << ' ' << kNouns[nibble(1)] << " with "
       << kAdjectives[nibble(2)] << ' ' << kNouns[nibble(3)] << " [" << content_hash.substr(0, 8)
       << ']';
    return os.str();
}

Captioner::Captioner(CaptionerConfig config) : config_(std::move(config)) {
    if (config_.retries < 0) throw Error(ErrorCode::invalid_argument, "retries must be >= 0");
    if (config_.max_in_flight == 0) config_.max_in_flight = 1;
    in_flight_ = std::make_unique<std::counting_semaphore<>>(
        static_cast<std::ptrdiff_t>(config_.max_in_flight));

    const auto& ep = config_.endpoint;
    if (ep == "stub") {
        mode_ = CaptionSource::stub;
    } else if (ep.starts_with("http://") || ep.starts_with("https://")) {
        mode_ = CaptionSource::remote;
    } else {
        mode_ = CaptionSource::file;
        std::ifstream in(ep);
        if (!in) throw Error(ErrorCode::io_error, "cannot open caption file " + ep);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            try {
                const auto rec = nlohmann::json::parse(line);
                auto text = trim(rec.at("caption").get<std::string>());
                if (text.empty()) throw Error(ErrorCode::parse_error, "empty caption");
                file_captions_[rec.at("id").get<std::string>()] = std::move(text);
            } catch (const std::exception& e) {
                throw Error(ErrorCode::parse_error,
                            ep + ": bad caption record at line " + std::to_string(line_no) + ": " +
                                e.what());
            }
        }
    }

    if (!config_.cache_path.empty() && std::filesystem::exists(config_.cache_path)) {
        std::ifstream in(config_.cache_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            try {
                const auto rec = nlohmann::json::parse(line);
                cache_[rec.at("hash").get<std::string>()] = rec.at("caption").get<std::string>();
            } catch (const std::exception&) {
                // A torn final line from an interrupted run; the entry is refetched.
                std::cerr << "captioner: skipping unreadable cache line in " << config_.cache_path
                          << '\n';
            }
        }
    }
}

Caption Captioner::caption(const ImageInput& image) {
    Caption out;
    out.image_id = image.image_id;
    out.source = mode_;
    out.content_hash = sha256_hex(as_bytes(image.bytes));

    switch (mode_) {
        case CaptionSource::stub:
            out.text = stub_caption_text(out.content_hash);
            return out;
        case CaptionSource::file: {
            auto it = file_captions_.find(image.image_id);
            if (it == file_captions_.end()) {
                throw Error(ErrorCode::not_found, "no caption for '" + image.image_id + "'");
            }
            out.text = it->second;
            return out;
        }
        case CaptionSource::remote:
            break;
    }

    {
        std::shared_lock lock(cache_mutex_);
        if (auto it = cache_.find(out.content_hash); it != cache_.end()) {
            out.text = it->second;
            return out;
        }
    }
    out.text = fetch_remote(image);
    remember(out.content_hash, out.text);
    return out;
}

std::string Captioner::fetch_remote(const ImageInput& image) {
    std::string png = image.bytes;
    if (!is_png(png)) {
        png = encode_png(decode_image(png));
    }
    const std::string body = nlohmann::json{{"image_b64", base64_encode(as_bytes(png))}}.dump();

    // Split "http://host:port/prefix" into the client base and a path prefix.
    const auto& ep = config_.endpoint;
    const std::size_t host_start = ep.find("://") + 3;
    const std::size_t path_start = ep.find('/', host_start);
    const std::string base = ep.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : ep.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);

    std::string last_failure;
    const int attempts = 1 + config_.retries;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0 && config_.retry_backoff.count() > 0) {
            std::this_thread::sleep_for(config_.retry_backoff * attempt);
        }
        in_flight_->acquire();
        httplib::Client client(base);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        ++requests_sent_;
        auto res = client.Post(prefix + "/caption", body, "application/json");
        in_flight_->release();

        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            auto text = trim(nlohmann::json::parse(res->body).at("caption").get<std::string>());
            if (text.empty()) {
                last_failure = "empty caption";
                continue;
            }
            return text;
        } catch (const std::exception& e) {
            last_failure = std::string("malformed response: ") + e.what();
        }
    }
    throw Error(ErrorCode::remote_error, "captioning '" + image.image_id + "' failed after " +
                                             std::to_string(attempts) + " attempts: " + last_failure);
}

void Captioner::remember(const std::string& hash, const std::string& text) {
    {
        std::unique_lock lock(cache_mutex_);
        if (!cache_.emplace(hash, text).second) return;
    }
    if (config_.cache_path.empty()) return;
    std::lock_guard lock(writer_mutex_);
    std::ofstream out(config_.cache_path, std::ios::app);
    if (!out) throw Error(ErrorCode::io_error, "cannot append to cache " + config_.cache_path);
    out << nlohmann::json{{"hash", hash}, {"caption", text}}.dump() << '\n';
}

}  // namespace ptg
