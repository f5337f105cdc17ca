#include "ptg/annotation_server.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <array>
#include <filesystem>

namespace fs = std::filesystem;

namespace ptg {

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument:
        case ErrorCode::parse_error:
        case ErrorCode::dimension_mismatch: return 400;
        case ErrorCode::not_found: return 404;
        case ErrorCode::conflict:
        case ErrorCode::read_only: return 409;
        case ErrorCode::incomplete: return 422;
        case ErrorCode::io_error:
        case ErrorCode::remote_error: return 500;
    }
    return 500;
}

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

/// Runs a handler, translating exceptions into structured JSON errors.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, http_status_for(e.code()), to_string(e.code()), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "parse_error", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

nlohmann::json progress_json(const RoundState& rs) {
    return {{"annotated", rs.annotated_count()}, {"total", rs.round.chosen_count()}};
}

nlohmann::json round_summary(const RoundState& rs) {
    nlohmann::json j = round_to_json(rs.round);
    j["progress"] = progress_json(rs);
    return j;
}

const RoundState& find_round(const StoreState& state, const std::string& id) {
    auto it = state.rounds.find(id);
    if (it == state.rounds.end()) throw Error(ErrorCode::not_found, "unknown round '" + id + "'");
    return it->second;
}

nlohmann::json parse_body(const httplib::Request& req) {
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse_error, std::string("request body is not JSON: ") + e.what());
    }
}

std::string media_url(const std::string& image_id) { return "/media/" + image_id; }

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerOptions options)
    : store_(store), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::install_routes() {
    auto& srv = *server_;

    srv.Post("/rounds", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const SelectionRound round = round_from_json(parse_body(req));
        const std::string id = store_.create_round(round);
        send_json(res, 201, round_summary(store_.snapshot()->rounds.at(id)));
    }));

    srv.Get("/rounds", guarded([this](const httplib::Request&, httplib::Response& res) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [id, rs] : store_.snapshot()->rounds) {
            out.push_back({{"round_id", id},
                           {"status", to_string(rs.round.status)},
                           {"progress", progress_json(rs)}});
        }
        send_json(res, 200, {{"rounds", out}});
    }));

    srv.Get(R"(/rounds/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto state = store_.snapshot();
        send_json(res, 200, round_summary(find_round(*state, req.matches[1])));
    }));

    srv.Get(R"(/rounds/([^/]+)/pairs)",
            guarded([this](const httplib::Request& req, httplib::Response& res) {
                const auto state = store_.snapshot();
                const RoundState& rs = find_round(*state, req.matches[1]);
                const std::string filter =
                    req.has_param("status") ? req.get_param_value("status") : "all";
                if (filter != "all" && filter != "pending" && filter != "annotated") {
                    throw Error(ErrorCode::invalid_argument, "status must be pending, annotated, or all");
                }
                nlohmann::json pairs = nlohmann::json::array();
                for (const auto& c : rs.round.categories) {
                    for (const auto& id : c.chosen) {
                        const RoundPair& p = rs.round.pairs.at(id);
                        auto ann = rs.latest.find(id);
                        const bool annotated = ann != rs.latest.end();
                        if ((filter == "pending" && annotated) || (filter == "annotated" && !annotated)) {
                            continue;
                        }
                        nlohmann::json j{{"pair_id", id},
                                         {"ref", p.ref_image_id},
                                         {"tgt", p.target_image_id},
                                         {"ref_url", media_url(p.ref_image_id)},
                                         {"tgt_url", media_url(p.target_image_id)},
                                         {"category", p.category},
                                         {"score", p.score},
                                         {"status", annotated ? "annotated" : "pending"},
                                         {"annotation", nullptr}};
                        if (annotated) {
                            j["annotation"] = {{"text", ann->second.text},
                                               {"annotator", ann->second.annotator_id},
                                               {"submitted_at", ann->second.submitted_at},
                                               {"seq", ann->second.seq}};
                        }
                        pairs.push_back(std::move(j));
                    }
                }
                send_json(res, 200,
                          {{"round_id", rs.round.round_id},
                           {"status", to_string(rs.round.status)},
                           {"progress", progress_json(rs)},
                           {"pairs", pairs}});
            }));

    srv.Post(R"(/rounds/([^/]+)/pairs/([^/]+)/annotation)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto body = parse_body(req);
                 if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
                     throw Error(ErrorCode::invalid_argument, "body must carry a string \"text\"");
                 }
                 std::string annotator = body.value("annotator", std::string());
                 if (annotator.empty()) annotator = req.get_header_value("X-Annotator-Id");
                 if (annotator.empty()) annotator = "anonymous";
                 const bool revising = [&] {
                     const auto state = store_.snapshot();
                     auto it = state->rounds.find(req.matches[1]);
                     return it != state->rounds.end() && it->second.latest.contains(req.matches[2]);
                 }();
                 const AnnotationRecord rec = store_.submit_annotation(
                     req.matches[1], req.matches[2], body["text"].get<std::string>(), annotator);
                 send_json(res, revising ? 200 : 201,
                           {{"round_id", rec.round_id},
                            {"pair_id", rec.pair_id},
                            {"text", rec.text},
                            {"annotator", rec.annotator_id},
                            {"submitted_at", rec.submitted_at},
                            {"seq", rec.seq}});
             }));

    srv.Post(R"(/rounds/([^/]+)/export)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 try {
                     const std::string manifest = store_.export_round(id);
                     const auto rows = static_cast<std::size_t>(
                         std::count(manifest.begin(), manifest.end(), '\n'));
                     send_json(res, 200,
                               {{"round_id", id},
                                {"status", "exported"},
                                {"triplets", rows},
                                {"manifest_sha256", sha256_hex(manifest)}});
                 } catch (const Error& e) {
                     if (e.code() != ErrorCode::incomplete) throw;
                     const auto state = store_.snapshot();
                     send_json(res, 422,
                               {{"error",
                                 {{"code", "incomplete"},
                                  {"message", e.what()},
                                  {"missing", find_round(*state, id).missing()}}}});
                 }
             }));

    srv.Get(R"(/rounds/([^/]+)/export)",
            guarded([this](const httplib::Request& req, httplib::Response& res) {
                res.status = 200;
                res.set_content(store_.exported_manifest(req.matches[1]), "application/x-ndjson");
            }));

    srv.Get(R"(/media/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        if (options_.media_dir.empty()) throw Error(ErrorCode::not_found, "no media directory configured");
        if (id.find("..") != std::string::npos) throw Error(ErrorCode::invalid_argument, "bad image id");
        static constexpr std::array<std::pair<const char*, const char*>, 5> kTypes = {{
            {".png", "image/png"},
            {".jpg", "image/jpeg"},
            {".jpeg", "image/jpeg"},
            {".bmp", "image/bmp"},
            {".webp", "image/webp"},
        }};
        for (const auto& [ext, mime] : kTypes) {
            const fs::path path = fs::path(options_.media_dir) / (id + ext);
            if (fs::is_regular_file(path)) {
                res.status = 200;
                res.set_content(read_file_bytes(path.string()), mime);
                return;
            }
        }
        throw Error(ErrorCode::not_found, "no image '" + id + "'");
    }));

    if (!options_.ui_dir.empty()) srv.set_mount_point("/ui", options_.ui_dir);

    srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, res.status, res.status == 404 ? "not_found" : "http_error",
                   "no route for " + req.method + " " + req.path);
        return httplib::Server::HandlerResponse::Handled;
    });
}

bool AnnotationServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int AnnotationServer::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool AnnotationServer::listen_after_bind() { return server_->listen_after_bind(); }

void AnnotationServer::wait_until_ready() const { server_->wait_until_ready(); }

void AnnotationServer::stop() {
    if (server_) server_->stop();
}

}  // namespace ptg
