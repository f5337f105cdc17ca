// ptg: command-line front end for the pseudo-triplet / challenge-selection pipeline.

#include "ptg/annotation_server.hpp"
#include "ptg/annotation_store.hpp"
#include "ptg/captioner.hpp"
#include "ptg/categorize.hpp"
#include "ptg/challenge_scoring.hpp"
#include "ptg/composer.hpp"
#include "ptg/digest.hpp"
#include "ptg/embedding_store.hpp"
#include "ptg/error.hpp"
#include "ptg/evaluation.hpp"
#include "ptg/parallel.hpp"
#include "ptg/pseudo_triplets.hpp"
#include "ptg/selection.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <regex>
#include <thread>

#include <pthread.h>

namespace fs = std::filesystem;
using namespace ptg;

namespace {

void write_or_print(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_file_bytes(out, text);
    }
}

std::vector<int> parse_ks(const std::string& s) {
    std::vector<int> ks;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t end = std::min(s.find(',', start), s.size());
        const std::string tok = trim(s.substr(start, end - start));
        if (!tok.empty()) ks.push_back(std::stoi(tok));
        start = end + 1;
    }
    if (ks.empty()) throw Error(ErrorCode::invalid_argument, "no k values in '" + s + "'");
    return ks;
}

std::unordered_map<std::string, std::string> load_caption_map(const std::string& path) {
    std::unordered_map<std::string, std::string> out;
    const std::string text = read_file_bytes(path);
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = trim(std::string_view(text).substr(start, end - start));
        start = end + 1;
        if (line.empty()) continue;
        const auto rec = nlohmann::json::parse(line);
        out[rec.at("id").get<std::string>()] = rec.at("caption").get<std::string>();
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-triplet construction, challenge scoring, active selection, evaluation, "
                 "and the annotation service"};
    app.require_subcommand(1);

    // pseudo-gen
    std::string pg_images, pg_out, pg_grid = "8x8", pg_fill = "black", pg_captioner = "stub",
                                   pg_cache;
    std::uint64_t pg_seed = 0;
    double pg_ratio = 0.75, pg_max_fail = 0.10;
    int pg_variants = 1, pg_resize = 256;
    std::size_t pg_workers = default_thread_count();
    auto* pg = app.add_subcommand("pseudo-gen", "Build stage-1 pseudo triplets from an image folder");
    pg->add_option("--images", pg_images, "Directory of source images")->required();
    pg->add_option("--out", pg_out, "Output directory")->required();
    pg->add_option("--seed", pg_seed, "Masking seed")->required();
    pg->add_option("--mask-ratio", pg_ratio, "Fraction of patches masked")->capture_default_str();
    pg->add_option("--grid", pg_grid, "Patch grid ROWSxCOLS")->capture_default_str();
    pg->add_option("--fill", pg_fill, "black | mean_color")->capture_default_str();
    pg->add_option("--resize", pg_resize, "Square side images are resized to")->capture_default_str();
    pg->add_option("--variants", pg_variants, "Maskings per image")->capture_default_str();
    pg->add_option("--captioner", pg_captioner, "stub | http://host:port | captions.jsonl")
        ->capture_default_str();
    pg->add_option("--caption-cache", pg_cache, "Caption cache JSONL");
    pg->add_option("--workers", pg_workers, "Worker threads");
    pg->add_option("--max-failure-fraction", pg_max_fail, "Abort above this failed fraction")
        ->capture_default_str();

    // score
    std::string sc_pairs, sc_images, sc_backend = "toy", sc_texts, sc_composites, sc_captions,
                                     sc_captioner, sc_image_dir, sc_out;
    double sc_alpha = 0.5;
    bool sc_lenient = false;
    std::size_t sc_threads = default_thread_count();
    std::uint64_t sc_seed = 0;
    auto* sc = app.add_subcommand("score", "Challenge-score candidate pairs");
    sc->add_option("--pairs", sc_pairs, "Candidate pairs JSONL")->required();
    sc->add_option("--images", sc_images, "Target image embeddings (.ptge or .jsonl)")->required();
    sc->add_option("--backend", sc_backend, "toy | precomputed")->capture_default_str();
    sc->add_option("--texts", sc_texts, "Toy: text embeddings keyed by caption sha-256");
    sc->add_option("--alpha", sc_alpha, "Toy: image weight in (0,1)")->capture_default_str();
    sc->add_option("--composites", sc_composites, "Precomputed: composites keyed \"ref|texthash\"");
    sc->add_option("--captions", sc_captions, "Target captions JSONL {id, caption}");
    sc->add_option("--captioner", sc_captioner, "Caption images instead: stub | http://…");
    sc->add_option("--image-dir", sc_image_dir, "Image folder for --captioner");
    sc->add_option("--out", sc_out, "Score table JSONL")->required();
    sc->add_flag("--lenient", sc_lenient, "Skip failing pairs instead of aborting");
    sc->add_option("--threads", sc_threads, "Worker threads");
    auto* sc_seed_opt = sc->add_option("--seed", sc_seed, "Seed recorded in provenance");

    // summarize
    std::string su_scores, su_out;
    bool su_per_category = false;
    auto* su = app.add_subcommand("summarize", "Distribution summary of a score table");
    su->add_option("--scores", su_scores)->required();
    su->add_flag("--per-category", su_per_category);
    su->add_option("--out", su_out);

    // categorize
    std::string ca_items, ca_out, ca_report;
    int ca_k = 4;
    std::uint64_t ca_seed = 0;
    auto* ca = app.add_subcommand("categorize", "k-means categories over image embeddings");
    ca->add_option("--items", ca_items, "Image embeddings")->required();
    ca->add_option("--k", ca_k)->capture_default_str();
    ca->add_option("--seed", ca_seed)->capture_default_str();
    ca->add_option("--out", ca_out, "Categories JSONL {id, category}")->required();
    ca->add_option("--report", ca_report, "k-means details JSON");

    // label-pairs
    std::string lp_pairs, lp_categories, lp_basis = "reference", lp_out;
    auto* lp = app.add_subcommand("label-pairs", "Attach image categories to candidate pairs");
    lp->add_option("--pairs", lp_pairs)->required();
    lp->add_option("--categories", lp_categories)->required();
    lp->add_option("--basis", lp_basis, "reference | target")->capture_default_str();
    lp->add_option("--out", lp_out)->required();

    // select
    std::string se_scores, se_strategy = "top-range-random", se_out, se_round_id;
    double se_pool = 0.0455, se_easy = 0.25;
    int se_shots = 16;
    std::uint64_t se_seed = 0;
    bool se_global = false;
    auto* se = app.add_subcommand("select", "Choose K pairs per category for annotation");
    se->add_option("--scores", se_scores)->required();
    se->add_option("--strategy", se_strategy, "top-range-random | random | easy-bottom | top-k")
        ->capture_default_str();
    se->add_option("--pool-fraction", se_pool)->capture_default_str();
    se->add_option("--easy-fraction", se_easy)->capture_default_str();
    se->add_option("--shots", se_shots, "K per category")->capture_default_str();
    se->add_option("--seed", se_seed)->capture_default_str();
    se->add_option("--round-id", se_round_id);
    se->add_flag("--global", se_global, "One pool over all pairs instead of per category");
    se->add_option("--out", se_out, "Round JSON")->required();

    // evaluate
    std::string ev_queries, ev_gallery, ev_k = "10,50", ev_trials, ev_out;
    bool ev_keep_ref = false;
    std::size_t ev_threads = default_thread_count();
    auto* ev = app.add_subcommand("evaluate", "Recall@k over an embedding gallery");
    ev->add_option("--queries", ev_queries, "Queries JSONL");
    ev->add_option("--gallery", ev_gallery, "Gallery embeddings");
    ev->add_option("--k", ev_k, "Comma-separated ks")->capture_default_str();
    ev->add_option("--trials-dir", ev_trials,
                   "Trial runs: *.jsonl query files, or subdirs with queries.jsonl [+ gallery.ptge]");
    ev->add_flag("--keep-reference", ev_keep_ref, "Do not exclude the reference image");
    ev->add_option("--threads", ev_threads);
    ev->add_option("--out", ev_out, "Report JSON");

    // serve
    std::string sv_log, sv_host = "127.0.0.1", sv_media, sv_ui;
    int sv_port = 8080;
    auto* sv = app.add_subcommand("serve", "Run the annotation service");
    sv->add_option("--log", sv_log, "Event log JSONL")->required();
    sv->add_option("--host", sv_host)->capture_default_str();
    sv->add_option("--port", sv_port)->capture_default_str();
    sv->add_option("--media", sv_media, "Image directory served under /media");
    sv->add_option("--ui", sv_ui, "Built UI assets served under /ui");

    // convert
    std::string cv_in, cv_out;
    auto* cv = app.add_subcommand("convert", "Convert an embedding table between jsonl and binary");
    cv->add_option("--in", cv_in)->required();
    cv->add_option("--out", cv_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pg) {
            PseudoTripletConfig config;
            std::smatch m;
            if (!std::regex_match(pg_grid, m, std::regex(R"((\d+)x(\d+))"))) {
                throw Error(ErrorCode::invalid_argument, "--grid must look like 8x8");
            }
            config.mask.grid_rows = std::stoi(m[1]);
            config.mask.grid_cols = std::stoi(m[2]);
            config.mask.mask_ratio = pg_ratio;
            config.mask.fill = parse_mask_fill(pg_fill);
            config.mask.resize_width = config.mask.resize_height = pg_resize;
            config.captioner.endpoint = pg_captioner;
            config.captioner.cache_path = pg_cache;
            config.out_dir = pg_out;
            config.variants = pg_variants;
            config.workers = pg_workers;
            config.max_failure_fraction = pg_max_fail;
            const auto manifest = build_pseudo_triplets(pg_images, config, pg_seed);
            write_manifest(manifest, pg_out);
            for (const auto& f : manifest.failures) std::cerr << "pseudo-gen: skipped " << f << '\n';
            std::cerr << "wrote " << manifest.triplets.size() << " pseudo triplets to "
                      << (fs::path(pg_out) / "manifest.jsonl").string() << '\n';
        } else if (*sc) {
            auto images = std::make_shared<const EmbeddingTable>(load_table(sc_images));
            ComposerBackend backend = [&] {
                if (sc_backend == "toy") {
                    if (sc_texts.empty()) throw Error(ErrorCode::invalid_argument, "toy backend needs --texts");
                    return ComposerBackend::toy(
                        images, std::make_shared<const EmbeddingTable>(load_table(sc_texts)), sc_alpha);
                }
                if (sc_backend == "precomputed") {
                    if (sc_composites.empty()) {
                        throw Error(ErrorCode::invalid_argument, "precomputed backend needs --composites");
                    }
                    return ComposerBackend::precomputed(
                        std::make_shared<const EmbeddingTable>(load_table(sc_composites)));
                }
                throw Error(ErrorCode::invalid_argument, "unknown backend '" + sc_backend + "'");
            }();
            std::unique_ptr<Captioner> captioner;
            CaptionLookup lookup;
            if (!sc_captions.empty()) {
                lookup = caption_lookup_from_map(load_caption_map(sc_captions));
            } else if (!sc_captioner.empty()) {
                if (sc_image_dir.empty()) throw Error(ErrorCode::invalid_argument, "--captioner needs --image-dir");
                CaptionerConfig cc;
                cc.endpoint = sc_captioner;
                captioner = std::make_unique<Captioner>(cc);
                lookup = caption_lookup_from_captioner(*captioner, sc_image_dir);
            } else {
                throw Error(ErrorCode::invalid_argument, "need --captions or --captioner");
            }
            ScoreOptions opts;
            opts.strict = !sc_lenient;
            opts.threads = sc_threads;
            if (*sc_seed_opt) opts.seed = sc_seed;
            const auto table = score_all(load_pairs(sc_pairs), lookup, backend, *images, opts);
            save_score_table(table, sc_out);
            nlohmann::json meta{{"backend", table.provenance.backend_mode},
                                {"backend_digest", table.provenance.backend_digest},
                                {"images_digest", table.provenance.images_digest},
                                {"seed", opts.seed ? nlohmann::json(*opts.seed) : nlohmann::json()},
                                {"scored", table.rows.size()},
                                {"failures", table.failures}};
            write_file_bytes(sc_out + ".meta.json", meta.dump(2) + "\n");
            for (const auto& f : table.failures) std::cerr << "score: skipped " << f << '\n';
            std::cerr << "scored " << table.rows.size() << " pairs\n";
        } else if (*su) {
            const auto table = load_score_table(su_scores);
            nlohmann::json out;
            out["all"] = summary_to_json(summarize(table));
            if (su_per_category) {
                for (const auto& [cat, rows] : rank_by_category(table, true)) {
                    std::vector<double> scores;
                    for (const auto* r : rows) scores.push_back(r->score);
                    if (scores.size() >= 2) out["categories"][cat] = summary_to_json(summarize(scores));
                }
            }
            write_or_print(su_out, out.dump(2) + "\n");
        } else if (*ca) {
            const auto items = load_table(ca_items);
            const auto assignment = kmeans_categorize(items, ca_k, ca_seed);
            write_file_bytes(ca_out, categories_to_jsonl(assignment));
            if (!ca_report.empty()) write_file_bytes(ca_report, assignment_to_json(assignment).dump(2) + "\n");
            std::cerr << "k-means: " << assignment.iterations_run << " iterations, inertia "
                      << assignment.inertia << '\n';
        } else if (*lp) {
            const auto labelled = assign_pair_categories(
                load_pairs(lp_pairs), load_categories_jsonl(lp_categories), parse_category_basis(lp_basis));
            write_file_bytes(lp_out, pairs_to_jsonl(labelled));
        } else if (*se) {
            SelectionConfig config;
            config.strategy = parse_strategy(se_strategy);
            config.pool_fraction = se_pool;
            config.easy_fraction = se_easy;
            config.shots = se_shots;
            config.seed = se_seed;
            config.per_category = !se_global;
            config.round_id = se_round_id;
            const auto round = select(load_score_table(se_scores), config);
            write_file_bytes(se_out, round_to_json(round).dump(2) + "\n");
            for (const auto& w : round.warnings) std::cerr << "select: warning: " << w << '\n';
            std::cerr << "round " << round.round_id << ": " << round.chosen_count() << " pairs chosen\n";
        } else if (*ev) {
            const auto ks = parse_ks(ev_k);
            const bool exclude_ref = !ev_keep_ref;
            nlohmann::json out;
            if (!ev_trials.empty()) {
                std::vector<fs::path> entries;
                for (const auto& e : fs::directory_iterator(ev_trials)) {
                    if (e.is_directory() || e.path().extension() == ".jsonl") entries.push_back(e.path());
                }
                std::sort(entries.begin(), entries.end());
                std::vector<RecallReport> reports;
                nlohmann::json runs = nlohmann::json::array();
                for (const auto& p : entries) {
                    std::string queries = p.string(), gallery = ev_gallery;
                    if (fs::is_directory(p)) {
                        queries = (p / "queries.jsonl").string();
                        if (fs::exists(p / "gallery.ptge")) gallery = (p / "gallery.ptge").string();
                    }
                    if (gallery.empty()) throw Error(ErrorCode::invalid_argument, "no gallery for " + p.string());
                    reports.push_back(recall_at_k(load_queries(queries, exclude_ref), load_table(gallery), ks,
                                                  ev_threads));
                    auto r = report_to_json(reports.back());
                    r["trial"] = p.filename().string();
                    runs.push_back(std::move(r));
                }
                out = aggregate_to_json(aggregate_trials(reports));
                out["runs"] = runs;
            } else {
                if (ev_queries.empty() || ev_gallery.empty()) {
                    throw Error(ErrorCode::invalid_argument, "need --queries and --gallery, or --trials-dir");
                }
                out = report_to_json(
                    recall_at_k(load_queries(ev_queries, exclude_ref), load_table(ev_gallery), ks, ev_threads));
            }
            write_or_print(ev_out, out.dump(2) + "\n");
        } else if (*sv) {
            // SIGINT/SIGTERM stop the server so the process exits cleanly.
            sigset_t stop_signals;
            sigemptyset(&stop_signals);
            sigaddset(&stop_signals, SIGINT);
            sigaddset(&stop_signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

            AnnotationStore store(sv_log);
            if (store.recovered_torn_tail()) {
                std::cerr << "serve: dropped an unacknowledged partial event from " << sv_log << '\n';
            }
            AnnotationServer server(store, ServerOptions{sv_media, sv_ui});
            std::atomic<bool> done{false};
            std::jthread waiter([&] {
                int sig = 0;
                sigwait(&stop_signals, &sig);
                if (!done) server.stop();
            });
            std::cerr << "annotation service on http://" << sv_host << ':' << sv_port << '\n';
            const bool ok = server.listen(sv_host, sv_port);
            done = true;
            pthread_kill(waiter.native_handle(), SIGTERM);
            if (!ok) {
                throw Error(ErrorCode::io_error, "cannot listen on " + sv_host + ":" + std::to_string(sv_port));
            }
        } else if (*cv) {
            save_table(load_table(cv_in), cv_out);
        }
    } catch (const Error& e) {
        std::cerr << "ptg: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ptg: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
