#include "ptg/annotation_store.hpp"

#include "ptg/digest.hpp"
#include "ptg/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

namespace ptg {

std::vector<std::string> RoundState::missing() const {
    std::vector<std::string> out;
    for (const auto& c : round.categories) {
        for (const auto& id : c.chosen) {
            if (!latest.contains(id)) out.push_back(id);
        }
    }
    return out;
}

namespace {

nlohmann::json record_json(const AnnotationRecord& r) {
    return {{"round_id", r.round_id},         {"pair_id", r.pair_id}, {"text", r.text},
            {"annotator", r.annotator_id},    {"submitted_at", r.submitted_at},
            {"seq", r.seq}};
}

constexpr std::pair<EventType, std::string_view> kEventNames[] = {
    {EventType::round_created, "RoundCreated"},
    {EventType::annotation_submitted, "AnnotationSubmitted"},
    {EventType::annotation_revised, "AnnotationRevised"},
    {EventType::round_exported, "RoundExported"},
};

EventType parse_event_type(std::string_view s) {
    for (const auto& [t, name] : kEventNames) {
        if (name == s) return t;
    }
    throw Error(ErrorCode::parse_error, "unknown event type '" + std::string(s) + "'");
}

RoundState& existing_round(StoreState& state, const std::string& id) {
    auto it = state.rounds.find(id);
    if (it == state.rounds.end()) throw Error(ErrorCode::not_found, "unknown round '" + id + "'");
    return it->second;
}

}  // namespace

nlohmann::json StoreState::to_json() const {
    nlohmann::json j;
    j["last_seq"] = last_seq;
    auto& rounds_json = j["rounds"] = nlohmann::json::object();
    for (const auto& [id, rs] : rounds) {
        nlohmann::json r;
        r["round"] = round_to_json(rs.round);
        auto& latest = r["latest"] = nlohmann::json::object();
        for (const auto& [pid, rec] : rs.latest) latest[pid] = record_json(rec);
        auto& history = r["history"] = nlohmann::json::object();
        for (const auto& [pid, recs] : rs.history) {
            auto& arr = history[pid] = nlohmann::json::array();
            for (const auto& rec : recs) arr.push_back(record_json(rec));
        }
        r["exported_seq"] = rs.exported_seq ? nlohmann::json(*rs.exported_seq) : nlohmann::json();
        rounds_json[id] = std::move(r);
    }
    return j;
}

std::string_view to_string(EventType t) {
    for (const auto& [type, name] : kEventNames) {
        if (type == t) return name;
    }
    return "Unknown";
}

nlohmann::json Event::to_json() const {
    nlohmann::json j = payload.is_object() ? payload : nlohmann::json::object();
    j["seq"] = seq;
    j["ts"] = ts;
    j["type"] = to_string(type);
    return j;
}

Event Event::from_json(const nlohmann::json& j) {
    Event e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.ts = j.at("ts").get<std::string>();
    e.type = parse_event_type(j.at("type").get<std::string>());
    e.payload = j;
    e.payload.erase("seq");
    e.payload.erase("ts");
    e.payload.erase("type");
    return e;
}

namespace {

void apply_checked(StoreState& state, const Event& event) {
    if (event.seq <= state.last_seq) {
        throw Error(ErrorCode::conflict, "event seq " + std::to_string(event.seq) +
                                             " not after " + std::to_string(state.last_seq));
    }
    const auto& p = event.payload;
    switch (event.type) {
        case EventType::round_created: {
            SelectionRound round = round_from_json(p.at("round"));
            if (round.status == RoundStatus::exported) {
                throw Error(ErrorCode::invalid_argument, "cannot create an exported round");
            }
            if (state.rounds.contains(round.round_id)) {
                throw Error(ErrorCode::conflict, "round '" + round.round_id + "' already exists");
            }
            round.status = RoundStatus::annotating;
            const std::string id = round.round_id;
            state.rounds.emplace(id, RoundState{std::move(round), {}, {}, std::nullopt});
            break;
        }
        case EventType::annotation_submitted:
        case EventType::annotation_revised: {
            AnnotationRecord rec{p.at("round_id").get<std::string>(),
                                 p.at("pair_id").get<std::string>(),
                                 p.at("text").get<std::string>(),
                                 p.at("annotator").get<std::string>(),
                                 event.ts,
                                 event.seq};
            RoundState& rs = existing_round(state, rec.round_id);
            if (rs.round.status == RoundStatus::exported) {
                throw Error(ErrorCode::read_only, "round '" + rec.round_id + "' is exported");
            }
            if (!rs.round.pairs.contains(rec.pair_id)) {
                throw Error(ErrorCode::not_found, "pair '" + rec.pair_id +
                                                      "' is not in round '" + rec.round_id + "'");
            }
            if (trim(rec.text).empty()) {
                throw Error(ErrorCode::invalid_argument, "annotation text is empty");
            }
            const bool revising = rs.latest.contains(rec.pair_id);
            if (revising != (event.type == EventType::annotation_revised)) {
                throw Error(ErrorCode::conflict, "event type does not match annotation history");
            }
            rs.history[rec.pair_id].push_back(rec);
            rs.latest[rec.pair_id] = std::move(rec);
            break;
        }
        case EventType::round_exported: {
            const auto id = p.at("round_id").get<std::string>();
            RoundState& rs = existing_round(state, id);
            if (rs.round.status == RoundStatus::exported) {
                throw Error(ErrorCode::conflict, "round '" + id + "' already exported");
            }
            if (auto missing = rs.missing(); !missing.empty()) {
                std::string list;
                for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
                throw Error(ErrorCode::incomplete, "round '" + id + "' has unannotated pairs: " + list);
            }
            rs.round.status = RoundStatus::exported;
            rs.exported_seq = event.seq;
            break;
        }
    }
    state.last_seq = event.seq;
}

}  // namespace

void apply_event(StoreState& state, const Event& event) {
    try {
        apply_checked(state, event);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, "malformed " + std::string(to_string(event.type)) +
                                                " payload: " + e.what());
    }
}

StoreState replay(const std::vector<Event>& events) {
    StoreState state;
    for (const auto& e : events) apply_event(state, e);
    return state;
}

std::vector<Event> read_event_log(const std::string& path, bool* had_torn_tail) {
    if (had_torn_tail) *had_torn_tail = false;
    std::vector<Event> events;
    if (!std::filesystem::exists(path)) return events;
    const std::string text = read_file_bytes(path);
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (had_torn_tail) *had_torn_tail = true;
            break;
        }
        ++line_no;
        const std::string_view line(text.data() + start, end - start);
        start = end + 1;
        if (trim(line).empty()) continue;
        try {
            events.push_back(Event::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::parse_error, path + ": corrupt event at line " +
                                                    std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

std::string round_manifest(const RoundState& rs) {
    std::string out;
    for (const auto& c : rs.round.categories) {
        for (const auto& id : c.chosen) {
            const RoundPair& pair = rs.round.pairs.at(id);
            const AnnotationRecord& rec = rs.latest.at(id);
            nlohmann::json row;
            row["ref"] = pair.ref_image_id;
            row["text"] = rec.text;
            row["tgt"] = pair.target_image_id;
            row["plan"] = nullptr;
            row["pair_id"] = id;
            row["category"] = c.category;
            out += row.dump() + "\n";
        }
    }
    return out;
}

AnnotationStore::AnnotationStore(std::string log_path) : AnnotationStore(std::move(log_path), Options{}) {}

AnnotationStore::AnnotationStore(std::string log_path, Options options)
    : log_path_(std::move(log_path)), options_(std::move(options)) {
    if (!options_.clock) options_.clock = utc_timestamp_now;

    bool torn = false;
    auto events = read_event_log(log_path_, &torn);
    state_ = std::make_shared<const StoreState>(replay(events));

    fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw Error(ErrorCode::io_error, "cannot open event log " + log_path_ + ": " + std::strerror(errno));
    }
    if (torn) {
        const std::string text = read_file_bytes(log_path_);
        const auto keep = text.rfind('\n');
        const off_t size = keep == std::string::npos ? 0 : static_cast<off_t>(keep + 1);
        if (::ftruncate(fd_, size) != 0) {
            throw Error(ErrorCode::io_error, "cannot truncate torn tail of " + log_path_);
        }
        recovered_torn_tail_ = true;
    }
}

AnnotationStore::~AnnotationStore() {
    if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<const StoreState> AnnotationStore::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return state_;
}

void AnnotationStore::commit(Event event) {
    // Caller holds writer_mutex_.
    auto next = std::make_shared<StoreState>(*snapshot());
    event.seq = next->last_seq + 1;
    event.ts = options_.clock();
    apply_event(*next, event);

    const std::string line = event.to_json().dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::io_error, "event log write failed: " + std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }
    if (options_.durable && ::fdatasync(fd_) != 0) {
        throw Error(ErrorCode::io_error, "event log sync failed: " + std::string(std::strerror(errno)));
    }
    std::lock_guard lock(snapshot_mutex_);
    state_ = std::move(next);
}

std::string AnnotationStore::create_round(SelectionRound round) {
    round.validate();
    std::lock_guard lock(writer_mutex_);
    const std::string id = round.round_id;
    commit(Event{0, {}, EventType::round_created, {{"round", round_to_json(round)}}});
    return id;
}

AnnotationRecord AnnotationStore::submit_annotation(const std::string& round_id,
                                                    const std::string& pair_id,
                                                    const std::string& text,
                                                    const std::string& annotator_id) {
    std::lock_guard lock(writer_mutex_);
    const auto current = snapshot();
    auto it = current->rounds.find(round_id);
    if (it == current->rounds.end()) throw Error(ErrorCode::not_found, "unknown round '" + round_id + "'");
    const EventType type = it->second.latest.contains(pair_id) ? EventType::annotation_revised
                                                               : EventType::annotation_submitted;
    commit(Event{0,
                 {},
                 type,
                 {{"round_id", round_id},
                  {"pair_id", pair_id},
                  {"text", text},
                  {"annotator", annotator_id}}});
    return snapshot()->rounds.at(round_id).latest.at(pair_id);
}

std::string AnnotationStore::export_round(const std::string& round_id) {
    std::lock_guard lock(writer_mutex_);
    const auto current = snapshot();
    auto it = current->rounds.find(round_id);
    if (it == current->rounds.end()) throw Error(ErrorCode::not_found, "unknown round '" + round_id + "'");
    if (it->second.round.status != RoundStatus::exported) {
        commit(Event{0, {}, EventType::round_exported, {{"round_id", round_id}}});
    }
    return round_manifest(snapshot()->rounds.at(round_id));
}

std::string AnnotationStore::exported_manifest(const std::string& round_id) const {
    const auto current = snapshot();
    auto it = current->rounds.find(round_id);
    if (it == current->rounds.end()) throw Error(ErrorCode::not_found, "unknown round '" + round_id + "'");
    if (it->second.round.status != RoundStatus::exported) {
        throw Error(ErrorCode::conflict, "round '" + round_id + "' has not been exported");
    }
    return round_manifest(it->second);
}

}  // namespace ptg
