#pragma once

#include "ptg/selection.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ptg {

struct AnnotationRecord {
    std::string round_id;
    std::string pair_id;
    std::string text;
    std::string annotator_id;
    std::string submitted_at;
    std::uint64_t seq = 0;

    bool operator==(const AnnotationRecord&) const = default;
};

struct RoundState {
    SelectionRound round;
    std::map<std::string, AnnotationRecord> latest;  // by pair id, highest seq wins
    std::map<std::string, std::vector<AnnotationRecord>> history;
    std::optional<std::uint64_t> exported_seq;

    std::size_t annotated_count() const { return latest.size(); }
    /// Chosen pair ids without an annotation, in round order.
    std::vector<std::string> missing() const;
};

struct StoreState {
    std::map<std::string, RoundState> rounds;
    std::uint64_t last_seq = 0;

    /// Canonical JSON of the full state; equal states give equal dumps.
    nlohmann::json to_json() const;
};

enum class EventType { round_created, annotation_submitted, annotation_revised, round_exported };

std::string_view to_string(EventType t);

struct Event {
    std::uint64_t seq = 0;
    std::string ts;
    EventType type = EventType::round_created;
    nlohmann::json payload;  // event-specific fields

    nlohmann::json to_json() const;
    static Event from_json(const nlohmann::json& j);
};

/// The single state transition used by both live writes and replay. Throws
/// (leaving `state` untouched) if the event is not valid against it.
void apply_event(StoreState& state, const Event& event);

StoreState replay(const std::vector<Event>& events);

/// Reads an event log. A final line without a newline is an unacknowledged
/// torn write and is ignored; any other malformed line is an error.
std::vector<Event> read_event_log(const std::string& path, bool* had_torn_tail = nullptr);

/// Export manifest rows {"ref","text","tgt","plan":null,"pair_id","category"}
/// in category order, then chosen order.
std::string round_manifest(const RoundState& round);

/// Append-only, event-sourced annotation state. Mutations serialize through
/// one writer; readers take immutable snapshots.
class AnnotationStore {
public:
    using Clock = std::function<std::string()>;

    struct Options {
        /// fdatasync after every append.
        bool durable = true;
        Clock clock;  // defaults to utc_timestamp_now
    };

    /// Opens (creating if needed) the log at `log_path` and replays it.
    explicit AnnotationStore(std::string log_path);
    AnnotationStore(std::string log_path, Options options);
    ~AnnotationStore();

    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    /// Persists the round with status "annotating". Conflict on a duplicate id.
    std::string create_round(SelectionRound round);

    /// First annotation of a pair logs AnnotationSubmitted; later ones log
    /// AnnotationRevised. Rejects unknown pairs, empty text, exported rounds.
    AnnotationRecord submit_annotation(const std::string& round_id, const std::string& pair_id,
                                       const std::string& text, const std::string& annotator_id);

    /// Marks the round exported (once) and returns its manifest. Lists the
    /// missing pair ids if the round is incomplete.
    std::string export_round(const std::string& round_id);

    /// Manifest of an already exported round.
    std::string exported_manifest(const std::string& round_id) const;

    std::shared_ptr<const StoreState> snapshot() const;
    const std::string& log_path() const noexcept { return log_path_; }
    /// True if opening dropped a partial final line.
    bool recovered_torn_tail() const noexcept { return recovered_torn_tail_; }

private:
    void commit(Event event);

    std::string log_path_;
    Options options_;
    int fd_ = -1;
    bool recovered_torn_tail_ = false;

    std::mutex writer_mutex_;
    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const StoreState> state_;
};

}  // namespace ptg
