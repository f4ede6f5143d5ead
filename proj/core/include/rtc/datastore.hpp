#pragma once

// Append-only event log, JSONL dialogue export/import and external dataset
// ingestion.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtc/workflow.hpp"

namespace rtc {

using Json = nlohmann::ordered_json;

struct EventRecord {
  std::uint64_t sequence_number = 0;
  std::string entity_id;
  std::string event_kind;
  Json payload;
  std::int64_t timestamp = 0;

  bool operator==(const EventRecord&) const = default;
};

namespace event_kind {
inline constexpr std::string_view instruction_issued = "instruction_issued";
inline constexpr std::string_view dialogue_started = "dialogue_started";
inline constexpr std::string_view turn_appended = "turn_appended";
inline constexpr std::string_view dialogue_closed = "dialogue_closed";
inline constexpr std::string_view annotator_assigned = "annotator_assigned";
inline constexpr std::string_view annotation_submitted = "annotation_submitted";
inline constexpr std::string_view arbitrator_assigned = "arbitrator_assigned";
inline constexpr std::string_view arbitration_submitted = "arbitration_submitted";
inline constexpr std::string_view participant_opted_out = "participant_opted_out";
}  // namespace event_kind

/// Throws validation "schema_violation" if the payload does not carry the
/// fields its event_kind requires, or the kind is unknown.
void validate_event(const EventRecord& event);

Json event_to_json(const EventRecord& event);
EventRecord event_from_json(const Json& json);

/// Single writer, many readers. append() assigns the next sequence number.
class EventStore {
 public:
  virtual ~EventStore() = default;

  /// Validates, persists and returns the assigned sequence number. On any
  /// failure the log is unchanged.
  virtual std::uint64_t append(EventRecord event) = 0;
  virtual std::vector<EventRecord> read_all() const = 0;
  virtual std::uint64_t last_sequence() const = 0;

  std::vector<EventRecord> read_after(std::uint64_t sequence) const;
  /// All events for one entity, in log order.
  std::vector<EventRecord> replay(std::string_view entity_id) const;
};

class MemoryEventStore final : public EventStore {
 public:
  std::uint64_t append(EventRecord event) override;
  std::vector<EventRecord> read_all() const override;
  std::uint64_t last_sequence() const override;

 private:
  mutable std::shared_mutex mutex_;
  std::vector<EventRecord> events_;
};

/// One JSON object per line. A torn final line (crash mid-write) is dropped
/// and truncated away when the log is reopened.
class FileEventStore final : public EventStore {
 public:
  enum class Durability { fsync, flush };

  explicit FileEventStore(std::filesystem::path path, Durability durability = Durability::fsync);
  ~FileEventStore() override;

  FileEventStore(const FileEventStore&) = delete;
  FileEventStore& operator=(const FileEventStore&) = delete;

  std::uint64_t append(EventRecord event) override;
  std::vector<EventRecord> read_all() const override;
  std::uint64_t last_sequence() const override;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  Durability durability_;
  int fd_ = -1;
  mutable std::shared_mutex mutex_;
  std::vector<EventRecord> events_;
};

/// Snapshot = full campaign state as of a sequence number. Written to a
/// temporary file and renamed into place.
struct Snapshot {
  std::uint64_t sequence_number = 0;
  Json state;
};

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);
std::optional<Snapshot> read_snapshot(const std::filesystem::path& path);

// --- dialogue codec -------------------------------------------------------

Json target_to_json(const DemographicTarget& target);
DemographicTarget target_from_json(const Json& json);
Json card_to_json(const InstructionCard& card);
InstructionCard card_from_json(const Json& json);
Json turn_to_json(const Turn& turn);
Turn turn_from_json(const Json& json);
Json pre_annotation_to_json(const PreAnnotation& pre);
PreAnnotation pre_annotation_from_json(const Json& json);
Json annotation_to_json(const Annotation& annotation);
Annotation annotation_from_json(const Json& json);
Json selection_to_json(const Selection& selection);
Selection selection_from_json(const Json& json);
Json verdict_to_json(const VerdictRecord& verdict);

/// Full dialogue state, including assignment bookkeeping (used by snapshots).
Json dialogue_state_to_json(const Dialogue& dialogue);
Dialogue dialogue_state_from_json(const Json& json);

/// Export object: schema_version, instruction parameters, turns,
/// pre-annotation, every annotation with reasoning and relation, verdict.
Json dialogue_to_export_json(const Dialogue& dialogue, ConsensusRule rule);
/// Inverse of dialogue_to_export_json for finalized dialogues.
Dialogue dialogue_from_export_json(const Json& json);

struct ExportFilter {
  bool finalized_only = true;
  std::optional<std::string> rule_id;
};

/// One line per dialogue, ordered by dialogue_id.
void export_dialogues(std::ostream& out, std::span<const Dialogue> dialogues, const ExportFilter& filter,
                      ConsensusRule rule);
std::vector<Dialogue> import_dialogues(std::istream& in);

// --- external datasets ----------------------------------------------------

struct ExternalRecord {
  std::string record_id;
  std::string text;
  std::optional<std::pair<double, double>> coordinates;
};

struct ExternalDataset {
  std::string dataset_id;
  std::string source_label;
  std::vector<ExternalRecord> records;
};

/// YAML/JSON document:
///   dataset_id, source_label, format: jsonl | csv,
///   fields: {record_id, text, x, y}   (x/y optional)
struct MappingSpec {
  std::string dataset_id;
  std::string source_label;
  std::string format = "jsonl";
  std::string record_id_field = "id";
  std::string text_field = "text";
  std::optional<std::string> x_field;
  std::optional<std::string> y_field;
};

MappingSpec parse_mapping_spec(std::string_view text);

/// Throws validation on unmapped mandatory fields (naming the record) or on
/// non-finite coordinates.
ExternalDataset import_external(const std::filesystem::path& path, const MappingSpec& mapping);
ExternalDataset import_external(std::istream& in, const MappingSpec& mapping);

/// Uniform sample without replacement, original order kept. n >= size
/// returns the whole dataset.
ExternalDataset downsample(const ExternalDataset& dataset, std::size_t n, std::uint64_t seed);

}  // namespace rtc
