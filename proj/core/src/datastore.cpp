#include "rtc/datastore.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "rtc/error.hpp"
#include "rtc/rng.hpp"
#include "rtc/table.hpp"

namespace rtc {

// --- event schema -----------------------------------------------------------

namespace {

enum class FieldType { string, integer, object, boolean };

struct FieldSpec {
  const char* name;
  FieldType type;
};

struct KindSpec {
  std::string_view kind;
  std::vector<FieldSpec> fields;
};

const std::vector<KindSpec>& event_schemas() {
  static const std::vector<KindSpec> schemas{
      {event_kind::instruction_issued, {{"card", FieldType::object}}},
      {event_kind::dialogue_started,
       {{"dialogue_id", FieldType::string},
        {"instruction_id", FieldType::string},
        {"red_teamer_id", FieldType::string},
        {"topic", FieldType::string}}},
      {event_kind::turn_appended,
       {{"dialogue_id", FieldType::string}, {"author", FieldType::string}, {"text", FieldType::string}}},
      {event_kind::dialogue_closed, {{"dialogue_id", FieldType::string}, {"pre_annotation", FieldType::object}}},
      {event_kind::annotator_assigned,
       {{"dialogue_id", FieldType::string}, {"participant_id", FieldType::string}, {"relation", FieldType::string}}},
      {event_kind::annotation_submitted,
       {{"dialogue_id", FieldType::string},
        {"annotator_id", FieldType::string},
        {"rating", FieldType::integer},
        {"reasoning", FieldType::string}}},
      {event_kind::arbitrator_assigned,
       {{"dialogue_id", FieldType::string}, {"participant_id", FieldType::string}, {"relation", FieldType::string}}},
      {event_kind::arbitration_submitted,
       {{"dialogue_id", FieldType::string},
        {"arbitrator_id", FieldType::string},
        {"rating", FieldType::integer},
        {"reasoning", FieldType::string}}},
      {event_kind::participant_opted_out, {{"participant_id", FieldType::string}}},
  };
  return schemas;
}

bool has_type(const Json& value, FieldType type) {
  switch (type) {
    case FieldType::string: return value.is_string();
    case FieldType::integer: return value.is_number_integer();
    case FieldType::object: return value.is_object();
    case FieldType::boolean: return value.is_boolean();
  }
  return false;
}

[[noreturn]] void schema_violation(const std::string& message) {
  fail(ErrorKind::validation, "schema_violation", message);
}

}  // namespace

void validate_event(const EventRecord& event) {
  if (event.entity_id.empty()) schema_violation("event without entity_id");
  const auto& schemas = event_schemas();
  auto spec = std::find_if(schemas.begin(), schemas.end(),
                           [&](const KindSpec& s) { return s.kind == event.event_kind; });
  if (spec == schemas.end()) schema_violation("unknown event kind '" + event.event_kind + "'");
  if (!event.payload.is_object()) schema_violation(event.event_kind + ": payload must be an object");
  for (const auto& field : spec->fields) {
    auto it = event.payload.find(field.name);
    if (it == event.payload.end() || !has_type(*it, field.type)) {
      schema_violation(event.event_kind + ": payload field '" + field.name + "' missing or mistyped");
    }
  }
}

Json event_to_json(const EventRecord& event) {
  Json j;
  j["seq"] = event.sequence_number;
  j["entity_id"] = event.entity_id;
  j["kind"] = event.event_kind;
  j["timestamp"] = event.timestamp;
  j["payload"] = event.payload;
  return j;
}

EventRecord event_from_json(const Json& json) {
  EventRecord e;
  e.sequence_number = json.at("seq").get<std::uint64_t>();
  e.entity_id = json.at("entity_id").get<std::string>();
  e.event_kind = json.at("kind").get<std::string>();
  e.timestamp = json.at("timestamp").get<std::int64_t>();
  e.payload = json.at("payload");
  return e;
}

std::vector<EventRecord> EventStore::read_after(std::uint64_t sequence) const {
  std::vector<EventRecord> out;
  for (auto& e : read_all()) {
    if (e.sequence_number > sequence) out.push_back(std::move(e));
  }
  return out;
}

std::vector<EventRecord> EventStore::replay(std::string_view entity_id) const {
  std::vector<EventRecord> out;
  for (auto& e : read_all()) {
    if (e.entity_id == entity_id) out.push_back(std::move(e));
  }
  return out;
}

std::uint64_t MemoryEventStore::append(EventRecord event) {
  validate_event(event);
  std::unique_lock lock(mutex_);
  event.sequence_number = events_.empty() ? 1 : events_.back().sequence_number + 1;
  events_.push_back(std::move(event));
  return events_.back().sequence_number;
}

std::vector<EventRecord> MemoryEventStore::read_all() const {
  std::shared_lock lock(mutex_);
  return events_;
}

std::uint64_t MemoryEventStore::last_sequence() const {
  std::shared_lock lock(mutex_);
  return events_.empty() ? 0 : events_.back().sequence_number;
}

FileEventStore::FileEventStore(std::filesystem::path path, Durability durability)
    : path_(std::move(path)), durability_(durability) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    fail(ErrorKind::io, "storage_failure", "cannot open event log '" + path_.string() + "': " + std::strerror(errno));
  }

  std::ifstream in(path_, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t good_end = 0;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto newline = content.find('\n', pos);
    ++line_no;
    if (newline == std::string::npos) break;  // torn tail
    const std::string_view line(content.data() + pos, newline - pos);
    const auto parsed = Json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      // Only the last line may be torn; anything earlier is corruption.
      if (content.find('\n', newline + 1) != std::string::npos) {
        ::close(fd_);
        fail(ErrorKind::io, "corrupt_log", "event log '" + path_.string() + "' is corrupt at line " +
                                               std::to_string(line_no));
      }
      break;
    }
    events_.push_back(event_from_json(parsed));
    pos = newline + 1;
    good_end = pos;
  }
  if (good_end < content.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0) {
      ::close(fd_);
      fail(ErrorKind::io, "storage_failure", "cannot truncate torn event log tail");
    }
  }
}

FileEventStore::~FileEventStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t FileEventStore::append(EventRecord event) {
  validate_event(event);
  std::unique_lock lock(mutex_);
  event.sequence_number = events_.empty() ? 1 : events_.back().sequence_number + 1;
  const std::string line = event_to_json(event).dump() + "\n";

  const off_t before = ::lseek(fd_, 0, SEEK_END);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string reason = std::strerror(errno);
      if (before >= 0) [[maybe_unused]] auto ignored = ::ftruncate(fd_, before);
      fail(ErrorKind::io, "storage_failure", "event log write failed: " + reason);
    }
    written += static_cast<std::size_t>(n);
  }
  if (durability_ == Durability::fsync && ::fdatasync(fd_) != 0) {
    fail(ErrorKind::io, "storage_failure", "event log fsync failed: " + std::string(std::strerror(errno)));
  }
  events_.push_back(std::move(event));
  return events_.back().sequence_number;
}

std::vector<EventRecord> FileEventStore::read_all() const {
  std::shared_lock lock(mutex_);
  return events_;
}

std::uint64_t FileEventStore::last_sequence() const {
  std::shared_lock lock(mutex_);
  return events_.empty() ? 0 : events_.back().sequence_number;
}

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["sequence_number"] = snapshot.sequence_number;
  j["state"] = snapshot.state;
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "storage_failure", "cannot write snapshot '" + tmp + "'");
    out << j.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorKind::io, "storage_failure", "snapshot write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::optional<Snapshot> read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const auto j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::io, "corrupt_snapshot", "snapshot '" + path.string() + "' is not valid JSON");
  return Snapshot{j.at("sequence_number").get<std::uint64_t>(), j.at("state")};
}

// --- dialogue codec -----------------------------------------------------------

Json target_to_json(const DemographicTarget& target) {
  Json components = Json::array();
  for (const auto& c : target.components()) components.push_back({{"axis", c.axis}, {"label", c.label}});
  return {{"components", std::move(components)}, {"display", target.display()}};
}

DemographicTarget target_from_json(const Json& json) {
  std::vector<TargetComponent> components;
  for (const auto& c : json.at("components")) {
    components.push_back({c.at("axis").get<std::string>(), c.at("label").get<std::string>()});
  }
  return DemographicTarget(std::move(components));
}

Json card_to_json(const InstructionCard& card) {
  Json j;
  j["instruction_id"] = card.instruction_id;
  j["participant_id"] = card.participant_id;
  j["rule_id"] = card.rule_id;
  j["adversariality"] = to_string(card.adversariality);
  j["use_case"] = card.use_case;
  j["topic"] = card.topic;
  j["target"] = card.target ? target_to_json(*card.target) : Json(nullptr);
  j["attacker_group_relation"] = to_string(card.attacker_group_relation);
  return j;
}

InstructionCard card_from_json(const Json& json) {
  InstructionCard c;
  c.instruction_id = json.at("instruction_id").get<std::string>();
  c.participant_id = json.at("participant_id").get<std::string>();
  c.rule_id = json.at("rule_id").get<std::string>();
  c.adversariality = parse_adversariality(json.at("adversariality").get<std::string>());
  c.use_case = json.at("use_case").get<std::string>();
  c.topic = json.at("topic").get<std::string>();
  if (!json.at("target").is_null()) c.target = target_from_json(json.at("target"));
  c.attacker_group_relation = parse_group_relation(json.at("attacker_group_relation").get<std::string>());
  return c;
}

Json turn_to_json(const Turn& turn) {
  return {{"index", turn.index}, {"author", to_string(turn.author)}, {"text", turn.text}, {"timestamp", turn.timestamp}};
}

Turn turn_from_json(const Json& json) {
  return Turn{json.at("index").get<int>(), parse_author(json.at("author").get<std::string>()),
              json.at("text").get<std::string>(), json.at("timestamp").get<std::int64_t>()};
}

Json pre_annotation_to_json(const PreAnnotation& pre) {
  Json groups = Json::array();
  for (const auto& g : pre.groups_mentioned) groups.push_back({{"axis", g.axis}, {"label", g.label}});
  Json others = Json::array();
  for (const auto& r : pre.other_rules_broken) others.push_back(r);
  return {{"targeted_rule_broken", pre.targeted_rule_broken},
          {"other_rules_broken", std::move(others)},
          {"groups_mentioned", std::move(groups)}};
}

PreAnnotation pre_annotation_from_json(const Json& json) {
  PreAnnotation pre;
  pre.targeted_rule_broken = json.at("targeted_rule_broken").get<bool>();
  for (const auto& r : json.at("other_rules_broken")) pre.other_rules_broken.insert(r.get<std::string>());
  for (const auto& g : json.at("groups_mentioned")) {
    pre.groups_mentioned.insert({g.at("axis").get<std::string>(), g.at("label").get<std::string>()});
  }
  return pre;
}

Json annotation_to_json(const Annotation& a) {
  Json j;
  j["annotator_id"] = a.annotator_id;
  j["ordinal"] = to_string(a.ordinal);
  j["rating"] = a.rating.value();
  j["rating_label"] = a.rating.label();
  j["reasoning"] = a.reasoning;
  j["relation"] = to_string(a.relation);
  j["timestamp"] = a.timestamp;
  return j;
}

Annotation annotation_from_json(const Json& json) {
  Annotation a;
  a.annotator_id = json.at("annotator_id").get<std::string>();
  a.ordinal = parse_ordinal(json.at("ordinal").get<std::string>());
  a.rating = LikertRating(json.at("rating").get<int>());
  a.reasoning = json.at("reasoning").get<std::string>();
  a.relation = parse_group_relation(json.at("relation").get<std::string>());
  a.timestamp = json.at("timestamp").get<std::int64_t>();
  return a;
}

Json selection_to_json(const Selection& s) {
  return {{"participant_id", s.participant_id}, {"relation", to_string(s.relation)}};
}

Selection selection_from_json(const Json& json) {
  return {json.at("participant_id").get<std::string>(), parse_group_relation(json.at("relation").get<std::string>())};
}

Json verdict_to_json(const VerdictRecord& v) {
  Json ratings = Json::array();
  for (const auto& r : v.all_ratings) ratings.push_back(r.value());
  return {{"headline_rating", v.headline_rating.value()},
          {"headline_label", v.headline_rating.label()},
          {"headline_source", to_string(v.headline_source)},
          {"all_ratings", std::move(ratings)},
          {"binarized", v.binarized}};
}

namespace {

Json common_dialogue_fields(const Dialogue& d) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["dialogue_id"] = d.dialogue_id;
  j["state"] = to_string(d.state);
  j["red_teamer_id"] = d.red_teamer_id;
  j["created_at"] = d.created_at;
  j["instruction"] = card_to_json(d.instruction);
  Json turns = Json::array();
  for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
  j["turns"] = std::move(turns);
  j["advisories"] = d.advisories;
  j["pre_annotation"] = d.pre_annotation ? pre_annotation_to_json(*d.pre_annotation) : Json(nullptr);
  Json assignments = Json::array();
  for (const auto& s : d.assigned_annotators) {
    Json a = selection_to_json(s);
    a["role"] = "annotator";
    assignments.push_back(std::move(a));
  }
  if (d.assigned_arbitrator) {
    Json a = selection_to_json(*d.assigned_arbitrator);
    a["role"] = "arbitrator";
    assignments.push_back(std::move(a));
  }
  j["assignments"] = std::move(assignments);
  Json annotations = Json::array();
  for (const auto& a : d.annotations) annotations.push_back(annotation_to_json(a));
  j["annotations"] = std::move(annotations);
  return j;
}

Dialogue common_dialogue_from_json(const Json& j) {
  Dialogue d;
  d.dialogue_id = j.at("dialogue_id").get<std::string>();
  d.state = parse_dialogue_state(j.at("state").get<std::string>());
  d.red_teamer_id = j.at("red_teamer_id").get<std::string>();
  d.created_at = j.at("created_at").get<std::int64_t>();
  d.instruction = card_from_json(j.at("instruction"));
  for (const auto& t : j.at("turns")) d.turns.push_back(turn_from_json(t));
  d.advisories = j.at("advisories").get<std::vector<std::string>>();
  if (!j.at("pre_annotation").is_null()) d.pre_annotation = pre_annotation_from_json(j.at("pre_annotation"));
  for (const auto& a : j.at("assignments")) {
    Selection s = selection_from_json(a);
    if (a.at("role").get<std::string>() == "arbitrator") {
      d.assigned_arbitrator = std::move(s);
    } else {
      d.assigned_annotators.push_back(std::move(s));
    }
  }
  for (const auto& a : j.at("annotations")) {
    Annotation annotation = annotation_from_json(a);
    annotation.dialogue_id = d.dialogue_id;
    d.annotations.push_back(std::move(annotation));
  }
  return d;
}

}  // namespace

Json dialogue_state_to_json(const Dialogue& dialogue) { return common_dialogue_fields(dialogue); }

Dialogue dialogue_state_from_json(const Json& json) { return common_dialogue_from_json(json); }

Json dialogue_to_export_json(const Dialogue& dialogue, ConsensusRule rule) {
  Json j = common_dialogue_fields(dialogue);
  if (dialogue.state == DialogueState::Finalized) {
    Json verdict = verdict_to_json(final_verdict(dialogue, rule));
    verdict["consensus_rule"] = to_string(rule);
    j["verdict"] = std::move(verdict);
  } else {
    j["verdict"] = nullptr;
  }
  return j;
}

Dialogue dialogue_from_export_json(const Json& json) {
  if (!json.contains("schema_version") || json.at("schema_version").get<int>() != kSchemaVersion) {
    fail(ErrorKind::validation, "schema_version", "unsupported or missing schema_version in export record");
  }
  return common_dialogue_from_json(json);
}

void export_dialogues(std::ostream& out, std::span<const Dialogue> dialogues, const ExportFilter& filter,
                      ConsensusRule rule) {
  std::vector<const Dialogue*> selected;
  for (const auto& d : dialogues) {
    if (filter.finalized_only && d.state != DialogueState::Finalized) continue;
    if (filter.rule_id && d.instruction.rule_id != *filter.rule_id) continue;
    selected.push_back(&d);
  }
  std::sort(selected.begin(), selected.end(),
            [](const Dialogue* a, const Dialogue* b) { return a->dialogue_id < b->dialogue_id; });
  for (const Dialogue* d : selected) out << dialogue_to_export_json(*d, rule).dump() << '\n';
}

std::vector<Dialogue> import_dialogues(std::istream& in) {
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      fail(ErrorKind::validation, "parse_error", "export line " + std::to_string(line_no) + " is not valid JSON");
    }
    try {
      out.push_back(dialogue_from_export_json(j));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::validation, "parse_error", "export line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// --- external datasets --------------------------------------------------------

MappingSpec parse_mapping_spec(std::string_view text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::validation, "parse_error", std::string("mapping spec: ") + e.what());
  }
  MappingSpec spec;
  if (!doc["dataset_id"]) fail(ErrorKind::validation, "missing_field", "mapping spec: missing dataset_id");
  spec.dataset_id = doc["dataset_id"].as<std::string>();
  spec.source_label = doc["source_label"] ? doc["source_label"].as<std::string>() : spec.dataset_id;
  if (doc["format"]) spec.format = doc["format"].as<std::string>();
  if (spec.format != "jsonl" && spec.format != "csv") {
    fail(ErrorKind::validation, "unknown_format", "mapping spec: format must be jsonl or csv");
  }
  if (const auto fields = doc["fields"]) {
    if (fields["record_id"]) spec.record_id_field = fields["record_id"].as<std::string>();
    if (fields["text"]) spec.text_field = fields["text"].as<std::string>();
    if (fields["x"]) spec.x_field = fields["x"].as<std::string>();
    if (fields["y"]) spec.y_field = fields["y"].as<std::string>();
  }
  if (spec.x_field.has_value() != spec.y_field.has_value()) {
    fail(ErrorKind::validation, "missing_field", "mapping spec: x and y must be mapped together");
  }
  return spec;
}

namespace {

double parse_coordinate(const std::string& text, const std::string& record) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (begin < end && *begin == ' ') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorKind::validation, "invalid_coordinate", "record '" + record + "': coordinate '" + text + "' is not a number");
  }
  return value;
}

void check_finite(const ExternalRecord& r) {
  if (r.coordinates && (!std::isfinite(r.coordinates->first) || !std::isfinite(r.coordinates->second))) {
    fail(ErrorKind::validation, "non_finite_coordinate", "record '" + r.record_id + "' has non-finite coordinates");
  }
}

std::string record_label(const std::string& id, std::size_t line_no) {
  return id.empty() ? "line " + std::to_string(line_no) : id;
}

}  // namespace

ExternalDataset import_external(std::istream& in, const MappingSpec& mapping) {
  ExternalDataset dataset{mapping.dataset_id, mapping.source_label, {}};
  auto missing = [](const std::string& label, const std::string& field) {
    fail(ErrorKind::validation, "unmapped_field", "record '" + label + "' is missing mapped field '" + field + "'");
  };

  if (mapping.format == "jsonl") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = Json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        fail(ErrorKind::validation, "parse_error", "line " + std::to_string(line_no) + " is not a JSON object");
      }
      ExternalRecord r;
      if (auto it = j.find(mapping.record_id_field); it != j.end()) {
        r.record_id = it->is_string() ? it->get<std::string>() : it->dump();
      } else {
        missing(record_label("", line_no), mapping.record_id_field);
      }
      auto text = j.find(mapping.text_field);
      if (text == j.end() || !text->is_string()) missing(r.record_id, mapping.text_field);
      r.text = text->get<std::string>();
      if (mapping.x_field) {
        auto x = j.find(*mapping.x_field);
        auto y = j.find(*mapping.y_field);
        if (x != j.end() || y != j.end()) {
          if (x == j.end()) missing(r.record_id, *mapping.x_field);
          if (y == j.end()) missing(r.record_id, *mapping.y_field);
          auto as_double = [&](const Json& v) {
            if (v.is_number()) return v.get<double>();
            if (v.is_string()) return parse_coordinate(v.get<std::string>(), r.record_id);
            fail(ErrorKind::validation, "invalid_coordinate", "record '" + r.record_id + "': coordinate is not a number");
          };
          r.coordinates = std::make_pair(as_double(*x), as_double(*y));
        }
      }
      check_finite(r);
      dataset.records.push_back(std::move(r));
    }
    return dataset;
  }

  const auto rows = parse_csv(in);
  if (rows.empty()) return dataset;
  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column(mapping.record_id_field);
  const auto text_col = column(mapping.text_field);
  const auto x_col = mapping.x_field ? column(*mapping.x_field) : std::nullopt;
  const auto y_col = mapping.y_field ? column(*mapping.y_field) : std::nullopt;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto cell = [&](std::optional<std::size_t> col) -> const std::string* {
      if (!col || *col >= row.size()) return nullptr;
      return &row[*col];
    };
    ExternalRecord r;
    const std::string* id = cell(id_col);
    if (!id || id->empty()) missing(record_label("", i + 1), mapping.record_id_field);
    r.record_id = *id;
    const std::string* text = cell(text_col);
    if (!text || text->empty()) missing(r.record_id, mapping.text_field);
    r.text = *text;
    if (mapping.x_field) {
      const std::string* x = cell(x_col);
      const std::string* y = cell(y_col);
      const bool has_x = x && !x->empty();
      const bool has_y = y && !y->empty();
      if (has_x || has_y) {
        if (!has_x) missing(r.record_id, *mapping.x_field);
        if (!has_y) missing(r.record_id, *mapping.y_field);
        r.coordinates = std::make_pair(parse_coordinate(*x, r.record_id), parse_coordinate(*y, r.record_id));
      }
    }
    check_finite(r);
    dataset.records.push_back(std::move(r));
  }
  return dataset;
}

ExternalDataset import_external(const std::filesystem::path& path, const MappingSpec& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "file_not_readable", "cannot read '" + path.string() + "'");
  return import_external(in, mapping);
}

ExternalDataset downsample(const ExternalDataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n >= dataset.records.size()) return dataset;
  std::vector<std::size_t> index(dataset.records.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(index[i], index[i + uniform_index(rng, index.size() - i)]);
  }
  index.resize(n);
  std::sort(index.begin(), index.end());
  ExternalDataset out{dataset.dataset_id, dataset.source_label, {}};
  out.records.reserve(n);
  for (auto i : index) out.records.push_back(dataset.records[i]);
  return out;
}

}  // namespace rtc
