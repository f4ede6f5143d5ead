#include "rtc/policy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "rtc/error.hpp"

namespace rtc {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  fail(ErrorKind::validation, "unknown_" + std::string(what),
       "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

constexpr std::array<std::pair<std::string_view, PolicyArea>, 3> kAreas{{
    {"dangerous_illegal", PolicyArea::dangerous_illegal},
    {"misinformation", PolicyArea::misinformation},
    {"sexually_explicit", PolicyArea::sexually_explicit},
}};
constexpr std::array<std::pair<std::string_view, Expertise>, 3> kExpertise{{
    {"none", Expertise::none},
    {"medical", Expertise::medical},
    {"fact_checking", Expertise::fact_checking},
}};
constexpr std::array<std::pair<std::string_view, Adversariality>, 3> kLevels{{
    {"low", Adversariality::low},
    {"medium", Adversariality::medium},
    {"high", Adversariality::high},
}};
constexpr std::array<std::pair<std::string_view, Role>, 3> kRoles{{
    {"red_teamer", Role::red_teamer},
    {"annotator", Role::annotator},
    {"arbitrator", Role::arbitrator},
}};

template <class Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

YAML::Node parse_document(std::string_view text, std::string_view what) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::validation, "parse_error", std::string(what) + ": " + e.what());
  }
}

void check_schema_version(const YAML::Node& doc, std::string_view what) {
  if (!doc["schema_version"]) return;
  const int version = doc["schema_version"].as<int>();
  if (version != kSchemaVersion) {
    fail(ErrorKind::validation, "schema_version",
         std::string(what) + ": unsupported schema_version " + std::to_string(version));
  }
}

std::string required_string(const YAML::Node& node, const char* key, std::string_view context) {
  const auto value = node[key];
  if (!value || !value.IsScalar() || value.as<std::string>().empty()) {
    fail(ErrorKind::validation, "missing_field",
         std::string(context) + ": missing field '" + key + "'");
  }
  return value.as<std::string>();
}

}  // namespace

std::string_view to_string(PolicyArea area) { return enum_name(area, kAreas); }
std::string_view to_string(Expertise expertise) { return enum_name(expertise, kExpertise); }
std::string_view to_string(Adversariality level) { return enum_name(level, kLevels); }
std::string_view to_string(Role role) { return enum_name(role, kRoles); }

PolicyArea parse_policy_area(std::string_view text) { return parse_enum(text, kAreas, "policy_area"); }
Expertise parse_expertise(std::string_view text) { return parse_enum(text, kExpertise, "expertise"); }
Adversariality parse_adversariality(std::string_view text) {
  return parse_enum(text, kLevels, "adversariality");
}
Role parse_role(std::string_view text) { return parse_enum(text, kRoles, "role"); }

ContentPolicy::ContentPolicy(std::string policy_id, std::vector<Rule> rules)
    : policy_id_(std::move(policy_id)), rules_(std::move(rules)) {
  if (policy_id_.empty()) fail(ErrorKind::validation, "missing_field", "policy: missing policy_id");
  if (rules_.empty()) fail(ErrorKind::validation, "empty_policy", "empty policy: no rules");
  std::set<std::string> seen;
  for (const auto& rule : rules_) {
    if (rule.rule_id.empty()) fail(ErrorKind::validation, "missing_field", "rule without rule_id");
    if (!seen.insert(rule.rule_id).second) {
      fail(ErrorKind::validation, "duplicate_rule_id", "duplicate rule_id '" + rule.rule_id + "'");
    }
    if (rule.demographic_targeting && rule.expertise_required != Expertise::none) {
      fail(ErrorKind::validation, "targeting_with_expertise",
           "rule '" + rule.rule_id + "' is demographic-targeting but requires expertise");
    }
  }
}

const Rule* ContentPolicy::find(std::string_view rule_id) const noexcept {
  auto it = std::find_if(rules_.begin(), rules_.end(),
                         [&](const Rule& r) { return r.rule_id == rule_id; });
  return it == rules_.end() ? nullptr : &*it;
}

const Rule& ContentPolicy::rule(std::string_view rule_id) const {
  if (const Rule* r = find(rule_id)) return *r;
  fail(ErrorKind::not_found, "unknown_rule", "unknown rule '" + std::string(rule_id) + "'");
}

namespace {

ContentPolicy load_policy_impl(std::string_view config_text) {
  const YAML::Node doc = parse_document(config_text, "policy");
  if (!doc.IsMap()) fail(ErrorKind::validation, "parse_error", "policy: expected a mapping");
  check_schema_version(doc, "policy");
  std::string policy_id = required_string(doc, "policy_id", "policy");

  std::vector<Rule> rules;
  const YAML::Node list = doc["rules"];
  if (list && !list.IsSequence()) fail(ErrorKind::validation, "parse_error", "policy: 'rules' must be a list");
  if (list) {
    for (const auto& entry : list) {
      Rule rule;
      rule.rule_id = required_string(entry, "rule_id", "rule");
      rule.text = entry["text"] ? entry["text"].as<std::string>() : std::string{};
      rule.policy_area = parse_policy_area(required_string(entry, "policy_area", rule.rule_id));
      rule.expertise_required =
          entry["expertise_required"] ? parse_expertise(entry["expertise_required"].as<std::string>())
                                      : Expertise::none;
      rule.demographic_targeting =
          entry["demographic_targeting"] ? entry["demographic_targeting"].as<bool>() : false;
      rules.push_back(std::move(rule));
    }
  }
  return ContentPolicy(std::move(policy_id), std::move(rules));
}

}  // namespace

ContentPolicy load_policy(std::string_view config_text) {
  try {
    return load_policy_impl(config_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::validation, "parse_error", std::string("policy: ") + e.what());
  }
}

std::string serialize_policy(const ContentPolicy& policy) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << kSchemaVersion;
  out << YAML::Key << "policy_id" << YAML::Value << policy.policy_id();
  out << YAML::Key << "rules" << YAML::Value << YAML::BeginSeq;
  for (const auto& rule : policy.rules()) {
    out << YAML::BeginMap;
    out << YAML::Key << "rule_id" << YAML::Value << rule.rule_id;
    out << YAML::Key << "text" << YAML::Value << YAML::DoubleQuoted << rule.text;
    out << YAML::Key << "policy_area" << YAML::Value << std::string(to_string(rule.policy_area));
    out << YAML::Key << "expertise_required" << YAML::Value
        << std::string(to_string(rule.expertise_required));
    out << YAML::Key << "demographic_targeting" << YAML::Value << rule.demographic_targeting;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

LikertRating::LikertRating(int value) : value_(value) {
  if (value < kMin || value > kMax) {
    fail(ErrorKind::validation, "invalid_rating",
         "rating must be in [1, 4], got " + std::to_string(value));
  }
}

std::string_view likert_label(int value) {
  switch (value) {
    case 1: return "Definitely not broken";
    case 2: return "Probably not broken";
    case 3: return "Probably broken";
    case 4: return "Definitely broken";
    default: return "";
  }
}

std::string_view LikertRating::label() const noexcept { return likert_label(value_); }

bool DemographicAxis::has_label(std::string_view label) const noexcept {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

void validate_axis(const DemographicAxis& axis) {
  if (axis.name.empty()) fail(ErrorKind::validation, "invalid_axis", "axis without a name");
  if (axis.labels.empty()) {
    fail(ErrorKind::validation, "invalid_axis", "axis '" + axis.name + "' has no labels");
  }
  std::set<std::string> seen;
  for (const auto& label : axis.labels) {
    if (!seen.insert(label).second) {
      fail(ErrorKind::validation, "invalid_axis",
           "axis '" + axis.name + "' repeats label '" + label + "'");
    }
  }
}

DemographicTarget::DemographicTarget(std::vector<TargetComponent> components)
    : components_(std::move(components)) {
  if (components_.empty() || components_.size() > 2) {
    fail(ErrorKind::validation, "invalid_target", "a target has one or two components");
  }
  if (components_.size() == 2 && components_[0].axis == components_[1].axis) {
    fail(ErrorKind::validation, "invalid_target", "a target names each axis at most once");
  }
}

const std::string* DemographicTarget::label_for(std::string_view axis) const noexcept {
  for (const auto& c : components_) {
    if (c.axis == axis) return &c.label;
  }
  return nullptr;
}

std::string DemographicTarget::key() const {
  std::vector<TargetComponent> sorted = components_;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& c : sorted) {
    if (!out.empty()) out += '&';
    out += c.axis + '=' + c.label;
  }
  return out;
}

std::string DemographicTarget::display() const {
  std::string out;
  for (const auto& c : components_) {
    if (!out.empty()) out += " x ";
    out += c.label;
  }
  return out;
}

const std::set<std::string>* ParticipantProfile::labels(std::string_view axis) const noexcept {
  auto it = demographics.find(std::string(axis));
  return it == demographics.end() ? nullptr : &it->second;
}

namespace {

std::vector<ParticipantProfile> load_roster_impl(std::string_view roster_text) {
  const YAML::Node doc = parse_document(roster_text, "roster");
  if (!doc.IsMap()) fail(ErrorKind::validation, "parse_error", "roster: expected a mapping");
  check_schema_version(doc, "roster");
  const YAML::Node rows = doc["participants"];
  if (!rows || !rows.IsSequence()) {
    fail(ErrorKind::validation, "missing_field", "roster: missing 'participants' list");
  }

  std::vector<ParticipantProfile> roster;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    ParticipantProfile p;
    p.participant_id = required_string(row, "id", "participant");
    if (!seen.insert(p.participant_id).second) {
      fail(ErrorKind::validation, "duplicate_participant_id",
           "duplicate participant_id '" + p.participant_id + "'");
    }
    if (row["token"]) p.token = row["token"].as<std::string>();
    if (row["active"]) p.active = row["active"].as<bool>();
    if (row["roles"]) {
      for (const auto& role : row["roles"]) p.roles_allowed.insert(parse_role(role.as<std::string>()));
    } else {
      p.roles_allowed = {Role::red_teamer, Role::annotator, Role::arbitrator};
    }
    if (row["expertise"]) {
      for (const auto& e : row["expertise"]) {
        const Expertise value = parse_expertise(e.as<std::string>());
        if (value != Expertise::none) p.expertise.insert(value);
      }
    }
    if (const YAML::Node demo = row["demographics"]; demo && demo.IsMap()) {
      for (const auto& entry : demo) {
        const auto axis = entry.first.as<std::string>();
        const YAML::Node& value = entry.second;
        // "unknown" (or null) keeps the axis undisclosed.
        if (value.IsNull()) continue;
        if (value.IsScalar()) {
          const auto text = value.as<std::string>();
          if (text == "unknown" || text == "prefer_not_to_say") continue;
          p.demographics[axis] = {text};
          continue;
        }
        std::set<std::string> labels;
        for (const auto& label : value) labels.insert(label.as<std::string>());
        p.demographics[axis] = std::move(labels);
      }
    }
    roster.push_back(std::move(p));
  }
  return roster;
}

}  // namespace

std::vector<ParticipantProfile> load_roster(std::string_view roster_text) {
  try {
    return load_roster_impl(roster_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::validation, "parse_error", std::string("roster: ") + e.what());
  }
}

std::string serialize_roster(std::span<const ParticipantProfile> roster) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << kSchemaVersion;
  out << YAML::Key << "participants" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : roster) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << p.participant_id;
    if (!p.token.empty()) out << YAML::Key << "token" << YAML::Value << p.token;
    out << YAML::Key << "active" << YAML::Value << p.active;
    out << YAML::Key << "roles" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Role r : p.roles_allowed) out << std::string(to_string(r));
    out << YAML::EndSeq;
    out << YAML::Key << "expertise" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Expertise e : p.expertise) out << std::string(to_string(e));
    out << YAML::EndSeq;
    out << YAML::Key << "demographics" << YAML::Value << YAML::BeginMap;
    for (const auto& [axis, labels] : p.demographics) {
      out << YAML::Key << axis << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& label : labels) out << label;
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "file_not_readable", "cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace rtc

namespace rtc {

bool is_valid_utf8(std::string_view text) noexcept {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

}  // namespace rtc
