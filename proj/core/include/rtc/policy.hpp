#pragma once

// Domain vocabulary shared by every other module: content policy rules, the
// four-point rating scale, demographic axes/targets and participant profiles.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtc {

inline constexpr int kSchemaVersion = 1;

enum class PolicyArea { dangerous_illegal, misinformation, sexually_explicit };
enum class Expertise { none, medical, fact_checking };
enum class Adversariality { low, medium, high };
enum class Role { red_teamer, annotator, arbitrator };

inline constexpr std::array<Adversariality, 3> kAdversarialityLevels{
    Adversariality::low, Adversariality::medium, Adversariality::high};

std::string_view to_string(PolicyArea area);
std::string_view to_string(Expertise expertise);
std::string_view to_string(Adversariality level);
std::string_view to_string(Role role);

PolicyArea parse_policy_area(std::string_view text);
Expertise parse_expertise(std::string_view text);
Adversariality parse_adversariality(std::string_view text);
Role parse_role(std::string_view text);

struct Rule {
  std::string rule_id;
  std::string text;
  PolicyArea policy_area = PolicyArea::dangerous_illegal;
  Expertise expertise_required = Expertise::none;
  /// Hate-speech and stereotype rules: attacks name a demographic target and
  /// matching is by lived experience rather than professional expertise.
  bool demographic_targeting = false;

  bool operator==(const Rule&) const = default;
};

class ContentPolicy {
 public:
  /// Validates: non-empty, unique ids, targeting rules need no expertise.
  ContentPolicy(std::string policy_id, std::vector<Rule> rules);

  const std::string& policy_id() const noexcept { return policy_id_; }
  std::span<const Rule> rules() const noexcept { return rules_; }

  const Rule* find(std::string_view rule_id) const noexcept;
  /// Throws not_found.
  const Rule& rule(std::string_view rule_id) const;

  bool operator==(const ContentPolicy&) const = default;

 private:
  std::string policy_id_;
  std::vector<Rule> rules_;
};

/// Parses a policy document (YAML; JSON is accepted as a subset).
ContentPolicy load_policy(std::string_view config_text);
std::string serialize_policy(const ContentPolicy& policy);

class LikertRating {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 4;

  /// Throws validation error outside [1, 4].
  explicit LikertRating(int value);

  int value() const noexcept { return value_; }
  std::string_view label() const noexcept;

  auto operator<=>(const LikertRating&) const = default;

 private:
  int value_;
};

std::string_view likert_label(int value);

/// "Definitely broken" and "Probably broken" count as a rule break.
inline bool binarize_rating(LikertRating rating) noexcept { return rating.value() >= 3; }

struct DemographicAxis {
  std::string name;
  std::vector<std::string> labels;

  bool has_label(std::string_view label) const noexcept;
};

/// Throws on an axis without labels or with duplicate labels.
void validate_axis(const DemographicAxis& axis);

struct TargetComponent {
  std::string axis;
  std::string label;

  auto operator<=>(const TargetComponent&) const = default;
};

/// A one- or two-way demographic group an attack is aimed at, e.g. "Asian" or
/// "Asian x Female". Components keep construction order for display; equality
/// and keys ignore order.
class DemographicTarget {
 public:
  explicit DemographicTarget(std::vector<TargetComponent> components);

  std::span<const TargetComponent> components() const noexcept { return components_; }
  std::size_t arity() const noexcept { return components_.size(); }
  const std::string* label_for(std::string_view axis) const noexcept;

  /// Canonical, order-independent key, e.g. "gender=Female&race=Asian".
  std::string key() const;
  /// Display form, e.g. "Asian x Female".
  std::string display() const;

  bool operator==(const DemographicTarget& other) const { return key() == other.key(); }

 private:
  std::vector<TargetComponent> components_;
};

struct ParticipantProfile {
  std::string participant_id;
  /// Axes missing from the map are undisclosed. An empty set is a disclosed
  /// "none of the listed labels", which is a different state.
  std::map<std::string, std::set<std::string>> demographics;
  std::set<Expertise> expertise;
  bool active = true;
  std::set<Role> roles_allowed;
  /// Bearer token for API sessions; empty means no API access.
  std::string token;

  /// nullptr when the axis is undisclosed.
  const std::set<std::string>* labels(std::string_view axis) const noexcept;
  bool has_expertise(Expertise e) const noexcept {
    return e == Expertise::none || expertise.contains(e);
  }
  bool can(Role role) const noexcept { return roles_allowed.contains(role); }

  bool operator==(const ParticipantProfile&) const = default;
};

/// Parses a roster document. Duplicate ids are rejected.
std::vector<ParticipantProfile> load_roster(std::string_view roster_text);
std::string serialize_roster(std::span<const ParticipantProfile> roster);

std::string read_text_file(const std::string& path);

/// Strict UTF-8: no overlongs, surrogates or code points past U+10FFFF.
bool is_valid_utf8(std::string_view text) noexcept;

}  // namespace rtc
