#pragma once

// Campaign configuration file (YAML). Relative paths resolve against the
// directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtc/gateway.hpp"
#include "rtc/instruction.hpp"
#include "rtc/workflow.hpp"

namespace rtc {

enum class BackendKind { echo, scripted_violator, remote };

struct CampaignConfig {
  int schema_version = kSchemaVersion;
  std::filesystem::path policy_path;
  std::filesystem::path roster_path;
  std::optional<std::filesystem::path> topic_repository_path;
  TopicSource topic_source = TopicSource::free_text;
  /// Event log and snapshot live here.
  std::filesystem::path data_dir = "data";
  std::uint64_t quota_per_cell = 1;
  std::vector<std::string> use_cases = default_use_cases();
  std::vector<DemographicAxis> axes;
  std::optional<PairingSpec> pairing;
  bool in_group_priority = true;
  bool allow_out_group_fill = false;
  int arbitration_threshold = 2;
  ConsensusRule consensus = ConsensusRule::max;
  bool reveal_ratings = false;
  BackendKind backend = BackendKind::echo;
  std::optional<ChatEndpointConfig> chat_endpoint;
  /// Bearer token granting the admin routes.
  std::string admin_token_env_var_name = "RTC_ADMIN_TOKEN";
  std::uint64_t seed = 0;
  std::uint64_t snapshot_every = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Throws validation whose message names the offending field.
CampaignConfig parse_campaign_config(std::string_view text, const std::filesystem::path& base_dir);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

/// Scaffold written by `rtc init`.
std::string default_config_yaml();
std::string default_policy_yaml();
std::string default_roster_yaml();
std::string default_topics_text();

/// The race and gender axes with race x {Female, Male} pairings: 15 targets.
std::vector<DemographicAxis> default_axes();
PairingSpec default_pairing();

}  // namespace rtc
