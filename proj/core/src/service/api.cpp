#include "rtc/service/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>
#include <thread>
#include <vector>

#include "rtc/analytics/reports.hpp"
#include "rtc/datastore.hpp"

namespace rtc {

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return 422;
    case ErrorKind::state: return 409;
    case ErrorKind::conflict: return 409;
    case ErrorKind::eligibility: return 403;
    case ErrorKind::not_found: return 404;
    case ErrorKind::unauthenticated: return 401;
    case ErrorKind::numerical: return 422;
    case ErrorKind::io: return 500;
    case ErrorKind::transport: return 502;
  }
  return 500;
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::state: return "state";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::eligibility: return "eligibility";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::unauthenticated: return "unauthenticated";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
    case ErrorKind::transport: return "transport";
  }
  return "unknown";
}

ApiResponse error_response(const Error& error) {
  Json body{{"error", {{"code", error.code()}, {"message", error.what()}, {"kind", to_string(error.kind())}}}};
  return ApiResponse{http_status(error.kind()), body.dump()};
}

std::string admin_token_from_env(const std::string& variable_name) {
  const char* value = std::getenv(variable_name.c_str());
  return value ? std::string(value) : std::string();
}

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    const std::size_t end = j == std::string_view::npos ? path.size() : j;
    if (end > i) parts.emplace_back(path.substr(i, end - i));
    i = end;
  }
  return parts;
}

std::optional<std::string> header(const ApiRequest& request, std::string_view name) {
  for (const auto& [k, v] : request.headers) {
    if (k.size() == name.size() &&
        std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return v;
    }
  }
  return std::nullopt;
}

std::string bearer(const ApiRequest& request) {
  const auto value = header(request, "Authorization");
  if (!value) return {};
  constexpr std::string_view prefix = "Bearer ";
  if (value->size() <= prefix.size() || value->compare(0, prefix.size(), prefix) != 0) return {};
  return value->substr(prefix.size());
}

Json parse_body(const ApiRequest& request) {
  if (request.body.empty()) return Json::object();
  Json body = Json::parse(request.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    fail(ErrorKind::validation, "invalid_json", "request body must be a JSON object");
  }
  return body;
}

const std::string& body_string(const Json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    fail(ErrorKind::validation, "missing_field", std::string("field '") + key + "' must be a string");
  }
  return it->get_ref<const std::string&>();
}

int body_int(const Json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_number_integer()) {
    fail(ErrorKind::validation, "missing_field", std::string("field '") + key + "' must be an integer");
  }
  return it->get<int>();
}

ApiResponse ok(const Json& body, int status = 200) { return ApiResponse{status, body.dump()}; }

Json dialogue_view(const Dialogue& d, const std::string& viewer, bool admin, bool reveal_ratings) {
  Json j;
  j["dialogue_id"] = d.dialogue_id;
  j["state"] = to_string(d.state);
  j["instruction"] = card_to_json(d.instruction);
  Json turns = Json::array();
  for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
  j["turns"] = std::move(turns);
  j["advisories"] = d.advisories;

  const bool owner = d.red_teamer_id == viewer;
  const bool arbitrator = d.assigned_arbitrator && d.assigned_arbitrator->participant_id == viewer;
  const bool annotator = std::any_of(d.assigned_annotators.begin(), d.assigned_annotators.end(),
                                     [&](const Selection& s) { return s.participant_id == viewer; });
  if (admin) return dialogue_state_to_json(d);
  if (!owner && !arbitrator && !annotator) {
    fail(ErrorKind::eligibility, "not_assigned", "dialogue '" + d.dialogue_id + "' is not assigned to you");
  }
  if (owner) {
    j["pre_annotation"] = d.pre_annotation ? pre_annotation_to_json(*d.pre_annotation) : Json();
  }
  if (arbitrator) {
    // The arbitrator reads both reasonings; ratings only when configured.
    Json prior = Json::array();
    for (const auto& a : d.annotations) {
      if (a.ordinal == Ordinal::arbitration) continue;
      Json entry{{"ordinal", to_string(a.ordinal)}, {"reasoning", a.reasoning}};
      if (reveal_ratings) entry["rating"] = a.rating.value();
      prior.push_back(std::move(entry));
    }
    j["annotations"] = std::move(prior);
  } else if (annotator) {
    Json own = Json::array();
    for (const auto& a : d.annotations) {
      if (a.annotator_id == viewer) own.push_back(annotation_to_json(a));
    }
    j["annotations"] = std::move(own);
  }
  return j;
}

Json coverage_json(const CoverageReport& report) {
  Json cells = Json::array();
  for (const auto& row : report.cells) {
    cells.push_back({{"cell", row.cell.key()},
                     {"rule_id", row.cell.rule_id},
                     {"adversariality", to_string(row.cell.adversariality)},
                     {"use_case", row.cell.use_case},
                     {"target", row.cell.target ? Json(row.cell.target->display()) : Json()},
                     {"issued", row.counts.issued},
                     {"completed", row.counts.completed},
                     {"under_served", row.under_served}});
  }
  Json splits = Json::array();
  for (const auto& row : report.splits) {
    splits.push_back({{"target", row.target.display()},
                      {"in_group", row.counts.in_group},
                      {"out_group", row.counts.out_group},
                      {"under_served", row.under_served}});
  }
  return Json{{"total_completed", report.total_completed},
              {"max_completed", report.max_completed},
              {"min_completed", report.min_completed},
              {"max_min_ratio", report.max_min_ratio ? Json(*report.max_min_ratio) : Json()},
              {"chi_square", report.chi_square},
              {"cells", std::move(cells)},
              {"splits", std::move(splits)}};
}

Json task_json(const Task& task) {
  Json j{{"kind", to_string(task.kind)}};
  if (task.card) j["card"] = card_to_json(*task.card);
  if (task.dialogue_id) j["dialogue_id"] = *task.dialogue_id;
  if (!task.reason.empty()) j["reason"] = task.reason;
  return j;
}

ApiResponse csv_response(const TextTable& table) {
  std::ostringstream out;
  write_csv(out, table);
  return ApiResponse{200, out.str(), "text/csv"};
}

[[noreturn]] void no_route(const ApiRequest& request) {
  fail(ErrorKind::not_found, "no_route", "no route for " + request.method + " " + request.path);
}

}  // namespace

ApiRouter::ApiRouter(Campaign& campaign, std::string admin_token)
    : campaign_(campaign), admin_token_(std::move(admin_token)) {}

ApiResponse ApiRouter::handle(const ApiRequest& request) const {
  try {
    const auto parts = split_path(request.path);
    if (parts.empty() || parts[0] != "v1") no_route(request);
    const std::string& method = request.method;

    if (parts.size() == 2 && parts[1] == "health" && method == "GET") {
      return ok(Json{{"status", "ok"}, {"sequence", campaign_.last_sequence()}});
    }

    const std::string token = bearer(request);
    if (parts.size() >= 2 && parts[1] == "admin") {
      if (admin_token_.empty() || token != admin_token_) {
        fail(ErrorKind::unauthenticated, "unauthenticated", "admin token required");
      }
      if (method != "GET" || parts.size() < 3) no_route(request);
      const auto format = request.query.contains("format") ? request.query.at("format") : std::string("json");
      if (parts[2] == "coverage" && parts.size() == 3) {
        const auto report = campaign_.coverage();
        if (format == "csv") {
          std::ostringstream out;
          write_coverage_csv(out, report);
          return ApiResponse{200, out.str(), "text/csv"};
        }
        return ok(coverage_json(report));
      }
      if (parts[2] == "export" && parts.size() == 3) {
        ExportFilter filter;
        if (request.query.contains("rule_id")) filter.rule_id = request.query.at("rule_id");
        if (request.query.contains("include_unfinalized")) {
          filter.finalized_only = request.query.at("include_unfinalized") != "true";
        }
        std::ostringstream out;
        campaign_.export_jsonl(out, filter);
        return ApiResponse{200, out.str(), "application/x-ndjson"};
      }
      if (parts[2] == "reports" && parts.size() == 4 && parts[3] == "in-out") {
        const auto dialogues = campaign_.dialogues();
        const auto report = in_out_group_report(annotation_observations(dialogues));
        const TextTable table = in_out_table(report);
        if (format == "csv") return csv_response(table);
        Json rows = Json::array();
        for (const auto& row : table.rows) {
          Json r = Json::object();
          for (std::size_t c = 0; c < table.header.size() && c < row.size(); ++c) r[table.header[c]] = row[c];
          rows.push_back(std::move(r));
        }
        return ok(Json{{"rows", std::move(rows)}, {"excluded", report.excluded}});
      }
      no_route(request);
    }

    const auto who = campaign_.authenticate(token);
    if (!who) fail(ErrorKind::unauthenticated, "unauthenticated", "missing or unknown bearer token");
    const std::string& pid = *who;

    if (parts.size() == 3 && parts[1] == "tasks" && parts[2] == "next" && method == "GET") {
      return ok(task_json(campaign_.next_task(pid)));
    }
    if (parts.size() == 2 && parts[1] == "instructions" && method == "POST") {
      return ok(Json{{"card", card_to_json(campaign_.issue_instruction(pid))}}, 201);
    }
    if (parts.size() == 3 && parts[1] == "participants" && parts[2] == "me" && method == "GET") {
      const auto p = campaign_.participant(pid);
      Json roles = Json::array();
      for (Role r : p.roles_allowed) roles.push_back(to_string(r));
      Json expertise = Json::array();
      for (Expertise e : p.expertise) expertise.push_back(to_string(e));
      return ok(Json{{"participant_id", p.participant_id}, {"active", p.active}, {"roles", roles},
                     {"expertise", expertise}});
    }
    if (parts.size() == 4 && parts[1] == "participants" && parts[2] == "me" && parts[3] == "opt-out" &&
        method == "POST") {
      campaign_.opt_out(pid);
      return ok(Json{{"participant_id", pid}, {"active", false}});
    }
    if (parts.size() == 2 && parts[1] == "dialogues" && method == "POST") {
      const Json body = parse_body(request);
      std::optional<std::string> topic;
      if (body.contains("topic") && !body.at("topic").is_null()) topic = body_string(body, "topic");
      const Dialogue d = campaign_.start_dialogue(pid, body_string(body, "instruction_id"), topic);
      return ok(dialogue_view(d, pid, false, campaign_.setup().reveal_ratings), 201);
    }
    if (parts.size() >= 3 && parts[1] == "dialogues") {
      const std::string& did = parts[2];
      if (parts.size() == 3 && method == "GET") {
        return ok(dialogue_view(campaign_.dialogue(did), pid, false, campaign_.setup().reveal_ratings));
      }
      if (parts.size() != 4 || method != "POST") no_route(request);
      const std::string& action = parts[3];
      const Json body = parse_body(request);
      if (action == "turns") {
        const auto result = campaign_.send_message(pid, did, body_string(body, "text"));
        Json j{{"attacker", turn_to_json(result.attacker)}, {"model", turn_to_json(result.model)}};
        j["advisory"] = result.advisory ? Json(*result.advisory) : Json();
        return ok(j, 201);
      }
      if (action == "close") {
        PreAnnotation pre;
        try {
          pre = pre_annotation_from_json(body.contains("pre_annotation") ? body.at("pre_annotation") : body);
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorKind::validation, "invalid_pre_annotation", e.what());
        }
        const auto result = campaign_.close_dialogue(pid, did, pre);
        Json j{{"state", to_string(result.state)}};
        j["advisory"] = result.advisory ? Json(*result.advisory) : Json();
        return ok(j);
      }
      if (action == "claim") {
        const Role role = parse_role(body.contains("role") ? body_string(body, "role") : std::string("annotator"));
        const Selection s = campaign_.claim(pid, did, role);
        return ok(Json{{"dialogue_id", did}, {"participant_id", s.participant_id}, {"relation", to_string(s.relation)}});
      }
      if (action == "annotations") {
        const LikertRating rating(body_int(body, "rating"));
        const DialogueState state = campaign_.submit_annotation(pid, did, rating, body_string(body, "reasoning"));
        return ok(Json{{"dialogue_id", did}, {"state", to_string(state)}}, 201);
      }
      if (action == "arbitration") {
        const LikertRating rating(body_int(body, "rating"));
        const VerdictRecord v = campaign_.submit_arbitration(pid, did, rating, body_string(body, "reasoning"));
        return ok(Json{{"dialogue_id", did}, {"state", "Finalized"}, {"verdict", verdict_to_json(v)}}, 201);
      }
    }
    no_route(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const nlohmann::json::exception& e) {
    return error_response(Error(ErrorKind::validation, "invalid_body", e.what()));
  }
}

// --- socket binding ----------------------------------------------------------

struct ApiServer::Impl {
  const ApiRouter& router;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const ApiRouter& r) : router(r) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest request;
      request.method = req.method;
      request.path = req.path;
      request.body = req.body;
      for (const auto& [k, v] : req.headers) request.headers.emplace(k, v);
      for (const auto& [k, v] : req.params) request.query.emplace(k, v);
      const ApiResponse response = router.handle(request);
      res.status = response.status;
      res.set_content(response.body, response.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
  }
};

ApiServer::ApiServer(const ApiRouter& router) : impl_(std::make_unique<Impl>(router)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  int actual = port;
  if (port == 0) {
    actual = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    actual = -1;
  }
  if (actual < 0) fail(ErrorKind::io, "bind_failed", "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return actual;
}

void ApiServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) fail(ErrorKind::io, "bind_failed", "cannot listen on " + host);
}

void ApiServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace rtc
