#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <httplib.h>

#include "screenwise/session.hpp"

namespace screenwise {

/// In-memory session table. Each entry carries its own mutex so updates to
/// one session serialize while distinct sessions proceed independently.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;

  struct Entry {
    std::mutex mu;
    Session session;
    Clock::time_point created;
  };

  explicit SessionStore(std::chrono::seconds ttl = std::chrono::hours(24),
                        std::function<Clock::time_point()> now = [] { return Clock::now(); })
      : ttl_(ttl), now_(std::move(now)), rng_(std::random_device{}()) {}

  /// Inserts under a fresh unique id and returns the stored entry.
  std::shared_ptr<Entry> insert(Session s) {
    auto e = std::make_shared<Entry>();
    e->created = now_();
    std::unique_lock lock(mu_);
    purge_locked(e->created);
    std::string id;
    do id = next_id_locked();
    while (table_.contains(id));
    s.id = id;
    e->session = std::move(s);
    table_.emplace(id, e);
    return e;
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = table_.find(id);
    if (it == table_.end() || expired(*it->second, now_())) return nullptr;
    return it->second;
  }

  std::size_t purge() {
    std::unique_lock lock(mu_);
    return purge_locked(now_());
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return table_.size();
  }

  std::chrono::seconds ttl() const { return ttl_; }

 private:
  bool expired(const Entry& e, Clock::time_point t) const { return t - e.created >= ttl_; }

  std::size_t purge_locked(Clock::time_point t) {
    return std::erase_if(table_, [&](const auto& kv) { return expired(*kv.second, t); });
  }

  std::string next_id_locked() {
    static constexpr char hex[] = "0123456789abcdef";
    std::string id(32, '0');
    for (std::size_t i = 0; i < id.size(); i += 16) {
      auto v = rng_();
      for (std::size_t k = 0; k < 16; ++k, v >>= 4) id[i + k] = hex[v & 0xf];
    }
    return id;
  }

  std::chrono::seconds ttl_;
  std::function<Clock::time_point()> now_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> table_;
  std::mt19937_64 rng_;
};

struct ServiceResponse {
  int status = 200;
  json body;
};

inline json error_body(std::string_view code, const std::string& message, json detail = json::object()) {
  return json{{"code", code}, {"message", message}, {"detail", std::move(detail)}};
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownFeature:
    case ErrorCode::kNonNumericValue:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMissingRequiredOutcome:
      return 400;
    case ErrorCode::kWrongTest:
    case ErrorCode::kSessionFinal:
      return 409;
    case ErrorCode::kNotFound:
      return 404;
    default:
      return 500;
  }
}

/// Request handling for the /api/v1 surface, independent of the transport.
/// The policy is immutable once loaded and shared by every session.
class Service {
 public:
  explicit Service(std::shared_ptr<const PartitionedPolicy> policy = nullptr,
                   std::chrono::seconds ttl = std::chrono::hours(24),
                   std::function<SessionStore::Clock::time_point()> now = [] { return SessionStore::Clock::now(); })
      : store_(ttl, std::move(now)) {
    if (policy) load(std::move(policy));
  }

  void load(std::shared_ptr<const PartitionedPolicy> policy) {
    std::unique_lock lock(policy_mu_);
    policy_ = std::move(policy);
    policy_view_ = policy_to_json(*policy_);
    partition_sessions_.assign(policy_->size(), 0);
  }

  SessionStore& store() { return store_; }

  ServiceResponse create_session(const std::string& body) {
    auto policy = current();
    if (!policy) return no_policy();
    return guarded([&] {
      const json req = parse_body(body);
      if (!req.is_object() || !req.contains("features") || !req["features"].is_object())
        throw Error(ErrorCode::kInvalidArgument, "body must be an object with a 'features' object");
      std::map<std::string, std::string> raw;
      for (const auto& [k, v] : req["features"].items()) {
        if (v.is_string()) raw[k] = v.get<std::string>();
        else if (v.is_number()) raw[k] = detail::format_double(v.get<double>());
        else if (v.is_null()) raw[k] = "";
        else throw Error(ErrorCode::kNonNumericValue, "feature " + k + ": expected a number or string");
      }
      const auto x = normalize_features(raw, policy->schema);
      auto entry = store_.insert(start_session(x, *policy));
      std::lock_guard lock(entry->mu);
      ++created_;
      if (entry->session.final()) ++finalized_;
      {
        std::unique_lock plock(policy_mu_);
        if (entry->session.partition < partition_sessions_.size()) ++partition_sessions_[entry->session.partition];
      }
      return ServiceResponse{201, session_to_json(entry->session)};
    });
  }

  ServiceResponse post_outcome(const std::string& id, const std::string& body) {
    auto policy = current();
    if (!policy) return no_policy();
    auto entry = store_.find(id);
    if (!entry) return not_found(id);
    return guarded([&] {
      const json req = parse_body(body);
      if (!req.is_object() || !req.contains("test") || !req.contains("birads") || !req["test"].is_string() ||
          !req["birads"].is_string())
        throw Error(ErrorCode::kInvalidArgument, "body must be {\"test\": string, \"birads\": string}");
      const auto test = parse_test(req["test"].get<std::string>());
      if (!test) throw Error(ErrorCode::kInvalidArgument, "unknown test '" + req["test"].get<std::string>() + "'");
      const auto parsed = parse_birads(req["birads"].get<std::string>());
      if (!parsed.valid)
        throw Error(ErrorCode::kInvalidArgument, "invalid BI-RADS token '" + req["birads"].get<std::string>() + "'");
      if (!parsed.score)
        throw Error(ErrorCode::kMissingRequiredOutcome, "BI-RADS outcome is missing; a recorded score is required");
      std::lock_guard lock(entry->mu);
      try {
        entry->session = advance_session(entry->session, *test, *parsed.score, *policy);
      } catch (const Error&) {
        ++outcomes_rejected_;
        throw;
      }
      ++outcomes_accepted_;
      if (entry->session.final()) ++finalized_;
      return ServiceResponse{200, session_to_json(entry->session)};
    });
  }

  ServiceResponse get_session(const std::string& id) {
    auto entry = store_.find(id);
    if (!entry) return not_found(id);
    std::lock_guard lock(entry->mu);
    return {200, session_to_json(entry->session)};
  }

  ServiceResponse get_policy() {
    std::shared_lock lock(policy_mu_);
    if (!policy_) return no_policy();
    return {200, policy_view_};
  }

  ServiceResponse get_schema() {
    std::shared_lock lock(policy_mu_);
    if (!policy_) return no_policy();
    return {200, policy_->schema};
  }

  ServiceResponse get_metrics() {
    std::shared_lock lock(policy_mu_);
    return {200,
            json{{"sessions_created", created_.load()},
                 {"sessions_final", finalized_.load()},
                 {"sessions_live", store_.size()},
                 {"outcomes_accepted", outcomes_accepted_.load()},
                 {"outcomes_rejected", outcomes_rejected_.load()},
                 {"sessions_per_partition", partition_sessions_}}};
  }

  ServiceResponse get_health() {
    std::shared_lock lock(policy_mu_);
    json j{{"status", "ok"}, {"policy_loaded", policy_ != nullptr}};
    if (policy_) {
      j["partitions"] = policy_->size();
      j["fingerprint"] = fingerprint(policy_->schema, policy_->config.risk);
    }
    return {200, j};
  }

 private:
  std::shared_ptr<const PartitionedPolicy> current() const {
    std::shared_lock lock(policy_mu_);
    return policy_;
  }

  static json parse_body(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "request body is not valid JSON");
    return j;
  }

  template <class F>
  static ServiceResponse guarded(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return {http_status(e.code()), error_body(to_string(e.code()), e.what())};
    } catch (const json::exception& e) {
      return {400, error_body("InvalidArgument", e.what())};
    }
  }

  static ServiceResponse no_policy() {
    return {409, error_body("NoPolicy", "no policy is loaded")};
  }

  static ServiceResponse not_found(const std::string& id) {
    return {404, error_body("NotFound", "no live session with this id", json{{"session_id", id}})};
  }

  SessionStore store_;
  mutable std::shared_mutex policy_mu_;
  std::shared_ptr<const PartitionedPolicy> policy_;
  json policy_view_;
  std::vector<std::size_t> partition_sessions_;
  std::atomic<std::size_t> created_{0}, finalized_{0}, outcomes_accepted_{0}, outcomes_rejected_{0};
};

/// Wires a Service onto an httplib server under /api/v1.
inline void mount(httplib::Server& server, Service& service) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post("/api/v1/sessions", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.create_session(req.body));
  });
  server.Post("/api/v1/sessions/:id/outcomes", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.post_outcome(req.path_params.at("id"), req.body));
  });
  server.Get("/api/v1/sessions/:id", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_session(req.path_params.at("id")));
  });
  server.Get("/api/v1/policy", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.get_policy());
  });
  server.Get("/api/v1/schema", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.get_schema());
  });
  server.Get("/api/v1/metrics", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.get_metrics());
  });
  server.Get("/api/v1/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.get_health());
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    res.set_content(error_body(res.status == 404 ? "NotFound" : "HttpError", httplib::status_message(res.status)).dump(),
                    "application/json");
  });
}

}  // namespace screenwise
