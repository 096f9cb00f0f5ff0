#include <httplib.h>
#include <nlohmann/json.hpp>
#include <random>

#include <spdlog/spdlog.h>

#include "selfevo/arena.hpp"
#include "selfevo/error.hpp"

namespace selfevo::arena {
namespace {

using nlohmann::json;

int status_for(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::protocol:
    case Errc::minimum_turns: return 409;
    case Errc::backend: return 502;
    case Errc::validation:
    case Errc::pool:
    case Errc::schema:
    case Errc::precondition: return 400;
    default: return 500;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::validation, "request body must be an object");
    return j;
  } catch (const json::parse_error&) {
    throw Error(Errc::validation, "request body is not valid JSON");
  }
}

/// Runs `fn` and converts library errors into JSON error replies.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const MinimumTurnsError& e) {
    reply(res, 409, {{"error", to_string(e.code())}, {"message", e.what()}, {"remaining", e.remaining()}});
  } catch (const Error& e) {
    reply(res, status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", "validation"}, {"message", e.what()}});
  }
}

}  // namespace

struct ArenaServer::Impl {
  EvalStore& store;
  httplib::Server server;
  std::mt19937_64 seeds{std::random_device{}()};
  std::mutex seeds_mutex;

  explicit Impl(EvalStore& s) : store(s) { routes(); }

  std::uint64_t next_seed() {
    std::lock_guard lock(seeds_mutex);
    return seeds();
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = body_of(req);
        auto mode = parse_mode(body.value("mode", std::string()));
        if (!mode) throw Error(Errc::validation, "mode must be pointwise or pairwise");
        const std::uint64_t seed = body.contains("seed") ? body["seed"].get<std::uint64_t>() : next_seed();
        const std::string id = store.create_session(*mode, seed);
        reply(res, 201, {{"session_id", id}, {"mode", to_string(*mode)}});
      });
    });

    server.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, store.rater_view(req.path_params.at("id"))); });
    });

    server.Post("/sessions/:id/message", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = body_of(req);
        if (!body.contains("text") || !body["text"].is_string()) throw Error(Errc::validation, "text is required");
        const auto& id = req.path_params.at("id");
        const TurnRecord turn = store.post_user_message(id, body["text"].get<std::string>());
        json responses = json::array();
        for (const auto& r : turn.responses) responses.push_back({{"slot", to_string(r.slot)}, {"text", r.text}});
        reply(res, 200, {{"responses", std::move(responses)}, {"status", to_string(store.snapshot(id).status)}});
      });
    });

    server.Post("/sessions/:id/choice", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = body_of(req);
        auto choice = parse_choice(body.value("choice", std::string()));
        if (!choice) throw Error(Errc::validation, "choice must be A, B or tie");
        std::optional<Slot> cont;
        if (body.contains("continued_with") && !body["continued_with"].is_null()) {
          cont = parse_slot(body["continued_with"].get<std::string>());
          if (!cont) throw Error(Errc::validation, "continued_with must be A or B");
        }
        const Status s = store.record_choice(req.path_params.at("id"), *choice, cont);
        reply(res, 200, {{"status", to_string(s)}});
      });
    });

    server.Post("/sessions/:id/ratings", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = body_of(req);
        RatingForm form;
        for (std::size_t i = 0; i < judge::kDimensions.size(); ++i) {
          const std::string key(judge::to_string(judge::kDimensions[i]));
          if (!body.contains(key) || !body[key].is_number_integer()) {
            throw Error(Errc::validation, "rating '" + key + "' must be an integer 1-5");
          }
          form.values[i] = body[key].get<int>();
        }
        const Status s = store.submit_ratings(req.path_params.at("id"), form);
        reply(res, 200, {{"status", to_string(s)}});
      });
    });

    server.Post("/sessions/:id/finalize", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const PairwiseOutcome o = store.finalize_pairwise(req.path_params.at("id"));
        reply(res, 200, {{"outcome", to_json(o)}});
      });
    });

    server.Get("/results", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, to_json(store.aggregate_results())); });
    });
  }
};

ArenaServer::ArenaServer(EvalStore& store) : impl_(std::make_unique<Impl>(store)) {}

ArenaServer::~ArenaServer() { stop(); }

int ArenaServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::precondition, "cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(Errc::precondition, "cannot bind to " + host + ":" + std::to_string(port));
  }
  return port;
}

void ArenaServer::run() { impl_->server.listen_after_bind(); }

void ArenaServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void ArenaServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace selfevo::arena
