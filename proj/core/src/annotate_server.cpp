#include <httplib.h>

#include <sstream>
#include <thread>

#include "cmsa/annotate.hpp"
#include "cmsa/error.hpp"
#include "json.hpp"

namespace cmsa::annotate {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, json{{"error", msg}}.dump());
}

struct LabelRequest {
  std::string tweet_id;
  Annotator annotator;
  Label label;
};

LabelRequest parse_label_request(const std::string& body) {
  const auto j = json::parse(body);
  if (!j.is_object()) throw std::invalid_argument("request body must be a JSON object");
  auto field = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_string()) {
      throw std::invalid_argument(std::string("missing string field \"") + name + "\"");
    }
    return j[name].get<std::string>();
  };
  LabelRequest r;
  r.tweet_id = field("tweet_id");
  r.annotator = parse_annotator(field("annotator"));
  const auto label = field("label");
  const auto parsed = parse_label(label);
  if (!parsed) throw std::invalid_argument("unknown label \"" + label + "\"");
  r.label = *parsed;
  return r;
}

// Maps domain errors to HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const PolicyError& e) {
    send_error(res, 422, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("malformed JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace

struct AnnotationServer::Impl {
  std::shared_ptr<AnnotationStore> store;
  ServerOptions opts;
  httplib::Server server;
  std::thread thread;

  void routes() {
    server.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("annotator")) throw std::invalid_argument("missing annotator");
        const auto who = parse_annotator(req.get_param_value("annotator"));
        const auto task = store->next_task(who);
        if (!task) {
          res.status = 204;
          return;
        }
        json j{{"tweet_id", task->id}, {"text", task->text}, {"terms", task->terms}};
        if (who == Annotator::A3 && opts.reveal_prior_labels) {
          j["prior_labels"] = {{"A1", to_string(*task->label_a1)},
                               {"A2", to_string(*task->label_a2)}};
        }
        send_json(res, 200, j.dump());
      });
    });
    server.Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto r = parse_label_request(req.body);
        const auto result = store->submit_label(r.tweet_id, r.annotator, r.label);
        send_json(res, result.created ? 201 : 200, to_json(result.record));
      });
    });
    server.Post("/api/labels/revise", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto r = parse_label_request(req.body);
        send_json(res, 200, to_json(store->revise_label(r.tweet_id, r.annotator, r.label)));
      });
    });
    server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, stats_to_json(store->stats())); });
    });
    server.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        std::ostringstream os;
        corpus::write_ndjson(os, store->export_final());
        res.status = 200;
        res.set_content(os.str(), "application/x-ndjson");
      });
    });
  }

  int bind() {
    // httplib also sets SO_REUSEPORT, which would let two servers share a port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    const int port = opts.port == 0 ? server.bind_to_any_port(opts.host)
                                    : (server.bind_to_port(opts.host, opts.port) ? opts.port : -1);
    if (port < 0) {
      throw Error("cannot bind " + opts.host + ":" + std::to_string(opts.port));
    }
    return port;
  }
};

AnnotationServer::AnnotationServer(std::shared_ptr<AnnotationStore> store, ServerOptions opts)
    : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->opts = std::move(opts);
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start() {
  const int port = impl_->bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void AnnotationServer::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cmsa::annotate
