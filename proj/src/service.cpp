#include "knac/service.hpp"

#include <httplib.h>

#include <map>
#include <nlohmann/json.hpp>

#include "knac/store.hpp"

namespace knac {

namespace {

struct ApiError {
    int status;
    std::string code;
    std::string message;
};

struct Slot {
    std::mutex writer;
    std::mutex snapshot_mutex;
    std::shared_ptr<const Session> snapshot;

    std::shared_ptr<const Session> current() {
        std::lock_guard<std::mutex> lock(snapshot_mutex);
        return snapshot;
    }
    void publish(Session s) {
        auto next = std::make_shared<const Session>(std::move(s));
        std::lock_guard<std::mutex> lock(snapshot_mutex);
        snapshot = std::move(next);
    }
};

int status_for(const std::string& code) {
    if (code == "not_found") return 404;
    if (code == "stale_recommendation" || code == "stale_token" || code == "iteration_in_progress" ||
        code == "converged" || code == "duplicate_decision")
        return 409;
    return 400;
}

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) {
    send_json(res, {{"code", e.code}, {"message", e.message}}, e.status);
}

nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ApiError{400, "invalid_json", e.what()};
    }
}

std::string form_text(const httplib::Request& req, const std::string& key) {
    return req.has_file(key) ? req.get_file_value(key).content : std::string{};
}

}  // namespace

struct Service::Impl {
    ServiceOptions options;
    SessionStore store;
    httplib::Server server;
    std::mutex slots_mutex;
    std::map<std::string, std::shared_ptr<Slot>> slots;

    explicit Impl(ServiceOptions o) : options(std::move(o)), store(options.data_dir) { routes(); }

    std::shared_ptr<Slot> slot(const std::string& id) {
        std::lock_guard<std::mutex> lock(slots_mutex);
        if (auto it = slots.find(id); it != slots.end()) return it->second;
        if (!store.exists(id)) throw ApiError{404, "not_found", "no session '" + id + "'"};
        auto s = std::make_shared<Slot>();
        s->publish(store.load(id));
        slots.emplace(id, s);
        return s;
    }

    template <class Handler>
    httplib::Server::Handler guarded(Handler h) {
        return [h](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const ApiError& e) {
                send_error(res, e);
            } catch (const SessionError& e) {
                send_error(res, {status_for(e.code), e.code, e.what()});
            } catch (const DatasetError& e) {
                send_error(res, {400, "invalid_dataset", e.what()});
            } catch (const KnowledgeBaseError& e) {
                send_error(res, {400, "invalid_rule_base", e.what()});
            } catch (const nlohmann::json::exception& e) {
                send_error(res, {400, "invalid_request", e.what()});
            } catch (const std::invalid_argument& e) {
                send_error(res, {400, "validation", e.what()});
            } catch (const std::exception& e) {
                send_error(res, {500, "internal", e.what()});
            }
        };
    }

    void create(const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data())
            throw ApiError{400, "invalid_request", "expected multipart/form-data with data, expert and cluster parts"};
        const std::string data = form_text(req, "data");
        const std::string expert = form_text(req, "expert");
        if (data.empty()) throw ApiError{400, "missing_data", "the 'data' part is required"};
        if (expert.empty()) throw ApiError{400, "missing_expert", "the 'expert' part is required"};
        std::string clusters = form_text(req, "cluster");
        if (clusters.empty()) clusters = form_text(req, "clusters");

        LabeledDataset ds = assemble_dataset(data, expert, clusters);
        if (ds.size() > options.max_rows)
            throw ApiError{400, "too_many_rows",
                           std::to_string(ds.size()) + " rows exceed the limit of " + std::to_string(options.max_rows)};

        SessionConfig config;
        const std::string params = form_text(req, "params");
        if (!params.empty()) {
            const nlohmann::json pj = nlohmann::json::parse(params);
            if (pj.contains("params") || pj.contains("rules") || pj.contains("max_iterations"))
                pj.get_to(config);
            else
                pj.get_to(config.params);
        }
        config.params.validate();

        StartOptions start_options;
        const std::string k = form_text(req, "kmeans");
        if (!k.empty()) {
            KMeansConfig km;
            try {
                km.k = std::stoul(k);
            } catch (const std::exception&) {
                throw ApiError{400, "validation", "kmeans must be a positive integer"};
            }
            km.seed = config.params.seed;
            start_options.clusterer = km;
        }
        const std::string reference = form_text(req, "reference");
        if (!reference.empty())
            start_options.reference_labels = canonicalize_labels(parse_labels(reference, "reference").labels).ids;

        Session s = start(store.new_id(), ds, config, start_options);
        store.save(s);
        auto slot = std::make_shared<Slot>();
        const std::string id = s.id;
        slot->publish(std::move(s));
        {
            std::lock_guard<std::mutex> lock(slots_mutex);
            slots.emplace(id, slot);
        }
        send_json(res, {{"id", id}}, 201);
    }

    void decisions(const std::string& id, const httplib::Request& req, httplib::Response& res) {
        auto sl = slot(id);
        const nlohmann::json body = parse_body(req);
        if (!body.contains("token") || !body.at("token").is_string())
            throw ApiError{400, "missing_token", "decision posts must echo the iteration token"};
        if (!body.contains("decisions") || !body.at("decisions").is_array())
            throw ApiError{400, "validation", "'decisions' must be an array"};
        const auto list = body.at("decisions").get<std::vector<Decision>>();

        std::unique_lock<std::mutex> lock(sl->writer, std::try_to_lock);
        if (!lock.owns_lock()) throw ApiError{409, "iteration_in_progress", "session " + id + " is being updated"};
        Session next = record_decisions(*sl->current(), list, body.at("token").get<std::string>());
        store.save(next);
        const nlohmann::json out = {{"token", next.token()}, {"draft_decisions", next.draft}};
        sl->publish(std::move(next));
        send_json(res, out);
    }

    void iterate_session(const std::string& id, const httplib::Request& req, httplib::Response& res) {
        auto sl = slot(id);
        const nlohmann::json body = parse_body(req);
        std::unique_lock<std::mutex> lock(sl->writer, std::try_to_lock);
        if (!lock.owns_lock()) throw ApiError{409, "iteration_in_progress", "session " + id + " is being updated"};
        const auto current = sl->current();
        if (body.contains("token") && body.at("token") != current->token())
            throw ApiError{409, "stale_token", "iteration token does not match '" + current->token() + "'"};
        std::vector<Decision> list = current->draft;
        if (body.contains("decisions")) {
            Session merged = record_decisions(*current, body.at("decisions").get<std::vector<Decision>>(), current->token());
            list = merged.draft;
        }
        Session next = iterate(*current, list);
        store.save(next);
        const nlohmann::json view = session_view(next);
        sl->publish(std::move(next));
        send_json(res, view);
    }

    void routes() {
        server.set_payload_max_length(options.max_upload_bytes);
        if (!options.ui_dir.empty()) server.set_mount_point("/", options.ui_dir);

        server.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) { create(req, res); }));
        server.Get(R"(/api/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, session_view(*slot(req.matches[1])->current()));
                   }));
        server.Get(R"(/api/sessions/([^/]+)/recommendations/([^/]+)/explanation)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto s = slot(req.matches[1])->current();
                       const PendingRecommendation* pr = s->find_pending(req.matches[2]);
                       if (!pr)
                           throw ApiError{404, "not_found", "no pending recommendation '" + std::string(req.matches[2]) + "'"};
                       send_json(res, explanation_json(*s, *pr));
                   }));
        server.Post(R"(/api/sessions/([^/]+)/decisions)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        decisions(req.matches[1], req, res);
                    }));
        server.Post(R"(/api/sessions/([^/]+)/iterate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        iterate_session(req.matches[1], req, res);
                    }));
        server.Get(R"(/api/sessions/([^/]+)/kb)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto s = slot(req.matches[1])->current();
                       send_json(res, {{"version", s->kb.version},
                                       {"kb", s->kb},
                                       {"text", render_rules(s->kb)},
                                       {"tables", render_tables(s->kb)}});
                   }));
        server.Get(R"(/api/sessions/([^/]+)/metrics)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, metrics_json(*slot(req.matches[1])->current()));
                   }));
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 413)
                send_error(res, {413, "payload_too_large", "upload exceeds the size limit"});
            else if (res.status == 404)
                send_error(res, {404, "not_found", "no such resource"});
        });
    }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int Service::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }
void Service::stop() {
    if (impl_) impl_->server.stop();
}

std::unique_lock<std::mutex> Service::hold_writer(const std::string& id) {
    return std::unique_lock<std::mutex>(impl_->slot(id)->writer);
}

}  // namespace knac
