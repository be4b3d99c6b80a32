#include "gravekit/server.hpp"

#include "gravekit/error.hpp"
#include "gravekit/image.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <sstream>

namespace gravekit {

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::UnknownDocument:
        case ErrorCode::UnknownRecord:
        case ErrorCode::UnknownPage:
        case ErrorCode::QueueEmpty:
            return 404;
        case ErrorCode::StaleVersion:
            return 409;
        case ErrorCode::StorageFailure:
            return 500;
        case ErrorCode::DetectorFailure:
        case ErrorCode::AdapterFailure:
            return 502;
        default:
            return 422;
    }
}

namespace {

using ojson = nlohmann::ordered_json;

struct Session {
    std::string token;
    std::string document_id;
    std::string queue_cursor;  // empty until the first queue request
    std::string created_at;
};

std::string random_token() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::ostringstream s;
    s << std::hex << rng() << rng();
    return s.str();
}

void send_json(httplib::Response& res, const ojson& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, ojson{{"error", code}, {"message", message}}, status);
}

std::string param(const httplib::Request& req, const std::string& key, std::string fallback = {}) {
    return req.has_param(key) ? req.get_param_value(key) : fallback;
}

int int_param(const httplib::Request& req, const std::string& key, int fallback) {
    if (!req.has_param(key)) return fallback;
    try {
        std::size_t used = 0;
        const std::string v = req.get_param_value(key);
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(key);
        return out;
    } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaError, "query parameter " + key + " must be an integer");
    }
}

// Malformed JSON surfaces as a json::exception, which the handler wrapper maps to 400.
nlohmann::json parse_body(const httplib::Request& req) { return nlohmann::json::parse(req.body); }

ojson document_json(const Document& d) {
    ojson scale{{"mode", std::string(to_string(d.scale.mode))}};
    if (d.scale.fixed_ratio) scale["fixed_ratio"] = *d.scale.fixed_ratio;
    if (d.scale.page_height_cm) scale["page_height_cm"] = *d.scale.page_height_cm;
    return ojson{{"id", d.id}, {"title", d.title}, {"source_ref", d.source_ref}, {"page_count", d.page_count},
                 {"scale", scale}};
}

ojson bbox_json(const BBox& b) { return ojson::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

ojson job_json(const JobStatus& j) {
    ojson out{{"id", j.id}, {"document_id", j.document_id}, {"state", std::string(to_string(j.state))}};
    if (j.state == JobState::failed) out["error"] = j.error;
    if (j.state == JobState::done) {
        out["summary"] = {{"pages", j.summary.pages}, {"trees", j.summary.trees}, {"created", j.summary.created}};
    }
    return out;
}

std::string crop_url(const std::string& page_id, const BBox& b) {
    auto i = [](double v) { return std::to_string(static_cast<long long>(std::floor(v))); };
    auto c = [](double v) { return std::to_string(static_cast<long long>(std::ceil(v))); };
    return "/pages/" + page_id + "/crop?x0=" + i(b.x_min) + "&y0=" + i(b.y_min) + "&x1=" + c(b.x_max) + "&y1=" + c(b.y_max);
}

/// What the wizard draws over the page: every box of the tree, the contour
/// and links to the reference crops. No raster bytes.
ojson overlay_json(const GraveRecord& r, const Page& page) {
    ojson boxes = ojson::array();
    auto add = [&](const Detection& d, std::string_view role) {
        boxes.push_back(ojson{{"id", d.id},
                              {"label", std::string(to_string(d.label))},
                              {"role", role},
                              {"bbox", bbox_json(d.bbox)},
                              {"origin", std::string(to_string(d.origin))}});
    };
    const GraveTree& t = r.tree;
    add(t.grave, "grave");
    if (t.scale) add(*t.scale, "scale");
    if (t.north_arrow) add(*t.north_arrow, "north_arrow");
    if (t.cross_section) add(*t.cross_section, "cross_section");
    for (const auto& d : t.skeletons) add(d, "skeleton");
    for (const auto& d : t.artefacts) add(d, "artefact");

    ojson contour = nullptr;
    if (r.geometry.grave_contour) {
        contour = ojson::array();
        for (const auto& p : r.geometry.grave_contour->points) contour.push_back(ojson::array({p.x, p.y}));
    }
    ojson crops = ojson::object();
    crops["grave"] = crop_url(page.id, t.grave.bbox);
    crops["scale"] = t.scale ? ojson(crop_url(page.id, t.scale->bbox)) : ojson(nullptr);
    crops["north_arrow"] = t.north_arrow ? ojson(crop_url(page.id, t.north_arrow->bbox)) : ojson(nullptr);
    return ojson{{"page_image_url", "/pages/" + page.id + "/image"},
                 {"page_width_px", page.width_px},
                 {"page_height_px", page.height_px},
                 {"boxes", boxes},
                 {"contour", contour},
                 {"crops", crops}};
}

ojson summary_json(const GraveRecord& r) {
    return ojson{{"record_id", r.record_id},
                 {"publication_grave_id", r.publication_grave_id},
                 {"page_index", r.page_index},
                 {"status", std::string(to_string(r.status))},
                 {"version", r.version}};
}

}  // namespace

struct Server::Impl {
    Service& service;
    ServerOptions options;
    httplib::Server http;
    std::atomic<bool> bound{false};
    std::filesystem::path upload_root;

    std::mutex sessions_mutex;
    std::map<std::string, Session> sessions;

    Impl(Service& s, ServerOptions o) : service(s), options(std::move(o)) {
        upload_root = options.upload_dir.empty()
                          ? std::filesystem::temp_directory_path() / ("gravekit-uploads-" + random_token())
                          : std::filesystem::path(options.upload_dir);
        routes();
    }

    ~Impl() {
        if (options.upload_dir.empty()) {
            std::error_code ec;
            std::filesystem::remove_all(upload_root, ec);
        }
    }

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    /// Authentication and error mapping around every handler.
    Handler wrap(Handler h) {
        return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            if (!options.token.empty()) {
                const std::string auth = req.get_header_value("Authorization");
                if (auth != "Bearer " + options.token && param(req, "token") != options.token) {
                    send_error(res, 401, "Unauthorized", "missing or wrong token");
                    return;
                }
            }
            try {
                h(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), to_string(e.code()), e.what());
            } catch (const nlohmann::json::exception& e) {
                send_error(res, 400, "BadRequest", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "InternalError", e.what());
            }
        };
    }

    void get(const std::string& pattern, Handler h) { http.Get(pattern, wrap(std::move(h))); }
    void post(const std::string& pattern, Handler h) { http.Post(pattern, wrap(std::move(h))); }

    Manifest manifest_from_request(const httplib::Request& req) {
        if (!req.is_multipart_form_data()) {
            const auto body = parse_body(req);
            if (body.contains("manifest")) {
                return read_manifest(body.at("manifest"), body.value("base_dir", std::string(".")));
            }
            return read_manifest(body, ".");
        }
        if (!req.has_file("manifest")) throw Error(ErrorCode::SchemaError, "multipart upload needs a manifest part");
        const auto manifest = nlohmann::json::parse(req.get_file_value("manifest").content);
        // Page files arrive as parts named (or filed) after their image_ref.
        const auto dir = upload_root / random_token();
        std::filesystem::create_directories(dir);
        struct Cleanup {
            std::filesystem::path p;
            ~Cleanup() {
                std::error_code ec;
                std::filesystem::remove_all(p, ec);
            }
        } cleanup{dir};
        for (const auto& [name, part] : req.files) {
            if (name == "manifest") continue;
            const std::string ref = part.filename.empty() ? name : part.filename;
            const auto target = (dir / ref).lexically_normal();
            if (target.string().rfind(dir.string(), 0) != 0) {
                throw Error(ErrorCode::SchemaError, "upload name escapes the upload directory: " + ref);
            }
            std::filesystem::create_directories(target.parent_path());
            write_file_bytes(target.string(), std::span(reinterpret_cast<const std::uint8_t*>(part.content.data()),
                                                        part.content.size()));
        }
        return read_manifest(manifest, dir.string());
    }

    void routes() {
        post("/documents", [this](const httplib::Request& req, httplib::Response& res) {
            const Document doc = service.ingest(manifest_from_request(req));
            send_json(res, ojson::parse(manifest_json(doc, service.store().pages(doc.id)).dump()), 201);
        });
        get("/documents", [this](const httplib::Request&, httplib::Response& res) {
            ojson out = ojson::array();
            for (const auto& d : service.store().documents()) out.push_back(document_json(d));
            send_json(res, out);
        });
        get(R"(/documents/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto doc = service.store().document(id);
            if (!doc) throw Error(ErrorCode::UnknownDocument, id);
            send_json(res, ojson::parse(manifest_json(*doc, service.store().pages(id)).dump()));
        });
        post(R"(/documents/([^/]+)/detections)", [this](const httplib::Request& req, httplib::Response& res) {
            ParseOptions opts;
            if (param(req, "aliases") == "alternative") opts.aliases = LabelAliases::with_alternative_names();
            std::istringstream in(req.body);
            const auto stored = service.add_detections(req.matches[1], in, opts);
            send_json(res, ojson{{"stored", stored.size()}}, 201);
        });
        post(R"(/documents/([^/]+)/assemble)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string job = service.start_assemble_job(req.matches[1]);
            send_json(res, job_json(*service.job(job)), 202);
        });
        get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto job = service.job(req.matches[1]);
            if (!job) {
                send_error(res, 404, "UnknownJob", std::string(req.matches[1]));
                return;
            }
            send_json(res, job_json(*job));
        });
        get(R"(/documents/([^/]+)/records)", [this](const httplib::Request& req, httplib::Response& res) {
            ojson out = ojson::array();
            for (const auto& r : service.records(req.matches[1])) out.push_back(summary_json(r));
            send_json(res, out);
        });
        get(R"(/documents/([^/]+)/queue/next)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string doc = req.matches[1];
            const std::string token = param(req, "session");
            std::optional<Session> session;
            if (!token.empty()) {
                std::lock_guard lock(sessions_mutex);
                const auto it = sessions.find(token);
                if (it == sessions.end() || it->second.document_id != doc) {
                    send_error(res, 404, "UnknownSession", token);
                    return;
                }
                session = it->second;
            }
            GraveRecord next;
            try {
                next = service.next_in_queue(doc);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::QueueEmpty && session) set_cursor(token, "");
                throw;
            }
            if (session) set_cursor(token, next.record_id);
            const auto page = service.store().page(next.page_id);
            if (!page) throw Error(ErrorCode::UnknownPage, next.page_id);
            send_json(res, ojson{{"record", to_json(next)}, {"overlay", overlay_json(next, *page)}});
        });
        post(R"(/records/([^/]+)/step)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            if (!body.is_object() || !body.contains("version") || !body["version"].is_number_integer() ||
                !body.contains("action") || !body["action"].is_string()) {
                throw Error(ErrorCode::ValidationPayloadError, "step body needs integer version and string action");
            }
            const auto action = parse_action(body["action"].get<std::string>());
            if (!action) throw Error(ErrorCode::ValidationPayloadError, "unknown action " + body["action"].dump());
            const nlohmann::json payload = body.contains("payload") ? body["payload"] : nlohmann::json::object();
            const auto updated = service.apply_step(req.matches[1], body["version"].get<int>(), *action, payload);
            send_json(res, to_json(updated));
        });
        get(R"(/records/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(service.record(req.matches[1])));
        });
        post(R"(/records/([^/]+)/recompute)", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(service.recompute(req.matches[1])));
        });
        get(R"(/documents/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string format = param(req, "format", "csv");
            if (format != "csv" && format != "json") throw Error(ErrorCode::SchemaError, "format must be csv or json");
            const bool all = param(req, "all") == "1" || param(req, "all") == "true";
            const auto body = service.export_document(req.matches[1], format == "csv" ? ExportFormat::csv : ExportFormat::json, all);
            res.set_content(body, format == "csv" ? "text/csv" : "application/json");
        });
        get(R"(/documents/([^/]+)/stats/rose)", [this](const httplib::Request& req, httplib::Response& res) {
            const int sector = int_param(req, "sector", 10);
            send_json(res, ojson{{"sector_deg", sector}, {"counts", service.rose(req.matches[1], sector)}});
        });
        get(R"(/documents/([^/]+)/stats/outlines)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto set = service.outlines(req.matches[1], int_param(req, "harmonics", kDefaultHarmonics));
            if (param(req, "format") == "csv") {
                res.set_content(coefficients_csv(set.record_ids, set.coefficients), "text/csv");
                return;
            }
            ojson out = ojson::array();
            for (std::size_t i = 0; i < set.record_ids.size(); ++i) {
                const auto& c = set.coefficients[i];
                ojson h = ojson::array();
                for (const auto& row : c.harmonics) h.push_back(ojson::array({row[0], row[1], row[2], row[3]}));
                out.push_back(ojson{{"record_id", set.record_ids[i]}, {"a0", c.a0}, {"c0", c.c0}, {"harmonics", h}});
            }
            send_json(res, ojson{{"outlines", out}});
        });
        get(R"(/documents/([^/]+)/stats/pca)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto set = service.pca(req.matches[1], int_param(req, "k", 2), int_param(req, "harmonics", kDefaultHarmonics));
            if (param(req, "format") == "csv") {
                res.set_content(projection_csv(set.record_ids, set.result), "text/csv");
                return;
            }
            ojson proj = ojson::array();
            for (std::size_t i = 0; i < set.record_ids.size(); ++i) {
                proj.push_back(ojson{{"record_id", set.record_ids[i]}, {"scores", set.result.projections[i]}});
            }
            send_json(res, ojson{{"explained_variance", set.result.model.explained_variance},
                                 {"components", set.result.model.components},
                                 {"mean", set.result.model.mean},
                                 {"projections", proj}});
        });
        get(R"(/pages/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!service.store().page(id)) throw Error(ErrorCode::UnknownPage, id);
            const auto bytes = service.store().page_image(id);
            res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
        });
        get(R"(/pages/([^/]+)/crop)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!service.store().page(id)) throw Error(ErrorCode::UnknownPage, id);
            const auto raster = service.page_raster(id);
            const PixelRect rect = covering_rect(int_param(req, "x0", 0), int_param(req, "y0", 0),
                                                 int_param(req, "x1", raster->width()),
                                                 int_param(req, "y1", raster->height()), raster->width(),
                                                 raster->height());
            if (rect.width() <= 0 || rect.height() <= 0) throw Error(ErrorCode::SchemaError, "empty crop");
            const auto png = encode_png(crop(*raster, rect));
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });
        post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const std::string doc = body.at("document_id").get<std::string>();
            if (!service.store().document(doc)) throw Error(ErrorCode::UnknownDocument, doc);
            Session s{random_token(), doc, "", utc_timestamp()};
            {
                std::lock_guard lock(sessions_mutex);
                while (sessions.count(s.token)) s.token = random_token();
                sessions[s.token] = s;
            }
            send_json(res, session_json(s), 201);
        });
        get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(sessions_mutex);
            const auto it = sessions.find(req.matches[1]);
            if (it == sessions.end()) {
                send_error(res, 404, "UnknownSession", std::string(req.matches[1]));
                return;
            }
            send_json(res, session_json(it->second));
        });
    }

    void set_cursor(const std::string& token, const std::string& record_id) {
        std::lock_guard lock(sessions_mutex);
        sessions[token].queue_cursor = record_id;
    }

    static ojson session_json(const Session& s) {
        return ojson{{"token", s.token},
                     {"document_id", s.document_id},
                     {"queue_cursor", s.queue_cursor.empty() ? ojson(nullptr) : ojson(s.queue_cursor)},
                     {"created_at", s.created_at}};
    }
};

Server::Server(Service& service, ServerOptions options) : impl_(std::make_unique<Impl>(service, std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->http.bind_to_any_port(host);
    } else if (!impl_->http.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->bound = true;
    return bound;
}

void Server::run() {
    if (!impl_->bound) throw std::runtime_error("server is not bound");
    impl_->http.listen_after_bind();
}

void Server::stop() {
    if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace gravekit
