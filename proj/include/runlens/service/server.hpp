#pragma once

#include <string>

// Eigen first: resolv.h, pulled in by httplib, defines a macro named _res.
#include "engine.hpp"

#include <httplib.h>

namespace runlens {

/// HTTP JSON API over an `Engine`.
///
///   GET  /runs
///   GET  /runs/{id}/overview | leaderboard | structure-graph | cpc | coverage | hp-importance
///   GET  /runs/{id}/sampling/{hp}
///   GET  /runs/{id}/candidates/{cid}/report | surrogate | local-surrogate | effects | config
///   GET  /runs/{id}/candidates/{cid}/intermediate/{node}
///   GET  /runs/{id}/ensemble/members | predictions | surfaces
///   POST /export
class Server {
public:
    explicit Server(Engine& engine) : engine_(engine) { routes(); }

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port) {
        if (port == 0) {
            port_ = http_.bind_to_any_port(host);
            if (port_ < 0) throw Error(ErrorKind::load, "cannot bind " + host);
        } else {
            if (!http_.bind_to_port(host, port)) throw Error(ErrorKind::load, "cannot bind " + host + ":" + std::to_string(port));
            port_ = port;
        }
        return port_;
    }

    /// Serves until `stop()`.
    bool run() { return http_.listen_after_bind(); }
    void stop() { http_.stop(); }
    void wait_until_ready() const { http_.wait_until_ready(); }
    int port() const { return port_; }

private:
    static std::map<std::string, std::string> query(const httplib::Request& req) {
        std::map<std::string, std::string> out;
        for (const auto& [k, v] : req.params) out.emplace(k, v);
        return out;
    }

    void reply(httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_header("X-Cache", r.cache_hit ? "hit" : "miss");
        res.set_content(r.body, r.content_type);
    }

    void get(const std::string& pattern, std::function<AnalysisRequest(const httplib::Request&)> make) {
        http_.Get(pattern, [this, make](const httplib::Request& req, httplib::Response& res) { reply(res, engine_.handle(make(req))); });
    }

    void routes() {
        get("/runs", [](const httplib::Request&) { return AnalysisRequest{"", "", "runs", {}}; });
        get(R"(/runs/([^/]+)/(overview|leaderboard|structure-graph|cpc|coverage|hp-importance))",
            [](const httplib::Request& r) { return AnalysisRequest{r.matches[1], "", r.matches[2], query(r)}; });
        get(R"(/runs/([^/]+)/sampling/([^/]+))", [](const httplib::Request& r) {
            auto p = query(r);
            p["hp"] = r.matches[2];
            return AnalysisRequest{r.matches[1], "", "sampling", p};
        });
        get(R"(/runs/([^/]+)/candidates/([^/]+)/(report|surrogate|local-surrogate|effects|config))",
            [](const httplib::Request& r) { return AnalysisRequest{r.matches[1], r.matches[2], r.matches[3], query(r)}; });
        get(R"(/runs/([^/]+)/candidates/([^/]+)/intermediate/([^/]+))", [](const httplib::Request& r) {
            auto p = query(r);
            p["node"] = r.matches[3];
            return AnalysisRequest{r.matches[1], r.matches[2], "intermediate", p};
        });
        get(R"(/runs/([^/]+)/ensemble/(members|predictions|surfaces))",
            [](const httplib::Request& r) { return AnalysisRequest{r.matches[1], "", "ensemble/" + std::string(r.matches[2]), query(r)}; });

        http_.Post("/export", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                json body;
                try {
                    body = json::parse(req.body);
                } catch (const json::exception&) {
                    throw Error(ErrorKind::validation, "export request body must be JSON");
                }
                auto file = engine_.export_artifact(body);
                res.set_header("Content-Disposition", "attachment; filename=\"" + file.filename + "\"");
                res.set_content(file.content, file.content_type);
            } catch (const Error& e) {
                res.status = http_status(e.kind());
                res.set_content(error_body(e.kind(), e.what()), "application/json");
            }
        });

        http_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty())
                res.set_content(error_body(ErrorKind::not_found, "no route for " + req.method + " " + req.path), "application/json");
        });
        http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string msg = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                msg = e.what();
            } catch (...) {
            }
            res.status = 500;
            res.set_content(error_body(ErrorKind::contract, msg), "application/json");
        });
    }

    Engine& engine_;
    httplib::Server http_;
    int port_ = -1;
};

}  // namespace runlens
