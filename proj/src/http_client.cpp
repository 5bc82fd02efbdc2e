#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "robustkd/augment.hpp"

namespace rkd {

HttpCompletionClient::HttpCompletionClient(HttpClientOptions opts) : opts_(std::move(opts)) {
    const auto scheme_end = opts_.base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("completion endpoint '" + opts_.base_url + "' needs an http:// or https:// scheme");
    const auto scheme = opts_.base_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw ConfigError("unsupported endpoint scheme '" + scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw ConfigError("this build has no TLS support; use an http:// endpoint");
#endif
    const auto path_start = opts_.base_url.find('/', scheme_end + 3);
    origin_ = opts_.base_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? std::string{} : opts_.base_url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    if (opts_.max_parallel == 0) throw ConfigError("max_parallel must be at least 1");
    if (opts_.attempts < 1) throw ConfigError("attempts must be at least 1");
    if (!opts_.credential_env.empty())
        if (const char* key = std::getenv(opts_.credential_env.c_str())) credential_ = key;
}

CompletionResult HttpCompletionClient::complete(const CompletionRequest& req) {
    nlohmann::json body = {{"prompt", req.prompt},
                           {"max_tokens", req.max_tokens},
                           {"temperature", req.temperature},
                           {"stop", req.stop},
                           {"seed", req.sample_seed}};
    if (!opts_.model.empty()) body["model"] = opts_.model;
    const std::string payload = body.dump();

    httplib::Client cli(origin_);
    cli.set_connection_timeout(opts_.timeout_s, 0);
    cli.set_read_timeout(opts_.timeout_s, 0);
    httplib::Headers headers;
    if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);

    std::string last_error;
    int delay_ms = opts_.backoff_ms;
    for (int attempt = 1; attempt <= opts_.attempts; ++attempt) {
        auto res = cli.Post(path_ + "/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            try {
                auto j = nlohmann::json::parse(res->body);
                return CompletionResult{true, j.at("choices").at(0).at("text").get<std::string>(), {}};
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("malformed response: ") + e.what();
            }
        }
        if (attempt < opts_.attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms *= 2;
        }
    }
    return CompletionResult{false, {}, last_error};
}

std::vector<CompletionResult> HttpCompletionClient::complete_batch(const std::vector<CompletionRequest>& reqs) {
    std::vector<CompletionResult> out(reqs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < reqs.size(); i = next++) out[i] = complete(reqs[i]);
    };
    const std::size_t n = std::min(opts_.max_parallel, reqs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace rkd
