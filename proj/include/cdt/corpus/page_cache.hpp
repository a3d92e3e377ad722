// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fetch-or-cache layer. Responses are stored as raw bodies under
// `<dir>/<sha256(url)>.page`, so mining can be replayed offline.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/hash.hpp"
#include "cdt/common/process.hpp"

namespace cdt::corpus {

class PageCache {
public:
    explicit PageCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::filesystem::path path_for(const std::string& url) const {
        return dir_ / (sha256_hex(url) + ".page");
    }

    std::optional<std::string> get(const std::string& url) const {
        const auto p = path_for(url);
        if (!std::filesystem::exists(p)) return std::nullopt;
        return read_file(p);
    }

    void put(const std::string& url, const std::string& body) const { write_file(path_for(url), body); }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct HttpResponse {
    int status = 0;  // 0 when the transport failed
    std::string body;
    std::chrono::milliseconds retry_after{0};
};

using LiveFetch = std::function<HttpResponse(const std::string& url)>;

/// Enforces a minimum interval between requests; shareable across threads.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}

    void acquire() {
        std::unique_lock lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        if (next_ > now) std::this_thread::sleep_until(next_);
        next_ = std::max(now, next_) + interval_;
    }

    std::chrono::milliseconds interval() const { return interval_; }

private:
    std::mutex mu_;
    std::chrono::milliseconds interval_;
    std::chrono::steady_clock::time_point next_{};
};

/// Live fetch through the curl binary. A GITHUB_TOKEN env var, when set, is
/// sent as a bearer token.
inline HttpResponse curl_fetch(const std::string& url) {
    std::vector<std::string> argv = {"curl", "-sS", "-L", "--max-time", "60", "-w", "\n%{http_code}"};
    if (const char* token = std::getenv("GITHUB_TOKEN"); token && *token) {
        argv.push_back("-H");
        argv.push_back(std::string("Authorization: Bearer ") + token);
    }
    argv.push_back(url);
    const auto res = run_process(argv);
    HttpResponse out;
    if (res.exit_code != 0) return out;
    const auto nl = res.output.rfind('\n');
    if (nl == std::string::npos) return out;
    out.status = std::atoi(res.output.c_str() + nl + 1);
    out.body = res.output.substr(0, nl);
    return out;
}

class Fetcher {
public:
    /// Offline fetcher: only cached pages are served.
    explicit Fetcher(PageCache cache, std::chrono::milliseconds request_delay = std::chrono::milliseconds{0})
        : cache_(std::move(cache)), limiter_(std::make_shared<RateLimiter>(request_delay)) {}

    Fetcher(PageCache cache, LiveFetch live, std::shared_ptr<RateLimiter> limiter)
        : cache_(std::move(cache)), live_(std::move(live)), limiter_(std::move(limiter)) {}

    /// Returns the cached body or fetches, stores and returns it.
    /// Throws RateLimited on HTTP 429 and NetworkError otherwise.
    std::string fetch(const std::string& url) const {
        if (auto hit = cache_.get(url)) return *hit;
        if (!live_) throw NetworkError("page not cached and live fetching is disabled: " + url, false);
        limiter_->acquire();
        HttpResponse r = live_(url);
        if (r.status == 429) {
            throw RateLimited("rate limited by " + url,
                              std::max(r.retry_after, limiter_->interval()));
        }
        if (r.status == 0 || r.status >= 500) throw NetworkError("network unreachable for " + url);
        if (r.status != 200)
            throw NetworkError("HTTP " + std::to_string(r.status) + " for " + url, false);
        cache_.put(url, r.body);
        return r.body;
    }

    /// Retries retryable failures, sleeping for the advertised delay.
    std::string fetch_with_retry(const std::string& url, int attempts = 4) const {
        for (int i = 1;; ++i) {
            try {
                return fetch(url);
            } catch (const RateLimited& e) {
                if (i >= attempts) throw;
                std::this_thread::sleep_for(e.delay() * i);
            } catch (const NetworkError& e) {
                if (!e.retryable() || i >= attempts) throw;
                std::this_thread::sleep_for(limiter_->interval() * i);
            }
        }
    }

    const PageCache& cache() const { return cache_; }
    bool live() const { return static_cast<bool>(live_); }

private:
    PageCache cache_;
    LiveFetch live_;
    std::shared_ptr<RateLimiter> limiter_;
};

}  // namespace cdt::corpus
