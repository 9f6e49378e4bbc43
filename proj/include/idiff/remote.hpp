#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <httplib.h>

// <resolv.h> (pulled in by httplib) defines `_res` as a macro, which breaks Eigen's headers when they come later.
#ifdef _res
#undef _res
#endif

namespace idiff::remote {

enum class ErrorKind { Timeout, Connection, AuthFailure, RateLimited, HttpStatus, SchemaMismatch, Internal };

inline std::string_view to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Connection: return "connection";
    case ErrorKind::AuthFailure: return "auth_failure";
    case ErrorKind::RateLimited: return "rate_limited";
    case ErrorKind::HttpStatus: return "http_status";
    case ErrorKind::SchemaMismatch: return "schema_mismatch";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

inline bool is_retryable(ErrorKind k, int status) noexcept {
  switch (k) {
    case ErrorKind::Timeout:
    case ErrorKind::Connection:
    case ErrorKind::RateLimited: return true;
    case ErrorKind::HttpStatus: return status >= 500;
    default: return false;
  }
}

/// A failed remote exchange. Always carries the id of the sample it was made for.
class RemoteError : public std::runtime_error {
 public:
  RemoteError(ErrorKind kind, std::string sample_id, const std::string& detail, int status = 0, int attempts = 0)
      : std::runtime_error(std::string(to_string(kind)) + " [" + sample_id + "]: " + detail),
        kind_(kind),
        sample_id_(std::move(sample_id)),
        status_(status),
        attempts_(attempts) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& sample_id() const noexcept { return sample_id_; }
  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  ErrorKind kind_;
  std::string sample_id_;
  int status_;
  int attempts_;
};

struct HttpRequest {
  std::string path;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Transport-level failure (no HTTP response at all).
struct TransportFailure {
  ErrorKind kind = ErrorKind::Connection;  // Timeout or Connection
  std::string message;
};

using TransportResult = std::variant<HttpResponse, TransportFailure>;
using Transport = std::function<TransportResult(const HttpRequest&)>;

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("url must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Plain-HTTP transport backed by cpp-httplib. `origin` is scheme://host[:port].
inline Transport make_http_transport(const std::string& origin, double timeout_seconds) {
  return [origin, timeout_seconds](const HttpRequest& req) -> TransportResult {
    httplib::Client client(origin);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);
    auto res = client.Post(req.path, headers, req.body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      return TransportFailure{timed_out ? ErrorKind::Timeout : ErrorKind::Connection, httplib::to_string(err)};
    }
    return HttpResponse{res->status, res->body};
  };
}

/// Exponential backoff with full jitter: the k-th retry waits uniform(0, base * 2^k).
struct RetryPolicy {
  int max_retries = 3;
  double backoff_base_seconds = 0.5;
  std::uint64_t jitter_seed = 0x1d1ff;
  std::function<void(std::chrono::duration<double>)> sleep = [](std::chrono::duration<double> d) {
    std::this_thread::sleep_for(d);
  };
};

/// Maps an HTTP status to an error kind; nullopt for 2xx.
inline std::optional<ErrorKind> classify_status(int status) noexcept {
  if (status >= 200 && status < 300) return std::nullopt;
  if (status == 401 || status == 403) return ErrorKind::AuthFailure;
  if (status == 429) return ErrorKind::RateLimited;
  return ErrorKind::HttpStatus;
}

/// Sends `req` until a 2xx arrives, a non-retryable failure occurs, or retries run out.
/// `decode` turns a 2xx body into the result; it throws RemoteError(SchemaMismatch) on bad payloads.
template <class Decode>
auto send_with_retry(const Transport& transport, const HttpRequest& req, const RetryPolicy& policy,
                     const std::string& sample_id, Decode&& decode) -> decltype(decode(std::string{})) {
  std::mt19937_64 rng(policy.jitter_seed ^ std::hash<std::string>{}(sample_id));
  const int attempts_allowed = policy.max_retries + 1;
  for (int attempt = 1;; ++attempt) {
    ErrorKind kind;
    int status = 0;
    std::string detail;
    const auto result = transport(req);
    if (const auto* resp = std::get_if<HttpResponse>(&result)) {
      status = resp->status;
      if (const auto bad = classify_status(resp->status); !bad) {
        return decode(resp->body);
      } else {
        kind = *bad;
        detail = "HTTP " + std::to_string(resp->status);
      }
    } else {
      const auto& failure = std::get<TransportFailure>(result);
      kind = failure.kind;
      detail = failure.message;
    }
    if (!is_retryable(kind, status) || attempt >= attempts_allowed) {
      throw RemoteError(kind, sample_id, detail + " after " + std::to_string(attempt) + " attempt(s)", status, attempt);
    }
    const double cap = policy.backoff_base_seconds * std::pow(2.0, attempt - 1);
    std::uniform_real_distribution<double> jitter(0.0, cap);
    if (policy.sleep) policy.sleep(std::chrono::duration<double>(jitter(rng)));
  }
}

/// Either a value or the error that replaced it.
template <class T>
using Outcome = std::variant<T, RemoteError>;

/// Applies `fn` to every item with at most `max_in_flight` concurrent calls.
/// Results are positioned like the inputs; a throwing item never aborts the rest.
template <class In, class Fn, class IdOf>
auto bounded_map(const std::vector<In>& items, std::size_t max_in_flight, Fn&& fn, IdOf&& id_of)
    -> std::vector<Outcome<decltype(fn(items.front()))>> {
  using R = decltype(fn(items.front()));
  std::vector<std::optional<Outcome<R>>> slots(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
      try {
        slots[i].emplace(std::in_place_index<0>, fn(items[i]));
      } catch (const RemoteError& e) {
        slots[i].emplace(std::in_place_index<1>, e);
      } catch (const std::exception& e) {
        slots[i].emplace(std::in_place_index<1>, RemoteError(ErrorKind::Internal, id_of(items[i]), e.what()));
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), items.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::vector<Outcome<R>> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace idiff::remote
