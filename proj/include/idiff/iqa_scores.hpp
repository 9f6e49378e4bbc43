#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idiff/codec.hpp"
#include "idiff/image.hpp"
#include "idiff/remote.hpp"

namespace idiff {

/// Learned IQA scores for one view. Absent metrics stay absent.
struct MetricScores {
  std::optional<double> liqe;
  std::optional<double> qalign;
  std::optional<double> sama;

  bool any() const noexcept { return liqe || qalign || sama; }
  friend bool operator==(const MetricScores&, const MetricScores&) = default;
};

/// Scores for the views of one sample, keyed by view role.
struct QualityScores {
  std::map<ViewRole, MetricScores> views;

  const MetricScores* find(ViewRole r) const {
    auto it = views.find(r);
    return it == views.end() ? nullptr : &it->second;
  }
  friend bool operator==(const QualityScores&, const QualityScores&) = default;
};

using ScoreTable = std::map<std::string, QualityScores>;

class ScoreFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScoreRecord {
  std::string id;
  ViewRole view = ViewRole::AGlobal;
  MetricScores scores;
};

/// Parses one {id, view, liqe?, qalign?, sama?} object; throws std::runtime_error on schema violations.
inline ScoreRecord parse_score_record(const nlohmann::json& rec) {
  if (!rec.is_object()) throw std::runtime_error("score record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string()) throw std::runtime_error("score record lacks string 'id'");
  if (!rec.contains("view") || !rec["view"].is_string()) throw std::runtime_error("score record lacks string 'view'");
  ScoreRecord out;
  out.id = rec["id"].get<std::string>();
  const auto view = parse_view_role(rec["view"].get<std::string>());
  if (!view) throw std::runtime_error("unknown view key '" + rec["view"].get<std::string>() + "'");
  out.view = *view;
  auto metric = [&](const char* key) -> std::optional<double> {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw std::runtime_error(std::string("metric '") + key + "' is not a number");
    return it->get<double>();
  };
  out.scores.liqe = metric("liqe");
  out.scores.qalign = metric("qalign");
  out.scores.sama = metric("sama");
  if (!out.scores.any()) throw std::runtime_error("score record for " + out.id + "/" + rec["view"].get<std::string>() + " has no metrics");
  return out;
}

inline nlohmann::json score_record_json(const std::string& id, ViewRole view, const MetricScores& s) {
  nlohmann::json rec = {{"id", id}, {"view", to_string(view)}};
  if (s.liqe) rec["liqe"] = *s.liqe;
  if (s.qalign) rec["qalign"] = *s.qalign;
  if (s.sama) rec["sama"] = *s.sama;
  return rec;
}

inline ScoreTable parse_scores(std::istream& in) {
  ScoreTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ScoreRecord rec;
    try {
      rec = parse_score_record(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw ScoreFileError("line " + std::to_string(lineno) + ": " + e.what());
    }
    auto& views = table[rec.id].views;
    if (!views.emplace(rec.view, rec.scores).second) {
      throw ScoreFileError("line " + std::to_string(lineno) + ": duplicate key (" + rec.id + ", " +
                           std::string(to_string(rec.view)) + ")");
    }
  }
  return table;
}

inline ScoreTable load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScoreFileError("cannot open score file: " + path.string());
  return parse_scores(in);
}

/// Line-delimited serialization, ordered by id then view role.
inline std::string serialize_scores(const ScoreTable& table) {
  std::ostringstream out;
  for (const auto& [id, qs] : table) {
    for (const auto& [view, s] : qs.views) out << score_record_json(id, view, s).dump() << '\n';
  }
  return out.str();
}

struct ScoreServiceConfig {
  std::string url;  // full endpoint URL, e.g. http://host:8080/score
  double timeout_seconds = 30;
  int max_retries = 3;
  std::size_t max_in_flight = 4;
  double backoff_base_seconds = 0.5;
};

/// Request body: {id, images: {view: base64 PNG}}.
inline std::string score_request_body(const std::string& sample_id, const ViewSet& views) {
  nlohmann::json images = nlohmann::json::object();
  for (auto r : kViewRoles) images[std::string(to_string(r))] = base64_encode(encode_png(views.view(r)));
  return nlohmann::json{{"id", sample_id}, {"images", images}}.dump();
}

/// Decodes a service response: a JSON array of score-file records for `sample_id`.
inline QualityScores decode_score_response(const std::string& body, const std::string& sample_id) {
  using remote::ErrorKind;
  using remote::RemoteError;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const std::exception& e) {
    throw RemoteError(ErrorKind::SchemaMismatch, sample_id, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw RemoteError(ErrorKind::SchemaMismatch, sample_id, "response is not an array of records");
  QualityScores out;
  for (const auto& item : doc) {
    ScoreRecord rec;
    try {
      rec = parse_score_record(item);
    } catch (const std::exception& e) {
      throw RemoteError(ErrorKind::SchemaMismatch, sample_id, e.what());
    }
    if (rec.id != sample_id) throw RemoteError(ErrorKind::SchemaMismatch, sample_id, "response id '" + rec.id + "' does not match");
    if (!out.views.emplace(rec.view, rec.scores).second) {
      throw RemoteError(ErrorKind::SchemaMismatch, sample_id, "duplicate view in response");
    }
  }
  return out;
}

/// Remote learned-score provider. The transport is injectable for tests.
class ScoreClient {
 public:
  explicit ScoreClient(ScoreServiceConfig config, remote::Transport transport = {}, remote::RetryPolicy policy = {})
      : config_(std::move(config)), path_(remote::split_url(config_.url).path), policy_(std::move(policy)) {
    if (config_.timeout_seconds <= 0) throw std::invalid_argument("timeout must be positive");
    if (config_.max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    transport_ = transport ? std::move(transport)
                           : remote::make_http_transport(remote::split_url(config_.url).origin, config_.timeout_seconds);
    policy_.max_retries = config_.max_retries;
    policy_.backoff_base_seconds = config_.backoff_base_seconds;
  }

  QualityScores fetch_scores(const PairSample& sample) const {
    const auto views = decompose(sample);
    remote::HttpRequest req{path_, score_request_body(sample.id, views), {}};
    return remote::send_with_retry(transport_, req, policy_, sample.id,
                                   [&](const std::string& body) { return decode_score_response(body, sample.id); });
  }

  /// Scores for every sample, merged by id. Failures are returned per sample.
  std::vector<remote::Outcome<QualityScores>> fetch_all(const std::vector<PairSample>& samples) const {
    return remote::bounded_map(
        samples, config_.max_in_flight, [this](const PairSample& s) { return fetch_scores(s); },
        [](const PairSample& s) { return s.id; });
  }

  const ScoreServiceConfig& config() const noexcept { return config_; }

 private:
  ScoreServiceConfig config_;
  std::string path_;
  remote::Transport transport_;
  remote::RetryPolicy policy_;
};

}  // namespace idiff
