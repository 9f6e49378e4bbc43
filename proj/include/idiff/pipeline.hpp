#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idiff/answer_model.hpp"
#include "idiff/evaluation.hpp"
#include "idiff/features.hpp"
#include "idiff/iqa_scores.hpp"
#include "idiff/manifest.hpp"
#include "idiff/mllm_client.hpp"
#include "idiff/rationale.hpp"
#include "idiff/synthetic.hpp"

namespace idiff::pipeline {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kSampleFailures = 1, kConfigError = 2 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a subcommand needs. Loaded from a JSON config, then overridden by flags.
struct RunConfig {
  fs::path manifest;
  fs::path out = "idiff-out";
  std::optional<fs::path> models;       // default <out>/models
  std::optional<fs::path> predictions;  // default <out>/predictions.jsonl (eval: <out>/rationales.jsonl if present)
  std::optional<fs::path> scores;
  std::optional<fs::path> templates;
  VoteMode vote = VoteMode::Equal;
  TemplateStyle template_style = TemplateStyle::DomainSpecific;
  PromptMode prompt_mode = PromptMode::TemplatedFeatures;
  ConditioningSource conditioning = ConditioningSource::Predicted;
  std::optional<EndpointConfig> endpoint;
  std::optional<std::string> score_url;
  MetricWeights weights;
  std::uint64_t seed = 42;
  int members = 5;
  Hyperparams hyperparams;
  std::size_t synth_pairs = 200;

  fs::path models_dir() const { return models ? *models : out / "models"; }
  fs::path predictions_path() const { return predictions ? *predictions : out / "predictions.jsonl"; }
};

inline VoteMode vote_from(const std::string& s) {
  auto v = parse_vote_mode(s);
  if (!v) throw ConfigError("--vote must be equal or weighted, got '" + s + "'");
  return *v;
}

inline TemplateStyle template_from(const std::string& s) {
  auto v = parse_template_style(s);
  if (!v) throw ConfigError("--template must be generic or domain, got '" + s + "'");
  return *v;
}

inline PromptMode prompt_mode_from(const std::string& s) {
  auto v = parse_prompt_mode(s);
  if (!v) throw ConfigError("--prompt-mode must be baseline|templated|templated-features|answer-aware, got '" + s + "'");
  return *v;
}

inline ConditioningSource conditioning_from(const std::string& s) {
  auto v = parse_conditioning(s);
  if (!v) throw ConfigError("--conditioning must be predicted|ground-truth|fixed-wrong, got '" + s + "'");
  return *v;
}

/// "acc,bleu,rouge" or "acc,bleu,rouge,llm".
inline MetricWeights weights_from(const std::string& s) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("--weights entry '" + tok + "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3 && parts.size() != 4) throw ConfigError("--weights takes 3 or 4 comma-separated values");
  MetricWeights w{parts[0], parts[1], parts[2], parts.size() == 4 ? parts[3] : 1.0};
  double present = 0;
  for (double v : parts) {
    if (v < 0) throw ConfigError("--weights must be nonnegative");
    present += v;
  }
  if (present <= 0) throw ConfigError("--weights must not all be zero");
  return w;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("models")) c.models = j["models"].get<std::string>();
    if (j.contains("predictions")) c.predictions = j["predictions"].get<std::string>();
    if (j.contains("scores")) c.scores = j["scores"].get<std::string>();
    if (j.contains("templates")) c.templates = j["templates"].get<std::string>();
    if (j.contains("vote")) c.vote = vote_from(j["vote"].get<std::string>());
    if (j.contains("template")) c.template_style = template_from(j["template"].get<std::string>());
    if (j.contains("prompt_mode")) c.prompt_mode = prompt_mode_from(j["prompt_mode"].get<std::string>());
    if (j.contains("conditioning")) c.conditioning = conditioning_from(j["conditioning"].get<std::string>());
    if (j.contains("score_url")) c.score_url = j["score_url"].get<std::string>();
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      if (w.is_string()) {
        c.weights = weights_from(w.get<std::string>());
      } else {
        c.weights.accuracy = w.value("accuracy", 1.0);
        c.weights.bleu4 = w.value("bleu4", 1.0);
        c.weights.rouge_l = w.value("rouge_l", 1.0);
        c.weights.llm = w.value("llm", 1.0);
      }
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("members")) c.members = j["members"].get<int>();
    if (j.contains("pairs")) c.synth_pairs = j["pairs"].get<std::size_t>();
    if (j.contains("training")) {
      const auto& t = j["training"];
      c.hyperparams.learning_rate = t.value("learning_rate", c.hyperparams.learning_rate);
      c.hyperparams.steps = t.value("steps", c.hyperparams.steps);
      c.hyperparams.l2 = t.value("l2", c.hyperparams.l2);
      c.hyperparams.init_scale = t.value("init_scale", c.hyperparams.init_scale);
      c.hyperparams.val_fraction = t.value("val_fraction", c.hyperparams.val_fraction);
    }
    if (j.contains("endpoint")) {
      const auto& e = j["endpoint"];
      EndpointConfig ep;
      ep.base_url = e.at("url").get<std::string>();
      ep.model_name = e.value("model", ep.model_name);
      ep.timeout_seconds = e.value("timeout", ep.timeout_seconds);
      ep.max_retries = e.value("max_retries", ep.max_retries);
      ep.max_in_flight = e.value("max_in_flight", ep.max_in_flight);
      if (e.contains("token")) ep.auth_token = e["token"].get<std::string>();
      if (e.contains("temperature")) ep.temperature = e["temperature"].get<double>();
      if (e.contains("max_tokens")) ep.max_tokens = e["max_tokens"].get<int>();
      c.endpoint = ep;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

/// Snapshot written next to every run's outputs. Secrets are not recorded.
inline nlohmann::json resolved_config_json(const RunConfig& c, const std::string& command) {
  nlohmann::json j = {{"command", command},
                      {"manifest", c.manifest.string()},
                      {"out", c.out.string()},
                      {"models", c.models_dir().string()},
                      {"predictions", c.predictions ? nlohmann::json(c.predictions->string()) : nlohmann::json(nullptr)},
                      {"scores", c.scores ? nlohmann::json(c.scores->string()) : nlohmann::json(nullptr)},
                      {"templates", c.templates ? nlohmann::json(c.templates->string()) : nlohmann::json(nullptr)},
                      {"vote", to_string(c.vote)},
                      {"template", c.template_style == TemplateStyle::Generic ? "generic" : "domain"},
                      {"prompt_mode", to_string(c.prompt_mode)},
                      {"conditioning", to_string(c.conditioning)},
                      {"weights",
                       {{"accuracy", c.weights.accuracy},
                        {"bleu4", c.weights.bleu4},
                        {"rouge_l", c.weights.rouge_l},
                        {"llm", c.weights.llm}}},
                      {"seed", c.seed},
                      {"members", c.members},
                      {"pairs", c.synth_pairs},
                      {"training",
                       {{"learning_rate", c.hyperparams.learning_rate},
                        {"steps", c.hyperparams.steps},
                        {"l2", c.hyperparams.l2},
                        {"init_scale", c.hyperparams.init_scale},
                        {"val_fraction", c.hyperparams.val_fraction}}}};
  j["score_url"] = c.score_url ? nlohmann::json(*c.score_url) : nlohmann::json(nullptr);
  if (c.endpoint) {
    const auto& e = *c.endpoint;
    j["endpoint"] = {{"url", e.base_url},
                     {"model", e.model_name},
                     {"timeout", e.timeout_seconds},
                     {"max_retries", e.max_retries},
                     {"max_in_flight", e.max_in_flight}};
    if (e.temperature) j["endpoint"]["temperature"] = *e.temperature;
    if (e.max_tokens) j["endpoint"]["max_tokens"] = *e.max_tokens;
  } else {
    j["endpoint"] = nullptr;
  }
  return j;
}

namespace detail {

inline void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

inline void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw ConfigError(std::string(what) + " directory not found: " + p.string());
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

inline void write_jsonl(const fs::path& p, const std::vector<nlohmann::json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text(p, text);
}

inline void prepare_out(const RunConfig& c, const std::string& command) {
  fs::create_directories(c.out);
  write_text(c.out / "resolved_config.json", resolved_config_json(c, command).dump(2) + "\n");
}

/// Loads the manifest; records that fail are reported and dropped. Output is sorted by id.
inline std::vector<PairSample> load_samples(const RunConfig& c, std::ostream& log, bool& failures) {
  auto load = load_manifest(c.manifest);
  for (const auto& e : load.errors) {
    log << "error: " << c.manifest.string() << ":" << e.line << (e.id.empty() ? "" : " [" + e.id + "]") << ": "
        << e.message << "\n";
    failures = true;
  }
  std::sort(load.samples.begin(), load.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return std::move(load.samples);
}

inline TemplateLibrary templates_for(const RunConfig& c) {
  return c.templates ? load_template_library(*c.templates) : TemplateLibrary{};
}

inline std::map<std::string, PredictionRecord> load_prediction_map(const fs::path& p) {
  std::map<std::string, PredictionRecord> out;
  for (auto& r : load_predictions(p)) out.emplace(r.id, std::move(r));
  return out;
}

}  // namespace detail

inline nlohmann::json feature_record(const std::string& id, ViewRole view, const FeatureVector& f) {
  nlohmann::json feats = nlohmann::json::object();
  const auto v = f.values();
  for (std::size_t i = 0; i < FeatureVector::kSize; ++i) feats[std::string(FeatureVector::kNames[i])] = v[i];
  return {{"id", id}, {"view", to_string(view)}, {"features", feats}};
}

/// Writes <out>/features.jsonl with four records per sample.
inline int cmd_features(const RunConfig& c, std::ostream& log = std::cerr) {
  detail::require_file(c.manifest, "manifest");
  detail::prepare_out(c, "features");
  bool failures = false;
  const auto samples = detail::load_samples(c, log, failures);
  std::vector<nlohmann::json> rows;
  for (const auto& s : samples) {
    try {
      const auto f = extract_all(decompose(s));
      for (auto r : kViewRoles) rows.push_back(feature_record(s.id, r, f.view(r)));
    } catch (const std::exception& e) {
      log << "error: [" << s.id << "] " << e.what() << "\n";
      failures = true;
    }
  }
  detail::write_jsonl(c.out / "features.jsonl", rows);
  log << "wrote " << rows.size() << " feature records to " << (c.out / "features.jsonl").string() << "\n";
  return failures ? kSampleFailures : kOk;
}

inline std::string member_file_name(ContentDomain d, std::uint64_t seed) {
  return std::string(to_string(d)) + "-s" + std::to_string(seed) + ".json";
}

/// Trains `members` seeds per domain into the model directory.
inline int cmd_train(const RunConfig& c, std::ostream& log = std::cerr) {
  detail::require_file(c.manifest, "manifest");
  if (c.members < 1) throw ConfigError("--members must be >= 1");
  detail::prepare_out(c, "train");
  bool failures = false;
  const auto samples = detail::load_samples(c, log, failures);
  std::vector<LabeledFeatures> labeled;
  for (const auto& s : samples) {
    if (!s.label) continue;
    try {
      labeled.push_back({s.id, s.domain, extract_all(decompose(s)), *s.label});
    } catch (const std::exception& e) {
      log << "error: [" << s.id << "] " << e.what() << "\n";
      failures = true;
    }
  }
  const auto dir = c.models_dir();
  fs::create_directories(dir);
  for (auto domain : {ContentDomain::Person, ContentDomain::Scene}) {
    const bool present = std::any_of(labeled.begin(), labeled.end(), [&](const auto& s) { return s.domain == domain; });
    if (!present) {
      log << "warning: no labeled " << to_string(domain) << " samples; skipping " << to_string(domain) << " members\n";
      continue;
    }
    for (int k = 0; k < c.members; ++k) {
      Hyperparams hp = c.hyperparams;
      hp.seed = c.seed + static_cast<std::uint64_t>(k);
      const auto name = member_file_name(domain, hp.seed);
      try {
        const auto model = train_linear(labeled, domain, hp, name.substr(0, name.size() - 5));
        save_model(dir / name, model);
        char acc[32];
        std::snprintf(acc, sizeof acc, "%.4f", model.val_accuracy);
        log << model.member_id << " val_accuracy=" << acc << "\n";
      } catch (const TrainingError& e) {
        log << "error: " << e.what() << "\n";
        failures = true;
        break;
      }
    }
  }
  return failures ? kSampleFailures : kOk;
}

inline nlohmann::json prediction_json(const std::string& id, ContentDomain domain, const RoutedPrediction& rp) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : rp.members) {
    members.push_back({{"member_id", m.member_id}, {"answer", to_string(m.preference)}, {"margin", m.margin}, {"tie", m.tie}});
  }
  return {{"id", id},
          {"domain", to_string(domain)},
          {"answer", to_string(rp.vote.preference)},
          {"tie", rp.vote.tie},
          {"votes", {{"A", rp.vote.votes_a}, {"B", rp.vote.votes_b}}},
          {"weights", {{"A", rp.vote.weight_a}, {"B", rp.vote.weight_b}}},
          {"members", members}};
}

/// Writes <out>/predictions.jsonl from the trained ensemble.
inline int cmd_predict(const RunConfig& c, std::ostream& log = std::cerr) {
  detail::require_file(c.manifest, "manifest");
  detail::require_dir(c.models_dir(), "models");
  const auto registry = load_model_dir(c.models_dir());
  if (registry.empty()) throw ConfigError("no model files in " + c.models_dir().string());
  detail::prepare_out(c, "predict");
  bool failures = false;
  const auto samples = detail::load_samples(c, log, failures);
  std::vector<nlohmann::json> rows;
  for (const auto& s : samples) {
    try {
      rows.push_back(prediction_json(s.id, s.domain, route_and_predict(s, registry, c.vote)));
    } catch (const std::exception& e) {
      log << "error: [" << s.id << "] " << e.what() << "\n";
      failures = true;
    }
  }
  const auto path = c.out / "predictions.jsonl";
  detail::write_jsonl(path, rows);
  log << "wrote " << rows.size() << " predictions to " << path.string() << "\n";
  return failures ? kSampleFailures : kOk;
}

/// The side a rationale argues for under the configured conditioning source.
inline std::optional<Preference> conditioned_side(ConditioningSource src, const PairSample& s,
                                                  const PredictionRecord* pred) {
  switch (src) {
    case ConditioningSource::Predicted:
      if (pred) return pred->answer;
      return std::nullopt;
    case ConditioningSource::GroundTruth: return s.label;
    case ConditioningSource::FixedWrong:
      if (pred) return flip(pred->answer);
      return std::nullopt;
  }
  return std::nullopt;
}

inline nlohmann::json violations_json(const ComplianceReport& rep) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : rep.violations) arr.push_back({{"kind", to_string(v.kind)}, {"line", v.line}, {"detail", v.detail}});
  return arr;
}

/// Builds prompts and rationales. Without an endpoint the built-in renderer writes the rationale.
inline int cmd_explain(const RunConfig& c, std::ostream& log = std::cerr, remote::Transport transport = {}) {
  detail::require_file(c.manifest, "manifest");
  const auto pred_path = c.predictions_path();
  const bool need_predictions = !(c.prompt_mode == PromptMode::AnswerAware && c.conditioning == ConditioningSource::GroundTruth);
  if (need_predictions) detail::require_file(pred_path, "predictions");
  if (c.scores) detail::require_file(*c.scores, "scores");
  if (c.templates) detail::require_file(*c.templates, "templates");
  if (c.endpoint) c.endpoint->validate();
  const auto templates = detail::templates_for(c);
  const auto scores = c.scores ? load_scores(*c.scores) : ScoreTable{};
  const auto preds = fs::is_regular_file(pred_path) ? detail::load_prediction_map(pred_path)
                                                     : std::map<std::string, PredictionRecord>{};
  detail::prepare_out(c, "explain");

  bool failures = false;
  const auto samples = detail::load_samples(c, log, failures);

  struct Work {
    const PairSample* sample;
    PromptBundle bundle;
    PairFeatures features;
    Preference side;  // decided answer (AnswerAware) or the ensemble's answer (renderer)
  };
  std::vector<Work> work;
  std::vector<nlohmann::json> prompt_rows;
  for (const auto& s : samples) {
    try {
      auto pit = preds.find(s.id);
      const PredictionRecord* pred = pit == preds.end() ? nullptr : &pit->second;
      const auto views = decompose(s);
      const auto features = extract_all(views);
      const auto& tmpl = select_template(s.domain, c.template_style, templates);
      std::optional<Conditioning> cond;
      const auto side = c.prompt_mode == PromptMode::AnswerAware
                            ? conditioned_side(c.conditioning, s, pred)
                            : (pred ? std::optional(pred->answer) : std::nullopt);
      if (c.prompt_mode == PromptMode::AnswerAware) {
        if (!side) {
          throw std::runtime_error(c.conditioning == ConditioningSource::GroundTruth ? "sample has no label"
                                                                                    : "no prediction for sample");
        }
        cond = Conditioning{c.conditioning, *side};
      }
      if (!side && !c.endpoint) throw std::runtime_error("no prediction for sample");
      // Remote runs without predictions let the model decide; the placeholder side is never rendered.
      const Preference decided = side ? *side : Preference::A;
      auto sit = scores.find(s.id);
      auto bundle = build_prompt(s, views, features, sit == scores.end() ? nullptr : &sit->second, c.prompt_mode, tmpl, cond);
      nlohmann::json pj = {{"id", s.id}, {"mode", to_string(c.prompt_mode)}, {"system", bundle.system_text}, {"user", bundle.user_text}};
      pj["conditioning"] = cond ? nlohmann::json{{"source", to_string(cond->source)}, {"answer", to_string(cond->preference)}}
                                : nlohmann::json(nullptr);
      prompt_rows.push_back(std::move(pj));
      work.push_back({&s, std::move(bundle), features, decided});
    } catch (const std::exception& e) {
      log << "error: [" << s.id << "] " << e.what() << "\n";
      failures = true;
    }
  }
  detail::write_jsonl(c.out / "prompts.jsonl", prompt_rows);

  // Raw model text per work item: remote completions, or composed renderer output.
  std::vector<std::optional<std::string>> raw(work.size());
  if (c.endpoint) {
    MllmClient client(*c.endpoint, std::move(transport));
    std::vector<PromptBundle> bundles;
    for (const auto& w : work) bundles.push_back(w.bundle);
    auto results = client.batch_complete(bundles);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (auto* text = std::get_if<std::string>(&results[i].result)) {
        raw[i] = *text;
      } else {
        log << "error: " << std::get<remote::RemoteError>(results[i].result).what() << "\n";
        failures = true;
      }
    }
  } else {
    for (std::size_t i = 0; i < work.size(); ++i) {
      const auto& w = work[i];
      const auto& tmpl = select_template(w.sample->domain, c.template_style, templates);
      Rationale r{render_reference_rationale(w.features, w.side, tmpl), std::nullopt};
      if (c.prompt_mode != PromptMode::AnswerAware) r.answer = w.side;
      raw[i] = compose_structured_output(r);
    }
  }

  std::vector<nlohmann::json> rows;
  std::size_t compliant = 0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (!raw[i]) continue;
    const auto& w = work[i];
    nlohmann::json row = {{"id", w.sample->id}, {"raw", *raw[i]}};
    try {
      const auto parsed = parse_structured_output(*raw[i]);
      const auto answer = c.prompt_mode == PromptMode::AnswerAware ? w.side : parsed.answer.value_or(w.side);
      if (c.prompt_mode != PromptMode::AnswerAware && !parsed.answer) {
        throw ParseError(ParseErrorKind::MalformedAnswer, "no <answer> tag in output");
      }
      const auto report = validate_template_compliance(parsed.thinking, select_template(w.sample->domain, c.template_style, templates));
      row["answer"] = to_string(answer);
      row["thinking"] = parsed.thinking;
      row["compliant"] = report.compliant();
      row["violations"] = violations_json(report);
      compliant += report.compliant() ? 1 : 0;
    } catch (const ParseError& e) {
      log << "error: [" << w.sample->id << "] " << e.what() << "\n";
      row["answer"] = to_string(w.side);
      row["parse_error"] = to_string(e.kind());
      row["compliant"] = false;
      failures = true;
    }
    rows.push_back(std::move(row));
  }
  const auto path = c.out / "rationales.jsonl";
  detail::write_jsonl(path, rows);
  log << "wrote " << rows.size() << " rationales to " << path.string() << " (" << compliant << " compliant)\n";
  return failures ? kSampleFailures : kOk;
}

/// Scores predictions (and rationales, when present) against the manifest.
inline int cmd_eval(const RunConfig& c, std::ostream& log = std::cerr) {
  detail::require_file(c.manifest, "manifest");
  fs::path pred_path = c.predictions_path();
  if (!c.predictions && fs::is_regular_file(c.out / "rationales.jsonl")) pred_path = c.out / "rationales.jsonl";
  detail::require_file(pred_path, "predictions");
  if (c.templates) detail::require_file(*c.templates, "templates");
  EvalOptions opts{c.template_style, detail::templates_for(c), c.weights};
  const auto predictions = load_predictions(pred_path);
  detail::prepare_out(c, "eval");
  bool failures = false;
  const auto samples = detail::load_samples(c, log, failures);
  EvalReport report;
  try {
    report = evaluate_run(predictions, samples, opts);
  } catch (const CoverageError& e) {
    log << "error: " << e.what() << "\n";
    return kSampleFailures;
  }
  const auto text = format_report_text(report);
  detail::write_text(c.out / "report.txt", text);
  std::vector<nlohmann::json> rows;
  for (const auto& r : report.per_sample) rows.push_back(sample_eval_json(r));
  detail::write_jsonl(c.out / "report.jsonl", rows);
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  const nlohmann::json summary = {{"samples", report.per_sample.size()},
                                  {"labeled", report.labeled},
                                  {"accuracy", opt(report.accuracy)},
                                  {"mean_bleu4", opt(report.mean_bleu4)},
                                  {"mean_rouge_l", opt(report.mean_rouge_l)},
                                  {"compliance_rate", opt(report.compliance_rate)},
                                  {"composite", report.composite}};
  detail::write_text(c.out / "summary.json", summary.dump(2) + "\n");
  log << text.substr(0, text.find("\n\n") + 1);
  return failures ? kSampleFailures : kOk;
}

/// Fetches learned IQA scores from the scoring service into <out>/scores.jsonl.
inline int cmd_scores(const RunConfig& c, std::ostream& log = std::cerr, remote::Transport transport = {}) {
  detail::require_file(c.manifest, "manifest");
  if (!c.score_url) throw ConfigError("--score-url is required for the scores command");
  ScoreServiceConfig sc;
  sc.url = *c.score_url;
  ScoreClient client(sc, std::move(transport));
  detail::prepare_out(c, "scores");
  bool failures = false;
  const auto samples = detail::load_samples(c, log, failures);
  const auto results = client.fetch_all(samples);
  ScoreTable table;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (auto* q = std::get_if<QualityScores>(&results[i])) {
      table[samples[i].id] = *q;
    } else {
      log << "error: " << std::get<remote::RemoteError>(results[i]).what() << "\n";
      failures = true;
    }
  }
  detail::write_text(c.out / "scores.jsonl", serialize_scores(table));
  return failures ? kSampleFailures : kOk;
}

/// Writes a labelled synthetic benchmark (PNGs + manifest.jsonl) into <out>.
inline int cmd_synth(const RunConfig& c, std::ostream& log = std::cerr) {
  if (c.synth_pairs < 1) throw ConfigError("--pairs must be >= 1");
  detail::prepare_out(c, "synth");
  synthetic::BenchmarkOptions opt;
  opt.pairs = c.synth_pairs;
  opt.seed = c.seed;
  const auto manifest = synthetic::write_benchmark(c.out, synthetic::make_benchmark(opt));
  log << "wrote " << c.synth_pairs << " pairs to " << manifest.string() << "\n";
  return kOk;
}

/// features -> train -> predict -> explain -> eval into one output directory.
inline int cmd_run(RunConfig c, std::ostream& log = std::cerr, remote::Transport transport = {}) {
  detail::require_file(c.manifest, "manifest");
  if (c.members < 1) throw ConfigError("--members must be >= 1");
  if (c.templates) detail::require_file(*c.templates, "templates");
  if (c.scores) detail::require_file(*c.scores, "scores");
  if (c.endpoint) c.endpoint->validate();
  if (!c.models) c.models = c.out / "models";
  int worst = kOk;
  auto step = [&](int code) { worst = std::max(worst, code); };
  step(cmd_features(c, log));
  step(cmd_train(c, log));
  step(cmd_predict(c, log));
  RunConfig explain = c;
  explain.predictions = c.out / "predictions.jsonl";
  step(cmd_explain(explain, log, std::move(transport)));
  RunConfig eval = c;
  eval.predictions = c.out / "rationales.jsonl";
  step(cmd_eval(eval, log));
  detail::write_text(c.out / "resolved_config.json", resolved_config_json(c, "run").dump(2) + "\n");
  return worst;
}

}  // namespace idiff::pipeline
