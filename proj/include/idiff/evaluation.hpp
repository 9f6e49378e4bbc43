#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idiff/image.hpp"
#include "idiff/metrics.hpp"
#include "idiff/rationale.hpp"

namespace idiff {

/// One line of a predictions file: {id, answer, thinking?, tie?}.
struct PredictionRecord {
  std::string id;
  Preference answer = Preference::A;
  std::optional<std::string> thinking;
  bool tie = false;
};

inline PredictionRecord parse_prediction_record(const nlohmann::json& j) {
  PredictionRecord r;
  r.id = j.at("id").get<std::string>();
  const auto ans = parse_preference(j.at("answer").get<std::string>());
  if (!ans) throw std::runtime_error("prediction for " + r.id + " has answer other than A/B");
  r.answer = *ans;
  if (auto it = j.find("thinking"); it != j.end() && it->is_string()) r.thinking = it->get<std::string>();
  r.tie = j.value("tie", false);
  return r;
}

inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions file: " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_prediction_record(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct SampleEval {
  std::string id;
  Preference predicted = Preference::A;
  std::optional<Preference> label;
  std::optional<double> bleu4;
  std::optional<double> rouge_l;
  std::optional<bool> compliant;
  bool tie = false;
};

struct EvalReport {
  std::optional<double> accuracy;
  std::optional<double> mean_bleu4;
  std::optional<double> mean_rouge_l;
  std::optional<double> compliance_rate;
  double composite = 0;
  std::size_t labeled = 0;
  std::vector<SampleEval> per_sample;
};

class CoverageError : public std::runtime_error {
 public:
  explicit CoverageError(std::vector<std::string> missing)
      : std::runtime_error(message_for(missing)), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  static std::string message_for(const std::vector<std::string>& ids) {
    std::string msg = "missing predictions for labeled samples:";
    for (const auto& id : ids) msg += " " + id;
    return msg;
  }
  std::vector<std::string> missing_;
};

struct EvalOptions {
  TemplateStyle template_style = TemplateStyle::DomainSpecific;
  TemplateLibrary templates;
  MetricWeights weights;
};

/// Per-sample and aggregate metrics, rows in manifest order.
inline EvalReport evaluate_run(const std::vector<PredictionRecord>& predictions, const std::vector<PairSample>& manifest,
                               const EvalOptions& opts = {}) {
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.id, &p);

  std::vector<std::string> missing;
  for (const auto& s : manifest) {
    if (s.label && !by_id.count(s.id)) missing.push_back(s.id);
  }
  if (!missing.empty()) throw CoverageError(std::move(missing));

  EvalReport report;
  std::vector<Preference> preds, labels;
  double bleu_sum = 0, rouge_sum = 0;
  std::size_t text_n = 0, checked = 0, compliant_n = 0;
  for (const auto& s : manifest) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) continue;
    const auto& p = *it->second;
    SampleEval row;
    row.id = s.id;
    row.predicted = p.answer;
    row.label = s.label;
    row.tie = p.tie;
    if (s.label) {
      preds.push_back(p.answer);
      labels.push_back(*s.label);
    }
    if (p.thinking) {
      const auto& tmpl = select_template(s.domain, opts.template_style, opts.templates);
      row.compliant = validate_template_compliance(*p.thinking, tmpl).compliant();
      ++checked;
      compliant_n += *row.compliant ? 1 : 0;
      if (s.reference_rationale) {
        row.bleu4 = bleu4(*p.thinking, *s.reference_rationale);
        row.rouge_l = rouge_l(*p.thinking, *s.reference_rationale);
        bleu_sum += *row.bleu4;
        rouge_sum += *row.rouge_l;
        ++text_n;
      }
    }
    report.per_sample.push_back(std::move(row));
  }
  report.labeled = labels.size();
  if (!labels.empty()) report.accuracy = accuracy(preds, labels);
  if (text_n > 0) {
    report.mean_bleu4 = bleu_sum / static_cast<double>(text_n);
    report.mean_rouge_l = rouge_sum / static_cast<double>(text_n);
  }
  if (checked > 0) report.compliance_rate = static_cast<double>(compliant_n) / static_cast<double>(checked);
  if (report.accuracy || report.mean_bleu4) {
    report.composite = composite_score(report.accuracy, report.mean_bleu4, report.mean_rouge_l, std::nullopt, opts.weights);
  }
  return report;
}

inline nlohmann::json sample_eval_json(const SampleEval& r) {
  nlohmann::json j = {{"id", r.id}, {"predicted", to_string(r.predicted)}, {"tie", r.tie}};
  j["label"] = r.label ? nlohmann::json(to_string(*r.label)) : nlohmann::json(nullptr);
  j["bleu4"] = r.bleu4 ? nlohmann::json(*r.bleu4) : nlohmann::json(nullptr);
  j["rouge_l"] = r.rouge_l ? nlohmann::json(*r.rouge_l) : nlohmann::json(nullptr);
  j["compliant"] = r.compliant ? nlohmann::json(*r.compliant) : nlohmann::json(nullptr);
  return j;
}

/// Human-readable summary followed by one row per sample.
inline std::string format_report_text(const EvalReport& r) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "samples evaluated : " << r.per_sample.size() << "\n";
  out << "labeled samples   : " << r.labeled << "\n";
  out << "accuracy          : " << num(r.accuracy) << "\n";
  out << "mean BLEU-4       : " << num(r.mean_bleu4) << "\n";
  out << "mean ROUGE-L      : " << num(r.mean_rouge_l) << "\n";
  out << "compliance rate   : " << num(r.compliance_rate) << "\n";
  out << "composite         : " << num(r.composite) << "\n";
  std::size_t ties = 0;
  for (const auto& s : r.per_sample) ties += s.tie ? 1 : 0;
  out << "tie-broken votes  : " << ties << "\n\n";
  out << "id\tpredicted\tlabel\tbleu4\trouge_l\tcompliant\ttie\n";
  for (const auto& s : r.per_sample) {
    out << s.id << '\t' << to_string(s.predicted) << '\t' << (s.label ? std::string(to_string(*s.label)) : "-") << '\t'
        << num(s.bleu4) << '\t' << num(s.rouge_l) << '\t'
        << (s.compliant ? (*s.compliant ? "yes" : "no") : "-") << '\t' << (s.tie ? "yes" : "no") << '\n';
  }
  return out.str();
}

}  // namespace idiff
