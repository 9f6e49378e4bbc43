#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "idiff/features.hpp"
#include "idiff/image.hpp"
#include "idiff/iqa_scores.hpp"

namespace idiff {

// ---------------------------------------------------------------------------
// Templates

enum class TemplateDomain { Person, Scene, Generic };
enum class TemplateStyle { DomainSpecific, Generic };
enum class ViewKind { Global, Crop };

inline std::string_view to_string(TemplateDomain d) noexcept {
  switch (d) {
    case TemplateDomain::Person: return "person";
    case TemplateDomain::Scene: return "scene";
    case TemplateDomain::Generic: return "generic";
  }
  return "";
}

inline std::optional<TemplateDomain> parse_template_domain(std::string_view s) noexcept {
  if (s == "person") return TemplateDomain::Person;
  if (s == "scene") return TemplateDomain::Scene;
  if (s == "generic") return TemplateDomain::Generic;
  return std::nullopt;
}

inline std::optional<TemplateStyle> parse_template_style(std::string_view s) noexcept {
  if (s == "domain") return TemplateStyle::DomainSpecific;
  if (s == "generic") return TemplateStyle::Generic;
  return std::nullopt;
}

/// One comparison line: a region, a metric, and the view feature that decides which side it favours.
struct TemplateSlot {
  std::string region;
  std::string metric;
  ViewKind view = ViewKind::Global;
  std::string feature;  // one of FeatureVector::kNames
  bool higher_is_better = true;
  std::string phrase;  // "finer skin texture" -> "Image A (Left) shows finer skin texture than ..."

  friend bool operator==(const TemplateSlot&, const TemplateSlot&) = default;
};

struct Template {
  TemplateDomain domain = TemplateDomain::Generic;
  std::vector<TemplateSlot> slots;
  int min_lines = 4;
  int max_lines = 7;

  friend bool operator==(const Template&, const Template&) = default;
};

class TemplateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < FeatureVector::kNames.size(); ++i) {
    if (FeatureVector::kNames[i] == name) return i;
  }
  throw TemplateError("unknown feature '" + std::string(name) + "'");
}

inline void validate_template(const Template& t) {
  if (t.min_lines < 1 || t.min_lines > t.max_lines) throw TemplateError("template line bounds are inconsistent");
  if (static_cast<int>(t.slots.size()) < t.min_lines) throw TemplateError("template has fewer slots than min_lines");
  static const std::regex word(R"([A-Z][A-Za-z]*)");
  for (const auto& s : t.slots) {
    if (!std::regex_match(s.region, word) || !std::regex_match(s.metric, word)) {
      throw TemplateError("slot region/metric must be single capitalized words: " + s.region + " " + s.metric);
    }
    feature_index(s.feature);
  }
}

namespace detail {

inline TemplateSlot slot(std::string region, std::string metric, ViewKind view, std::string feature, bool higher,
                         std::string phrase) {
  return {std::move(region), std::move(metric), view, std::move(feature), higher, std::move(phrase)};
}

}  // namespace detail

inline Template builtin_template(TemplateDomain domain) {
  using detail::slot;
  Template t;
  t.domain = domain;
  switch (domain) {
    case TemplateDomain::Person:
      t.slots = {
          slot("Face", "Texture", ViewKind::Crop, "high_freq_ratio", true, "more natural and detailed skin texture"),
          slot("Face", "Sharpness", ViewKind::Crop, "tenengrad", true, "sharper facial features"),
          slot("Face", "Noise", ViewKind::Crop, "noise_std", false, "lower noise in the facial region"),
          slot("Hair", "Texture", ViewKind::Crop, "edge_density", true, "finer hair strands and cleaner hair edges"),
          slot("Clothing", "Texture", ViewKind::Global, "edge_density", true, "better preserved clothing texture"),
          slot("Global", "Sharpness", ViewKind::Global, "laplacian_var", true, "higher overall sharpness"),
          slot("Global", "Naturalness", ViewKind::Global, "over_exposure_ratio", false, "more natural tonal rendering"),
      };
      break;
    case TemplateDomain::Scene:
      t.slots = {
          slot("Global", "Sharpness", ViewKind::Global, "tenengrad", true, "higher overall sharpness and clarity"),
          slot("Global", "Noise", ViewKind::Global, "noise_std", false, "better noise control"),
          slot("Global", "Texture", ViewKind::Global, "high_freq_ratio", true, "finer background texture"),
          slot("Architecture", "Edges", ViewKind::Crop, "edge_density", true, "crisper architectural edges"),
          slot("Foliage", "Texture", ViewKind::Crop, "laplacian_var", true, "richer foliage detail"),
          slot("Text", "Clarity", ViewKind::Crop, "tenengrad", true, "clearer text and signage"),
          slot("Global", "Artifacts", ViewKind::Global, "over_exposure_ratio", false, "fewer clipping artifacts"),
      };
      break;
    case TemplateDomain::Generic:
      t.slots = {
          slot("Global", "Sharpness", ViewKind::Global, "tenengrad", true, "higher overall sharpness"),
          slot("Global", "Noise", ViewKind::Global, "noise_std", false, "lower noise"),
          slot("Global", "Texture", ViewKind::Global, "high_freq_ratio", true, "finer texture detail"),
          slot("Local", "Sharpness", ViewKind::Crop, "tenengrad", true, "sharper local detail"),
          slot("Local", "Detail", ViewKind::Crop, "laplacian_var", true, "richer local detail"),
          slot("Global", "Exposure", ViewKind::Global, "under_exposure_ratio", false, "fewer crushed shadows"),
          slot("Color", "Rendition", ViewKind::Global, "colorfulness", true, "more vivid color rendition"),
      };
      break;
  }
  return t;
}

/// The set of templates in use; defaults to the built-in inventory.
struct TemplateLibrary {
  Template person = builtin_template(TemplateDomain::Person);
  Template scene = builtin_template(TemplateDomain::Scene);
  Template generic = builtin_template(TemplateDomain::Generic);

  const Template& get(TemplateDomain d) const {
    switch (d) {
      case TemplateDomain::Person: return person;
      case TemplateDomain::Scene: return scene;
      case TemplateDomain::Generic: return generic;
    }
    return generic;
  }
};

inline const Template& select_template(ContentDomain domain, TemplateStyle style, const TemplateLibrary& lib) {
  if (style == TemplateStyle::Generic) return lib.generic;
  return lib.get(domain == ContentDomain::Person ? TemplateDomain::Person : TemplateDomain::Scene);
}

inline Template select_template(ContentDomain domain, TemplateStyle style) {
  return select_template(domain, style, TemplateLibrary{});
}

inline nlohmann::json template_library_json(const TemplateLibrary& lib) {
  nlohmann::json templates = nlohmann::json::array();
  for (auto d : {TemplateDomain::Person, TemplateDomain::Scene, TemplateDomain::Generic}) {
    const auto& t = lib.get(d);
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& s : t.slots) {
      slots.push_back({{"region", s.region},
                       {"metric", s.metric},
                       {"view", s.view == ViewKind::Global ? "global" : "crop"},
                       {"feature", s.feature},
                       {"higher_is_better", s.higher_is_better},
                       {"phrase", s.phrase}});
    }
    templates.push_back({{"domain", to_string(d)}, {"min_lines", t.min_lines}, {"max_lines", t.max_lines}, {"slots", slots}});
  }
  return {{"format_version", 1}, {"templates", templates}};
}

/// Reads a template file. Domains not listed keep their built-in templates.
inline TemplateLibrary load_template_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TemplateError("cannot open template file: " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (doc.value("format_version", 0) != 1) throw TemplateError("unsupported template file version");
  TemplateLibrary lib;
  for (const auto& tj : doc.at("templates")) {
    const auto domain = parse_template_domain(tj.at("domain").get<std::string>());
    if (!domain) throw TemplateError("unknown template domain");
    Template t;
    t.domain = *domain;
    t.min_lines = tj.value("min_lines", 4);
    t.max_lines = tj.value("max_lines", 7);
    for (const auto& sj : tj.at("slots")) {
      const auto view = sj.at("view").get<std::string>();
      if (view != "global" && view != "crop") throw TemplateError("slot view must be global or crop");
      t.slots.push_back({sj.at("region").get<std::string>(), sj.at("metric").get<std::string>(),
                         view == "global" ? ViewKind::Global : ViewKind::Crop, sj.at("feature").get<std::string>(),
                         sj.at("higher_is_better").get<bool>(), sj.at("phrase").get<std::string>()});
    }
    validate_template(t);
    (*domain == TemplateDomain::Person ? lib.person : *domain == TemplateDomain::Scene ? lib.scene : lib.generic) = t;
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Feature block

/// Four significant digits, trailing zeros kept ("%#.4g"); negative zero printed as zero.
inline std::string sig4(double v, bool with_sign = false) {
  if (v == 0) v = 0.0;
  char buf[48];
  std::snprintf(buf, sizeof buf, with_sign ? "%+#.4g" : "%#.4g", v);
  return buf;
}

inline std::string format_feature_block(const PairFeatures& f, const QualityScores* scores) {
  std::string out;
  char line[160];
  auto section = [&](const char* title, const FeatureVector& a, const FeatureVector& b) {
    out += title;
    out += '\n';
    std::snprintf(line, sizeof line, "%-22s %12s %12s %12s\n", "feature", "A", "B", "A-B");
    out += line;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < FeatureVector::kSize; ++i) {
      std::snprintf(line, sizeof line, "%-22s %12s %12s %12s\n", std::string(FeatureVector::kNames[i]).c_str(),
                    sig4(av[i]).c_str(), sig4(bv[i]).c_str(), sig4(av[i] - bv[i], true).c_str());
      out += line;
    }
  };
  section("[global pair]", f.a_global, f.b_global);
  section("[crop pair]", f.a_crop, f.b_crop);

  out += "[learned IQA scores]\n";
  std::snprintf(line, sizeof line, "%-22s %12s %12s %12s\n", "metric", "A", "B", "A-B");
  out += line;
  using Getter = std::optional<double> MetricScores::*;
  const std::pair<const char*, Getter> metrics[] = {
      {"liqe", &MetricScores::liqe}, {"qalign", &MetricScores::qalign}, {"sama", &MetricScores::sama}};
  const std::pair<const char*, std::pair<ViewRole, ViewRole>> pairs[] = {
      {"global", {ViewRole::AGlobal, ViewRole::BGlobal}}, {"crop", {ViewRole::ACrop, ViewRole::BCrop}}};
  for (const auto& [pair_name, roles] : pairs) {
    for (const auto& [metric_name, member] : metrics) {
      auto value = [&](ViewRole r) -> std::optional<double> {
        if (!scores) return std::nullopt;
        const auto* s = scores->find(r);
        return s ? (*s).*member : std::nullopt;
      };
      const auto a = value(roles.first);
      const auto b = value(roles.second);
      const std::string label = std::string(metric_name) + " (" + pair_name + ")";
      std::snprintf(line, sizeof line, "%-22s %12s %12s %12s\n", label.c_str(), a ? sig4(*a).c_str() : "n/a",
                    b ? sig4(*b).c_str() : "n/a", (a && b) ? sig4(*a - *b, true).c_str() : "n/a");
      out += line;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompts

enum class PromptMode { Baseline, Templated, TemplatedFeatures, AnswerAware };
enum class ConditioningSource { Predicted, GroundTruth, FixedWrong };

inline std::string_view to_string(PromptMode m) noexcept {
  switch (m) {
    case PromptMode::Baseline: return "baseline";
    case PromptMode::Templated: return "templated";
    case PromptMode::TemplatedFeatures: return "templated-features";
    case PromptMode::AnswerAware: return "answer-aware";
  }
  return "";
}

inline std::optional<PromptMode> parse_prompt_mode(std::string_view s) noexcept {
  for (auto m : {PromptMode::Baseline, PromptMode::Templated, PromptMode::TemplatedFeatures, PromptMode::AnswerAware}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

inline std::string_view to_string(ConditioningSource s) noexcept {
  switch (s) {
    case ConditioningSource::Predicted: return "predicted";
    case ConditioningSource::GroundTruth: return "ground-truth";
    case ConditioningSource::FixedWrong: return "fixed-wrong";
  }
  return "";
}

inline std::optional<ConditioningSource> parse_conditioning(std::string_view s) noexcept {
  for (auto c : {ConditioningSource::Predicted, ConditioningSource::GroundTruth, ConditioningSource::FixedWrong}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

struct Conditioning {
  ConditioningSource source = ConditioningSource::Predicted;
  Preference preference = Preference::A;
};

struct PromptBundle {
  std::string sample_id;
  std::string system_text;
  std::string user_text;
  std::vector<ImageBuffer> images;  // a_global, a_crop, b_global, b_crop
  PromptMode mode = PromptMode::Baseline;
  std::optional<Conditioning> conditioning;
};

class PromptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kSystemPrompt =
    "You are an expert in professional image quality assessment. You compare two photographs of the same content "
    "and explain, region by region, which one has better perceptual quality.";

/// "Ground truth: Left is better." / "Ground truth: Right is better."
inline std::string conditioning_sentence(Preference p) {
  return std::string("Ground truth: ") + (p == Preference::A ? "Left" : "Right") + " is better.";
}

inline std::string template_clause(const Template& t) {
  std::string out = "Template constraints:\n";
  out += "- Write between " + std::to_string(t.min_lines) + " and " + std::to_string(t.max_lines) +
         " comparison lines, one per line, each about one region and one metric, in the form "
         "\"<Region> <Metric>: Image A (Left) ...\" or \"<Region> <Metric>: Image B (Right) ...\".\n";
  out += "- Preferred regions and metrics:";
  for (std::size_t i = 0; i < t.slots.size(); ++i) {
    out += (i == 0 ? " " : ", ") + t.slots[i].region + " " + t.slots[i].metric;
  }
  out += ".\n";
  out += "- End with one global summary line starting with \"Overall: Image A (Left)\" or \"Overall: Image B (Right)\".\n";
  return out;
}

inline PromptBundle build_prompt(const PairSample& sample, const ViewSet& views, const PairFeatures& features,
                                 const QualityScores* scores, PromptMode mode, const Template& tmpl,
                                 std::optional<Conditioning> conditioning = std::nullopt) {
  if (mode == PromptMode::AnswerAware && !conditioning) throw PromptError("answer-aware prompts require conditioning");
  if (mode != PromptMode::AnswerAware && conditioning) throw PromptError("conditioning is only valid in answer-aware mode");

  PromptBundle b;
  b.sample_id = sample.id;
  b.system_text = std::string(kSystemPrompt);
  b.mode = mode;
  b.conditioning = conditioning;
  b.images = {views.a_global, views.a_crop, views.b_global, views.b_crop};

  std::string& u = b.user_text;
  u = "Compare the perceptual quality of two candidate images of the same " +
      std::string(sample.domain == ContentDomain::Person ? "person" : "scene") +
      ". Image A is the left candidate and Image B is the right candidate. The attached images are, in order: "
      "Image A global view, Image A local crop, Image B global view, Image B local crop.\n";
  if (mode == PromptMode::AnswerAware) {
    u += conditioning_sentence(conditioning->preference) + "\n";
    u += "Write only the reasoning that supports this conclusion inside <thinking></thinking>. "
         "Do not restate the final decision as a separate tag.\n";
  } else {
    u += "First write your reasoning inside <thinking></thinking>, then give the preferred image as A or B inside "
         "<answer></answer>.\n";
  }
  if (mode == PromptMode::Baseline) return b;
  u += template_clause(tmpl);
  if (mode == PromptMode::Templated) return b;
  u += "Quality features (A = left, B = right):\n";
  u += format_feature_block(features, scores);
  return b;
}

// ---------------------------------------------------------------------------
// Reference rationale renderer

inline const char* side_word(Preference p) noexcept { return p == Preference::A ? "Left" : "Right"; }

inline std::string image_ref(Preference p) {
  return std::string("Image ") + std::string(to_string(p)) + " (" + side_word(p) + ")";
}

/// Slot-filled rationale: 4-7 comparison lines plus a closing "Overall:" summary naming `preference`.
inline std::string render_reference_rationale(const PairFeatures& f, Preference preference, const Template& tmpl) {
  validate_template(tmpl);
  struct Evidence {
    const TemplateSlot* slot;
    Preference favoured;
    double a;
    double b;
  };
  std::vector<Evidence> all;
  for (const auto& s : tmpl.slots) {
    const auto idx = feature_index(s.feature);
    const double a = (s.view == ViewKind::Global ? f.a_global : f.a_crop).values()[idx];
    const double b = (s.view == ViewKind::Global ? f.b_global : f.b_crop).values()[idx];
    const double e = (a - b) * (s.higher_is_better ? 1.0 : -1.0);
    const Preference favoured = e > 0 ? Preference::A : e < 0 ? Preference::B : preference;
    all.push_back({&s, favoured, a, b});
  }

  std::vector<bool> keep(all.size(), false);
  int kept = 0;
  for (std::size_t i = 0; i < all.size() && kept < tmpl.max_lines; ++i) {
    if (all[i].favoured == preference) {
      keep[i] = true;
      ++kept;
    }
  }
  for (std::size_t i = 0; i < all.size() && kept < tmpl.min_lines; ++i) {
    if (!keep[i]) {
      keep[i] = true;
      ++kept;
    }
  }

  std::string out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!keep[i]) continue;
    const auto& ev = all[i];
    out += ev.slot->region + " " + ev.slot->metric + ": " + image_ref(ev.favoured) + " shows " + ev.slot->phrase +
           " than " + image_ref(flip(ev.favoured)) + " (" + ev.slot->feature + " A=" + sig4(ev.a) +
           ", B=" + sig4(ev.b) + ").\n";
  }
  out += "Overall: " + image_ref(preference) + " is preferred, with better overall perceptual quality than " +
         image_ref(flip(preference)) + ".";
  return out;
}

// ---------------------------------------------------------------------------
// Structured output

struct Rationale {
  std::string thinking;
  std::optional<Preference> answer;

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

enum class ParseErrorKind { MissingThinking, MalformedAnswer, DuplicateAnswer };

inline std::string_view to_string(ParseErrorKind k) noexcept {
  switch (k) {
    case ParseErrorKind::MissingThinking: return "missing_thinking";
    case ParseErrorKind::MalformedAnswer: return "malformed_answer";
    case ParseErrorKind::DuplicateAnswer: return "duplicate_answer";
  }
  return "";
}

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

inline std::string compose_structured_output(const Rationale& r) {
  std::string out = "<thinking>" + r.thinking + "</thinking>";
  if (r.answer) out += "<answer>" + std::string(to_string(*r.answer)) + "</answer>";
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Extracts the first <thinking> block and the optional <answer> token; text outside the tags is ignored.
inline Rationale parse_structured_output(std::string_view text) {
  static constexpr std::string_view kOpen = "<thinking>";
  static constexpr std::string_view kClose = "</thinking>";
  static constexpr std::string_view kAnsOpen = "<answer>";
  static constexpr std::string_view kAnsClose = "</answer>";

  const auto open = text.find(kOpen);
  if (open == std::string_view::npos) throw ParseError(ParseErrorKind::MissingThinking, "no <thinking> tag");
  const auto body = open + kOpen.size();
  const auto close = text.find(kClose, body);
  if (close == std::string_view::npos) throw ParseError(ParseErrorKind::MissingThinking, "unterminated <thinking> block");

  Rationale r;
  r.thinking = std::string(text.substr(body, close - body));

  // Answer tags are only looked for outside the thinking block.
  std::string outside = std::string(text.substr(0, open)) + "\n" + std::string(text.substr(close + kClose.size()));
  const auto a_open = outside.find(kAnsOpen);
  if (a_open == std::string::npos) return r;
  const auto a_body = a_open + kAnsOpen.size();
  const auto a_close = outside.find(kAnsClose, a_body);
  if (a_close == std::string::npos) throw ParseError(ParseErrorKind::MalformedAnswer, "unterminated <answer> tag");
  if (outside.find(kAnsOpen, a_close) != std::string::npos) {
    throw ParseError(ParseErrorKind::DuplicateAnswer, "more than one <answer> tag");
  }
  const auto token = detail::trim(std::string_view(outside).substr(a_body, a_close - a_body));
  const auto pref = parse_preference(token);
  if (!pref) throw ParseError(ParseErrorKind::MalformedAnswer, "answer token '" + std::string(token) + "' is not A or B");
  r.answer = *pref;
  return r;
}

// ---------------------------------------------------------------------------
// Template compliance

enum class ViolationKind { LineCount, BadLine, SideMismatch, MissingSummary };

inline std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::LineCount: return "line_count";
    case ViolationKind::BadLine: return "bad_line";
    case ViolationKind::SideMismatch: return "side_mismatch";
    case ViolationKind::MissingSummary: return "missing_summary";
  }
  return "";
}

struct Violation {
  ViolationKind kind;
  int line = 0;  // 1-based among non-empty lines; 0 for whole-text issues
  std::string detail;
};

struct ComplianceReport {
  int comparison_lines = 0;
  std::vector<Violation> violations;

  bool compliant() const noexcept { return violations.empty(); }
};

inline ComplianceReport validate_template_compliance(std::string_view thinking, const Template& tmpl) {
  static const std::regex comparison(R"(^([A-Z][A-Za-z]*) ([A-Z][A-Za-z]*): Image (A|B) \((Left|Right)\)(\s.*)?$)");
  static const std::regex summary(R"(^Overall: Image (A|B) \((Left|Right)\)(\s.*)?$)");

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= thinking.size()) {
    auto end = thinking.find('\n', start);
    if (end == std::string_view::npos) end = thinking.size();
    const auto t = detail::trim(thinking.substr(start, end - start));
    if (!t.empty()) lines.emplace_back(t);
    start = end + 1;
  }

  ComplianceReport report;
  auto side_consistent = [](const std::smatch& m, std::size_t letter, std::size_t side) {
    return (m[letter] == "A") == (m[side] == "Left");
  };

  std::smatch m;
  const bool has_summary = !lines.empty() && std::regex_match(lines.back(), m, summary);
  if (!has_summary) {
    report.violations.push_back({ViolationKind::MissingSummary, static_cast<int>(lines.size()),
                                 "final line is not an \"Overall: Image X (Side)\" summary"});
  } else if (!side_consistent(m, 1, 2)) {
    report.violations.push_back({ViolationKind::SideMismatch, static_cast<int>(lines.size()), lines.back()});
  }
  const std::size_t n_comparison = has_summary ? lines.size() - 1 : lines.size();
  for (std::size_t i = 0; i < n_comparison; ++i) {
    if (!std::regex_match(lines[i], m, comparison)) {
      report.violations.push_back({ViolationKind::BadLine, static_cast<int>(i + 1), lines[i]});
    } else if (!side_consistent(m, 3, 4)) {
      report.violations.push_back({ViolationKind::SideMismatch, static_cast<int>(i + 1), lines[i]});
    }
  }
  report.comparison_lines = static_cast<int>(n_comparison);
  if (report.comparison_lines < tmpl.min_lines || report.comparison_lines > tmpl.max_lines) {
    report.violations.push_back({ViolationKind::LineCount, 0,
                                 std::to_string(report.comparison_lines) + " comparison lines, expected " +
                                     std::to_string(tmpl.min_lines) + "-" + std::to_string(tmpl.max_lines)});
  }
  return report;
}

}  // namespace idiff
