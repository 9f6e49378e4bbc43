#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "idiff/image.hpp"

namespace idiff {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double accuracy(std::span<const Preference> preds, std::span<const Preference> labels) {
  if (preds.size() != labels.size()) throw MetricError("accuracy: prediction/label length mismatch");
  if (preds.empty()) throw MetricError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

/// Lowercased runs of ASCII alphanumerics.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace detail

/// Sentence BLEU-4, uniform weights, brevity penalty, add-one smoothing of zero-match orders n >= 2.
inline double bleu4(std::string_view candidate, std::string_view reference) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (cand.empty()) return 0.0;
  double log_sum = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cc = detail::ngram_counts(cand, n);
    const auto rc = detail::ngram_counts(ref, n);
    double matches = 0;
    for (const auto& [gram, count] : cc) {
      auto it = rc.find(gram);
      if (it != rc.end()) matches += std::min(count, it->second);
    }
    double total = cand.size() >= n ? static_cast<double>(cand.size() - n + 1) : 0.0;
    if (matches == 0) {
      if (n == 1) return 0.0;
      matches += 1;
      total += 1;
    }
    log_sum += 0.25 * std::log(matches / total);
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum);
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS F-measure with beta = 1.2.
inline double rouge_l(std::string_view candidate, std::string_view reference) {
  constexpr double kBeta = 1.2;
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0) return 0.0;
  const double r = lcs / static_cast<double>(ref.size());
  const double p = lcs / static_cast<double>(cand.size());
  const double b2 = kBeta * kBeta;
  return (1 + b2) * r * p / (r + b2 * p);
}

struct MetricWeights {
  double accuracy = 1;
  double bleu4 = 1;
  double rouge_l = 1;
  double llm = 1;
};

/// Weighted mean over the components that are present.
inline double composite_score(std::optional<double> acc, std::optional<double> bleu, std::optional<double> rouge,
                              std::optional<double> llm_score, const MetricWeights& w) {
  const std::pair<std::optional<double>, double> parts[] = {
      {acc, w.accuracy}, {bleu, w.bleu4}, {rouge, w.rouge_l}, {llm_score, w.llm}};
  double num = 0;
  double den = 0;
  for (const auto& [value, weight] : parts) {
    if (weight < 0) throw MetricError("composite weights must be nonnegative");
    if (!value) continue;
    num += weight * *value;
    den += weight;
  }
  if (den <= 0) throw MetricError("composite weights of the present components sum to zero");
  return num / den;
}

}  // namespace idiff
