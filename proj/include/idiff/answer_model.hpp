#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idiff/features.hpp"
#include "idiff/image.hpp"

namespace idiff {

/// Ten features for each of the global and crop views.
inline constexpr std::size_t kPairDim = 2 * FeatureVector::kSize;

using PairVector = std::array<double, kPairDim>;

class TrainingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VoteError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-feature statistics of single views; entries [0,10) describe global views, [10,20) crops.
struct Normalization {
  PairVector means{};
  PairVector stds{};

  static constexpr double kStdFloor = 1e-8;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// [global features | crop features] of one candidate.
inline PairVector side_vector(const PairFeatures& f, Preference side) {
  const auto g = (side == Preference::A ? f.a_global : f.b_global).values();
  const auto c = (side == Preference::A ? f.a_crop : f.b_crop).values();
  PairVector out{};
  std::copy(g.begin(), g.end(), out.begin());
  std::copy(c.begin(), c.end(), out.begin() + FeatureVector::kSize);
  return out;
}

/// Population mean/std over every candidate (both sides) in `samples`, stds floored.
inline Normalization fit_normalization(std::span<const PairFeatures> samples) {
  Normalization n;
  if (samples.empty()) {
    n.stds.fill(1.0);
    return n;
  }
  const double count = 2.0 * static_cast<double>(samples.size());
  for (const auto& f : samples) {
    for (auto side : {Preference::A, Preference::B}) {
      const auto v = side_vector(f, side);
      for (std::size_t i = 0; i < kPairDim; ++i) n.means[i] += v[i];
    }
  }
  for (auto& m : n.means) m /= count;
  for (const auto& f : samples) {
    for (auto side : {Preference::A, Preference::B}) {
      const auto v = side_vector(f, side);
      for (std::size_t i = 0; i < kPairDim; ++i) n.stds[i] += (v[i] - n.means[i]) * (v[i] - n.means[i]);
    }
  }
  for (auto& s : n.stds) s = std::max(std::sqrt(s / count), Normalization::kStdFloor);
  return n;
}

/// z(A) - z(B) per feature. Exactly zero for identical sides, exactly negated under an A/B swap.
inline PairVector pair_difference(const PairFeatures& f, const Normalization& norm) {
  const auto a = side_vector(f, Preference::A);
  const auto b = side_vector(f, Preference::B);
  PairVector d{};
  for (std::size_t i = 0; i < kPairDim; ++i) {
    d[i] = (a[i] - norm.means[i]) / norm.stds[i] - (b[i] - norm.means[i]) / norm.stds[i];
  }
  return d;
}

struct Hyperparams {
  double learning_rate = 1e-4;
  int steps = 10000;
  double l2 = 1e-4;
  double init_scale = 0.01;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// Portable deterministic helpers (std distributions are implementation-defined).
namespace detail {

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void portable_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

/// L2-regularized logistic regression over row vectors with +1/-1 targets.
/// loss(w) = mean_i log(1 + exp(-y_i w.x_i)) + (l2 / 2) |w|^2
struct LogisticProblem {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  double l2 = 0;

  double loss(std::span<const double> w) const {
    double acc = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double z = -targets[i] * dot(w, rows[i]);
      acc += z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    double reg = 0;
    for (double v : w) reg += v * v;
    return (rows.empty() ? 0.0 : acc / static_cast<double>(rows.size())) + 0.5 * l2 * reg;
  }

  std::vector<double> gradient(std::span<const double> w) const {
    std::vector<double> g(w.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double m = targets[i] * dot(w, rows[i]);
      // d/dm log(1 + e^{-m}) = -sigmoid(-m)
      const double s = m > 0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
      const double coef = -targets[i] * s;
      for (std::size_t k = 0; k < w.size(); ++k) g[k] += coef * rows[i][k];
    }
    const double inv_n = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
    for (std::size_t k = 0; k < w.size(); ++k) g[k] = g[k] * inv_n + l2 * w[k];
    return g;
  }

  static double dot(std::span<const double> w, const std::vector<double>& x) {
    double acc = 0;
    for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * x[k];
    return acc;
  }
};

/// Full-batch gradient descent from a seeded uniform(-init_scale, init_scale) start.
inline std::vector<double> fit_logistic(const LogisticProblem& problem, std::size_t dim, const Hyperparams& hp,
                                        std::mt19937_64& rng) {
  std::vector<double> w(dim);
  for (auto& v : w) v = hp.init_scale * (2.0 * detail::unit_uniform(rng) - 1.0);
  for (int step = 0; step < hp.steps; ++step) {
    const auto g = problem.gradient(w);
    for (std::size_t k = 0; k < dim; ++k) w[k] -= hp.learning_rate * g[k];
  }
  return w;
}

/// Per-domain linear preference classifier without bias: margin = w . pair_difference.
struct LinearPairwiseModel {
  static constexpr int kFormatVersion = 1;

  std::string member_id;
  ContentDomain domain = ContentDomain::Person;
  PairVector weights{};
  Normalization norm;
  double val_accuracy = 0;
  Hyperparams hyperparams;

  friend bool operator==(const LinearPairwiseModel&, const LinearPairwiseModel&) = default;
};

struct Prediction {
  Preference preference = Preference::A;
  double margin = 0;  // positive favours A
  std::string member_id;
  bool tie = false;  // margin was exactly zero
};

inline double margin_of(const LinearPairwiseModel& model, const PairFeatures& f) {
  const auto d = pair_difference(f, model.norm);
  double m = 0;
  for (std::size_t i = 0; i < kPairDim; ++i) m += model.weights[i] * d[i];
  return m;
}

inline Prediction predict(const LinearPairwiseModel& model, const PairFeatures& f) {
  const double m = margin_of(model, f);
  Prediction p;
  p.margin = m;
  p.member_id = model.member_id;
  p.tie = m == 0.0;
  p.preference = m < 0 ? Preference::B : Preference::A;
  return p;
}

struct LabeledFeatures {
  std::string id;
  ContentDomain domain = ContentDomain::Person;
  PairFeatures features;
  Preference label = Preference::A;
};

inline double target_of(Preference p) noexcept { return p == Preference::A ? 1.0 : -1.0; }

/// Seeded train/validation split of `n` items: (train indices, val indices).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                                   std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  detail::portable_shuffle(idx, rng);
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return {train, val};
}

/// Trains one member on the samples of `domain`. Deterministic given hp.seed.
inline LinearPairwiseModel train_linear(std::span<const LabeledFeatures> samples, ContentDomain domain,
                                        const Hyperparams& hp, std::string member_id) {
  std::vector<const LabeledFeatures*> subset;
  for (const auto& s : samples) {
    if (s.domain == domain) subset.push_back(&s);
  }
  if (subset.empty()) throw TrainingError("no training samples for domain " + std::string(to_string(domain)));
  const bool has_a = std::any_of(subset.begin(), subset.end(), [](auto* s) { return s->label == Preference::A; });
  const bool has_b = std::any_of(subset.begin(), subset.end(), [](auto* s) { return s->label == Preference::B; });
  if (!has_a || !has_b) {
    throw TrainingError("training set for domain " + std::string(to_string(domain)) + " contains a single class");
  }

  std::mt19937_64 rng(hp.seed);
  auto [train_idx, val_idx] = split_indices(subset.size(), hp.val_fraction, rng);

  std::vector<PairFeatures> train_features;
  for (auto i : train_idx) train_features.push_back(subset[i]->features);
  LinearPairwiseModel model;
  model.member_id = std::move(member_id);
  model.domain = domain;
  model.hyperparams = hp;
  model.norm = fit_normalization(train_features);

  LogisticProblem problem;
  problem.l2 = hp.l2;
  for (auto i : train_idx) {
    const auto d = pair_difference(subset[i]->features, model.norm);
    problem.rows.emplace_back(d.begin(), d.end());
    problem.targets.push_back(target_of(subset[i]->label));
  }
  const auto w = fit_logistic(problem, kPairDim, hp, rng);
  std::copy(w.begin(), w.end(), model.weights.begin());

  const auto& eval_idx = val_idx.empty() ? train_idx : val_idx;
  std::size_t correct = 0;
  for (auto i : eval_idx) correct += predict(model, subset[i]->features).preference == subset[i]->label ? 1 : 0;
  model.val_accuracy = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
  return model;
}

// ---------------------------------------------------------------------------
// Ensemble voting

enum class VoteMode { Equal, Weighted };

inline std::string_view to_string(VoteMode m) noexcept { return m == VoteMode::Equal ? "equal" : "weighted"; }

inline std::optional<VoteMode> parse_vote_mode(std::string_view s) noexcept {
  if (s == "equal") return VoteMode::Equal;
  if (s == "weighted") return VoteMode::Weighted;
  return std::nullopt;
}

struct EnsembleConfig {
  VoteMode mode = VoteMode::Equal;
  std::vector<std::string> members;
};

struct VoteResult {
  Preference preference = Preference::A;
  bool tie = false;  // the vote or a member margin needed the tie policy
  int votes_a = 0;
  int votes_b = 0;
  double weight_a = 0;
  double weight_b = 0;
};

/// Majority (Equal) or validation-accuracy-weighted (Weighted) vote over the configured members.
/// Ties go to the side of the member with the largest |margin|; if that is zero or contested, A.
inline VoteResult ensemble_vote(std::span<const Prediction> predictions, const EnsembleConfig& config,
                                const std::map<std::string, double>& val_accs) {
  if (config.members.empty()) throw VoteError("ensemble has no members");
  std::vector<const Prediction*> used;
  for (const auto& id : config.members) {
    auto it = std::find_if(predictions.begin(), predictions.end(), [&](const Prediction& p) { return p.member_id == id; });
    if (it == predictions.end()) throw VoteError("missing prediction for member '" + id + "'");
    used.push_back(&*it);
  }

  VoteResult r;
  // Accumulate in member-id order so weighted sums do not depend on input order.
  std::vector<const Prediction*> ordered = used;
  std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->member_id < y->member_id; });
  for (const auto* p : ordered) {
    double w = 1.0;
    if (config.mode == VoteMode::Weighted) {
      auto it = val_accs.find(p->member_id);
      if (it == val_accs.end()) throw VoteError("missing validation accuracy for member '" + p->member_id + "'");
      w = it->second;
    }
    if (p->preference == Preference::A) {
      ++r.votes_a;
      r.weight_a += w;
    } else {
      ++r.votes_b;
      r.weight_b += w;
    }
    r.tie = r.tie || p->tie;
  }

  const double score_a = config.mode == VoteMode::Equal ? r.votes_a : r.weight_a;
  const double score_b = config.mode == VoteMode::Equal ? r.votes_b : r.weight_b;
  if (score_a != score_b) {
    r.preference = score_a > score_b ? Preference::A : Preference::B;
    return r;
  }

  r.tie = true;
  double best = 0;
  for (const auto* p : used) best = std::max(best, std::abs(p->margin));
  bool best_a = false;
  bool best_b = false;
  for (const auto* p : used) {
    if (best > 0 && std::abs(p->margin) == best) (p->margin > 0 ? best_a : best_b) = true;
  }
  r.preference = (best_b && !best_a) ? Preference::B : Preference::A;
  return r;
}

// ---------------------------------------------------------------------------
// Domain routing

using ModelRegistry = std::map<ContentDomain, std::vector<LinearPairwiseModel>>;

struct RoutedPrediction {
  VoteResult vote;
  std::vector<Prediction> members;
};

inline RoutedPrediction route_and_predict(const PairFeatures& features, ContentDomain domain,
                                          const ModelRegistry& registry, VoteMode mode) {
  auto it = registry.find(domain);
  if (it == registry.end() || it->second.empty()) {
    throw VoteError("no models registered for domain " + std::string(to_string(domain)));
  }
  RoutedPrediction out;
  EnsembleConfig config{mode, {}};
  std::map<std::string, double> accs;
  for (const auto& m : it->second) {
    out.members.push_back(predict(m, features));
    config.members.push_back(m.member_id);
    accs[m.member_id] = m.val_accuracy;
  }
  out.vote = ensemble_vote(out.members, config, accs);
  return out;
}

inline RoutedPrediction route_and_predict(const PairSample& sample, const ModelRegistry& registry, VoteMode mode) {
  return route_and_predict(extract_all(decompose(sample)), sample.domain, registry, mode);
}

// ---------------------------------------------------------------------------
// Model files

inline nlohmann::json to_json(const LinearPairwiseModel& m) {
  const auto& hp = m.hyperparams;
  return {{"format_version", LinearPairwiseModel::kFormatVersion},
          {"member_id", m.member_id},
          {"domain", to_string(m.domain)},
          {"weights", m.weights},
          {"means", m.norm.means},
          {"stds", m.norm.stds},
          {"val_accuracy", m.val_accuracy},
          {"seed", hp.seed},
          {"hyperparams",
           {{"learning_rate", hp.learning_rate},
            {"steps", hp.steps},
            {"l2", hp.l2},
            {"init_scale", hp.init_scale},
            {"val_fraction", hp.val_fraction}}}};
}

inline LinearPairwiseModel model_from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != LinearPairwiseModel::kFormatVersion) {
    throw std::runtime_error("unsupported model format version");
  }
  LinearPairwiseModel m;
  m.member_id = j.at("member_id").get<std::string>();
  const auto domain = parse_domain(j.at("domain").get<std::string>());
  if (!domain) throw std::runtime_error("model has unknown domain");
  m.domain = *domain;
  auto read_vec = [&](const char* key, PairVector& out) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != kPairDim) throw std::runtime_error(std::string("model field '") + key + "' must have 20 entries");
    for (std::size_t i = 0; i < kPairDim; ++i) out[i] = arr[i].get<double>();
  };
  read_vec("weights", m.weights);
  read_vec("means", m.norm.means);
  read_vec("stds", m.norm.stds);
  for (double s : m.norm.stds) {
    if (!(s > 0)) throw std::runtime_error("model stds must be positive");
  }
  m.val_accuracy = j.at("val_accuracy").get<double>();
  if (m.val_accuracy < 0 || m.val_accuracy > 1) throw std::runtime_error("model val_accuracy out of [0,1]");
  const auto& hp = j.at("hyperparams");
  m.hyperparams.seed = j.at("seed").get<std::uint64_t>();
  m.hyperparams.learning_rate = hp.at("learning_rate").get<double>();
  m.hyperparams.steps = hp.at("steps").get<int>();
  m.hyperparams.l2 = hp.at("l2").get<double>();
  m.hyperparams.init_scale = hp.at("init_scale").get<double>();
  m.hyperparams.val_fraction = hp.at("val_fraction").get<double>();
  return m;
}

inline void save_model(const std::filesystem::path& path, const LinearPairwiseModel& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write model file: " + path.string());
  out << to_json(m).dump(2) << '\n';
}

inline LinearPairwiseModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path.string());
  return model_from_json(nlohmann::json::parse(in));
}

/// Loads every *.json model in `dir`, grouped by domain and sorted by member id.
inline ModelRegistry load_model_dir(const std::filesystem::path& dir) {
  ModelRegistry reg;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto m = load_model(f);
    reg[m.domain].push_back(std::move(m));
  }
  for (auto& [_, models] : reg) {
    std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) { return a.member_id < b.member_id; });
  }
  return reg;
}

// ---------------------------------------------------------------------------
// Unsplit baseline: features of the concatenated pair images, no L/R decomposition.

struct UnsplitSample {
  FeatureVector global_pair;
  FeatureVector crop_pair;
  ContentDomain domain = ContentDomain::Person;
  Preference label = Preference::A;
};

inline UnsplitSample unsplit_features(const PairSample& s) {
  return {extract_features(s.global_pair), extract_features(s.crop_pair), s.domain, s.label.value_or(Preference::A)};
}

/// Logistic model with bias over z-scored concatenated-image features.
struct UnsplitModel {
  PairVector means{};
  PairVector stds{};
  std::vector<double> weights;  // kPairDim weights followed by the bias

  PairVector standardize(const UnsplitSample& s) const {
    PairVector v{};
    const auto g = s.global_pair.values();
    const auto c = s.crop_pair.values();
    std::copy(g.begin(), g.end(), v.begin());
    std::copy(c.begin(), c.end(), v.begin() + FeatureVector::kSize);
    for (std::size_t i = 0; i < kPairDim; ++i) v[i] = (v[i] - means[i]) / stds[i];
    return v;
  }

  Preference predict(const UnsplitSample& s) const {
    const auto v = standardize(s);
    double m = weights[kPairDim];
    for (std::size_t i = 0; i < kPairDim; ++i) m += weights[i] * v[i];
    return m < 0 ? Preference::B : Preference::A;
  }
};

inline UnsplitModel train_unsplit(std::span<const UnsplitSample> samples, const Hyperparams& hp) {
  if (samples.empty()) throw TrainingError("no training samples");
  UnsplitModel model;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    const auto g = s.global_pair.values();
    const auto c = s.crop_pair.values();
    for (std::size_t i = 0; i < FeatureVector::kSize; ++i) {
      model.means[i] += g[i] / n;
      model.means[i + FeatureVector::kSize] += c[i] / n;
    }
  }
  for (const auto& s : samples) {
    const auto g = s.global_pair.values();
    const auto c = s.crop_pair.values();
    for (std::size_t i = 0; i < FeatureVector::kSize; ++i) {
      model.stds[i] += (g[i] - model.means[i]) * (g[i] - model.means[i]) / n;
      const auto j = i + FeatureVector::kSize;
      model.stds[j] += (c[i] - model.means[j]) * (c[i] - model.means[j]) / n;
    }
  }
  for (auto& s : model.stds) s = std::max(std::sqrt(s), Normalization::kStdFloor);

  LogisticProblem problem;
  problem.l2 = hp.l2;
  for (const auto& s : samples) {
    const auto v = model.standardize(s);
    std::vector<double> row(v.begin(), v.end());
    row.push_back(1.0);
    problem.rows.push_back(std::move(row));
    problem.targets.push_back(target_of(s.label));
  }
  std::mt19937_64 rng(hp.seed);
  model.weights = fit_logistic(problem, kPairDim + 1, hp, rng);
  return model;
}

}  // namespace idiff
