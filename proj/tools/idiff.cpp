// idiff command-line driver: features, train, predict, explain, eval, scores, synth, run.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "idiff/pipeline.hpp"

namespace pl = idiff::pipeline;

namespace {

struct Flags {
  std::string config;
  std::string manifest, out, models, predictions, scores, templates;
  std::string vote, template_style, prompt_mode, conditioning, weights;
  std::string endpoint_url, model_name, score_url;
  std::optional<double> timeout, temperature;
  std::optional<int> max_retries, max_tokens, members, steps;
  std::optional<std::size_t> max_in_flight, pairs;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run config; flags override its keys");
  sub->add_option("--manifest", f.manifest, "line-delimited sample manifest");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--models", f.models, "model directory (default <out>/models)");
  sub->add_option("--predictions", f.predictions, "predictions file");
  sub->add_option("--scores", f.scores, "learned IQA score file");
  sub->add_option("--templates", f.templates, "template library JSON");
  sub->add_option("--vote", f.vote, "equal|weighted");
  sub->add_option("--template", f.template_style, "generic|domain");
  sub->add_option("--prompt-mode", f.prompt_mode, "baseline|templated|templated-features|answer-aware");
  sub->add_option("--conditioning", f.conditioning, "predicted|ground-truth|fixed-wrong");
  sub->add_option("--weights", f.weights, "composite weights acc,bleu,rouge[,llm]");
  sub->add_option("--endpoint-url", f.endpoint_url, "chat-completions base URL; omit to use the built-in renderer");
  sub->add_option("--model-name", f.model_name, "model name sent to the endpoint");
  sub->add_option("--timeout", f.timeout, "endpoint timeout in seconds");
  sub->add_option("--max-retries", f.max_retries, "endpoint retry budget");
  sub->add_option("--max-in-flight", f.max_in_flight, "concurrent endpoint requests");
  sub->add_option("--temperature", f.temperature, "decoding temperature passed to the endpoint");
  sub->add_option("--max-tokens", f.max_tokens, "max tokens passed to the endpoint");
  sub->add_option("--score-url", f.score_url, "learned IQA scoring service URL");
  sub->add_option("--seed", f.seed, "base seed");
  sub->add_option("--members", f.members, "ensemble members per domain");
  sub->add_option("--steps", f.steps, "gradient steps per member");
  sub->add_option("--pairs", f.pairs, "synthetic pairs to generate");
}

pl::RunConfig resolve(const Flags& f) {
  pl::RunConfig c = f.config.empty() ? pl::RunConfig{} : pl::load_config(f.config);
  if (!f.manifest.empty()) c.manifest = f.manifest;
  if (!f.out.empty()) c.out = f.out;
  if (!f.models.empty()) c.models = f.models;
  if (!f.predictions.empty()) c.predictions = f.predictions;
  if (!f.scores.empty()) c.scores = f.scores;
  if (!f.templates.empty()) c.templates = f.templates;
  if (!f.vote.empty()) c.vote = pl::vote_from(f.vote);
  if (!f.template_style.empty()) c.template_style = pl::template_from(f.template_style);
  if (!f.prompt_mode.empty()) c.prompt_mode = pl::prompt_mode_from(f.prompt_mode);
  if (!f.conditioning.empty()) c.conditioning = pl::conditioning_from(f.conditioning);
  if (!f.weights.empty()) c.weights = pl::weights_from(f.weights);
  if (!f.score_url.empty()) c.score_url = f.score_url;
  if (!f.endpoint_url.empty()) {
    if (!c.endpoint) c.endpoint = idiff::EndpointConfig{};
    c.endpoint->base_url = f.endpoint_url;
  }
  if (c.endpoint) {
    auto& e = *c.endpoint;
    if (!f.model_name.empty()) e.model_name = f.model_name;
    if (f.timeout) e.timeout_seconds = *f.timeout;
    if (f.max_retries) e.max_retries = *f.max_retries;
    if (f.max_in_flight) e.max_in_flight = *f.max_in_flight;
    if (f.temperature) e.temperature = *f.temperature;
    if (f.max_tokens) e.max_tokens = *f.max_tokens;
    try {
      e.validate();
    } catch (const std::invalid_argument& ex) {
      throw pl::ConfigError(ex.what());
    }
  }
  if (f.seed) c.seed = *f.seed;
  if (f.members) c.members = *f.members;
  if (f.steps) c.hyperparams.steps = *f.steps;
  if (f.pairs) c.synth_pairs = *f.pairs;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise image quality comparison: features, answer model, rationales, evaluation"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"features", "extract the ten quality features for every view"},
      {"train", "train per-domain ensemble members"},
      {"predict", "route samples to their domain ensemble and vote"},
      {"explain", "build prompts and produce rationales (renderer or endpoint)"},
      {"eval", "score predictions and rationales against the manifest"},
      {"scores", "fetch learned IQA scores from a scoring service"},
      {"synth", "write a labelled synthetic benchmark"},
      {"run", "features, train, predict, explain and eval in one go"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pl::kConfigError;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const auto c = resolve(flags);
    if (cmd == "features") return pl::cmd_features(c);
    if (cmd == "train") return pl::cmd_train(c);
    if (cmd == "predict") return pl::cmd_predict(c);
    if (cmd == "explain") return pl::cmd_explain(c);
    if (cmd == "eval") return pl::cmd_eval(c);
    if (cmd == "scores") return pl::cmd_scores(c);
    if (cmd == "synth") return pl::cmd_synth(c);
    if (cmd == "run") return pl::cmd_run(c);
  } catch (const pl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pl::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::kConfigError;
  }
  return pl::kConfigError;
}
