#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sentinel/config.hpp"
#include "sentinel/eval.hpp"
#include "sentinel/llm_gateway.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/readability.hpp"
#include "sentinel/report.hpp"

#ifndef SENTINEL_SCHEMA_DIR
#define SENTINEL_SCHEMA_DIR "schemas"
#endif

namespace fs = std::filesystem;
using namespace sentinel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;

void warn(const std::string& message) { fmt::print(stderr, "warning: {}\n", message); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_metrics(const Metrics& m) {
  fmt::print("precision {:.4f}  recall {:.4f}  f1 {:.4f}  fpr {:.3f}%  fnr {:.3f}%\n",
             m.precision, m.recall, m.f1, m.fpr_percent, m.fnr_percent);
  fmt::print("tp {}  fp {}  tn {}  fn {}\n", m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn);
}

double since_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

struct SynthArgs {
  std::string stats;
  std::string scenario;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  const auto config = load_synth_config(a.stats, a.scenario);
  const auto records = synthesize_dataset(config);
  std::size_t positives = 0;
  for (const auto& r : records) positives += std::size_t(r.label);
  write_kpm_csv(a.out, records);
  fmt::print("wrote {} records ({} malicious) to {}\n", records.size(), positives, a.out);
  return kExitOk;
}

struct TrainArgs {
  std::string input;
  std::string model;
  TrainOptions options;
};

int run_train(const TrainArgs& a) {
  const auto loaded = load_kpm_csv(a.input);
  if (loaded.dropped_rows > 0) warn(fmt::format("dropped {} incomplete rows", loaded.dropped_rows));
  const auto t0 = std::chrono::steady_clock::now();
  const auto outcome = train_detector(loaded.records, a.options);
  save_model(outcome.model, a.model);
  const auto context_path = context_path_for(a.model);
  save_context(outcome.context, context_path);
  fmt::print("trained on {} windows ({} mode) in {:.1f} s\n", outcome.context.train_windows,
             a.options.continual ? "continual" : "pooled", since_ms(t0) / 1000.0);
  fmt::print("held-out metrics on {} windows:\n", outcome.context.test_windows);
  print_metrics(outcome.context.test_metrics);
  fmt::print("model: {}\ncontext: {}\n", a.model, context_path.string());
  return kExitOk;
}

struct DetectArgs {
  std::string model;
  std::string input;
  std::string out;
};

int run_detect(const DetectArgs& a) {
  const auto model = load_model(a.model);
  const auto loaded = load_kpm_csv(a.input);
  if (loaded.dropped_rows > 0) warn(fmt::format("dropped {} incomplete rows", loaded.dropped_rows));
  const auto detections = detect(model, loaded.records);
  if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw InvalidArgument(fmt::format("cannot write {}", a.out));
  std::vector<int> pred, truth;
  std::size_t flagged = 0;
  for (const auto& d : detections) {
    out << to_json(d).dump() << "\n";
    flagged += std::size_t(d.label);
    if (d.true_label) {
      pred.push_back(d.label);
      truth.push_back(*d.true_label);
    }
  }
  if (detections.empty()) {
    warn("input produced no windows; nothing to score");
    return kExitOk;
  }
  fmt::print("scored {} windows, {} flagged anomalous ({:.2f}%)\n", detections.size(), flagged,
             100.0 * double(flagged) / double(detections.size()));
  if (!truth.empty()) print_metrics(compute_metrics(pred, truth));
  return kExitOk;
}

struct ExplainArgs {
  std::string model;
  std::string context;
  std::string detections;
  std::size_t window_id = 0;
  std::string mode = "zero";
  std::string exemplars;
  std::string provider = "mock";
  std::string llm_model;
  std::string base_url;
  bool reasoning = false;
  std::string mock_response;
  std::string record;
  bool offline = false;
  std::string replay;
  std::string out;
  std::string prompt_out;
  std::size_t lime_samples = 5000;
  std::size_t shap_coalitions = 2048;
  std::uint64_t seed = 0;
  int max_retries = 3;
  double timeout = 60.0;
};

int run_explain(const ExplainArgs& a) {
  const auto t_start = std::chrono::steady_clock::now();
  ExplainOptions options;
  options.mode = parse_prompt_mode(a.mode);
  if (options.mode == PromptMode::FewShot) {
    if (a.exemplars.empty()) throw ConfigError("exemplars", "few-shot mode needs --exemplars");
    options.exemplars = load_exemplars(a.exemplars);
  }
  if (a.offline && a.replay.empty()) throw ConfigError("replay", "--offline needs --replay");
  if (!a.offline && a.provider == "mock" && a.mock_response.empty()) {
    throw ConfigError("mock_response", "the mock provider needs --mock-response");
  }

  auto provider = provider_preset(a.provider);
  if (!a.llm_model.empty()) provider.model = a.llm_model;
  if (!a.base_url.empty()) provider.base_url = a.base_url;
  provider.reasoning_enabled = a.reasoning;
  provider.max_retries = a.max_retries;
  provider.timeout_seconds = a.timeout;
  provider.validate();

  const auto model = load_model(a.model);
  const auto context = load_context(a.context.empty() ? context_path_for(a.model) : fs::path(a.context));
  const auto detection = find_detection(a.detections, a.window_id);
  if (!detection) {
    throw InvalidArgument(fmt::format("window {} not found in {}", a.window_id, a.detections));
  }
  options.lime.n_samples = a.lime_samples;
  options.lime.seed = derive_seed(a.seed, a.window_id, 1);
  options.shap.n_coalitions = a.shap_coalitions;
  options.shap.seed = derive_seed(a.seed, a.window_id, 2);
  const auto result = explain_detection(model, context, *detection, options);
  if (!a.prompt_out.empty()) write_json_file(a.prompt_out, to_json(result.bundle));

  std::unique_ptr<Transport> base;
  std::unique_ptr<Transport> recorder;
  if (a.offline) {
    base = std::make_unique<ReplayTransport>(fs::path(a.replay));
  } else if (a.provider == "mock") {
    auto mock = std::make_unique<MockTransport>();
    mock->push_text(read_text(a.mock_response));
    base = std::move(mock);
  } else {
    base = std::make_unique<HttplibTransport>();
  }
  Transport* transport = base.get();
  if (!a.record.empty()) {
    recorder = std::make_unique<RecordingTransport>(*base, fs::path(a.record));
    transport = recorder.get();
  }

  SystemClock clock;
  LlmClient client(*transport, clock);
  nlohmann::json insight = nullptr;
  nlohmann::json readability = nullptr;
  std::string error;
  double llm_ms = 0.0;
  double readability_ms = 0.0;
  const auto t_llm = std::chrono::steady_clock::now();
  try {
    const auto text = client.complete(result.bundle, provider);
    llm_ms = since_ms(t_llm);
    for (const auto& w : text.warnings) warn(w);
    insight = to_json(text);
    const auto t_read = std::chrono::steady_clock::now();
    try {
      readability = to_json(score_text(text.text));
    } catch (const InvalidArgument& e) {
      warn(fmt::format("readability not scored: {}", e.what()));
    }
    readability_ms = since_ms(t_read);
  } catch (const ProviderError& e) {
    error = e.what();
  } catch (const ParseError& e) {
    error = e.what();
  }
  if (!error.empty()) llm_ms = since_ms(t_llm);

  const nlohmann::json timing = {{"lime", result.lime_ms},         {"shap", result.shap_ms},
                                 {"prompt", result.prompt_ms},     {"llm", llm_ms},
                                 {"readability", readability_ms}, {"total", since_ms(t_start)}};
  const auto report = make_report(*detection, result, context, insight, readability, error, timing);
  write_json_file(a.out, report);
  fmt::print("window {}: p = {:.5f}, label {}, LIME R² {:.3f}, SHAP gap {:.2e}\n", a.window_id,
             result.probability, result.label, result.lime.r2, result.shap.local_accuracy_gap());
  fmt::print("report: {}\n", a.out);
  if (!error.empty()) {
    fmt::print(stderr, "error: provider failure: {}\n", error);
    return kExitProvider;
  }
  return kExitOk;
}

struct ExperimentArgs {
  std::string config;
  std::string out;
};

int run_experiment(const ExperimentArgs& a) {
  auto file = load_experiment_yaml(a.config);
  if (!a.out.empty()) file.output_dir = fs::absolute(a.out);
  std::vector<KpmRecord> records;
  if (!file.corpus.empty()) {
    records = load_kpm_csv(file.corpus).records;
  } else {
    records = synthesize_dataset(load_synth_config(file.stats, file.scenario));
  }
  fs::create_directories(file.output_dir);
  {
    std::ofstream eff(file.output_dir / "effective-config.yaml", std::ios::trunc);
    eff << format_experiment_yaml(file);
  }
  const auto result = sweep_window_ratio(records, file.experiment);
  write_experiment_outputs(result, file.output_dir);
  fmt::print("{} runs over {} days in {:.1f} s\n", result.runs.size(), result.days.size(),
             result.seconds);
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    fmt::print("window {} ratio {:.2f}: f1 {:.4f}  mean previous-day f1 {:.4f}  fpr {:.3f}%  "
               "fnr {:.3f}%{}\n",
               c.window, c.ratio, c.f1, c.mean_day_f1, c.fpr_percent, c.fnr_percent,
               i == result.best_cell ? "  (selected)" : "");
  }
  fmt::print("outputs: {}\n", file.output_dir.string());
  return kExitOk;
}

struct ReportArgs {
  std::string in;
  std::string schema;
  std::string format = "md";
  std::string out;
};

int run_report(const ReportArgs& a) {
  const auto report = load_json_file(a.in);
  const fs::path schema_path =
      a.schema.empty() ? fs::path(SENTINEL_SCHEMA_DIR) / "insight_report.schema.json" : fs::path(a.schema);
  const auto errors = validate_json(load_json_file(schema_path), report);
  if (!errors.empty()) {
    for (const auto& e : errors) fmt::print(stderr, "schema violation: {}\n", e);
    return kExitConfig;
  }
  const std::string text = a.format == "json" ? report.dump(2) + "\n" : render_report_markdown(report);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(a.out, std::ios::trunc) << text;
    fmt::print(stderr, "report is schema-valid; rendered to {}\n", a.out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KPM DDoS detection with LIME/SHAP explanations and LLM insights"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a labeled synthetic KPM corpus");
  cmd_synth->add_option("--stats", synth.stats, "Class statistics YAML")->required();
  cmd_synth->add_option("--scenario", synth.scenario, "Scenario YAML")->required();
  cmd_synth->add_option("--out", synth.out, "Output CSV")->required();

  TrainArgs train;
  auto& to = train.options;
  auto* cmd_train = app.add_subcommand("train", "Train the LSTM detector");
  cmd_train->add_option("--input", train.input, "Labeled KPM CSV")->required();
  cmd_train->add_option("--model", train.model, "Output model file")->required();
  cmd_train->add_option("--window", to.window_steps, "Timesteps per window")->capture_default_str();
  cmd_train->add_option("--train-fraction", to.train_fraction, "Per-day train share")->capture_default_str();
  cmd_train->add_option("--split-seed", to.split_seed, "Train/test split seed")->capture_default_str();
  cmd_train->add_option("--seed", to.train.seed, "Initialization and batching seed")->capture_default_str();
  cmd_train->add_option("--hidden", to.train.hidden, "LSTM hidden units")->capture_default_str();
  cmd_train->add_option("--batch-size", to.train.batch_size, "Mini-batch size")->capture_default_str();
  cmd_train->add_option("--learning-rate", to.train.adam.learning_rate, "Adam step size")->capture_default_str();
  cmd_train->add_option("--max-epochs", to.train.max_epochs, "Epoch cap")->capture_default_str();
  cmd_train->add_option("--patience", to.train.patience, "Early-stopping patience")->capture_default_str();
  cmd_train->add_option("--positive-weight", to.train.positive_weight, "Loss weight of class 1")->capture_default_str();
  cmd_train->add_flag("--continual", to.continual, "Fine-tune day by day with replay");
  cmd_train->add_option("--ratio", to.ratio, "Replay ratio in continual mode")->capture_default_str();
  cmd_train->add_option("--threshold", to.threshold, "Decision threshold")->capture_default_str();
  cmd_train->add_option("--global-samples", to.global_samples, "Windows averaged for global SHAP")->capture_default_str();

  DetectArgs det;
  auto* cmd_detect = app.add_subcommand("detect", "Score every window of a KPM CSV");
  cmd_detect->add_option("--model", det.model, "Model file")->required();
  cmd_detect->add_option("--input", det.input, "KPM CSV")->required();
  cmd_detect->add_option("--out", det.out, "Output JSONL")->required();

  ExplainArgs ex;
  auto* cmd_explain = app.add_subcommand("explain", "Explain one detection and ask an LLM for insight");
  cmd_explain->add_option("--model", ex.model, "Model file")->required();
  cmd_explain->add_option("--context", ex.context, "Training context (default: next to the model)");
  cmd_explain->add_option("--detections", ex.detections, "Detection JSONL")->required();
  cmd_explain->add_option("--window-id", ex.window_id, "Window to explain")->required();
  cmd_explain->add_option("--mode", ex.mode, "Prompt mode")->check(CLI::IsMember({"zero", "few"}))->capture_default_str();
  cmd_explain->add_option("--exemplars", ex.exemplars, "Exemplar directory for few-shot mode");
  cmd_explain->add_option("--provider", ex.provider, "openai, deepseek, mistral, gemini, generic or mock")->capture_default_str();
  cmd_explain->add_option("--llm-model", ex.llm_model, "Override the provider's model name");
  cmd_explain->add_option("--base-url", ex.base_url, "Override the provider endpoint");
  cmd_explain->add_flag("--reasoning", ex.reasoning, "Enable the provider's reasoning mode");
  cmd_explain->add_option("--mock-response", ex.mock_response, "Response text for the mock provider");
  cmd_explain->add_option("--record", ex.record, "Record exchanges into this session store");
  cmd_explain->add_flag("--offline", ex.offline, "Answer from --replay only");
  cmd_explain->add_option("--replay", ex.replay, "Session store to replay");
  cmd_explain->add_option("--out", ex.out, "Output report JSON")->required();
  cmd_explain->add_option("--prompt-out", ex.prompt_out, "Also write the prompt bundle JSON");
  cmd_explain->add_option("--lime-samples", ex.lime_samples, "LIME perturbations")->capture_default_str();
  cmd_explain->add_option("--shap-coalitions", ex.shap_coalitions, "Kernel SHAP coalitions")->capture_default_str();
  cmd_explain->add_option("--seed", ex.seed, "Explainer seed")->capture_default_str();
  cmd_explain->add_option("--max-retries", ex.max_retries, "Provider retries")->capture_default_str();
  cmd_explain->add_option("--timeout", ex.timeout, "Provider timeout in seconds")->capture_default_str();

  ExperimentArgs exp;
  auto* cmd_experiment = app.add_subcommand("experiment", "Run the window x ratio continual-learning sweep");
  cmd_experiment->add_option("--config", exp.config, "Experiment YAML")->required();
  cmd_experiment->add_option("--out", exp.out, "Override output_dir");

  ReportArgs rep;
  auto* cmd_report = app.add_subcommand("report", "Validate and render an insight report");
  cmd_report->add_option("--in", rep.in, "Report JSON")->required();
  cmd_report->add_option("--schema", rep.schema, "Schema file (default: shipped insight report schema)");
  cmd_report->add_option("--format", rep.format, "md or json")->check(CLI::IsMember({"md", "json"}))->capture_default_str();
  cmd_report->add_option("--out", rep.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_detect->parsed()) return run_detect(det);
    if (cmd_explain->parsed()) return run_explain(ex);
    if (cmd_experiment->parsed()) return run_experiment(exp);
    if (cmd_report->parsed()) return run_report(rep);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const ModelVersionError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const SchemaError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
