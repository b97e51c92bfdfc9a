#include "sentinel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "sentinel/batch_model.hpp"
#include "sentinel/report.hpp"

namespace sentinel {

namespace {

constexpr int kContextVersion = 1;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

nlohmann::json stats_json(const FeatureStats& s) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    j[std::string(kFeatureNames[f])] = {s.normal.mean[f], s.normal.std[f], s.attack.mean[f],
                                        s.attack.std[f]};
  }
  return j;
}

FeatureStats stats_from_json(const nlohmann::json& j) {
  FeatureStats s;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    const auto& v = j.at(std::string(kFeatureNames[f]));
    if (!v.is_array() || v.size() != 4) {
      throw ParseError(fmt::format("context: stats.{} needs 4 values", kFeatureNames[f]));
    }
    s.normal.mean[f] = v[0].get<double>();
    s.normal.std[f] = v[1].get<double>();
    s.attack.mean[f] = v[2].get<double>();
    s.attack.std[f] = v[3].get<double>();
  }
  return s;
}

// Per-class statistics of the records behind the windows: each window's last
// row is a distinct record carrying the window's label.
FeatureStats window_record_stats(std::span<const Window> windows) {
  std::vector<KpmRecord> rows;
  rows.reserve(windows.size());
  for (const auto& w : windows) {
    KpmRecord r;
    const auto last = w.row(w.steps - 1);
    std::copy(last.begin(), last.end(), r.features.begin());
    r.label = w.label;
    rows.push_back(std::move(r));
  }
  return compute_class_stats(rows);
}

}  // namespace

nlohmann::json to_json(const DetectorContext& c) {
  return {{"version", kContextVersion},
          {"window_steps", c.window_steps},
          {"stats", stats_json(c.stats)},
          {"discretizer", to_json(c.discretizer)},
          {"background", c.background},
          {"global_importance", to_json(c.global)},
          {"test_metrics", to_json(c.test_metrics)},
          {"train_windows", c.train_windows},
          {"test_windows", c.test_windows}};
}

DetectorContext context_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kContextVersion) {
      throw ParseError("context: unsupported version");
    }
    DetectorContext c;
    c.window_steps = j.at("window_steps").get<std::size_t>();
    c.stats = stats_from_json(j.at("stats"));
    c.discretizer = discretizer_from_json(j.at("discretizer"));
    j.at("background").get_to(c.background);
    c.global = global_from_json(j.at("global_importance"));
    c.test_metrics = metrics_from_json(j.at("test_metrics"));
    c.train_windows = j.value("train_windows", std::size_t{0});
    c.test_windows = j.value("test_windows", std::size_t{0});
    const std::size_t cells = c.window_steps * kNumFeatures;
    if (c.discretizer.steps != c.window_steps || c.background.size() != cells ||
        c.global.phi.size() != cells) {
      throw ParseError("context: component shapes disagree with window_steps");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("context: {}", e.what()));
  }
}

std::filesystem::path context_path_for(const std::filesystem::path& model_path) {
  auto p = model_path;
  p.replace_extension(".context.json");
  return p;
}

void save_context(const DetectorContext& context, const std::filesystem::path& path) {
  write_json_file(path, to_json(context));
}

DetectorContext load_context(const std::filesystem::path& path) {
  return context_from_json(load_json_file(path));
}

TrainOutcome train_detector(std::span<const KpmRecord> records, const TrainOptions& opt) {
  const auto corpus =
      prepare_corpus(records, opt.window_steps, opt.train_fraction, opt.split_seed);
  std::vector<Window> train, test;
  for (const auto& d : corpus.train) train.insert(train.end(), d.begin(), d.end());
  for (const auto& d : corpus.test) test.insert(test.end(), d.begin(), d.end());
  if (train.empty()) throw InvalidArgument("train: corpus produced no training windows");

  TrainOutcome out;
  out.model.window_steps = opt.window_steps;
  out.model.scaler = corpus.scaler;
  out.model.threshold = opt.threshold;
  const std::uint64_t seed = opt.train.seed;
  if (opt.continual) {
    auto run = run_continual(corpus, opt.ratio, seed, opt.train, opt.threshold);
    out.model.params = std::move(run.final_params);
  } else {
    auto cfg = opt.train;
    auto split = split_train_test(train, 1.0 - opt.train.validation_fraction,
                                  derive_seed(seed, 0x7661));
    if (split.test.empty()) cfg.patience = 0;
    cfg.seed = derive_seed(seed, 0x6669);
    auto fitted = fit(init_model(seed, kNumFeatures, cfg.hidden), split.train, split.test, cfg);
    out.model.params = std::move(fitted.params);
    out.history = std::move(fitted.history);
  }

  auto& ctx = out.context;
  ctx.window_steps = opt.window_steps;
  ctx.stats = window_record_stats(train);
  ctx.discretizer = fit_discretizer(train);
  ctx.background = mean_background(train).rows.front();
  ctx.train_windows = train.size();
  ctx.test_windows = test.size();

  if (!test.empty()) {
    const auto probs = predict_proba(out.model.params, test);
    std::vector<int> pred(test.size()), truth(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      pred[i] = classify(probs[i], opt.threshold).label;
      truth[i] = test[i].label;
    }
    ctx.test_metrics = compute_metrics(pred, truth);
  }

  // Global importance over a seeded sample of held-out windows.
  const auto& pool = test.empty() ? train : test;
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x676c));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), std::max<std::size_t>(opt.global_samples, 1)));
  const auto model = probability_model(out.model.params);
  const Background bg{{ctx.background}};
  std::vector<ShapExplanation> explanations;
  for (std::size_t k = 0; k < order.size(); ++k) {
    ShapConfig sc;
    sc.n_coalitions = std::max(opt.global_coalitions, 2 * bg.rows.front().size());
    sc.seed = derive_seed(seed, 0x7368, k);
    explanations.push_back(explain_kernel_shap(model, pool[order[k]].values, bg, sc));
  }
  ctx.global = global_importance(explanations);
  return out;
}

nlohmann::json to_json(const DetectionRecord& r) {
  auto rows = nlohmann::json::array();
  for (std::size_t t = 0; t < r.steps(); ++t) {
    rows.push_back(std::vector<double>(r.values.begin() + std::ptrdiff_t(t * kNumFeatures),
                                       r.values.begin() + std::ptrdiff_t((t + 1) * kNumFeatures)));
  }
  return {{"window_id", r.window_id},
          {"ue_id", r.ue_id},
          {"day", r.day},
          {"start_timestamp", r.start_timestamp},
          {"probability", r.probability},
          {"label", r.label},
          {"true_label", r.true_label ? nlohmann::json(*r.true_label) : nlohmann::json(nullptr)},
          {"values", rows}};
}

DetectionRecord detection_from_json(const nlohmann::json& j) {
  try {
    DetectionRecord r;
    r.window_id = j.at("window_id").get<std::size_t>();
    r.ue_id = j.at("ue_id").get<std::string>();
    r.day = j.at("day").get<int>();
    r.start_timestamp = j.at("start_timestamp").get<std::int64_t>();
    r.probability = j.at("probability").get<double>();
    r.label = j.at("label").get<int>();
    if (j.contains("true_label") && !j["true_label"].is_null()) {
      r.true_label = j["true_label"].get<int>();
    }
    for (const auto& row : j.at("values")) {
      if (!row.is_array() || row.size() != kNumFeatures) {
        throw ParseError("detection: every row of 'values' needs 14 entries");
      }
      for (const auto& v : row) r.values.push_back(v.get<double>());
    }
    if (r.values.empty()) throw ParseError("detection: empty window");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("detection: {}", e.what()));
  }
}

std::vector<DetectionRecord> detect(const DetectorModel& model, std::vector<KpmRecord> records) {
  if (records.empty()) return {};
  sort_records(records);
  if (model.scaler) records = apply_scaler(*model.scaler, records);
  const auto windows = make_windows(records, model.window_steps);
  const auto probs = predict_proba(model.params, windows);
  std::vector<DetectionRecord> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    DetectionRecord r;
    r.window_id = i;
    r.ue_id = w.ue_id;
    r.day = w.day;
    r.start_timestamp = w.start_timestamp;
    r.probability = probs[i];
    r.label = classify(probs[i], model.threshold).label;
    r.true_label = w.label;
    r.values = w.values;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DetectionRecord> load_detections(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw InvalidArgument(fmt::format("cannot open {}", jsonl.string()));
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(detection_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(fmt::format("{}:{}: {}", jsonl.string(), line_no, e.what()));
    }
  }
  return out;
}

std::optional<DetectionRecord> find_detection(const std::filesystem::path& jsonl,
                                              std::size_t window_id) {
  for (auto& r : load_detections(jsonl)) {
    if (r.window_id == window_id) return std::move(r);
  }
  return std::nullopt;
}

ExplainResult explain_detection(const DetectorModel& model, const DetectorContext& context,
                                const DetectionRecord& detection, const ExplainOptions& options) {
  const std::size_t steps = detection.steps();
  if (detection.values.size() != steps * kNumFeatures || steps != model.window_steps ||
      steps != context.window_steps) {
    throw InvalidArgument(fmt::format(
        "explain: window has {} steps but the model expects {}", steps, model.window_steps));
  }
  ExplainResult r;
  const auto pm = probability_model(model.params);
  r.probability = evaluate_one(pm, detection.values);
  r.label = classify(r.probability, model.threshold).label;

  auto t0 = std::chrono::steady_clock::now();
  r.lime = explain_lime(pm, detection.values, context.discretizer, options.lime);
  r.lime_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  r.shap = explain_kernel_shap(pm, detection.values, Background{{context.background}},
                               options.shap);
  r.shap_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  auto& in = r.prompt_inputs;
  in.stats = context.stats;
  in.steps = steps;
  in.window = detection.values;
  in.predicted_label = r.label;
  in.lime = r.lime.terms;
  in.shap_local = r.shap.phi;
  in.shap_global = context.global.phi;
  r.bundle = render_prompt(in, options.mode, options.exemplars);
  r.prompt_ms = elapsed_ms(t0);
  return r;
}

nlohmann::json make_report(const DetectionRecord& detection, const ExplainResult& result,
                           const DetectorContext& context, const nlohmann::json& insight,
                           const nlohmann::json& readability, const std::string& error,
                           const nlohmann::json& timing_ms) {
  return {
      {"schema_version", kReportSchemaVersion},
      {"window",
       {{"window_id", detection.window_id},
        {"ue_id", detection.ue_id},
        {"day", detection.day},
        {"start_timestamp", detection.start_timestamp}}},
      {"prediction",
       {{"probability", result.probability},
        {"label", result.label},
        {"true_label",
         detection.true_label ? nlohmann::json(*detection.true_label) : nlohmann::json(nullptr)}}},
      {"lime", to_json(result.lime)},
      {"shap", to_json(result.shap)},
      {"global_importance",
       {{"count", context.global.count}, {"digest", sha256_hex(to_json(context.global).dump())}}},
      {"prompt",
       {{"mode", to_string(result.bundle.mode)},
        {"digest", bundle_digest(result.bundle)},
        {"estimated_tokens", estimate_tokens(result.bundle)},
        {"exemplars", result.bundle.exemplars.size()}}},
      {"insight", insight},
      {"readability", readability},
      {"error", error.empty() ? nlohmann::json(nullptr) : nlohmann::json(error)},
      {"timing_ms", timing_ms}};
}

}  // namespace sentinel
