#include "sentinel/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace sentinel {

ConfigError::ConfigError(std::string key, const std::string& what)
    : Error("config error: " + (key.empty() ? what : key + ": " + what)), key_(std::move(key)) {}

namespace {

std::string join_key(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_map(const YAML::Node& node, const std::string& key) {
  if (!node.IsMap()) throw ConfigError(key, "expected a mapping");
}

void check_keys(const YAML::Node& node, const std::string& prefix,
                std::initializer_list<std::string_view> allowed) {
  require_map(node, prefix);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError(join_key(prefix, key), "unknown key");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, "invalid value");
  }
}

template <typename T>
void read_opt(const YAML::Node& parent, const char* name, const std::string& prefix, T& out) {
  if (auto n = parent[name]) out = scalar<T>(n, join_key(prefix, name));
}

template <typename T>
void read_list(const YAML::Node& parent, const char* name, const std::string& prefix,
               std::vector<T>& out) {
  auto n = parent[name];
  if (!n) return;
  const auto key = join_key(prefix, name);
  if (!n.IsSequence() || n.size() == 0) throw ConfigError(key, "expected a non-empty list");
  out.clear();
  for (const auto& item : n) out.push_back(scalar<T>(item, key));
}

YAML::Node parse_yaml(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed YAML: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

FeatureStats parse_stats_yaml(std::string_view text) {
  const auto root = parse_yaml(text);
  require_map(root, "");
  FeatureStats stats;
  std::array<bool, kNumFeatures> seen{};
  for (const auto& kv : root) {
    const auto name = kv.first.as<std::string>();
    const auto f = feature_index(name);
    if (!f) throw ConfigError(name, "unknown feature");
    const auto& v = kv.second;
    if (!v.IsSequence() || v.size() != 4) {
      throw ConfigError(name, "expected [normal_mean, normal_std, attack_mean, attack_std]");
    }
    stats.normal.mean[*f] = scalar<double>(v[0], name);
    stats.normal.std[*f] = scalar<double>(v[1], name);
    stats.attack.mean[*f] = scalar<double>(v[2], name);
    stats.attack.std[*f] = scalar<double>(v[3], name);
    if (stats.normal.std[*f] < 0.0 || stats.attack.std[*f] < 0.0) {
      throw ConfigError(name, "standard deviation must be >= 0");
    }
    seen[*f] = true;
  }
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (!seen[f]) throw ConfigError(std::string(kFeatureNames[f]), "missing feature");
  }
  return stats;
}

FeatureStats load_stats_yaml(const std::filesystem::path& path) {
  return parse_stats_yaml(read_file(path));
}

std::string format_stats_yaml(const FeatureStats& stats) {
  std::string out = "# feature: [normal_mean, normal_std, attack_mean, attack_std]\n";
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    out += fmt::format("{}: [{}, {}, {}, {}]\n", kFeatureNames[f], stats.normal.mean[f],
                       stats.normal.std[f], stats.attack.mean[f], stats.attack.std[f]);
  }
  return out;
}

SynthConfig parse_scenario_yaml(std::string_view text) {
  const auto root = parse_yaml(text);
  check_keys(root, "",
             {"days", "ues", "samples_per_ue", "correlation", "start_epoch", "seed", "profiles",
              "schedule"});
  SynthConfig cfg;
  read_opt(root, "days", "", cfg.days);
  read_opt(root, "ues", "", cfg.ues);
  read_opt(root, "samples_per_ue", "", cfg.samples_per_ue);
  read_opt(root, "correlation", "", cfg.correlation);
  read_opt(root, "start_epoch", "", cfg.start_epoch);
  read_opt(root, "seed", "", cfg.seed);

  if (auto profiles = root["profiles"]) {
    require_map(profiles, "profiles");
    for (const auto& p : profiles) {
      const auto name = p.first.as<std::string>();
      const auto prefix = "profiles." + name;
      require_map(p.second, prefix);
      TrafficProfile profile;
      for (const auto& kv : p.second) {
        const auto feature = kv.first.as<std::string>();
        const auto key = join_key(prefix, feature);
        if (!feature_index(feature)) throw ConfigError(key, "unknown feature");
        if (!kv.second.IsSequence() || kv.second.size() != 2) {
          throw ConfigError(key, "expected [mean, std]");
        }
        profile.overrides[feature] = {scalar<double>(kv.second[0], key),
                                      scalar<double>(kv.second[1], key)};
      }
      cfg.profiles[name] = std::move(profile);
    }
  }

  if (auto schedule = root["schedule"]) {
    if (!schedule.IsSequence()) throw ConfigError("schedule", "expected a list");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto prefix = fmt::format("schedule[{}]", i);
      const auto& e = schedule[i];
      check_keys(e, prefix, {"day", "ue", "ues", "start", "end", "label", "profile"});
      ScheduleEntry entry;
      if (!e["day"] || !e["start"] || !e["end"]) {
        throw ConfigError(prefix, "day, start and end are required");
      }
      read_opt(e, "day", prefix, entry.day);
      read_opt(e, "start", prefix, entry.start);
      read_opt(e, "end", prefix, entry.end);
      read_opt(e, "label", prefix, entry.label);
      read_opt(e, "profile", prefix, entry.profile);
      std::vector<std::size_t> ues;
      if (e["ue"]) ues.push_back(scalar<std::size_t>(e["ue"], join_key(prefix, "ue")));
      read_list(e, "ues", prefix, ues);
      if (ues.empty()) throw ConfigError(prefix, "ue or ues is required");
      for (auto ue : ues) {
        entry.ue = ue;
        cfg.schedule.push_back(entry);
      }
    }
  }
  return cfg;
}

SynthConfig load_synth_config(const std::filesystem::path& stats_path,
                              const std::filesystem::path& scenario_path) {
  auto cfg = parse_scenario_yaml(read_file(scenario_path));
  cfg.stats = load_stats_yaml(stats_path);
  return cfg;
}

ExperimentFile parse_experiment_yaml(std::string_view text, const std::filesystem::path& base_dir) {
  const auto root = parse_yaml(text);
  check_keys(root, "",
             {"corpus", "stats", "scenario", "output_dir", "windows", "ratios", "seeds",
              "train_fraction", "split_seed", "threshold", "parallel_jobs", "train"});
  ExperimentFile file;
  auto& ex = file.experiment;
  if (auto n = root["corpus"]) file.corpus = resolve(base_dir, scalar<std::string>(n, "corpus"));
  if (auto n = root["stats"]) file.stats = resolve(base_dir, scalar<std::string>(n, "stats"));
  if (auto n = root["scenario"]) {
    file.scenario = resolve(base_dir, scalar<std::string>(n, "scenario"));
  }
  if (auto n = root["output_dir"]) {
    file.output_dir = resolve(base_dir, scalar<std::string>(n, "output_dir"));
  } else {
    file.output_dir = resolve(base_dir, "results");
  }
  if (file.corpus.empty() && (file.stats.empty() || file.scenario.empty())) {
    throw ConfigError("corpus", "either corpus or stats + scenario is required");
  }

  read_list(root, "windows", "", ex.windows);
  read_list(root, "ratios", "", ex.ratios);
  read_list(root, "seeds", "", ex.seeds);
  read_opt(root, "train_fraction", "", ex.train_fraction);
  read_opt(root, "split_seed", "", ex.split_seed);
  read_opt(root, "threshold", "", ex.threshold);
  read_opt(root, "parallel_jobs", "", ex.parallel_jobs);
  for (auto w : ex.windows) {
    if (w < 1) throw ConfigError("windows", "window values must be >= 1");
  }
  for (auto r : ex.ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("ratios", "ratio values must be in [0,1]");
  }
  if (!(ex.train_fraction > 0.0 && ex.train_fraction < 1.0)) {
    throw ConfigError("train_fraction", "must be in (0,1)");
  }

  if (auto t = root["train"]) {
    check_keys(t, "train",
               {"hidden", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "patience",
                "max_epochs", "validation_fraction", "positive_weight", "parallel"});
    auto& tr = ex.train;
    read_opt(t, "hidden", "train", tr.hidden);
    read_opt(t, "batch_size", "train", tr.batch_size);
    read_opt(t, "learning_rate", "train", tr.adam.learning_rate);
    read_opt(t, "beta1", "train", tr.adam.beta1);
    read_opt(t, "beta2", "train", tr.adam.beta2);
    read_opt(t, "epsilon", "train", tr.adam.epsilon);
    read_opt(t, "patience", "train", tr.patience);
    read_opt(t, "max_epochs", "train", tr.max_epochs);
    read_opt(t, "validation_fraction", "train", tr.validation_fraction);
    read_opt(t, "positive_weight", "train", tr.positive_weight);
    read_opt(t, "parallel", "train", tr.parallel);
    if (tr.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(tr.adam.learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
    if (tr.max_epochs < 1) throw ConfigError("train.max_epochs", "must be >= 1");
  }
  return file;
}

ExperimentFile load_experiment_yaml(const std::filesystem::path& path) {
  return parse_experiment_yaml(read_file(path), path.parent_path());
}

std::string format_experiment_yaml(const ExperimentFile& file) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  const auto& ex = file.experiment;
  out << YAML::BeginMap;
  auto abs = [](const std::filesystem::path& p) {
    return std::filesystem::absolute(p).lexically_normal().string();
  };
  if (!file.corpus.empty()) out << YAML::Key << "corpus" << YAML::Value << abs(file.corpus);
  if (!file.stats.empty()) out << YAML::Key << "stats" << YAML::Value << abs(file.stats);
  if (!file.scenario.empty()) out << YAML::Key << "scenario" << YAML::Value << abs(file.scenario);
  out << YAML::Key << "output_dir" << YAML::Value << abs(file.output_dir);
  out << YAML::Key << "windows" << YAML::Value << YAML::Flow << ex.windows;
  out << YAML::Key << "ratios" << YAML::Value << YAML::Flow << ex.ratios;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << ex.seeds;
  out << YAML::Key << "train_fraction" << YAML::Value << ex.train_fraction;
  out << YAML::Key << "split_seed" << YAML::Value << ex.split_seed;
  out << YAML::Key << "threshold" << YAML::Value << ex.threshold;
  out << YAML::Key << "parallel_jobs" << YAML::Value << ex.parallel_jobs;
  const auto& tr = ex.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "hidden" << YAML::Value << tr.hidden;
  out << YAML::Key << "batch_size" << YAML::Value << tr.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << tr.adam.learning_rate;
  out << YAML::Key << "beta1" << YAML::Value << tr.adam.beta1;
  out << YAML::Key << "beta2" << YAML::Value << tr.adam.beta2;
  out << YAML::Key << "epsilon" << YAML::Value << tr.adam.epsilon;
  out << YAML::Key << "patience" << YAML::Value << tr.patience;
  out << YAML::Key << "max_epochs" << YAML::Value << tr.max_epochs;
  out << YAML::Key << "validation_fraction" << YAML::Value << tr.validation_fraction;
  out << YAML::Key << "positive_weight" << YAML::Value << tr.positive_weight;
  out << YAML::Key << "parallel" << YAML::Value << tr.parallel;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace sentinel
