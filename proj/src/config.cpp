#include "ucdir/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "ucdir/error.hpp"

extern char** environ;

namespace ucdir {
namespace {

using json = nlohmann::json;

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

template <class T>
T get(const json& section, const char* key, const std::string& where) {
  try {
    return section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "': " + e.what());
  }
}

}  // namespace

void RunConfig::finalize() {
  generator.seed = seed;
  train.seed = seed;
  train.eval_interval = eval.eval_interval;
  if (train.num_clusters == 0) train.num_clusters = generator.num_classes;
  generator.validate();
  train.validate();
  if (eval.ks.empty()) throw ConfigError("eval.ks must not be empty");
  if (eval.directions.empty()) throw ConfigError("eval.directions must not be empty");
}

json to_json(const RunConfig& cfg) {
  const auto& g = cfg.generator;
  const auto& t = cfg.train;
  const auto& l = t.loss;
  json j;
  j["seed"] = cfg.seed;
  j["generator"] = {{"num_classes", g.num_classes},
                    {"per_class_per_domain", g.per_class_per_domain},
                    {"latent_dim", g.latent_dim},
                    {"d_in", g.d_in},
                    {"class_sep", g.class_sep},
                    {"noise_sigma", g.noise_sigma},
                    {"domain_gap", g.domain_gap},
                    {"bias_scale", g.bias_scale},
                    {"nonlinearity_a", std::string(to_string(g.nonlinearity_a))},
                    {"nonlinearity_b", std::string(to_string(g.nonlinearity_b))}};
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr0", t.lr0},
                {"sgd_momentum", t.sgd_momentum},
                {"encoder_momentum", t.encoder_momentum},
                {"hidden_dims", t.hidden_dims},
                {"feature_dim", t.feature_dim},
                {"num_clusters", t.num_clusters},
                {"kmeans_max_iter", t.kmeans_max_iter},
                {"kmeans_tol", t.kmeans_tol},
                {"kmeans_restarts", t.kmeans_restarts},
                {"augment_jitter", t.augment.jitter},
                {"augment_noise", t.augment.noise_sigma},
                {"threads", t.threads}};
  j["loss"] = {{"tau", l.tau},       {"phi", l.phi},       {"alpha", l.alpha},
               {"beta", l.beta},     {"gamma", l.gamma},   {"T1", l.t1},
               {"T2", l.t2},         {"use_CW", l.use_cw}, {"use_SE", l.use_se},
               {"use_DD", l.use_dd}, {"reduction", std::string(to_string(l.reduction))}};
  json dirs = json::array();
  for (Direction d : cfg.eval.directions) dirs.push_back(std::string(to_string(d)));
  j["eval"] = {{"ks", cfg.eval.ks}, {"eval_interval", cfg.eval.eval_interval}, {"directions", dirs}};
  return j;
}

void merge_config(json& base, const json& overlay, const std::string& origin) {
  if (!overlay.is_object()) throw ConfigError(origin + ": config must be an object of sections");
  for (const auto& [section, body] : overlay.items()) {
    if (!base.contains(section)) throw ConfigError(origin + ": unknown config key '" + section + "'");
    if (!base[section].is_object()) {
      base[section] = body;
      continue;
    }
    if (!body.is_object()) throw ConfigError(origin + ": section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (!base[section].contains(key)) {
        throw ConfigError(origin + ": unknown config key '" + section + "." + key + "'");
      }
      base[section][key] = value;
    }
  }
}

RunConfig run_config_from_json(const json& j) {
  json full = to_json(RunConfig{});
  merge_config(full, j, "config");
  RunConfig cfg;
  cfg.seed = get<std::uint64_t>(full, "seed", "");
  const json& g = full["generator"];
  auto& gs = cfg.generator;
  gs.num_classes = get<std::size_t>(g, "num_classes", "generator");
  gs.per_class_per_domain = get<std::size_t>(g, "per_class_per_domain", "generator");
  gs.latent_dim = get<std::size_t>(g, "latent_dim", "generator");
  gs.d_in = get<std::size_t>(g, "d_in", "generator");
  gs.class_sep = get<double>(g, "class_sep", "generator");
  gs.noise_sigma = get<double>(g, "noise_sigma", "generator");
  gs.domain_gap = get<double>(g, "domain_gap", "generator");
  gs.bias_scale = get<double>(g, "bias_scale", "generator");
  gs.nonlinearity_a = parse_nonlinearity(get<std::string>(g, "nonlinearity_a", "generator"));
  gs.nonlinearity_b = parse_nonlinearity(get<std::string>(g, "nonlinearity_b", "generator"));

  const json& t = full["train"];
  auto& ts = cfg.train;
  ts.epochs = get<std::size_t>(t, "epochs", "train");
  ts.batch_size = get<std::size_t>(t, "batch_size", "train");
  ts.lr0 = get<double>(t, "lr0", "train");
  ts.sgd_momentum = get<double>(t, "sgd_momentum", "train");
  ts.encoder_momentum = get<double>(t, "encoder_momentum", "train");
  ts.hidden_dims = get<std::vector<std::size_t>>(t, "hidden_dims", "train");
  ts.feature_dim = get<std::size_t>(t, "feature_dim", "train");
  ts.num_clusters = get<std::size_t>(t, "num_clusters", "train");
  ts.kmeans_max_iter = get<std::size_t>(t, "kmeans_max_iter", "train");
  ts.kmeans_tol = get<double>(t, "kmeans_tol", "train");
  ts.kmeans_restarts = get<std::size_t>(t, "kmeans_restarts", "train");
  ts.augment.jitter = get<double>(t, "augment_jitter", "train");
  ts.augment.noise_sigma = get<double>(t, "augment_noise", "train");
  ts.threads = get<unsigned>(t, "threads", "train");

  const json& l = full["loss"];
  auto& ls = ts.loss;
  ls.tau = get<double>(l, "tau", "loss");
  ls.phi = get<double>(l, "phi", "loss");
  ls.alpha = get<double>(l, "alpha", "loss");
  ls.beta = get<double>(l, "beta", "loss");
  ls.gamma = get<double>(l, "gamma", "loss");
  ls.t1 = get<int>(l, "T1", "loss");
  ls.t2 = get<int>(l, "T2", "loss");
  ls.use_cw = get<bool>(l, "use_CW", "loss");
  ls.use_se = get<bool>(l, "use_SE", "loss");
  ls.use_dd = get<bool>(l, "use_DD", "loss");
  ls.reduction = parse_reduction(get<std::string>(l, "reduction", "loss"));

  const json& e = full["eval"];
  cfg.eval.ks = get<std::vector<std::size_t>>(e, "ks", "eval");
  cfg.eval.eval_interval = get<std::size_t>(e, "eval_interval", "eval");
  cfg.eval.directions.clear();
  for (const auto& d : get<std::vector<std::string>>(e, "directions", "eval")) {
    cfg.eval.directions.push_back(parse_direction(d));
  }
  cfg.finalize();
  return cfg;
}

json env_overrides(const json& defaults, const std::map<std::string, std::string>& env) {
  json out = json::object();
  auto parse_value = [](const std::string& raw) {
    try {
      return json::parse(raw);
    } catch (const json::exception&) {
      return json(raw);
    }
  };
  for (const auto& [name, raw] : env) {
    if (name.rfind("UCDIR_", 0) != 0) continue;
    const std::string rest = name.substr(6);
    bool matched = false;
    for (const auto& [section, body] : defaults.items()) {
      if (!body.is_object()) {
        if (upper(section) == rest) {
          out[section] = parse_value(raw);
          matched = true;
        }
        continue;
      }
      for (const auto& [key, value] : body.items()) {
        if (upper(section + "_" + key) == rest) {
          out[section][key] = parse_value(raw);
          matched = true;
        }
      }
    }
    if (!matched) throw ConfigError("environment variable " + name + " does not name a config key");
  }
  return out;
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const json& flag_overrides,
                          const std::map<std::string, std::string>& env) {
  json merged = to_json(RunConfig{});
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config " + path->string());
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(path->string() + ": " + e.what());
    }
    merge_config(merged, file, path->string());
  }
  merge_config(merged, env_overrides(merged, env), "environment");
  merge_config(merged, flag_overrides, "command line");
  return run_config_from_json(merged);
}

}  // namespace ucdir
