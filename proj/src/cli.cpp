#include "ucdir/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ucdir/check.hpp"
#include "ucdir/clustering.hpp"
#include "ucdir/config.hpp"
#include "ucdir/data.hpp"
#include "ucdir/error.hpp"
#include "ucdir/evaluation.hpp"
#include "ucdir/training.hpp"

namespace ucdir {
namespace {

using json = nlohmann::json;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  std::optional<std::filesystem::path> config_path() const {
    if (config.empty()) return std::nullopt;
    return std::filesystem::path(config);
  }

  json overrides() const {
    json o = json::object();
    if (seed) o["seed"] = *seed;
    if (threads) o["train"]["threads"] = *threads;
    return o;
  }
};

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--k expects a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  if (ks.empty()) throw ConfigError("--k must name at least one k");
  return ks;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
}

Evaluator make_evaluator(const Dataset& dataset, const EvalConfig& eval, unsigned threads) {
  for (Domain d : {Domain::A, Domain::B}) {
    for (const auto& s : dataset.samples(d)) {
      if (!s.label) return {};
    }
  }
  return [&dataset, eval, threads](const EncoderParams& theta) {
    std::vector<double> mean(eval.ks.size(), 0.0);
    for (Direction dir : eval.directions) {
      const auto r = evaluate_encoder(theta, dataset, dir, eval.ks, false, threads);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r.precision[i];
    }
    for (double& v : mean) v /= static_cast<double>(eval.directions.size());
    return mean;
  };
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::map<std::string, std::string>& env) {
  CLI::App app{"Unsupervised cross-domain retrieval laboratory"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto add_common = [](CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON run config");
    cmd->add_option("--seed", f.seed, "global seed");
    cmd->add_option("--threads", f.threads, "worker thread cap");
  };

  // generate
  CommonFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic two-domain dataset");
  add_common(gen, gen_flags);
  gen->add_option("--out", gen_out, "output .jsonl path")->required();

  // train
  CommonFlags train_flags;
  std::string train_data, train_out, train_variant, train_resume;
  std::optional<std::size_t> train_epochs;
  auto* tr = app.add_subcommand("train", "train an encoder");
  add_common(tr, train_flags);
  tr->add_option("--data", train_data, "dataset .jsonl")->required();
  tr->add_option("--out", train_out, "output directory")->required();
  tr->add_option("--variant", train_variant, "v1 | v2 | v3 | full")
      ->check(CLI::IsMember({"v1", "v2", "v3", "full"}));
  tr->add_option("--epochs", train_epochs, "override train.epochs");
  tr->add_option("--resume", train_resume, "checkpoint to resume from");

  // eval
  CommonFlags eval_flags;
  std::string eval_ckpt, eval_data, eval_k, eval_dir = "both", eval_out;
  bool per_query = false;
  auto* ev = app.add_subcommand("eval", "cross-domain retrieval precision of a checkpoint");
  add_common(ev, eval_flags);
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint.json")->required();
  ev->add_option("--data", eval_data, "labeled dataset .jsonl")->required();
  ev->add_option("--k", eval_k, "comma-separated ks (default 1,5,15)");
  ev->add_option("--direction", eval_dir, "A2B | B2A | both")->check(CLI::IsMember({"A2B", "B2A", "both"}));
  ev->add_flag("--per-query", per_query, "include ranked lists");
  ev->add_option("--out", eval_out, "write the report here as well");

  // cluster
  CommonFlags cl_flags;
  std::string cl_data, cl_ckpt, cl_domain = "A", cl_out;
  std::optional<std::size_t> cl_k;
  auto* cl = app.add_subcommand("cluster", "spherical K-means over one domain's momentum features");
  add_common(cl, cl_flags);
  cl->add_option("--data", cl_data, "dataset .jsonl")->required();
  cl->add_option("--checkpoint", cl_ckpt, "encode with this checkpoint's momentum encoder");
  cl->add_option("--domain", cl_domain, "A | B")->check(CLI::IsMember({"A", "B"}));
  cl->add_option("--k", cl_k, "number of clusters");
  cl->add_option("--out", cl_out, "write the cluster model here");

  // check
  std::uint64_t check_seed = 0;
  std::size_t check_trials = 100;
  bool grad_only = false;
  auto* ck = app.add_subcommand("check", "run the property suite");
  ck->add_option("--seed", check_seed, "seed");
  ck->add_option("--trials", check_trials, "permutation-invariance trials");
  ck->add_flag("--grad-only", grad_only, "gradient checks only");

  std::vector<std::string> argv_store{"ucdir"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const RunConfig cfg = load_run_config(gen_flags.config_path(), gen_flags.overrides(), env);
      const Dataset ds = generate(cfg.generator);
      save_dataset(ds, gen_out);
      out << "wrote " << gen_out << ": N=" << ds.samples_a.size() << " M=" << ds.samples_b.size()
          << " C=" << ds.num_classes << " d_in=" << ds.d_in << '\n';
      return kExitOk;
    }

    if (tr->parsed()) {
      json overrides = train_flags.overrides();
      if (train_epochs) overrides["train"]["epochs"] = *train_epochs;
      if (!train_variant.empty()) {
        const LossConfig v = apply_variant(LossConfig{}, parse_variant(train_variant));
        overrides["loss"]["use_CW"] = v.use_cw;
        overrides["loss"]["use_SE"] = v.use_se;
        overrides["loss"]["use_DD"] = v.use_dd;
      }
      const RunConfig cfg = load_run_config(train_flags.config_path(), overrides, env);
      const Dataset ds = load_dataset(train_data);
      const std::filesystem::path dir(train_out);
      std::filesystem::create_directories(dir);
      const json effective = to_json(cfg);
      write_json(effective, dir / "config.json");

      TrainOptions opt;
      opt.out_dir = dir;
      opt.eval_ks = cfg.eval.ks;
      opt.evaluator = make_evaluator(ds, cfg.eval, cfg.train.threads);
      opt.config = effective;
      if (!train_resume.empty()) opt.resume = load_checkpoint(train_resume);
      opt.on_epoch = [&out, ks = cfg.eval.ks](const EpochMetrics& m) {
        out << "epoch " << m.epoch << " lr " << m.lr << " lambda " << m.lambda << " L_total " << m.total;
        if (m.precision) {
          for (std::size_t i = 0; i < ks.size(); ++i) out << " P@" << ks[i] << " " << (*m.precision)[i];
        }
        out << '\n';
      };
      const TrainResult r = train(strip_labels(ds), cfg.train, opt);
      out << "checkpoint " << r.checkpoint_path->string() << "\nmetrics " << r.metrics_path->string() << '\n';
      return kExitOk;
    }

    if (ev->parsed()) {
      const RunConfig cfg = load_run_config(eval_flags.config_path(), eval_flags.overrides(), env);
      const std::vector<std::size_t> ks = eval_k.empty() ? cfg.eval.ks : parse_ks(eval_k);
      std::vector<Direction> dirs;
      if (eval_dir == "both") {
        dirs = {Direction::AtoB, Direction::BtoA};
      } else {
        dirs = {parse_direction(eval_dir)};
      }
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const Dataset ds = load_dataset(eval_data);
      json reports = json::array();
      for (Direction d : dirs) {
        const auto r = evaluate_encoder(ckpt.theta, ds, d, ks, per_query, cfg.train.threads);
        reports.push_back(report_json(r, per_query));
      }
      const json doc = dirs.size() == 1 ? reports.front() : json{{"reports", reports}};
      out << doc.dump(2) << '\n';
      if (!eval_out.empty()) write_json(doc, eval_out);
      return kExitOk;
    }

    if (cl->parsed()) {
      const RunConfig cfg = load_run_config(cl_flags.config_path(), cl_flags.overrides(), env);
      const Dataset ds = load_dataset(cl_data);
      const Domain dom = parse_domain(cl_domain);
      DenseArray features = ds.raws(dom);
      if (!cl_ckpt.empty()) {
        features = encode(load_checkpoint(cl_ckpt).theta_m.params, features);
      } else {
        for (std::size_t r = 0; r < features.rows(); ++r) {
          auto row = features.row_span(r);
          const double n = l2_norm(row);
          if (n < kMinNormalizeNorm) throw CollapseError("collapse: raw vector " + std::to_string(r) + " is zero");
          for (double& v : row) v /= n;
        }
      }
      KMeansOptions ko;
      ko.k = cl_k.value_or(cfg.train.num_clusters);
      ko.seed = derive_seed(cfg.seed, dom == Domain::A ? "kmeans.A" : "kmeans.B", 0);
      ko.max_iter = cfg.train.kmeans_max_iter;
      ko.tol = cfg.train.kmeans_tol;
      ko.restarts = cfg.train.kmeans_restarts;
      ko.threads = cfg.train.threads;
      const ClusterModel cm = kmeans(features, ko, dom);
      json centroids = json::array();
      for (std::size_t u = 0; u < cm.k(); ++u) {
        const auto row = cm.centroids.row_span(u);
        centroids.push_back(std::vector<double>(row.begin(), row.end()));
      }
      const json doc{{"K", cm.k()},
                     {"domain", std::string(to_string(dom))},
                     {"centroids", centroids},
                     {"assignments", cm.assignments},
                     {"inertia", cm.inertia}};
      if (!cl_out.empty()) {
        write_json(doc, cl_out);
        out << "wrote " << cl_out << ": K=" << cm.k() << " inertia=" << cm.inertia << '\n';
      } else {
        out << doc.dump(2) << '\n';
      }
      return kExitOk;
    }

    if (ck->parsed()) {
      CheckOptions co;
      co.seed = check_seed;
      co.trials = check_trials;
      co.grad_only = grad_only;
      bool all = true;
      for (const auto& r : run_property_suite(co)) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << "  worst=" << std::setprecision(3) << r.worst
            << " tol=" << r.tolerance << " trials=" << r.trials;
        if (!r.detail.empty()) out << "  (" << r.detail << ")";
        out << '\n';
        all = all && r.pass;
      }
      return all ? kExitOk : kExitCheckFailed;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ucdir
