#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "ucdir/check.hpp"
#include "ucdir/clustering.hpp"
#include "ucdir/config.hpp"
#include "ucdir/data.hpp"
#include "ucdir/encoder.hpp"
#include "ucdir/error.hpp"
#include "ucdir/evaluation.hpp"
#include "ucdir/instances.hpp"
#include "ucdir/losses.hpp"
#include "ucdir/rng.hpp"
#include "ucdir/training.hpp"

namespace py = pybind11;
using namespace ucdir;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseArray to_dense(const Array& a) {
  if (a.ndim() == 1) {
    return DenseArray(1, a.shape(0), std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw py::value_error("expected a 1-d or 2-d array, got ndim=" + std::to_string(a.ndim()));
  return DenseArray(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_numpy(const DenseArray& d) {
  Array out({d.rows(), d.cols()});
  std::copy(d.data().begin(), d.data().end(), out.mutable_data());
  return out;
}

std::vector<Array> params_to_numpy(const EncoderParams& p) {
  std::vector<Array> out;
  for (const auto& a : p.arrays()) out.push_back(to_numpy(a));
  return out;
}

EncoderParams params_from_numpy(const std::vector<Array>& arrays) {
  std::vector<DenseArray> dense;
  for (const auto& a : arrays) {
    DenseArray d = to_dense(a);
    dense.push_back(std::move(d));
  }
  return EncoderParams::from_arrays(std::move(dense));
}

py::dict dataset_dict(const Dataset& ds) {
  py::dict out;
  out["d_in"] = ds.d_in;
  out["num_classes"] = ds.num_classes;
  for (Domain d : {Domain::A, Domain::B}) {
    py::dict dom;
    std::vector<std::int64_t> ids;
    for (const auto& s : ds.samples(d)) ids.push_back(s.id);
    dom["ids"] = ids;
    dom["raws"] = to_numpy(ds.raws(d));
    dom["labels"] = ds.labels(d);
    out[py::str(std::string(to_string(d)))] = dom;
  }
  return out;
}

RunConfig parse_config(const std::string& config_json) {
  return run_config_from_json(config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(config_json));
}

py::dict metrics_dict(const EpochMetrics& m) {
  py::dict d;
  d["epoch"] = m.epoch;
  d["lr"] = m.lr;
  d["lambda"] = m.lambda;
  d["L_IW"] = m.iw ? py::cast(*m.iw) : py::none();
  d["L_CW"] = m.cw ? py::cast(*m.cw) : py::none();
  d["L_DD"] = m.dd ? py::cast(*m.dd) : py::none();
  d["L_SE"] = m.se ? py::cast(*m.se) : py::none();
  d["L_total"] = m.total;
  d["precision"] = m.precision;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cross-domain retrieval with cluster-wise contrastive learning";

  // Registered base-first: later translators are tried first.
  auto& base = py::register_exception<Error>(m, "UcdirError");
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
  py::register_exception<CollapseError>(m, "CollapseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("default_config", [] { return to_json(RunConfig{}).dump(); },
        "Full default configuration as a JSON string.");

  m.def(
      "generate",
      [](const std::string& config_json) {
        RunConfig cfg = parse_config(config_json);
        cfg.finalize();
        return dataset_dict(generate(cfg.generator));
      },
      py::arg("config_json") = "");

  m.def(
      "derive_seed",
      [](std::uint64_t seed, const std::string& component, std::uint64_t index) {
        return derive_seed(seed, component, index);
      },
      py::arg("seed"), py::arg("component"), py::arg("index") = 0);

  m.def(
      "init_params",
      [](std::uint64_t seed, const std::vector<std::size_t>& dims) { return params_to_numpy(init_params(seed, dims)); },
      py::arg("seed"), py::arg("layer_dims"));

  m.def(
      "encode",
      [](const std::vector<Array>& params, const Array& inputs) {
        return to_numpy(encode(params_from_numpy(params), to_dense(inputs)));
      },
      py::arg("params"), py::arg("inputs"));

  m.def(
      "kmeans",
      [](const Array& features, std::size_t k, std::uint64_t seed, std::size_t max_iter, double tol,
         std::size_t restarts) {
        KMeansOptions opt;
        opt.k = k;
        opt.seed = seed;
        opt.max_iter = max_iter;
        opt.tol = tol;
        opt.restarts = restarts;
        const ClusterModel model = kmeans(to_dense(features), opt);
        py::dict out;
        out["centroids"] = to_numpy(model.centroids);
        out["assignments"] = model.assignments;
        out["inertia"] = model.inertia;
        out["inertia_trace"] = model.inertia_trace;
        return out;
      },
      py::arg("features"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iter") = 100, py::arg("tol") = 1e-6,
      py::arg("restarts") = 20);

  m.def("entropy", [](const std::vector<double>& p) { return entropy(p); }, py::arg("p"));
  m.def("in_domain_distance", [](const std::vector<double>& p, const std::vector<double>& q) {
    return in_domain_distance(p, q);
  });
  m.def("dd_pair", [](double a, double b) { return dd_pair(a, b); });
  m.def(
      "lambda_schedule",
      [](int ep, int t1, int t2, double alpha) {
        LossConfig cfg;
        cfg.t1 = t1;
        cfg.t2 = t2;
        cfg.alpha = alpha;
        return lambda_schedule(ep, cfg);
      },
      py::arg("epoch"), py::arg("t1") = 20, py::arg("t2") = 100, py::arg("alpha") = 1.0);
  m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total_steps"), py::arg("lr0"));

  m.def(
      "instance_losses",
      [](std::uint64_t seed) {
        const LossInstance inst = random_loss_instance(seed);
        py::dict out;
        for (LossKind kind : {LossKind::IW, LossKind::CW, LossKind::DD, LossKind::SE, LossKind::Total}) {
          Tape tape;
          const auto nodes = place(tape, inst.theta, true);
          out[py::str(std::string(to_string(kind)))] =
              tape.forward(build_loss(tape, inst, kind, nodes.ordered())).item();
        }
        return out;
      },
      py::arg("seed"), "Loss values on a small random problem.");

  m.def(
      "retrieve",
      [](const Array& queries, const std::vector<int>& q_labels, const Array& gallery, const std::vector<int>& g_labels,
         const std::vector<std::size_t>& ks) {
        const RetrievalResult r = retrieve({to_dense(queries), q_labels, {}}, {to_dense(gallery), g_labels, {}}, ks);
        py::dict out;
        for (std::size_t i = 0; i < r.ks.size(); ++i) out[py::int_(r.ks[i])] = r.precision[i];
        return out;
      },
      py::arg("queries"), py::arg("query_labels"), py::arg("gallery"), py::arg("gallery_labels"),
      py::arg("ks") = std::vector<std::size_t>{1, 5, 15});

  m.def(
      "train",
      [](const std::string& config_json, const std::string& variant, const std::string& out_dir) {
        RunConfig cfg = parse_config(config_json);
        cfg.train.loss = apply_variant(cfg.train.loss, parse_variant(variant));
        cfg.finalize();
        const Dataset ds = generate(cfg.generator);
        TrainOptions opt;
        if (!out_dir.empty()) opt.out_dir = out_dir;
        opt.eval_ks = cfg.eval.ks;
        const auto dirs = cfg.eval.directions;
        opt.evaluator = [&](const EncoderParams& theta) {
          std::vector<double> mean(cfg.eval.ks.size(), 0.0);
          for (Direction d : dirs) {
            const auto r = evaluate_encoder(theta, ds, d, cfg.eval.ks);
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r.precision[i] / dirs.size();
          }
          return mean;
        };
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(strip_labels(ds), cfg.train, opt);
        }
        py::list history;
        for (const auto& e : result.history) history.append(metrics_dict(e));
        py::dict out;
        out["history"] = history;
        out["theta"] = params_to_numpy(result.state.theta);
        out["theta_m"] = params_to_numpy(result.state.theta_m.params);
        return out;
      },
      py::arg("config_json") = "", py::arg("variant") = "full", py::arg("out_dir") = "");

  m.def(
      "check",
      [](std::uint64_t seed, std::size_t trials, bool grad_only) {
        CheckOptions opt;
        opt.seed = seed;
        opt.trials = trials;
        opt.grad_only = grad_only;
        py::list out;
        for (const auto& r : run_property_suite(opt)) {
          py::dict d;
          d["name"] = r.name;
          d["worst"] = r.worst;
          d["tolerance"] = r.tolerance;
          d["trials"] = r.trials;
          d["pass"] = r.pass;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("trials") = 100, py::arg("grad_only") = false);
}
