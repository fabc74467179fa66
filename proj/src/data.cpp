#include "ucdir/data.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ucdir/error.hpp"

namespace ucdir {
namespace {

using json = nlohmann::json;

// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt).
void orthonormalize_columns(DenseArray& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) proj += m(i, j) * m(i, k);
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) -= proj * m(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) norm += m(i, j) * m(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw NumericError("orthonormalization hit a rank-deficient matrix");
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) /= norm;
  }
}

DenseArray gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  DenseArray m(rows, cols);
  for (auto& v : m.data()) v = n01(rng);
  return m;
}

DenseArray random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseArray m = gaussian_matrix(rows, cols, rng);
  orthonormalize_columns(m);
  return m;
}

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  DenseArray out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += av * b(k, j);
    }
  }
  return out;
}

// y = M x
std::vector<double> mat_vec(const DenseArray& m, std::span<const double> x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row_span(i), x);
  return y;
}

double activate(Nonlinearity n, double v) {
  switch (n) {
    case Nonlinearity::Identity: return v;
    case Nonlinearity::Tanh: return std::tanh(v);
    case Nonlinearity::Abs: return std::abs(v);
  }
  return v;
}

}  // namespace

DenseArray Dataset::raws(Domain d) const {
  const auto& s = samples(d);
  DenseArray out(s.size(), d_in);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].raw.size() != d_in) throw DataError("sample " + std::to_string(s[i].id) + " has wrong dimension");
    std::copy(s[i].raw.begin(), s[i].raw.end(), out.row_span(i).begin());
  }
  return out;
}

std::vector<int> Dataset::labels(Domain d) const {
  std::vector<int> out;
  for (const auto& s : samples(d)) {
    if (!s.label) throw DataError("sample " + std::to_string(s.id) + " has no label");
    out.push_back(*s.label);
  }
  return out;
}

void Dataset::validate() const {
  if (samples_a.empty() && samples_b.empty()) throw DataError("no samples");
  if (samples_a.empty()) throw DataError("domain A has no samples");
  if (samples_b.empty()) throw DataError("domain B has no samples");
  std::set<std::int64_t> ids;
  for (Domain d : {Domain::A, Domain::B}) {
    for (const auto& s : samples(d)) {
      if (s.domain != d) throw DataError("sample " + std::to_string(s.id) + " filed under the wrong domain");
      if (s.raw.size() != d_in) {
        throw DataError("sample " + std::to_string(s.id) + " has dimension " + std::to_string(s.raw.size()) +
                        ", expected " + std::to_string(d_in));
      }
      for (double v : s.raw) {
        if (!std::isfinite(v)) throw DataError("sample " + std::to_string(s.id) + " has a non-finite value");
      }
      if (!ids.insert(s.id).second) throw DataError("duplicate id " + std::to_string(s.id));
    }
  }
}

UnlabeledDataset strip_labels(const Dataset& dataset) {
  UnlabeledDataset out;
  out.d_in = dataset.d_in;
  for (Domain d : {Domain::A, Domain::B}) {
    UnlabeledDomain& dst = d == Domain::A ? out.a : out.b;
    for (const auto& s : dataset.samples(d)) dst.ids.push_back(s.id);
    dst.raws = dataset.raws(d);
  }
  return out;
}

std::string_view to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::Identity: return "identity";
    case Nonlinearity::Tanh: return "tanh";
    case Nonlinearity::Abs: return "abs";
  }
  return "identity";
}

Nonlinearity parse_nonlinearity(std::string_view s) {
  if (s == "identity") return Nonlinearity::Identity;
  if (s == "tanh") return Nonlinearity::Tanh;
  if (s == "abs") return Nonlinearity::Abs;
  throw ConfigError("unknown nonlinearity '" + std::string(s) + "' (expected identity, tanh or abs)");
}

void GeneratorSpec::validate() const {
  if (num_classes < 2) throw ConfigError("generator.num_classes must be at least 2");
  if (per_class_per_domain < 2) throw ConfigError("generator.per_class_per_domain must be at least 2");
  if (!(noise_sigma >= 0.0)) throw ConfigError("generator.noise_sigma must be non-negative");
  if (latent_dim < num_classes) {
    throw ConfigError("generator.latent_dim (" + std::to_string(latent_dim) +
                      ") must be at least num_classes (" + std::to_string(num_classes) +
                      ") for orthogonal prototypes");
  }
  if (d_in < latent_dim) throw ConfigError("generator.d_in must be at least latent_dim");
  if (!(class_sep > 0.0 && class_sep <= 1.0)) throw ConfigError("generator.class_sep must lie in (0,1]");
  if (!(domain_gap >= 0.0 && domain_gap <= 1.0)) throw ConfigError("generator.domain_gap must lie in [0,1]");
  if (!(bias_scale >= 0.0)) throw ConfigError("generator.bias_scale must be non-negative");
}

Dataset generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "data.generate"));
  const std::size_t C = spec.num_classes, L = spec.latent_dim, D = spec.d_in;

  // Prototypes.
  const DenseArray basis = random_orthonormal(L, C, rng);  // columns e_c
  std::vector<double> mean(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t c = 0; c < C; ++c) mean[i] += basis(i, c);
  }
  const double mean_norm = l2_norm(mean);
  DenseArray prototypes(C, L);
  for (std::size_t c = 0; c < C; ++c) {
    auto p = prototypes.row_span(c);
    for (std::size_t i = 0; i < L; ++i) {
      p[i] = spec.class_sep * basis(i, c) + (1.0 - spec.class_sep) * mean[i] / mean_norm;
    }
    const double n = l2_norm(p);
    for (double& v : p) v /= n;
  }

  const DenseArray embed = random_orthonormal(D, L, rng);
  const DenseArray q_a = random_orthonormal(D, D, rng);
  DenseArray mix = gaussian_matrix(D, D, rng);
  const double mix_sd = 1.0 / std::sqrt(static_cast<double>(D));
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      mix(i, j) = spec.domain_gap * mix_sd * mix(i, j) + (i == j ? 1.0 - spec.domain_gap : 0.0);
    }
  }
  orthonormalize_columns(mix);
  const DenseArray q_b = matmul(q_a, mix);

  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> bias_a(D), bias_b(D);
  const double bias_sd = spec.bias_scale / std::sqrt(static_cast<double>(D));
  for (auto& v : bias_a) v = bias_sd * n01(rng);
  for (auto& v : bias_b) v = bias_sd * n01(rng);

  Dataset ds;
  ds.d_in = D;
  ds.num_classes = C;
  std::int64_t next_id = 0;
  for (Domain d : {Domain::A, Domain::B}) {
    const DenseArray& q = d == Domain::A ? q_a : q_b;
    const auto& bias = d == Domain::A ? bias_a : bias_b;
    const Nonlinearity act = d == Domain::A ? spec.nonlinearity_a : spec.nonlinearity_b;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < spec.per_class_per_domain; ++k) {
        std::vector<double> z(prototypes.row_span(c).begin(), prototypes.row_span(c).end());
        for (double& v : z) v += spec.noise_sigma * n01(rng);
        std::vector<double> x = mat_vec(q, mat_vec(embed, z));
        for (std::size_t i = 0; i < D; ++i) x[i] = activate(act, x[i] + bias[i]);
        ds.samples(d).push_back(DataSample{next_id++, d, std::move(x), static_cast<int>(c)});
      }
    }
  }
  return ds;
}

std::vector<double> augment(std::span<const double> raw, Rng& rng, const AugmentOptions& options) {
  std::uniform_real_distribution<double> jitter(-options.jitter, options.jitter);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double j = options.jitter > 0.0 ? jitter(rng) : 0.0;
    const double e = options.noise_sigma > 0.0 ? options.noise_sigma * noise(rng) : 0.0;
    out[i] = raw[i] * (1.0 + j) + e;
  }
  return out;
}

DenseArray augment_rows(const DenseArray& raws, Rng& rng, const AugmentOptions& options) {
  DenseArray out(raws.rows(), raws.cols());
  for (std::size_t r = 0; r < raws.rows(); ++r) {
    const auto v = augment(raws.row_span(r), rng, options);
    std::copy(v.begin(), v.end(), out.row_span(r).begin());
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (Domain d : {Domain::A, Domain::B}) {
    for (const auto& s : dataset.samples(d)) {
      json rec;
      rec["id"] = s.id;
      rec["domain"] = std::string(to_string(s.domain));
      rec["label"] = s.label ? json(*s.label) : json(nullptr);
      rec["vector"] = s.raw;
      out << rec.dump() << '\n';
    }
  }
  if (!out) throw DataError("write to " + path.string() + " failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Dataset ds;
  std::set<std::int64_t> ids;
  std::set<int> classes;
  std::string line;
  std::size_t lineno = 0;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    DataSample s;
    try {
      const json rec = json::parse(line);
      s.id = rec.at("id").get<std::int64_t>();
      s.domain = parse_domain(rec.at("domain").get<std::string>());
      if (!rec.at("label").is_null()) s.label = rec.at("label").get<int>();
      s.raw = rec.at("vector").get<std::vector<double>>();
      for (const auto& key : rec.items()) {
        if (key.key() != "id" && key.key() != "domain" && key.key() != "label" && key.key() != "vector") {
          throw DataError("unknown field '" + key.key() + "'");
        }
      }
    } catch (const json::exception& e) {
      throw DataError(where + "malformed record: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (!have_dim) {
      ds.d_in = s.raw.size();
      have_dim = true;
    } else if (s.raw.size() != ds.d_in) {
      throw DataError(where + "vector length " + std::to_string(s.raw.size()) + " differs from d_in " +
                      std::to_string(ds.d_in));
    }
    for (double v : s.raw) {
      if (!std::isfinite(v)) throw DataError(where + "non-finite vector entry");
    }
    if (!ids.insert(s.id).second) throw DataError(where + "duplicate id " + std::to_string(s.id));
    if (s.label) classes.insert(*s.label);
    ds.samples(s.domain).push_back(std::move(s));
  }
  if (ds.samples_a.empty() && ds.samples_b.empty()) throw DataError(path.string() + ": no samples");
  ds.num_classes = classes.empty() ? 0 : static_cast<std::size_t>(*classes.rbegin()) + 1;
  ds.validate();
  return ds;
}

}  // namespace ucdir
