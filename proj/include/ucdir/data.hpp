#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ucdir/clustering.hpp"
#include "ucdir/dense.hpp"
#include "ucdir/rng.hpp"

namespace ucdir {

struct DataSample {
  std::int64_t id = 0;
  Domain domain = Domain::A;
  std::vector<double> raw;
  std::optional<int> label;  // evaluation only

  bool operator==(const DataSample&) const = default;
};

struct Dataset {
  std::vector<DataSample> samples_a;
  std::vector<DataSample> samples_b;
  std::size_t d_in = 0;
  std::size_t num_classes = 0;

  const std::vector<DataSample>& samples(Domain d) const { return d == Domain::A ? samples_a : samples_b; }
  std::vector<DataSample>& samples(Domain d) { return d == Domain::A ? samples_a : samples_b; }

  /// Raw vectors of one domain stacked as rows.
  DenseArray raws(Domain d) const;
  /// Labels of one domain; throws DataError if any sample is unlabeled.
  std::vector<int> labels(Domain d) const;
  /// Checks the dataset invariants; throws DataError.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// The label-free view handed to training code.
struct UnlabeledDomain {
  std::vector<std::int64_t> ids;
  DenseArray raws;  // one row per sample
};

struct UnlabeledDataset {
  UnlabeledDomain a;
  UnlabeledDomain b;
  std::size_t d_in = 0;

  const UnlabeledDomain& operator[](Domain d) const { return d == Domain::A ? a : b; }
};

UnlabeledDataset strip_labels(const Dataset& dataset);

enum class Nonlinearity { Identity, Tanh, Abs };

std::string_view to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(std::string_view s);

/// Synthetic two-domain generator.
///
/// C latent prototypes are unit vectors p_c = normalize(s e_c + (1 - s) m),
/// with e_c orthonormal, m their normalized mean and s = class_sep, so s = 1
/// gives mutually orthogonal prototypes. A sample is prototype plus isotropic
/// Gaussian noise, lifted to d_in by a shared orthonormal embedding, then
/// mapped by its domain's transform nonlinearity(Q_d x + b_d). Q_A is a random
/// rotation; Q_B = Q_A R where R orthonormalizes (1 - gap) I + gap G/sqrt(d_in)
/// for a Gaussian matrix G, so domain_gap moves from identical domains (0) to
/// unrelated rotations (1).
struct GeneratorSpec {
  std::size_t num_classes = 5;
  std::size_t per_class_per_domain = 200;
  std::size_t latent_dim = 8;
  std::size_t d_in = 32;
  double class_sep = 1.0;
  double noise_sigma = 0.3;
  double domain_gap = 0.6;
  double bias_scale = 9.0;
  Nonlinearity nonlinearity_a = Nonlinearity::Identity;
  Nonlinearity nonlinearity_b = Nonlinearity::Tanh;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic per spec.seed. Sample ids are unique across both domains.
Dataset generate(const GeneratorSpec& spec);

struct AugmentOptions {
  double jitter = 0.1;        // multiplicative, uniform in [-jitter, jitter]
  double noise_sigma = 0.05;  // additive Gaussian
};

/// raw * (1 + jitter) + noise, coordinatewise.
std::vector<double> augment(std::span<const double> raw, Rng& rng, const AugmentOptions& options = {});
/// Augments every row of a batch.
DenseArray augment_rows(const DenseArray& raws, Rng& rng, const AugmentOptions& options = {});

/// One JSON object per line: {"id", "domain", "label" (nullable), "vector"}.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace ucdir
