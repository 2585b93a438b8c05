#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clipscope/embedding.hpp"

namespace clipscope {

/// Parameters of a synthetic embedding world. Generation is a pure function
/// of this struct.
struct SynthSpec {
  std::size_t dim = 64;
  std::size_t n_classes = 20;
  std::size_t samples_per_class = 50;
  std::size_t ood_clusters = 4;
  std::size_t ood_samples = 1000;
  /// Relative sample weight per ID class; empty means balanced. Scaled so the
  /// mean weight maps to samples_per_class.
  std::vector<double> class_imbalance;
  /// Concentration of samples around their anchor: noise scale is
  /// 1 / separation. 0 gives directions uniform on the sphere.
  double separation = 4.0;
  std::size_t lexicon_size = 600;
  /// Draw ID and OOD anchors as one random orthonormal frame (needs
  /// n_classes + ood_clusters <= dim) instead of independently.
  bool orthogonal_anchors = false;
  std::uint64_t seed = 0;

  bool operator==(const SynthSpec&) const = default;
};

struct SynthData {
  EmbeddingTable id_table;    // one row per ID class (the class anchor)
  EmbeddingTable candidates;  // lexicon for mining
  EmbeddingTable id_stream;
  EmbeddingTable ood_stream;
  std::vector<std::size_t> id_class;     // true class per id_stream row
  std::vector<std::size_t> ood_cluster;  // source cluster per ood_stream row
};

/// Throws ErrorKind::InvalidSpec for zero dim or classes, a non-finite or
/// negative separation, or a malformed imbalance vector.
SynthData generate(const SynthSpec& spec);

/// Per-class stream sizes implied by spec.
std::vector<std::size_t> class_sample_counts(const SynthSpec& spec);

/// The named catalogue: "separable", "hard", "imbalanced".
std::vector<std::string> preset_names();
SynthSpec preset(std::string_view name);

}  // namespace clipscope
