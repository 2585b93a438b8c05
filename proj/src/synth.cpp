#include "clipscope/synth.hpp"

#include <cmath>
#include <numeric>
#include <span>

#include "clipscope/error.hpp"
#include "clipscope/rng.hpp"

namespace clipscope {

namespace {

void validate(const SynthSpec& spec) {
  if (spec.dim == 0) throw Error(ErrorKind::InvalidSpec, "dim must be >= 1");
  if (spec.n_classes == 0) throw Error(ErrorKind::InvalidSpec, "n_classes must be >= 1");
  if (!std::isfinite(spec.separation) || spec.separation < 0.0) {
    throw Error(ErrorKind::InvalidSpec, "separation must be finite and >= 0");
  }
  if (spec.ood_samples > 0 && spec.ood_clusters == 0) {
    throw Error(ErrorKind::InvalidSpec, "ood_samples > 0 needs ood_clusters >= 1");
  }
  if (spec.orthogonal_anchors && spec.n_classes + spec.ood_clusters > spec.dim) {
    throw Error(ErrorKind::InvalidSpec, "orthogonal anchors need n_classes + ood_clusters <= dim");
  }
  if (!spec.class_imbalance.empty()) {
    if (spec.class_imbalance.size() != spec.n_classes) {
      throw Error(ErrorKind::InvalidSpec, "class_imbalance needs one weight per class");
    }
    for (double w : spec.class_imbalance) {
      if (!std::isfinite(w) || w <= 0.0) {
        throw Error(ErrorKind::InvalidSpec, "class weights must be finite and > 0");
      }
    }
  }
}

std::vector<double> random_direction(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (;;) {
    double norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
    if (norm2 > 1e-20) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

// Gram-Schmidt over Gaussian draws: a uniformly random orthonormal frame.
std::vector<std::vector<double>> orthonormal_directions(Rng& rng, std::size_t count, std::size_t dim) {
  std::vector<std::vector<double>> frame;
  while (frame.size() < count) {
    std::vector<double> v = random_direction(rng, dim);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : frame) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += v[d] * u[d];
        for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * u[d];
      }
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 < 1e-12) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    frame.push_back(std::move(v));
  }
  return frame;
}

// normalize(anchor + z / separation) with z ~ N(0, I / dim).
std::vector<double> perturb(Rng& rng, std::span<const double> anchor, double separation) {
  const std::size_t dim = anchor.size();
  std::vector<double> v(dim);
  if (separation == 0.0) return random_direction(rng, dim);
  const double scale = 1.0 / (separation * std::sqrt(static_cast<double>(dim)));
  for (;;) {
    double norm2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      v[d] = anchor[d] + scale * rng.normal();
      norm2 += v[d] * v[d];
    }
    if (norm2 > 1e-20) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

std::string numbered(std::string_view prefix, std::size_t a, std::size_t b) {
  return std::string(prefix) + std::to_string(a) + "-" + std::to_string(b);
}

struct Rows {
  std::vector<std::string> labels;
  std::vector<double> data;
  void add(std::string label, const std::vector<double>& v) {
    labels.push_back(std::move(label));
    data.insert(data.end(), v.begin(), v.end());
  }
};

// Applies a permutation to a freshly built block of rows.
Rows permuted(const Rows& in, std::span<const std::size_t> order, std::size_t dim) {
  Rows out;
  out.labels.reserve(order.size());
  out.data.reserve(in.data.size());
  for (std::size_t i : order) {
    out.labels.push_back(in.labels[i]);
    out.data.insert(out.data.end(), in.data.begin() + static_cast<std::ptrdiff_t>(i * dim),
                    in.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  }
  return out;
}

}  // namespace

std::vector<std::size_t> class_sample_counts(const SynthSpec& spec) {
  validate(spec);
  std::vector<std::size_t> counts(spec.n_classes, spec.samples_per_class);
  if (spec.class_imbalance.empty()) return counts;
  const double mean = std::accumulate(spec.class_imbalance.begin(), spec.class_imbalance.end(), 0.0) /
                      static_cast<double>(spec.n_classes);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    counts[c] = static_cast<std::size_t>(
        std::llround(static_cast<double>(spec.samples_per_class) * spec.class_imbalance[c] / mean));
  }
  return counts;
}

SynthData generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t dim = spec.dim;
  Rng rng(spec.seed);

  std::vector<std::vector<double>> id_anchors, ood_anchors;
  if (spec.orthogonal_anchors) {
    auto frame = orthonormal_directions(rng, spec.n_classes + spec.ood_clusters, dim);
    id_anchors.assign(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(spec.n_classes));
    ood_anchors.assign(frame.begin() + static_cast<std::ptrdiff_t>(spec.n_classes), frame.end());
  } else {
    for (std::size_t c = 0; c < spec.n_classes; ++c) id_anchors.push_back(random_direction(rng, dim));
    for (std::size_t k = 0; k < spec.ood_clusters; ++k) ood_anchors.push_back(random_direction(rng, dim));
  }

  SynthData out;
  {
    Rows rows;
    for (std::size_t c = 0; c < spec.n_classes; ++c) rows.add("class-" + std::to_string(c), id_anchors[c]);
    out.id_table = EmbeddingTable(dim, std::move(rows.labels), std::move(rows.data), "synth:id_labels");
  }

  // Lexicon: a third each of words near an ID class, words near an OOD
  // concept, and unrelated words.
  {
    Rows rows;
    for (std::size_t i = 0; i < spec.lexicon_size; ++i) {
      std::vector<double> v;
      if (i % 3 == 0) {
        v = perturb(rng, id_anchors[rng.below(spec.n_classes)], 1.0);
      } else if (i % 3 == 1 && !ood_anchors.empty()) {
        v = perturb(rng, ood_anchors[rng.below(ood_anchors.size())], 1.0);
      } else {
        v = random_direction(rng, dim);
      }
      rows.add("word-" + std::to_string(i), v);
    }
    out.candidates = EmbeddingTable(dim, std::move(rows.labels), std::move(rows.data), "synth:lexicon");
  }

  {
    const auto counts = class_sample_counts(spec);
    Rows rows;
    std::vector<std::size_t> cls;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      for (std::size_t k = 0; k < counts[c]; ++k) {
        rows.add(numbered("id-", c, k), perturb(rng, id_anchors[c], spec.separation));
        cls.push_back(c);
      }
    }
    std::vector<std::size_t> order(cls.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    Rows shuffled = permuted(rows, order, dim);
    for (std::size_t i : order) out.id_class.push_back(cls[i]);
    out.id_stream = EmbeddingTable(dim, std::move(shuffled.labels), std::move(shuffled.data), "synth:id_stream");
  }

  {
    Rows rows;
    std::vector<std::size_t> cluster;
    for (std::size_t k = 0; k < spec.ood_samples; ++k) {
      const std::size_t a = k % spec.ood_clusters;
      rows.add(numbered("ood-", a, k / spec.ood_clusters), perturb(rng, ood_anchors[a], spec.separation));
      cluster.push_back(a);
    }
    std::vector<std::size_t> order(cluster.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    Rows shuffled = permuted(rows, order, dim);
    for (std::size_t i : order) out.ood_cluster.push_back(cluster[i]);
    out.ood_stream = EmbeddingTable(dim, std::move(shuffled.labels), std::move(shuffled.data), "synth:ood_stream");
  }
  return out;
}

std::vector<std::string> preset_names() { return {"separable", "hard", "imbalanced"}; }

SynthSpec preset(std::string_view name) {
  SynthSpec s;
  if (name == "separable") {
    // Tight clusters on mutually orthogonal anchors.
    s.n_classes = 20;
    s.samples_per_class = 50;
    s.ood_clusters = 10;
    s.ood_samples = 1000;
    s.separation = 200.0;
    s.lexicon_size = 1200;
    s.orthogonal_anchors = true;
  } else if (name == "hard") {
    // Low dimension and wide clusters: ID and OOD overlap.
    s.dim = 16;
    s.n_classes = 50;
    s.samples_per_class = 20;
    s.ood_clusters = 3;
    s.ood_samples = 1000;
    s.separation = 1.0;
    s.lexicon_size = 1200;
  } else if (name == "imbalanced") {
    s.n_classes = 20;
    s.samples_per_class = 50;
    s.ood_clusters = 4;
    s.ood_samples = 1000;
    s.separation = 2.0;
    s.lexicon_size = 600;
    s.class_imbalance.resize(s.n_classes);
    // Geometric weights from 1 down to 1/20.
    for (std::size_t c = 0; c < s.n_classes; ++c) {
      s.class_imbalance[c] = std::pow(20.0, -static_cast<double>(c) / static_cast<double>(s.n_classes - 1));
    }
  } else {
    throw Error(ErrorKind::ConfigError, "unknown preset '" + std::string(name) + "'");
  }
  return s;
}

}  // namespace clipscope
