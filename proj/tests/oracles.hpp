#pragma once

// Reference implementations used only by tests. Each is written from the
// definitions with plain loops and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline double dot(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) s += a[d] * b[d];
  return std::clamp(s, -1.0, 1.0);
}

struct Step {
  std::size_t i_star;
  double p0, p1, p2, g;
  bool is_id;
  std::vector<std::uint64_t> counts_after;
};

// Streaming detector, one line at a time: similarities, argmax, p1, p2, p0
// from counts before the update, score, verdict, increment.
inline std::vector<Step> streaming_detector(const std::vector<double>& id_rows,
                                            const std::vector<double>& neg_rows,
                                            const std::vector<double>& stream, std::size_t dim,
                                            double tau, double gamma,
                                            std::vector<std::uint64_t> counts) {
  const std::size_t n = id_rows.size() / dim;
  const std::size_t m = neg_rows.size() / dim;
  const std::size_t T = stream.size() / dim;
  std::vector<Step> out;
  for (std::size_t t = 0; t < T; ++t) {
    const double* h = &stream[t * dim];
    std::vector<double> s(n), sn(m);
    for (std::size_t i = 0; i < n; ++i) s[i] = dot(h, &id_rows[i * dim], dim);
    for (std::size_t j = 0; j < m; ++j) sn[j] = dot(h, &neg_rows[j * dim], dim);

    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (s[i] > s[best]) best = i;
    }
    // Logits are at most 1/tau, so direct exponentials stay finite for the
    // temperatures used in tests.
    double id_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) id_mass += std::exp(s[i] / tau);
    double neg_mass = 0.0;
    for (std::size_t j = 0; j < m; ++j) neg_mass += std::exp(sn[j] / tau);
    const double p1 = std::exp(s[best] / tau) / id_mass;
    const double p2 = id_mass / (id_mass + neg_mass);

    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    const double p0 = static_cast<double>(counts[best]) / static_cast<double>(total);
    const double g = p1 * p2 / p0;
    counts[best] += 1;
    out.push_back({best, p0, p1, p2, g, g >= gamma, counts});
  }
  return out;
}

// Mann-Whitney statistic by enumerating every (ID, OOD) pair.
inline double auroc_pairwise(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double a : id) {
    for (double b : ood) {
      if (a > b) wins += 1.0;
      else if (a == b) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Tries every observed ID score as a threshold and keeps the largest one that
// still admits the target fraction of ID samples.
inline double fpr_enumerated(const std::vector<double>& id, const std::vector<double>& ood,
                             double target) {
  double best = -INFINITY;
  bool found = false;
  for (double cand : id) {
    std::size_t admitted = 0;
    for (double x : id) admitted += x >= cand ? 1 : 0;
    if (static_cast<double>(admitted) / static_cast<double>(id.size()) >= target) {
      if (!found || cand > best) best = cand;
      found = true;
    }
  }
  std::size_t fp = 0;
  for (double x : ood) fp += x >= best ? 1 : 0;
  return static_cast<double>(fp) / static_cast<double>(ood.size());
}

// Nearest-rank percentile of the negated similarities by full sort.
inline double percentile(const double* cand, const std::vector<double>& id_rows, std::size_t dim,
                         double eta) {
  const std::size_t n = id_rows.size() / dim;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = -dot(cand, &id_rows[i * dim], dim);
  std::sort(d.begin(), d.end());
  long k = static_cast<long>(std::ceil(eta * static_cast<double>(n) - 1e-9)) - 1;
  k = std::clamp(k, 0L, static_cast<long>(n) - 1);
  return d[static_cast<std::size_t>(k)];
}

struct Pick {
  std::string label;
  double d;
  bool farthest;
  bool operator==(const Pick&) const = default;
  bool operator<(const Pick& o) const { return label < o.label; }
};

// Sorts every candidate both ways and takes the first m of each; a label on
// both sides counts once, as Farthest.
inline std::vector<Pick> mine_exhaustive(const std::vector<std::string>& canon_labels,
                                         const std::vector<double>& d, std::size_t m,
                                         bool nearest, bool farthest) {
  std::vector<std::pair<double, std::string>> asc, desc;
  for (std::size_t i = 0; i < d.size(); ++i) {
    asc.emplace_back(d[i], canon_labels[i]);
    desc.emplace_back(-d[i], canon_labels[i]);
  }
  std::sort(asc.begin(), asc.end());
  std::sort(desc.begin(), desc.end());
  std::vector<Pick> out;
  if (farthest) {
    for (std::size_t k = 0; k < std::min(m, desc.size()); ++k) out.push_back({desc[k].second, -desc[k].first, true});
  }
  if (nearest) {
    for (std::size_t k = 0; k < std::min(m, asc.size()); ++k) {
      bool dup = false;
      for (const auto& p : out) dup = dup || p.label == asc[k].second;
      if (!dup) out.push_back({asc[k].second, asc[k].first, false});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
