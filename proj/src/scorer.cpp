#include "clipscope/scorer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "clipscope/error.hpp"

namespace clipscope {

namespace {

constexpr std::size_t kSampleBatch = 64;

void check_tau(double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::NonPositiveTau, "tau must be > 0");
}

void check_id_table(const EmbeddingTable& id_table, std::size_t dim) {
  if (id_table.empty()) throw Error(ErrorKind::EmptyIdTable, "ID label table is empty");
  if (id_table.dim() != dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "sample dim " + std::to_string(dim) + " vs ID table dim " +
                    std::to_string(id_table.dim()));
  }
}

std::vector<double> sims_to(const EmbeddingVector& h, const EmbeddingTable& table) {
  std::vector<double> out(table.size());
  for (std::size_t j = 0; j < table.size(); ++j) out[j] = sim(h.values(), table.row(j));
  return out;
}

constexpr std::array kModeNames = {
    std::pair{ScoreMode::P1, std::string_view("P1")},
    std::pair{ScoreMode::P1_over_P0, std::string_view("P1_over_P0")},
    std::pair{ScoreMode::P2, std::string_view("P2")},
    std::pair{ScoreMode::P2_over_P0, std::string_view("P2_over_P0")},
    std::pair{ScoreMode::P1P2, std::string_view("P1P2")},
    std::pair{ScoreMode::P1P2_over_P0, std::string_view("P1P2_over_P0")},
};

}  // namespace

std::string_view to_string(ScoreMode m) noexcept {
  for (const auto& [mode, name] : kModeNames)
    if (mode == m) return name;
  return "?";
}

std::string_view to_string(Verdict v) noexcept { return v == Verdict::ID ? "ID" : "OOD"; }

ScoreMode parse_score_mode(std::string_view text) {
  for (const auto& [mode, name] : kModeNames)
    if (name == text) return mode;
  throw Error(ErrorKind::ConfigError, "unknown score mode '" + std::string(text) + "'");
}

Verdict parse_verdict(std::string_view text) {
  if (text == "ID") return Verdict::ID;
  if (text == "OOD") return Verdict::OOD;
  throw Error(ErrorKind::FormatError, "unknown verdict '" + std::string(text) + "'");
}

bool uses_p0(ScoreMode m) noexcept {
  return m == ScoreMode::P1_over_P0 || m == ScoreMode::P2_over_P0 ||
         m == ScoreMode::P1P2_over_P0;
}

// ---- ClassHistogram ----

ClassHistogram::ClassHistogram(std::size_t n_classes)
    : counts_(n_classes, 1), total_(n_classes) {
  if (n_classes == 0) throw Error(ErrorKind::EmptyIdTable, "histogram needs >= 1 class");
}

ClassHistogram ClassHistogram::restore(std::span<const std::uint64_t> counts) {
  if (counts.empty()) throw Error(ErrorKind::InvalidCounts, "histogram has no bins");
  ClassHistogram h;
  h.counts_.assign(counts.begin(), counts.end());
  for (std::uint64_t c : h.counts_) {
    if (c < 1) throw Error(ErrorKind::InvalidCounts, "histogram counts must be >= 1");
    h.total_ += c;
  }
  return h;
}

std::uint64_t ClassHistogram::count(std::size_t i) const {
  if (i >= counts_.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "class " + std::to_string(i) + " of " + std::to_string(counts_.size()));
  }
  return counts_[i];
}

void ClassHistogram::increment(std::size_t i) {
  if (i >= counts_.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "class " + std::to_string(i) + " of " + std::to_string(counts_.size()));
  }
  ++counts_[i];
  ++total_;
}

// ---- score components ----

PriorEstimate estimate_prior(std::span<const double> id_sims,
                             std::span<const double> neg_sims, double tau) {
  if (id_sims.empty()) throw Error(ErrorKind::EmptyIdTable, "no ID similarities");
  check_tau(tau);

  PriorEstimate out;
  double best = id_sims[0];
  for (std::size_t j = 1; j < id_sims.size(); ++j) {
    if (id_sims[j] > best) {
      best = id_sims[j];
      out.i_star = j;
    }
  }

  // p1: the largest entry of the ID-only softmax, shifted by its own max.
  const double id_shift = best / tau;
  double id_mass = 0.0;
  for (double s : id_sims) id_mass += std::exp(s / tau - id_shift);
  out.p1 = 1.0 / id_mass;

  if (neg_sims.empty()) {
    out.p2 = 1.0;
    return out;
  }
  // p2: one shift shared by ID and negative logits.
  double shift = id_shift;
  for (double s : neg_sims) shift = std::max(shift, s / tau);
  double id_part = 0.0;
  for (double s : id_sims) id_part += std::exp(s / tau - shift);
  double neg_part = 0.0;
  for (double s : neg_sims) neg_part += std::exp(s / tau - shift);
  out.p2 = id_part / (id_part + neg_part);
  return out;
}

P1Result compute_p1(const EmbeddingVector& h, const EmbeddingTable& id_table,
                    double tau) {
  check_id_table(id_table, h.dim());
  const auto prior = estimate_prior(sims_to(h, id_table), {}, tau);
  return {prior.p1, prior.i_star};
}

double compute_p2(const EmbeddingVector& h, const EmbeddingTable& id_table,
                  const MinedLabelSet& neg, double tau) {
  check_id_table(id_table, h.dim());
  if (!neg.empty() && neg.table.dim() != h.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "negative label dim mismatch");
  }
  return estimate_prior(sims_to(h, id_table), sims_to(h, neg.table), tau).p2;
}

double compute_p0(const ClassHistogram& hist, std::size_t i_star) {
  return static_cast<double>(hist.count(i_star)) / static_cast<double>(hist.total());
}

double compose_score(ScoreMode mode, double p0, double p1, double p2) noexcept {
  switch (mode) {
    case ScoreMode::P1: return p1;
    case ScoreMode::P1_over_P0: return p1 / p0;
    case ScoreMode::P2: return p2;
    case ScoreMode::P2_over_P0: return p2 / p0;
    case ScoreMode::P1P2: return p1 * p2;
    case ScoreMode::P1P2_over_P0: return p1 * p2 / p0;
  }
  return 0.0;
}

ScoreRecord posterior_update(const PriorEstimate& prior, ClassHistogram& hist,
                             const ScorerConfig& cfg) {
  ScoreRecord rec;
  rec.i_star = prior.i_star;
  rec.p1 = prior.p1;
  rec.p2 = prior.p2;
  rec.p0 = compute_p0(hist, prior.i_star);
  rec.score = compose_score(cfg.mode, rec.p0, rec.p1, rec.p2);
  hist.increment(prior.i_star);
  rec.verdict = rec.score >= cfg.gamma ? Verdict::ID : Verdict::OOD;
  return rec;
}

ScoreRecord score_sample(const EmbeddingVector& h, const EmbeddingTable& id_table,
                         const MinedLabelSet& neg, ClassHistogram& hist,
                         const ScorerConfig& cfg) {
  check_id_table(id_table, h.dim());
  if (hist.size() != id_table.size()) {
    throw Error(ErrorKind::DimensionMismatch, "histogram has " +
                                                  std::to_string(hist.size()) +
                                                  " bins for " +
                                                  std::to_string(id_table.size()) +
                                                  " ID classes");
  }
  if (!neg.empty() && neg.table.dim() != h.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "negative label dim mismatch");
  }
  const auto prior = estimate_prior(sims_to(h, id_table), sims_to(h, neg.table), cfg.tau);
  return posterior_update(prior, hist, cfg);
}

// ---- StreamScorer ----

StreamScorer::StreamScorer(const EmbeddingTable& id_table, const MinedLabelSet& neg,
                           ScorerConfig cfg)
    : cfg_(cfg), n_id_(id_table.size()), n_neg_(neg.size()) {
  check_tau(cfg_.tau);
  check_id_table(id_table, id_table.dim());
  if (n_neg_ > 0 && neg.table.dim() != id_table.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "negative labels dim " + std::to_string(neg.table.dim()) +
                    " vs ID table dim " + std::to_string(id_table.dim()));
  }
  const std::array<const EmbeddingTable*, 2> parts = {&id_table, &neg.table};
  bank_ = kernels::SimilarityBank(kernels::stack_rows(parts, id_table.dim()),
                                  id_table.dim());
}

std::vector<PriorEstimate> StreamScorer::estimate(std::span<const double> samples) const {
  const std::size_t dim = bank_.dim();
  if (samples.size() % dim != 0) {
    throw Error(ErrorKind::DimensionMismatch,
                "sample matrix is not a multiple of dim " + std::to_string(dim));
  }
  const std::size_t n = samples.size() / dim;
  const std::size_t width = bank_.size();
  std::vector<PriorEstimate> out(n);
  std::vector<double> sims;
  for (std::size_t first = 0; first < n; first += kSampleBatch) {
    const std::size_t count = std::min(kSampleBatch, n - first);
    sims.resize(count * width);
    bank_.compute(samples.subspan(first * dim, count * dim), sims);
    const auto m = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
      const auto row = std::span<const double>(sims).subspan(
          static_cast<std::size_t>(i) * width, width);
      out[first + static_cast<std::size_t>(i)] =
          estimate_prior(row.first(n_id_), row.subspan(n_id_), cfg_.tau);
    }
  }
  return out;
}

std::vector<PriorEstimate> StreamScorer::estimate(const EmbeddingTable& samples) const {
  if (!samples.empty() && samples.dim() != bank_.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "stream dim " + std::to_string(samples.dim()) + " vs label dim " +
                    std::to_string(bank_.dim()));
  }
  return estimate(samples.data());
}

std::vector<ScoreRecord> StreamScorer::score_stream(std::span<const double> samples,
                                                    ClassHistogram& hist) const {
  if (hist.size() != n_id_) {
    throw Error(ErrorKind::DimensionMismatch,
                "histogram has " + std::to_string(hist.size()) + " bins for " +
                    std::to_string(n_id_) + " ID classes");
  }
  const auto priors = estimate(samples);
  std::vector<ScoreRecord> out;
  out.reserve(priors.size());
  for (const auto& p : priors) out.push_back(posterior_update(p, hist, cfg_));
  return out;
}

std::vector<ScoreRecord> StreamScorer::score_stream(const EmbeddingTable& samples,
                                                    ClassHistogram& hist) const {
  if (!samples.empty() && samples.dim() != bank_.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "stream dim " + std::to_string(samples.dim()) + " vs label dim " +
                    std::to_string(bank_.dim()));
  }
  return score_stream(samples.data(), hist);
}

}  // namespace clipscope
