#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clipscope/embedding.hpp"
#include "clipscope/mining.hpp"
#include "clipscope/scorer.hpp"

namespace clipscope {

// ---- threshold-free metrics ----

/// P(random ID score > random OOD score), ties counted as one half.
/// Rank-sum with mid-ranks; O((n + m) log(n + m)).
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Largest ID score gamma such that #(id >= gamma) / |ID| >= tpr_target.
double tpr_threshold(std::span<const double> id_scores, double tpr_target);

/// #(ood >= gamma) / |OOD| at gamma = tpr_threshold(id_scores, tpr_target).
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target = 0.95);

double pearson(std::span<const double> a, std::span<const double> b);

// ---- stream orderings ----

enum class OrderKind { Forward, Reverse, Random };
enum class Origin { ID, OOD };

std::string_view to_string(OrderKind k) noexcept;
OrderKind parse_order_kind(std::string_view text);

struct StreamOrdering {
  OrderKind kind = OrderKind::Random;
  std::uint64_t seed = 0;
  std::size_t trials = 5;

  static StreamOrdering forward() { return {OrderKind::Forward, 0, 1}; }
  static StreamOrdering reverse() { return {OrderKind::Reverse, 0, 1}; }
  static StreamOrdering random(std::uint64_t seed, std::size_t trials = 5) {
    return {OrderKind::Random, seed, trials};
  }

  /// Forward and Reverse always run exactly one trial.
  std::size_t effective_trials() const noexcept {
    return kind == OrderKind::Random ? trials : 1;
  }
  std::uint64_t trial_seed(std::size_t t) const noexcept { return seed + t; }

  bool operator==(const StreamOrdering&) const = default;
};

/// Arrival order over the concatenation [ID samples..., OOD samples...].
std::vector<std::size_t> stream_order(std::size_t n_id, std::size_t n_ood,
                                      OrderKind kind, std::uint64_t seed);

// ---- reports ----

struct TrialResult {
  std::uint64_t seed = 0;
  double auroc = 0.0;
  double fpr95 = 0.0;
  bool operator==(const TrialResult&) const = default;
};

struct EvalReport {
  double auroc = 0.0;
  double fpr95 = 0.0;
  std::vector<TrialResult> per_trial;

  // configuration echo
  std::string label;  // grid point description, empty for single runs
  ScoreMode mode = ScoreMode::P1P2_over_P0;
  StreamOrdering ordering;
  double tau = 0.0;
  double gamma = 0.0;
  std::optional<MiningConfig> mining;  // absent when negatives were supplied
  std::size_t n_negatives = 0;
  std::string rng_algorithm;

  bool operator==(const EvalReport& o) const;
};

/// One ordered pass of the scorer over the mixed stream.
struct TrialTrace {
  std::vector<std::size_t> order;  // positions in [ID..., OOD...]
  std::vector<Origin> origin;      // ground truth per record
  std::vector<ScoreRecord> records;
};

/// Scores a stream whose per-sample priors are already known, starting from
/// a fresh histogram.
TrialTrace run_trial(std::span<const PriorEstimate> id_priors,
                     std::span<const PriorEstimate> ood_priors, std::size_t n_classes,
                     const ScorerConfig& cfg, OrderKind kind, std::uint64_t seed);

/// All trials of an ordering over precomputed priors.
EvalReport evaluate_priors(std::span<const PriorEstimate> id_priors,
                           std::span<const PriorEstimate> ood_priors,
                           std::size_t n_classes, const ScorerConfig& cfg,
                           const StreamOrdering& ordering);

EvalReport run_stream(const EmbeddingTable& id_stream, const EmbeddingTable& ood_stream,
                      const EmbeddingTable& id_table, const MinedLabelSet& neg,
                      const ScorerConfig& cfg, const StreamOrdering& ordering);

// ---- ablations and sweeps ----

/// One sweep point: any field left empty keeps the base configuration.
struct GridPoint {
  std::optional<ScoreMode> mode;
  std::optional<std::size_t> m;
  std::optional<double> eta;
  std::optional<Selection> selection;

  std::string describe() const;
};

/// Parses "mode=P1,P1P2_over_P0;m=0,100;eta=0.05;selection=nearest" into one
/// point per listed value.
std::vector<GridPoint> parse_grid(std::string_view text);

struct SweepInputs {
  const EmbeddingTable& id_stream;
  const EmbeddingTable& ood_stream;
  const EmbeddingTable& id_table;
  const EmbeddingTable& candidates;
  MiningConfig mining;
  ScorerConfig scorer;
  StreamOrdering ordering;
};

/// One report per grid point; mining is re-run for each distinct
/// (M, eta, selection) combination.
std::vector<EvalReport> ablation_sweep(std::span<const GridPoint> grid,
                                       const SweepInputs& base);

// ---- class-likelihood analysis ----

struct ClassLikelihoodProfile {
  std::vector<double> p0_id;   // frequency of i* among ID records
  std::vector<double> p0_ood;  // frequency of i* among OOD records
  std::vector<double> p0_all;  // frequency of i* over the whole stream
  std::vector<double> p_ood_given_class;  // 0 for classes never selected

  /// Pearson correlation of p0_ood against p0_all.
  double ood_global_correlation() const;
};

ClassLikelihoodProfile class_likelihood_profile(std::span<const ScoreRecord> records,
                                                std::span<const Origin> origin,
                                                std::size_t n_classes);

}  // namespace clipscope
