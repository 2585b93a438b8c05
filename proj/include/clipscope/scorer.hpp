#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "clipscope/embedding.hpp"
#include "clipscope/kernels.hpp"
#include "clipscope/mining.hpp"

namespace clipscope {

/// Which of p0, p1, p2 enter the confidence score.
enum class ScoreMode { P1, P1_over_P0, P2, P2_over_P0, P1P2, P1P2_over_P0 };
enum class Verdict { ID, OOD };

std::string_view to_string(ScoreMode m) noexcept;
std::string_view to_string(Verdict v) noexcept;
ScoreMode parse_score_mode(std::string_view text);
Verdict parse_verdict(std::string_view text);
bool uses_p0(ScoreMode m) noexcept;

/// Running count of how often each ID class was the nearest class. Every bin
/// starts at 1 and only ever grows.
class ClassHistogram {
 public:
  explicit ClassHistogram(std::size_t n_classes);

  /// Throws ErrorKind::InvalidCounts if counts is empty or any count is 0.
  static ClassHistogram restore(std::span<const std::uint64_t> counts);
  std::vector<std::uint64_t> snapshot() const { return counts_; }

  std::size_t size() const noexcept { return counts_.size(); }
  std::uint64_t count(std::size_t i) const;
  std::uint64_t total() const noexcept { return total_; }
  void increment(std::size_t i);

  bool operator==(const ClassHistogram&) const = default;

 private:
  ClassHistogram() = default;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct ScorerConfig {
  double tau = 0.01;
  double gamma = 0.0;
  ScoreMode mode = ScoreMode::P1P2_over_P0;
};

struct ScoreRecord {
  std::size_t i_star = 0;
  double p0 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double score = 0.0;
  Verdict verdict = Verdict::OOD;

  bool operator==(const ScoreRecord&) const = default;
};

/// The history-free part of a sample's score.
struct PriorEstimate {
  double p1 = 0.0;
  double p2 = 0.0;
  std::size_t i_star = 0;

  bool operator==(const PriorEstimate&) const = default;
};

struct P1Result {
  double p1 = 0.0;
  std::size_t i_star = 0;
};

P1Result compute_p1(const EmbeddingVector& h, const EmbeddingTable& id_table,
                    double tau);
double compute_p2(const EmbeddingVector& h, const EmbeddingTable& id_table,
                  const MinedLabelSet& neg, double tau);
double compute_p0(const ClassHistogram& hist, std::size_t i_star);
double compose_score(ScoreMode mode, double p0, double p1, double p2) noexcept;

/// p1, p2 and the nearest ID class from precomputed similarities.
/// i_star is the first index of the largest ID similarity.
PriorEstimate estimate_prior(std::span<const double> id_sims,
                             std::span<const double> neg_sims, double tau);

/// Reads p0 for the estimate's class from the counts as they stand, composes
/// the score, then increments that class.
ScoreRecord posterior_update(const PriorEstimate& prior, ClassHistogram& hist,
                             const ScorerConfig& cfg);

/// Scores one embedding and updates hist.
ScoreRecord score_sample(const EmbeddingVector& h, const EmbeddingTable& id_table,
                         const MinedLabelSet& neg, ClassHistogram& hist,
                         const ScorerConfig& cfg);

/// Batched scorer over a fixed ID table and negative label set.
///
/// Similarities for a block of samples go through the parallel kernel; the
/// histogram update runs strictly in sample order afterwards. The histogram
/// is owned by the caller, so one StreamScorer can drive any number of
/// independent streams.
class StreamScorer {
 public:
  StreamScorer(const EmbeddingTable& id_table, const MinedLabelSet& neg,
               ScorerConfig cfg);

  std::size_t n_classes() const noexcept { return n_id_; }
  std::size_t n_negatives() const noexcept { return n_neg_; }
  std::size_t dim() const noexcept { return bank_.dim(); }
  const ScorerConfig& config() const noexcept { return cfg_; }

  /// PriorEstimate for each row of a row-major sample matrix.
  std::vector<PriorEstimate> estimate(std::span<const double> samples) const;
  std::vector<PriorEstimate> estimate(const EmbeddingTable& samples) const;

  std::vector<ScoreRecord> score_stream(std::span<const double> samples,
                                        ClassHistogram& hist) const;
  std::vector<ScoreRecord> score_stream(const EmbeddingTable& samples,
                                        ClassHistogram& hist) const;

 private:
  ScorerConfig cfg_;
  std::size_t n_id_ = 0;
  std::size_t n_neg_ = 0;
  kernels::SimilarityBank bank_;  // ID rows followed by negative rows
};

}  // namespace clipscope
