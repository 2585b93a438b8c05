#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "clipscope/embedding.hpp"

namespace clipscope {

enum class Selection { NearestAndFarthest, NearestOnly, FarthestOnly };
enum class Side { Nearest, Farthest };

std::string_view to_string(Selection s) noexcept;
std::string_view to_string(Side s) noexcept;
Selection parse_selection(std::string_view text);
Side parse_side(std::string_view text);

struct MiningConfig {
  std::size_t m = 5000;  // labels per side
  double eta = 0.05;     // percentile parameter in [0, 1]
  Selection selection = Selection::NearestAndFarthest;
  bool exclude_id_overlap = false;
};

/// Negative labels picked from a candidate lexicon. Entries are ordered
/// Farthest side first (largest distance first), then the Nearest side
/// (smallest distance first).
struct MinedLabelSet {
  EmbeddingTable table;  // labels and unit embeddings of the selected labels
  std::vector<double> distances;
  std::vector<Side> sides;
  std::vector<std::size_t> candidate_index;  // row in the candidate table

  std::size_t size() const noexcept { return distances.size(); }
  bool empty() const noexcept { return distances.empty(); }
  bool operator==(const MinedLabelSet&) const = default;

  /// A set with no labels, usable wherever negatives are optional.
  static MinedLabelSet none(std::size_t dim);
};

/// Index of the nearest-rank 100*eta-th percentile in an ascending sample of
/// n values: clamp(ceil(eta * n) - 1, 0, n - 1).
std::size_t percentile_rank_index(double eta, std::size_t n);

/// The 100*eta-th percentile (nearest rank) of -sim(candidate, e_j) over
/// all ID label embeddings e_j.
double percentile_distance(std::span<const double> candidate,
                           const EmbeddingTable& id_table, double eta);
double percentile_distance(const EmbeddingVector& candidate,
                           const EmbeddingTable& id_table, double eta);

/// percentile_distance for every candidate row, batched through the
/// similarity kernel.
std::vector<double> percentile_distances(const EmbeddingTable& candidates,
                                         const EmbeddingTable& id_table,
                                         double eta);

/// Builds the negative label set: the M candidates with the largest
/// distance and the M with the smallest, per cfg.selection. Ties break on
/// ascending canonical label. A candidate on both sides is kept once as
/// Farthest.
MinedLabelSet mine(const EmbeddingTable& candidates,
                   const EmbeddingTable& id_table, const MiningConfig& cfg);

}  // namespace clipscope
