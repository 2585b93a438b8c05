#pragma once

// Batched cosine-similarity kernels.
//
// Every consumer of label similarities (mining, scoring, evaluation) goes
// through SimilarityBank::compute, which tiles queries x labels and runs the
// tiles under OpenMP. serial::similarities is the plain nested-loop reference
// kept for tests and the benchmark; both accumulate each dot product over the
// embedding dimension in ascending order.

#include <cstddef>
#include <span>
#include <vector>

#include "clipscope/embedding.hpp"

namespace clipscope::kernels {

namespace serial {

/// out[q * n_rows + r] = clamp(dot(queries[q], rows[r]), -1, 1).
/// queries and rows are row-major with `dim` columns.
void similarities(std::span<const double> queries, std::span<const double> rows,
                  std::size_t dim, std::span<double> out);

}  // namespace serial

/// Label embeddings packed in tiles of kLabelTile labels; within a tile the
/// layout is dimension-major, so one coordinate of every label in the tile is
/// contiguous. The last tile is zero padded.
class SimilarityBank {
 public:
  static constexpr std::size_t kQueryTile = 4;
  static constexpr std::size_t kLabelTile = 32;

  SimilarityBank() = default;
  /// rows: row-major, rows.size() must be a multiple of dim.
  SimilarityBank(std::span<const double> rows, std::size_t dim);
  explicit SimilarityBank(const EmbeddingTable& table);

  std::size_t size() const noexcept { return n_labels_; }
  std::size_t dim() const noexcept { return dim_; }

  /// out[q * size() + j] = clamp(dot(queries[q], label j), -1, 1) for the
  /// queries.size() / dim() row-major queries. Result for a (query, label)
  /// pair does not depend on its position in the batch.
  void compute(std::span<const double> queries, std::span<double> out) const;

 private:
  std::size_t dim_ = 0;
  std::size_t n_labels_ = 0;
  std::size_t padded_ = 0;
  std::vector<double> packed_;  // (padded_ / kLabelTile) x dim_ x kLabelTile
};

/// Row-major concatenation of tables sharing one dimension.
std::vector<double> stack_rows(std::span<const EmbeddingTable* const> tables,
                               std::size_t dim);

/// Threads the OpenMP kernels will use (1 when built without OpenMP).
int max_threads() noexcept;
void set_max_threads(int n) noexcept;

}  // namespace clipscope::kernels
