#include "clipscope/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

#include "clipscope/error.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace clipscope::kernels {

namespace {

constexpr std::size_t QT = SimilarityBank::kQueryTile;
constexpr std::size_t LT = SimilarityBank::kLabelTile;

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

// QT queries against one packed tile of LT labels. The accumulator tile stays
// in registers for the whole pass over `dim`.
inline void micro_tile(const double* __restrict queries,
                       const double* __restrict tile, std::size_t dim,
                       double* __restrict acc_out) {
  double acc[QT][LT] = {};
  for (std::size_t d = 0; d < dim; ++d) {
    const double* lrow = tile + d * LT;
    for (std::size_t q = 0; q < QT; ++q) {
      const double qv = queries[q * dim + d];
      for (std::size_t j = 0; j < LT; ++j) acc[q][j] += qv * lrow[j];
    }
  }
  for (std::size_t q = 0; q < QT; ++q)
    for (std::size_t j = 0; j < LT; ++j) acc_out[q * LT + j] = acc[q][j];
}

}  // namespace

namespace serial {

void similarities(std::span<const double> queries, std::span<const double> rows,
                  std::size_t dim, std::span<double> out) {
  if (dim == 0 || queries.size() % dim != 0 || rows.size() % dim != 0) {
    throw Error(ErrorKind::DimensionMismatch, "similarities: ragged input");
  }
  const std::size_t nq = queries.size() / dim;
  const std::size_t nr = rows.size() / dim;
  if (out.size() != nq * nr) {
    throw Error(ErrorKind::DimensionMismatch, "similarities: output size");
  }
  for (std::size_t q = 0; q < nq; ++q) {
    const double* a = queries.data() + q * dim;
    for (std::size_t r = 0; r < nr; ++r) {
      const double* b = rows.data() + r * dim;
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += a[d] * b[d];
      out[q * nr + r] = clamp_unit(dot);
    }
  }
}

}  // namespace serial

SimilarityBank::SimilarityBank(std::span<const double> rows, std::size_t dim)
    : dim_(dim) {
  if (dim_ == 0 || rows.size() % dim_ != 0) {
    throw Error(ErrorKind::DimensionMismatch, "SimilarityBank: ragged rows");
  }
  n_labels_ = rows.size() / dim_;
  padded_ = round_up(std::max<std::size_t>(n_labels_, 1), LT);
  packed_.assign(dim_ * padded_, 0.0);
  for (std::size_t j = 0; j < n_labels_; ++j)
    for (std::size_t d = 0; d < dim_; ++d)
      packed_[(j / LT) * dim_ * LT + d * LT + j % LT] = rows[j * dim_ + d];
}

SimilarityBank::SimilarityBank(const EmbeddingTable& table)
    : SimilarityBank(table.data(), table.dim()) {}

void SimilarityBank::compute(std::span<const double> queries,
                             std::span<double> out) const {
  if (dim_ == 0 || queries.size() % dim_ != 0) {
    throw Error(ErrorKind::DimensionMismatch,
                "SimilarityBank: query length is not a multiple of dim " +
                    std::to_string(dim_));
  }
  const std::size_t nq = queries.size() / dim_;
  if (out.size() != nq * n_labels_) {
    throw Error(ErrorKind::DimensionMismatch, "SimilarityBank: output size");
  }
  if (nq == 0 || n_labels_ == 0) return;

  // Pad the query block so every tile runs the same instruction sequence.
  const std::size_t nq_padded = round_up(nq, QT);
  std::vector<double> qbuf(nq_padded * dim_, 0.0);
  std::copy(queries.begin(), queries.end(), qbuf.begin());

  const auto label_tiles = static_cast<std::int64_t>(padded_ / LT);
  const auto query_tiles = static_cast<std::int64_t>(nq_padded / QT);
  const double* labels = packed_.data();
  const double* qdata = qbuf.data();
  double* odata = out.data();
  const std::size_t dim = dim_;
  const std::size_t n_labels = n_labels_;

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t lt = 0; lt < label_tiles; ++lt) {
    for (std::int64_t qt = 0; qt < query_tiles; ++qt) {
      double tile[QT * LT];
      const std::size_t j0 = static_cast<std::size_t>(lt) * LT;
      const std::size_t q0 = static_cast<std::size_t>(qt) * QT;
      micro_tile(qdata + q0 * dim, labels + j0 * dim, dim, tile);
      for (std::size_t q = 0; q < QT && q0 + q < nq; ++q)
        for (std::size_t j = 0; j < LT && j0 + j < n_labels; ++j)
          odata[(q0 + q) * n_labels + j0 + j] = clamp_unit(tile[q * LT + j]);
    }
  }
}

std::vector<double> stack_rows(std::span<const EmbeddingTable* const> tables,
                               std::size_t dim) {
  std::size_t total = 0;
  for (const auto* t : tables) {
    if (t->size() > 0 && t->dim() != dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "table of dim " + std::to_string(t->dim()) +
                      " stacked with dim " + std::to_string(dim));
    }
    total += t->data().size();
  }
  std::vector<double> out;
  out.reserve(total);
  for (const auto* t : tables) out.insert(out.end(), t->data().begin(), t->data().end());
  return out;
}

int max_threads() noexcept {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) noexcept {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace clipscope::kernels
