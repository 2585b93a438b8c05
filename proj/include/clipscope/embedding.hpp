#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clipscope {

/// A dense embedding of dimension D >= 1 with finite entries. Not
/// necessarily unit-norm; use normalize() for that.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

double l2_norm(std::span<const double> v) noexcept;

/// v / |v|. Throws ErrorKind::ZeroVector when |v| < 1e-12.
EmbeddingVector normalize(const EmbeddingVector& v);

/// Cosine similarity of two unit vectors: the dot product clamped to [-1, 1].
double sim(std::span<const double> a, std::span<const double> b);
double sim(const EmbeddingVector& a, const EmbeddingVector& b);

/// softmax(logits / tau) with the max scaled logit subtracted before
/// exponentiation.
std::vector<double> scaled_softmax(std::span<const double> logits, double tau);

/// Label identity: ASCII whitespace trimmed, ASCII letters lowercased,
/// then compared byte-wise.
std::string canonical_label(std::string_view label);

/// Labeled row-major matrix of embeddings sharing one dimension.
///
/// Labels must be unique after canonical_label(); construction throws
/// ErrorKind::DuplicateLabel otherwise. Rows are stored at 64-bit precision.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::vector<std::string> labels,
                 std::vector<double> data, std::string provenance = {});

  static EmbeddingTable from_rows(std::size_t dim,
                                  std::vector<std::string> labels,
                                  const std::vector<EmbeddingVector>& rows,
                                  std::string provenance = {});

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  std::span<const double> row(std::size_t i) const;
  std::span<const double> data() const noexcept { return data_; }
  EmbeddingVector vector(std::size_t i) const;

  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  /// Copy with every row scaled to unit norm.
  EmbeddingTable normalized() const;

  /// Rows [first, first + count) as a new table.
  EmbeddingTable slice(std::size_t first, std::size_t count) const;

  /// Provenance is metadata and does not take part in equality.
  bool operator==(const EmbeddingTable& other) const {
    return dim_ == other.dim_ && labels_ == other.labels_ &&
           data_ == other.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> labels_;
  std::vector<double> data_;
  std::string provenance_;
};

}  // namespace clipscope
