#include "clipscope/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "clipscope/error.hpp"

namespace clipscope {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NonPositiveTau: return "NonPositiveTau";
    case ErrorKind::EmptyIdTable: return "EmptyIdTable";
    case ErrorKind::NotEnoughCandidates: return "NotEnoughCandidates";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::InvalidCounts: return "InvalidCounts";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

constexpr double kZeroNorm = 1e-12;

void require_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::NonFinite, "embedding contains NaN or Inf");
    }
  }
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorKind::EmptyInput, "embedding dimension must be >= 1");
  }
  require_finite(values_);
}

double l2_norm(std::span<const double> v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  const double norm = l2_norm(v.values());
  if (norm < kZeroNorm) {
    throw Error(ErrorKind::ZeroVector, "cannot normalize a zero vector");
  }
  // Extended precision keeps the result within one rounding of the exact
  // quotient, so normalize(k * v) == normalize(v) up to 1 ulp.
  long double sum = 0.0L;
  for (double x : v.values()) sum += static_cast<long double>(x) * x;
  const long double exact_norm = std::sqrt(sum);
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x = static_cast<double>(x / exact_norm);
  return EmbeddingVector(std::move(out));
}

double sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "sim: dimensions " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

double sim(const EmbeddingVector& a, const EmbeddingVector& b) {
  return sim(a.values(), b.values());
}

std::vector<double> scaled_softmax(std::span<const double> logits, double tau) {
  if (logits.empty()) {
    throw Error(ErrorKind::EmptyInput, "scaled_softmax: no logits");
  }
  if (!(tau > 0.0)) {
    throw Error(ErrorKind::NonPositiveTau, "scaled_softmax: tau must be > 0");
  }
  require_finite(logits);

  double shift = -std::numeric_limits<double>::infinity();
  for (double x : logits) shift = std::max(shift, x / tau);

  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / tau - shift);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

std::string canonical_label(std::string_view label) {
  std::size_t first = 0;
  std::size_t last = label.size();
  while (first < last && is_ascii_space(label[first])) ++first;
  while (last > first && is_ascii_space(label[last - 1])) --last;
  std::string out(label.substr(first, last - first));
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<std::string> labels,
                               std::vector<double> data, std::string provenance)
    : dim_(dim),
      labels_(std::move(labels)),
      data_(std::move(data)),
      provenance_(std::move(provenance)) {
  if (dim_ == 0) {
    throw Error(ErrorKind::EmptyInput, "embedding table dimension must be >= 1");
  }
  if (data_.size() != labels_.size() * dim_) {
    throw Error(ErrorKind::DimensionMismatch,
                "embedding table: " + std::to_string(labels_.size()) +
                    " labels but " + std::to_string(data_.size()) +
                    " values for dim " + std::to_string(dim_));
  }
  require_finite(data_);

  std::unordered_set<std::string> seen;
  seen.reserve(labels_.size());
  for (const auto& label : labels_) {
    if (!seen.insert(canonical_label(label)).second) {
      throw Error(ErrorKind::DuplicateLabel, "duplicate label '" + label + "'");
    }
  }
}

EmbeddingTable EmbeddingTable::from_rows(std::size_t dim,
                                         std::vector<std::string> labels,
                                         const std::vector<EmbeddingVector>& rows,
                                         std::string provenance) {
  std::vector<double> data;
  data.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.dim() != dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "row of dim " + std::to_string(r.dim()) +
                      " in table of dim " + std::to_string(dim));
    }
    data.insert(data.end(), r.values().begin(), r.values().end());
  }
  return EmbeddingTable(dim, std::move(labels), std::move(data),
                        std::move(provenance));
}

std::span<const double> EmbeddingTable::row(std::size_t i) const {
  if (i >= size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "row " + std::to_string(i) + " of " + std::to_string(size()));
  }
  return std::span<const double>(data_).subspan(i * dim_, dim_);
}

EmbeddingVector EmbeddingTable::vector(std::size_t i) const {
  const auto r = row(i);
  return EmbeddingVector(std::vector<double>(r.begin(), r.end()));
}

EmbeddingTable EmbeddingTable::normalized() const {
  EmbeddingTable out = *this;
  for (std::size_t i = 0; i < size(); ++i) {
    double* r = out.data_.data() + i * dim_;
    const double norm = l2_norm(std::span<const double>(r, dim_));
    if (norm < kZeroNorm) {
      throw Error(ErrorKind::ZeroVector,
                  "zero embedding row for label '" + labels_[i] + "'");
    }
    for (std::size_t d = 0; d < dim_; ++d) r[d] /= norm;
  }
  return out;
}

EmbeddingTable EmbeddingTable::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) {
    throw Error(ErrorKind::IndexOutOfRange, "table slice out of range");
  }
  std::vector<std::string> labels(labels_.begin() + first,
                                  labels_.begin() + first + count);
  std::vector<double> data(data_.begin() + first * dim_,
                           data_.begin() + (first + count) * dim_);
  return EmbeddingTable(dim_, std::move(labels), std::move(data), provenance_);
}

}  // namespace clipscope
