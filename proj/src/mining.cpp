#include "clipscope/mining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_set>

#include "clipscope/error.hpp"
#include "clipscope/kernels.hpp"

namespace clipscope {

namespace {

constexpr std::size_t kCandidateBatch = 256;

void check_id_table(const EmbeddingTable& id_table, std::size_t dim) {
  if (id_table.empty()) {
    throw Error(ErrorKind::EmptyIdTable, "ID label table is empty");
  }
  if (id_table.dim() != dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "candidate dim " + std::to_string(dim) + " vs ID table dim " +
                    std::to_string(id_table.dim()));
  }
}

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "eta must lie in [0, 1], got " + std::to_string(eta));
  }
}

// Negated similarities of one candidate, reduced to the requested rank.
double select_rank(std::span<const double> sims, std::size_t k,
                   std::vector<double>& scratch) {
  scratch.resize(sims.size());
  for (std::size_t j = 0; j < sims.size(); ++j) scratch[j] = -sims[j];
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                   scratch.end());
  return scratch[k];
}

}  // namespace

std::string_view to_string(Selection s) noexcept {
  switch (s) {
    case Selection::NearestAndFarthest: return "nearest_and_farthest";
    case Selection::NearestOnly: return "nearest";
    case Selection::FarthestOnly: return "farthest";
  }
  return "?";
}

std::string_view to_string(Side s) noexcept {
  return s == Side::Nearest ? "nearest" : "farthest";
}

Selection parse_selection(std::string_view text) {
  if (text == "nearest_and_farthest" || text == "both") return Selection::NearestAndFarthest;
  if (text == "nearest") return Selection::NearestOnly;
  if (text == "farthest") return Selection::FarthestOnly;
  throw Error(ErrorKind::ConfigError, "unknown selection '" + std::string(text) + "'");
}

Side parse_side(std::string_view text) {
  if (text == "nearest") return Side::Nearest;
  if (text == "farthest") return Side::Farthest;
  throw Error(ErrorKind::FormatError, "unknown side '" + std::string(text) + "'");
}

MinedLabelSet MinedLabelSet::none(std::size_t dim) {
  MinedLabelSet out;
  out.table = EmbeddingTable(dim, {}, {});
  return out;
}

std::size_t percentile_rank_index(double eta, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::EmptyInput, "percentile of an empty sample");
  check_eta(eta);
  // The 1e-9 slack keeps products such as 0.07 * 100 = 7.000000000000001
  // on the intended rank.
  const double rank = std::ceil(eta * static_cast<double>(n) - 1e-9);
  const double index = std::clamp(rank - 1.0, 0.0, static_cast<double>(n - 1));
  return static_cast<std::size_t>(index);
}

double percentile_distance(std::span<const double> candidate,
                           const EmbeddingTable& id_table, double eta) {
  check_id_table(id_table, candidate.size());
  const std::size_t k = percentile_rank_index(eta, id_table.size());
  std::vector<double> sims(id_table.size());
  for (std::size_t j = 0; j < id_table.size(); ++j) {
    sims[j] = sim(candidate, id_table.row(j));
  }
  std::vector<double> scratch;
  return select_rank(sims, k, scratch);
}

double percentile_distance(const EmbeddingVector& candidate,
                           const EmbeddingTable& id_table, double eta) {
  return percentile_distance(candidate.values(), id_table, eta);
}

std::vector<double> percentile_distances(const EmbeddingTable& candidates,
                                         const EmbeddingTable& id_table,
                                         double eta) {
  check_id_table(id_table, candidates.dim());
  const std::size_t n_id = id_table.size();
  const std::size_t k = percentile_rank_index(eta, n_id);
  const kernels::SimilarityBank bank(id_table);

  std::vector<double> out(candidates.size());
  std::vector<double> sims;
  for (std::size_t first = 0; first < candidates.size(); first += kCandidateBatch) {
    const std::size_t count = std::min(kCandidateBatch, candidates.size() - first);
    sims.resize(count * n_id);
    bank.compute(candidates.data().subspan(first * candidates.dim(),
                                           count * candidates.dim()),
                 sims);
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel
    {
      std::vector<double> scratch;
#pragma omp for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) {
        const auto row = std::span<const double>(sims).subspan(
            static_cast<std::size_t>(i) * n_id, n_id);
        out[first + static_cast<std::size_t>(i)] = select_rank(row, k, scratch);
      }
    }
  }
  return out;
}

MinedLabelSet mine(const EmbeddingTable& candidates,
                   const EmbeddingTable& id_table, const MiningConfig& cfg) {
  if (candidates.empty()) {
    throw Error(ErrorKind::EmptyInput, "candidate lexicon is empty");
  }
  check_id_table(id_table, candidates.dim());
  check_eta(cfg.eta);

  std::vector<std::size_t> pool;
  pool.reserve(candidates.size());
  std::vector<std::string> canon(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    canon[i] = canonical_label(candidates.label(i));
  }
  if (cfg.exclude_id_overlap) {
    std::unordered_set<std::string> id_labels;
    for (const auto& l : id_table.labels()) id_labels.insert(canonical_label(l));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!id_labels.contains(canon[i])) pool.push_back(i);
    }
  } else {
    pool.resize(candidates.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }

  if (cfg.selection != Selection::NearestAndFarthest && pool.size() < cfg.m) {
    throw Error(ErrorKind::NotEnoughCandidates,
                std::to_string(pool.size()) + " candidates for M=" +
                    std::to_string(cfg.m) + " on a single side");
  }

  const std::vector<double> dist = percentile_distances(candidates, id_table, cfg.eta);

  const auto nearer = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return canon[a] < canon[b];
  };
  const auto farther = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return canon[a] < canon[b];
  };
  const std::size_t take = std::min(cfg.m, pool.size());

  std::vector<std::size_t> chosen;
  std::vector<Side> sides;
  std::vector<bool> taken(candidates.size(), false);
  if (cfg.selection != Selection::NearestOnly) {
    std::vector<std::size_t> order = pool;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), farther);
    for (std::size_t r = 0; r < take; ++r) {
      chosen.push_back(order[r]);
      sides.push_back(Side::Farthest);
      taken[order[r]] = true;
    }
  }
  if (cfg.selection != Selection::FarthestOnly) {
    std::vector<std::size_t> order = pool;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), nearer);
    for (std::size_t r = 0; r < take; ++r) {
      if (taken[order[r]]) continue;
      chosen.push_back(order[r]);
      sides.push_back(Side::Nearest);
    }
  }

  MinedLabelSet out;
  std::vector<std::string> labels;
  std::vector<double> data;
  labels.reserve(chosen.size());
  data.reserve(chosen.size() * candidates.dim());
  for (std::size_t idx : chosen) {
    labels.push_back(candidates.label(idx));
    const auto row = candidates.row(idx);
    data.insert(data.end(), row.begin(), row.end());
    out.distances.push_back(dist[idx]);
  }
  out.table = EmbeddingTable(candidates.dim(), std::move(labels), std::move(data),
                             candidates.provenance());
  out.sides = std::move(sides);
  out.candidate_index = std::move(chosen);
  return out;
}

}  // namespace clipscope
