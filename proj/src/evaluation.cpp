#include "clipscope/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "clipscope/error.hpp"
#include "clipscope/rng.hpp"

namespace clipscope {

namespace {

void require_scores(std::span<const double> a, std::string_view what) {
  if (a.empty()) throw Error(ErrorKind::EmptyInput, std::string(what) + " is empty");
  for (double x : a) {
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::NonFinite, std::string(what) + " contains NaN or Inf");
    }
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

// ---- metrics ----

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_scores(id_scores, "ID scores");
  require_scores(ood_scores, "OOD scores");
  const std::size_t n = id_scores.size();
  const std::size_t m = ood_scores.size();

  struct Item {
    double score;
    bool is_id;
  };
  std::vector<Item> items;
  items.reserve(n + m);
  for (double s : id_scores) items.push_back({s, true});
  for (double s : ood_scores) items.push_back({s, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Twice the ID rank sum, using mid-ranks for ties; stays integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t a = 0; a < items.size();) {
    std::size_t b = a;
    while (b + 1 < items.size() && items[b + 1].score == items[a].score) ++b;
    const std::uint64_t twice_mid = (a + 1) + (b + 1);
    for (std::size_t i = a; i <= b; ++i)
      if (items[i].is_id) twice_rank_sum += twice_mid;
    a = b + 1;
  }
  const std::uint64_t twice_u = twice_rank_sum - n * (n + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n) * static_cast<double>(m));
}

double tpr_threshold(std::span<const double> id_scores, double tpr_target) {
  require_scores(id_scores, "ID scores");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "tpr_target must lie in (0, 1]");
  }
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    // Skip to the last copy of this value so the count includes all ties.
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    if (static_cast<double>(i + 1) / n >= tpr_target) return sorted[i];
  }
  return sorted.back();
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target) {
  require_scores(ood_scores, "OOD scores");
  const double gamma = tpr_threshold(id_scores, tpr_target);
  const auto admitted =
      std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s >= gamma; });
  return static_cast<double>(admitted) / static_cast<double>(ood_scores.size());
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "pearson needs two equal-length samples");
  }
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ---- orderings ----

std::string_view to_string(OrderKind k) noexcept {
  switch (k) {
    case OrderKind::Forward: return "forward";
    case OrderKind::Reverse: return "reverse";
    case OrderKind::Random: return "random";
  }
  return "?";
}

OrderKind parse_order_kind(std::string_view text) {
  if (text == "forward") return OrderKind::Forward;
  if (text == "reverse") return OrderKind::Reverse;
  if (text == "random") return OrderKind::Random;
  throw Error(ErrorKind::ConfigError, "unknown order '" + std::string(text) + "'");
}

std::vector<std::size_t> stream_order(std::size_t n_id, std::size_t n_ood, OrderKind kind,
                                      std::uint64_t seed) {
  std::vector<std::size_t> order(n_id + n_ood);
  switch (kind) {
    case OrderKind::Forward:
      std::iota(order.begin(), order.end(), std::size_t{0});
      break;
    case OrderKind::Reverse:
      std::iota(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_ood), n_id);
      std::iota(order.begin() + static_cast<std::ptrdiff_t>(n_ood), order.end(), std::size_t{0});
      break;
    case OrderKind::Random: {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(seed);
      shuffle(std::span<std::size_t>(order), rng);
      break;
    }
  }
  return order;
}

// ---- reports ----

bool EvalReport::operator==(const EvalReport& o) const {
  const auto mining_eq = [](const std::optional<MiningConfig>& a,
                            const std::optional<MiningConfig>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->m == b->m && a->eta == b->eta && a->selection == b->selection &&
           a->exclude_id_overlap == b->exclude_id_overlap;
  };
  return auroc == o.auroc && fpr95 == o.fpr95 && per_trial == o.per_trial &&
         label == o.label && mode == o.mode && ordering == o.ordering && tau == o.tau &&
         gamma == o.gamma && mining_eq(mining, o.mining) && n_negatives == o.n_negatives &&
         rng_algorithm == o.rng_algorithm;
}

TrialTrace run_trial(std::span<const PriorEstimate> id_priors,
                     std::span<const PriorEstimate> ood_priors, std::size_t n_classes,
                     const ScorerConfig& cfg, OrderKind kind, std::uint64_t seed) {
  const std::size_t n_id = id_priors.size();
  TrialTrace trace;
  trace.order = stream_order(n_id, ood_priors.size(), kind, seed);
  trace.origin.reserve(trace.order.size());
  trace.records.reserve(trace.order.size());
  ClassHistogram hist(n_classes);
  for (std::size_t pos : trace.order) {
    const bool is_id = pos < n_id;
    const PriorEstimate& prior = is_id ? id_priors[pos] : ood_priors[pos - n_id];
    trace.origin.push_back(is_id ? Origin::ID : Origin::OOD);
    trace.records.push_back(posterior_update(prior, hist, cfg));
  }
  return trace;
}

EvalReport evaluate_priors(std::span<const PriorEstimate> id_priors,
                           std::span<const PriorEstimate> ood_priors, std::size_t n_classes,
                           const ScorerConfig& cfg, const StreamOrdering& ordering) {
  if (id_priors.empty() || ood_priors.empty()) {
    throw Error(ErrorKind::EmptyInput, "evaluation needs both ID and OOD samples");
  }
  if (ordering.kind == OrderKind::Random && ordering.trials == 0) {
    throw Error(ErrorKind::InvalidArgument, "random ordering needs >= 1 trial");
  }
  EvalReport report;
  report.mode = cfg.mode;
  report.ordering = ordering;
  report.tau = cfg.tau;
  report.gamma = cfg.gamma;
  report.rng_algorithm = std::string(Rng::kAlgorithm);

  const std::size_t trials = ordering.effective_trials();
  report.per_trial.resize(trials);
  const auto n_trials = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t t = 0; t < n_trials; ++t) {
    const std::uint64_t seed = ordering.trial_seed(static_cast<std::size_t>(t));
    const auto trace = run_trial(id_priors, ood_priors, n_classes, cfg, ordering.kind, seed);
    std::vector<double> id_scores, ood_scores;
    id_scores.reserve(id_priors.size());
    ood_scores.reserve(ood_priors.size());
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      (trace.origin[i] == Origin::ID ? id_scores : ood_scores).push_back(trace.records[i].score);
    }
    report.per_trial[static_cast<std::size_t>(t)] = {seed, auroc(id_scores, ood_scores),
                                                    fpr_at_tpr(id_scores, ood_scores, 0.95)};
  }

  double sum_auroc = 0.0, sum_fpr = 0.0;
  for (const auto& t : report.per_trial) {
    sum_auroc += t.auroc;
    sum_fpr += t.fpr95;
  }
  report.auroc = sum_auroc / static_cast<double>(trials);
  report.fpr95 = sum_fpr / static_cast<double>(trials);
  return report;
}

EvalReport run_stream(const EmbeddingTable& id_stream, const EmbeddingTable& ood_stream,
                      const EmbeddingTable& id_table, const MinedLabelSet& neg,
                      const ScorerConfig& cfg, const StreamOrdering& ordering) {
  const StreamScorer scorer(id_table, neg, cfg);
  const auto id_priors = scorer.estimate(id_stream);
  const auto ood_priors = scorer.estimate(ood_stream);
  EvalReport report = evaluate_priors(id_priors, ood_priors, id_table.size(), cfg, ordering);
  report.n_negatives = neg.size();
  return report;
}

// ---- sweeps ----

std::string GridPoint::describe() const {
  std::ostringstream out;
  const char* sep = "";
  if (mode) {
    out << sep << "mode=" << to_string(*mode);
    sep = ";";
  }
  if (m) {
    out << sep << "m=" << *m;
    sep = ";";
  }
  if (eta) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, *eta);
    out << sep << "eta=" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    sep = ";";
  }
  if (selection) out << sep << "selection=" << to_string(*selection);
  return out.str();
}

std::vector<GridPoint> parse_grid(std::string_view text) {
  std::vector<GridPoint> grid;
  for (std::string_view axis : split(text, ';')) {
    axis = trim(axis);
    if (axis.empty()) continue;
    const auto eq = axis.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, "grid axis '" + std::string(axis) + "' lacks '='");
    }
    const auto key = trim(axis.substr(0, eq));
    for (std::string_view value : split(axis.substr(eq + 1), ',')) {
      value = trim(value);
      GridPoint p;
      if (key == "mode") {
        p.mode = parse_score_mode(value);
      } else if (key == "m") {
        std::size_t v = 0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
          throw Error(ErrorKind::ConfigError, "bad M '" + std::string(value) + "'");
        }
        p.m = v;
      } else if (key == "eta") {
        double v = 0.0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size() || v < 0.0 ||
            v > 1.0) {
          throw Error(ErrorKind::ConfigError, "bad eta '" + std::string(value) + "'");
        }
        p.eta = v;
      } else if (key == "selection") {
        p.selection = parse_selection(value);
      } else {
        throw Error(ErrorKind::ConfigError, "unknown grid axis '" + std::string(key) + "'");
      }
      grid.push_back(p);
    }
  }
  if (grid.empty()) throw Error(ErrorKind::ConfigError, "empty sweep grid");
  return grid;
}

std::vector<EvalReport> ablation_sweep(std::span<const GridPoint> grid, const SweepInputs& base) {
  if (grid.empty()) throw Error(ErrorKind::EmptyInput, "sweep grid is empty");

  struct Mined {
    MiningConfig cfg;
    MinedLabelSet set;
  };
  std::vector<Mined> cache;
  const auto mined_for = [&](const MiningConfig& cfg) -> const MinedLabelSet& {
    for (const auto& c : cache) {
      if (c.cfg.m == cfg.m && c.cfg.eta == cfg.eta && c.cfg.selection == cfg.selection &&
          c.cfg.exclude_id_overlap == cfg.exclude_id_overlap) {
        return c.set;
      }
    }
    MinedLabelSet set = (cfg.m == 0 || base.candidates.empty())
                            ? MinedLabelSet::none(base.id_table.dim())
                            : mine(base.candidates, base.id_table, cfg);
    cache.push_back({cfg, std::move(set)});
    return cache.back().set;
  };

  std::vector<EvalReport> reports;
  reports.reserve(grid.size());
  for (const auto& point : grid) {
    MiningConfig mcfg = base.mining;
    if (point.m) mcfg.m = *point.m;
    if (point.eta) mcfg.eta = *point.eta;
    if (point.selection) mcfg.selection = *point.selection;
    ScorerConfig scfg = base.scorer;
    if (point.mode) scfg.mode = *point.mode;

    const MinedLabelSet& neg = mined_for(mcfg);
    EvalReport r = run_stream(base.id_stream, base.ood_stream, base.id_table, neg, scfg,
                              base.ordering);
    r.label = point.describe();
    r.mining = mcfg;
    reports.push_back(std::move(r));
  }
  return reports;
}

// ---- class likelihood ----

double ClassLikelihoodProfile::ood_global_correlation() const {
  return pearson(p0_ood, p0_all);
}

ClassLikelihoodProfile class_likelihood_profile(std::span<const ScoreRecord> records,
                                                std::span<const Origin> origin,
                                                std::size_t n_classes) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no records to profile");
  if (records.size() != origin.size()) {
    throw Error(ErrorKind::InvalidArgument, "records and origin tags differ in length");
  }
  if (n_classes == 0) throw Error(ErrorKind::EmptyIdTable, "profile needs >= 1 class");

  std::vector<std::uint64_t> id_hits(n_classes, 0), ood_hits(n_classes, 0);
  std::uint64_t n_id = 0, n_ood = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::size_t c = records[i].i_star;
    if (c >= n_classes) {
      throw Error(ErrorKind::IndexOutOfRange, "record class " + std::to_string(c) +
                                                  " outside " + std::to_string(n_classes));
    }
    if (origin[i] == Origin::ID) {
      ++id_hits[c];
      ++n_id;
    } else {
      ++ood_hits[c];
      ++n_ood;
    }
  }

  ClassLikelihoodProfile p;
  p.p0_id.assign(n_classes, 0.0);
  p.p0_ood.assign(n_classes, 0.0);
  p.p0_all.assign(n_classes, 0.0);
  p.p_ood_given_class.assign(n_classes, 0.0);
  const double n_all = static_cast<double>(records.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::uint64_t hits = id_hits[c] + ood_hits[c];
    if (n_id > 0) p.p0_id[c] = static_cast<double>(id_hits[c]) / static_cast<double>(n_id);
    if (n_ood > 0) p.p0_ood[c] = static_cast<double>(ood_hits[c]) / static_cast<double>(n_ood);
    p.p0_all[c] = static_cast<double>(hits) / n_all;
    if (hits > 0) {
      p.p_ood_given_class[c] = static_cast<double>(ood_hits[c]) / static_cast<double>(hits);
    }
  }
  return p;
}

}  // namespace clipscope
