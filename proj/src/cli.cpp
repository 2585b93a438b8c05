#include "clipscope/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "clipscope/evaluation.hpp"
#include "clipscope/io.hpp"
#include "clipscope/kernels.hpp"
#include "clipscope/mining.hpp"
#include "clipscope/scorer.hpp"
#include "clipscope/synth.hpp"

namespace clipscope::cli {

namespace fs = std::filesystem;

namespace {

/// Every knob a command can take; unused fields stay at their defaults.
struct RunConfig {
  std::string command;
  std::string id_table;
  std::string candidates;
  std::string mined;
  std::string stream_id;
  std::string stream_ood;
  std::string histogram;
  std::string out = ".";
  std::string grid;
  std::string preset = "separable";

  std::size_t m = MiningConfig{}.m;
  double eta = MiningConfig{}.eta;
  std::string selection = "nearest_and_farthest";
  bool exclude_overlap = false;

  double tau = ScorerConfig{}.tau;
  double gamma = ScorerConfig{}.gamma;
  std::string mode = "P1P2_over_P0";

  std::string order = "random";
  std::uint64_t seed = 0;
  std::size_t trials = 5;

  std::optional<std::size_t> dim;
  std::optional<std::size_t> ood_samples;
  std::optional<double> separation;

  MiningConfig mining() const {
    return {m, eta, parse_selection(selection), exclude_overlap};
  }
  ScorerConfig scorer() const { return {tau, gamma, parse_score_mode(mode)}; }
  StreamOrdering ordering() const {
    const OrderKind kind = parse_order_kind(order);
    return {kind, seed, kind == OrderKind::Random ? trials : 1};
  }
};

std::string fmt_uint(std::uint64_t v) { return std::to_string(v); }

io::ConfigEcho echo(const RunConfig& c) {
  io::ConfigEcho e = {{"command", c.command}};
  const auto add = [&](const char* k, const std::string& v) {
    if (!v.empty()) e.emplace_back(k, v);
  };
  add("id-table", c.id_table);
  add("candidates", c.candidates);
  add("mined", c.mined);
  add("stream-id", c.stream_id);
  add("stream-ood", c.stream_ood);
  add("histogram", c.histogram);
  add("grid", c.grid);
  if (c.command == "synth") {
    e.emplace_back("preset", c.preset);
    if (c.dim) e.emplace_back("dim", fmt_uint(*c.dim));
    if (c.ood_samples) e.emplace_back("ood-samples", fmt_uint(*c.ood_samples));
    if (c.separation) e.emplace_back("separation", io::format_real(*c.separation));
    e.emplace_back("seed", fmt_uint(c.seed));
    return e;
  }
  e.emplace_back("m", fmt_uint(c.m));
  e.emplace_back("eta", io::format_real(c.eta));
  e.emplace_back("selection", c.selection);
  e.emplace_back("exclude-overlap", c.exclude_overlap ? "true" : "false");
  e.emplace_back("tau", io::format_real(c.tau));
  e.emplace_back("gamma", io::format_real(c.gamma));
  e.emplace_back("mode", c.mode);
  e.emplace_back("order", c.order);
  e.emplace_back("seed", fmt_uint(c.seed));
  e.emplace_back("trials", fmt_uint(c.trials));
  return e;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Flat key=value file turned into "--key=value" arguments. Placed ahead of
// the real command line, so explicit flags take precedence.
std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open config file " + path);
  std::vector<std::string> args;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ConfigError,
                  path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    args.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

// ---- inputs ----

struct Inputs {
  EmbeddingTable id_table;
  MinedLabelSet neg;
  std::optional<MiningConfig> mined_with;  // set when mined on the fly
};

EmbeddingTable require_table(const std::string& path, const char* flag) {
  if (path.empty()) throw Error(ErrorKind::ConfigError, std::string(flag) + " is required");
  return io::read_embt(path);
}

void check_dims(const EmbeddingTable& ref, const EmbeddingTable& other, const std::string& what) {
  if (!other.empty() && other.dim() != ref.dim()) {
    throw Error(ErrorKind::DimensionMismatch, what + " has dim " + std::to_string(other.dim()) +
                                                  ", ID table has dim " + std::to_string(ref.dim()));
  }
}

Inputs load_labels(const RunConfig& c) {
  Inputs in;
  in.id_table = require_table(c.id_table, "--id-table");
  if (!c.mined.empty()) {
    in.neg = io::read_mined(c.mined);
    check_dims(in.id_table, in.neg.table, "mined set " + c.mined);
  } else if (!c.candidates.empty()) {
    const auto candidates = io::read_embt(c.candidates);
    check_dims(in.id_table, candidates, "candidate table " + c.candidates);
    const auto cfg = c.mining();
    in.neg = cfg.m == 0 ? MinedLabelSet::none(in.id_table.dim())
                        : mine(candidates, in.id_table, cfg);
    in.mined_with = cfg;
  } else {
    in.neg = MinedLabelSet::none(in.id_table.dim());
  }
  return in;
}

struct Streams {
  EmbeddingTable id;
  EmbeddingTable ood;
};

Streams load_streams(const RunConfig& c, const EmbeddingTable& id_table, bool require_both) {
  Streams s{EmbeddingTable(id_table.dim(), {}, {}), EmbeddingTable(id_table.dim(), {}, {})};
  if (!c.stream_id.empty()) s.id = io::read_embt(c.stream_id);
  if (!c.stream_ood.empty()) s.ood = io::read_embt(c.stream_ood);
  if (require_both && (c.stream_id.empty() || c.stream_ood.empty())) {
    throw Error(ErrorKind::ConfigError, "--stream-id and --stream-ood are both required");
  }
  if (c.stream_id.empty() && c.stream_ood.empty()) {
    throw Error(ErrorKind::ConfigError, "at least one of --stream-id / --stream-ood is required");
  }
  check_dims(id_table, s.id, "ID stream");
  check_dims(id_table, s.ood, "OOD stream");
  return s;
}

// ---- commands ----

void cmd_mine(const RunConfig& c) {
  const auto id_table = require_table(c.id_table, "--id-table");
  const auto candidates = require_table(c.candidates, "--candidates");
  check_dims(id_table, candidates, "candidate table");
  const auto set = mine(candidates, id_table, c.mining());
  io::write_mined(fs::path(c.out) / "mined.tsv", set, echo(c));
  std::cout << "mined\t" << set.size() << "\tlabels\t" << (fs::path(c.out) / "mined.tsv").string()
            << '\n';
}

void cmd_score(const RunConfig& c) {
  const Inputs in = load_labels(c);
  const Streams s = load_streams(c, in.id_table, false);
  ClassHistogram hist = c.histogram.empty() ? ClassHistogram(in.id_table.size())
                                            : io::read_histogram(c.histogram);
  if (hist.size() != in.id_table.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "histogram has " + std::to_string(hist.size()) + " bins for " +
                    std::to_string(in.id_table.size()) + " ID classes");
  }
  const StreamScorer scorer(in.id_table, in.neg, c.scorer());
  std::vector<io::RecordRow> rows;
  rows.reserve(s.id.size() + s.ood.size());
  for (const auto* part : {&s.id, &s.ood}) {
    const auto records = scorer.score_stream(*part, hist);
    const Origin origin = part == &s.id ? Origin::ID : Origin::OOD;
    for (std::size_t i = 0; i < records.size(); ++i) {
      rows.push_back({part->label(i), origin, records[i]});
    }
  }
  const auto config = echo(c);
  io::write_records(fs::path(c.out) / "records.tsv", rows, config);
  io::write_histogram(fs::path(c.out) / "histogram.tsv", hist, in.id_table.labels(), config);
  std::cout << "scored\t" << rows.size() << "\tsamples\n";
}

void print_report(const EvalReport& r) {
  std::cout << (r.label.empty() ? "report" : r.label) << "\tauroc\t" << io::format_real(r.auroc)
            << "\tfpr95\t" << io::format_real(r.fpr95) << '\n';
}

void cmd_eval(const RunConfig& c) {
  const Inputs in = load_labels(c);
  const Streams s = load_streams(c, in.id_table, true);
  EvalReport report = run_stream(s.id, s.ood, in.id_table, in.neg, c.scorer(), c.ordering());
  report.mining = in.mined_with;
  io::write_reports(fs::path(c.out) / "report.tsv", std::span(&report, 1), echo(c));
  print_report(report);
}

void cmd_sweep(const RunConfig& c) {
  if (c.grid.empty()) throw Error(ErrorKind::ConfigError, "--grid is required");
  const auto grid = parse_grid(c.grid);
  const auto id_table = require_table(c.id_table, "--id-table");
  const auto candidates = c.candidates.empty() ? EmbeddingTable(id_table.dim(), {}, {})
                                               : io::read_embt(c.candidates);
  check_dims(id_table, candidates, "candidate table");
  const Streams s = load_streams(c, id_table, true);
  const SweepInputs inputs{s.id,      s.ood,      id_table,    candidates,
                           c.mining(), c.scorer(), c.ordering()};
  const auto reports = ablation_sweep(grid, inputs);
  io::write_reports(fs::path(c.out) / "sweep.tsv", reports, echo(c));
  for (const auto& r : reports) print_report(r);
}

void cmd_synth(const RunConfig& c) {
  SynthSpec spec = preset(c.preset);
  spec.seed = c.seed;
  if (c.dim) spec.dim = *c.dim;
  if (c.ood_samples) spec.ood_samples = *c.ood_samples;
  if (c.separation) spec.separation = *c.separation;
  const SynthData data = generate(spec);
  const fs::path out(c.out);
  io::write_embt(out / "id_labels.embt", data.id_table);
  io::write_embt(out / "candidates.embt", data.candidates);
  io::write_embt(out / "id_stream.embt", data.id_stream);
  io::write_embt(out / "ood_stream.embt", data.ood_stream);

  std::ostringstream cfg;
  cfg << "# clipscope synth " << c.preset << "\n";
  for (const auto& [k, v] : echo(c)) {
    if (k != "command") cfg << k << '=' << v << '\n';
  }
  io::atomic_write(out / "synth.cfg", cfg.str());
  std::cout << "synth\t" << c.preset << "\t" << out.string() << '\n';
}

void cmd_analyze(const RunConfig& c) {
  const Inputs in = load_labels(c);
  const Streams s = load_streams(c, in.id_table, true);
  const auto cfg = c.scorer();
  const StreamScorer scorer(in.id_table, in.neg, cfg);
  const auto id_priors = scorer.estimate(s.id);
  const auto ood_priors = scorer.estimate(s.ood);
  const auto ord = c.ordering();
  const auto trace = run_trial(id_priors, ood_priors, in.id_table.size(), cfg, ord.kind,
                               ord.trial_seed(0));
  const auto profile = class_likelihood_profile(trace.records, trace.origin, in.id_table.size());
  io::write_profile(fs::path(c.out) / "profile.tsv", profile, in.id_table.labels(), echo(c));
  std::cout << "profile\tclasses\t" << in.id_table.size() << "\tood_global_correlation\t"
            << io::format_real(in.id_table.size() >= 2 ? profile.ood_global_correlation() : 0.0)
            << '\n';
}

// ---- option wiring ----

void add_label_inputs(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--id-table", c.id_table, "EMBT file of ID label embeddings");
  cmd->add_option("--mined", c.mined, "Mined label set file (from `mine`)");
  cmd->add_option("--candidates", c.candidates, "EMBT candidate lexicon to mine from");
}

void add_mining(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--m", c.m, "Labels per side");
  cmd->add_option("--eta", c.eta, "Percentile parameter")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--selection", c.selection, "nearest_and_farthest | nearest | farthest");
  cmd->add_flag("--exclude-overlap", c.exclude_overlap, "Drop candidates equal to an ID label");
}

void add_scoring(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--stream-id", c.stream_id, "EMBT file of ID sample embeddings");
  cmd->add_option("--stream-ood", c.stream_ood, "EMBT file of OOD sample embeddings");
  cmd->add_option("--tau", c.tau, "Softmax temperature");
  cmd->add_option("--gamma", c.gamma, "Decision threshold");
  cmd->add_option("--mode", c.mode, "Score mode (P1 ... P1P2_over_P0)");
}

void add_ordering(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--order", c.order, "forward | reverse | random");
  cmd->add_option("--seed", c.seed, "Base shuffle seed");
  cmd->add_option("--trials", c.trials, "Random-order trials");
}

ExitCode report_error(std::string_view kind, const std::string& message, ExitCode code) {
  std::string flat = message;
  for (char& ch : flat)
    if (ch == '\n' || ch == '\t') ch = ' ';
  std::cerr << "error\t" << kind << '\t' << flat << '\n';
  return code;
}

}  // namespace

ExitCode exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch:
      return kDimensionMismatch;
    case ErrorKind::FormatError:
    case ErrorKind::VersionMismatch:
    case ErrorKind::DuplicateLabel:
    case ErrorKind::ZeroVector:
    case ErrorKind::NonFinite:
    case ErrorKind::InvalidCounts:
      return kFormatError;
    default:
      return kConfigError;
  }
}

int run(const std::vector<std::string>& raw_args) {
  if (const char* env = std::getenv("CLIPSCOPE_THREADS")) {
    int n = 0;
    const std::string_view v(env);
    if (std::from_chars(v.data(), v.data() + v.size(), n).ec == std::errc() && n > 0) {
      kernels::set_max_threads(n);
    }
  }

  RunConfig c;
  CLI::App app{"Zero-shot OOD detection over embedding tables", "clipscope"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "Flat key=value configuration file");

  auto* mine_cmd = app.add_subcommand("mine", "Mine negative labels from a candidate lexicon");
  add_label_inputs(mine_cmd, c);
  add_mining(mine_cmd, c);

  auto* score_cmd = app.add_subcommand("score", "Score a stream and write records + histogram");
  add_label_inputs(score_cmd, c);
  add_mining(score_cmd, c);
  add_scoring(score_cmd, c);
  score_cmd->add_option("--histogram", c.histogram, "Resume from a histogram snapshot");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate AUROC / FPR95 under an ordering");
  auto* sweep_cmd = app.add_subcommand("sweep", "Ablation / parameter sweep");
  auto* analyze_cmd = app.add_subcommand("analyze", "Class-likelihood profile of a stream");
  for (auto* cmd : {eval_cmd, sweep_cmd, analyze_cmd}) {
    add_label_inputs(cmd, c);
    add_mining(cmd, c);
    add_scoring(cmd, c);
    add_ordering(cmd, c);
  }
  sweep_cmd->add_option("--grid", c.grid, "e.g. mode=P1,P1P2_over_P0;m=0,100;eta=0.05");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic embedding world");
  synth_cmd->add_option("--preset", c.preset, "separable | hard | imbalanced");
  synth_cmd->add_option("--seed", c.seed, "Generator seed");
  synth_cmd->add_option("--dim", c.dim, "Embedding dimension");
  synth_cmd->add_option("--ood-samples", c.ood_samples, "Number of OOD samples");
  synth_cmd->add_option("--separation", c.separation, "Cluster concentration");

  for (auto* cmd : {mine_cmd, score_cmd, eval_cmd, sweep_cmd, analyze_cmd, synth_cmd}) {
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--config", config_path, "Flat key=value configuration file");
  }

  try {
    // The config file must be read before parsing so its values can be
    // spliced in ahead of the explicit flags.
    std::vector<std::string> args(raw_args.begin() + (raw_args.empty() ? 0 : 1), raw_args.end());
    std::string cfg_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg_file = args[i + 1];
      if (args[i].starts_with("--config=")) cfg_file = args[i].substr(9);
    }
    if (!cfg_file.empty()) {
      const auto all = config_file_args(cfg_file);
      // Insert right after the subcommand name. Keys that belong to another
      // subcommand are dropped; keys no subcommand knows are an error.
      std::size_t at = 0;
      CLI::App* target = nullptr;
      for (; at < args.size() && target == nullptr; ++at) {
        for (auto* sub : app.get_subcommands({})) {
          if (sub->get_name() == args[at]) target = sub;
        }
      }
      std::vector<std::string> extra;
      for (const auto& arg : all) {
        const std::string flag = arg.substr(0, arg.find('='));
        const auto known = [&](CLI::App* a) { return a->get_option_no_throw(flag) != nullptr; };
        if (target != nullptr && known(target)) {
          extra.push_back(arg);
          continue;
        }
        const auto subs = app.get_subcommands({});
        if (std::none_of(subs.begin(), subs.end(), known)) {
          throw Error(ErrorKind::ConfigError, cfg_file + ": unknown key '" + flag.substr(2) + "'");
        }
      }
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("ConfigError", e.what(), kConfigError);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code_for(e.kind()));
  }

  try {
    if (mine_cmd->parsed()) c.command = "mine";
    else if (score_cmd->parsed()) c.command = "score";
    else if (eval_cmd->parsed()) c.command = "eval";
    else if (sweep_cmd->parsed()) c.command = "sweep";
    else if (synth_cmd->parsed()) c.command = "synth";
    else if (analyze_cmd->parsed()) c.command = "analyze";

    if (c.command == "mine") cmd_mine(c);
    else if (c.command == "score") cmd_score(c);
    else if (c.command == "eval") cmd_eval(c);
    else if (c.command == "sweep") cmd_sweep(c);
    else if (c.command == "synth") cmd_synth(c);
    else if (c.command == "analyze") cmd_analyze(c);
    return kOk;
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code_for(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return report_error("FileNotFound", e.what(), kConfigError);
  } catch (const std::exception& e) {
    return report_error("RuntimeError", e.what(), kRuntimeError);
  }
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace clipscope::cli
