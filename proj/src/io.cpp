#include "clipscope/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "clipscope/error.hpp"

namespace clipscope::io {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'T'};

// ---- little-endian primitives ----

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::FormatError, std::string("EMBT truncated in ") + what);
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// ---- text helpers ----

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void check_field(std::string_view s, std::string_view what) {
  if (s.find_first_of("\t\n\r") != std::string_view::npos) {
    throw Error(ErrorKind::FormatError,
                std::string(what) + " '" + std::string(s) + "' contains a tab or newline");
  }
}

std::uint64_t parse_uint(std::string_view text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::FormatError, "expected an unsigned integer, got '" + std::string(text) + "'");
  }
  return v;
}

class TextWriter {
 public:
  TextWriter(std::string_view kind, const ConfigEcho& config) {
    out_ << kind << '\t' << kTextVersion << '\n';
    for (const auto& [k, v] : config) {
      check_field(k, "config key");
      check_field(v, "config value");
      out_ << "config\t" << k << '\t' << v << '\n';
    }
  }
  void meta(std::string_view key, std::string_view value) {
    out_ << "meta\t" << key << '\t' << value << '\n';
  }
  template <typename... Fields>
  void row(const Fields&... fields) {
    const char* sep = "";
    ((out_ << sep << fields, sep = "\t"), ...);
    out_ << '\n';
  }
  std::ostringstream& stream() { return out_; }
  void commit(const fs::path& path) { atomic_write(path, out_.str()); }

 private:
  std::ostringstream out_;
};

// Parsed text artifact: header checked, config/meta pulled out, data rows kept.
struct TextFile {
  ConfigEcho config;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::vector<std::string>> rows;

  const std::string& meta_value(std::string_view key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    throw Error(ErrorKind::FormatError, "missing meta field '" + std::string(key) + "'");
  }
};

TextFile parse_text(const fs::path& path, std::string_view kind) {
  const std::string content = read_file(path);
  TextFile file;
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::FormatError, path.string() + ": empty file");
  }
  const auto head = split_tabs(line);
  if (head.size() != 2 || head[0] != kind) {
    throw Error(ErrorKind::FormatError,
                path.string() + ": expected a '" + std::string(kind) + "' file");
  }
  if (parse_uint(head[1]) != kTextVersion) {
    throw Error(ErrorKind::VersionMismatch,
                path.string() + ": unsupported " + std::string(kind) + " version " +
                    std::string(head[1]));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields[0] == "config" || fields[0] == "meta") {
      if (fields.size() != 3) {
        throw Error(ErrorKind::FormatError, path.string() + ": malformed line '" + line + "'");
      }
      auto& dest = fields[0] == "config" ? file.config : file.meta;
      dest.emplace_back(std::string(fields[1]), std::string(fields[2]));
      continue;
    }
    file.rows.emplace_back(fields.begin(), fields.end());
  }
  return file;
}

void expect_width(const std::vector<std::string>& row, std::size_t n, std::string_view what) {
  if (row.size() != n) {
    throw Error(ErrorKind::FormatError, std::string(what) + " row has " +
                                            std::to_string(row.size()) + " fields, expected " +
                                            std::to_string(n));
  }
}

Origin parse_origin(std::string_view s) {
  if (s == "ID") return Origin::ID;
  if (s == "OOD") return Origin::OOD;
  throw Error(ErrorKind::FormatError, "unknown origin '" + std::string(s) + "'");
}

std::string_view origin_name(Origin o) { return o == Origin::ID ? "ID" : "OOD"; }

}  // namespace

// ---- generic ----

std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::FormatError, "expected a real number, got '" + std::string(text) + "'");
  }
  return v;
}

void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::FileNotFound, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::FileNotFound, "write failed on " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- EMBT ----

std::string encode_embt(const EmbeddingTable& table) {
  if (table.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorKind::FormatError, "dim does not fit EMBT");
  }
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kEmbtVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
  put_le<std::uint64_t>(out, table.size());
  for (const auto& label : table.labels()) {
    if (label.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorKind::FormatError, "label too long for EMBT");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(label.size()));
    out += label;
  }
  out.reserve(out.size() + table.data().size() * 4);
  for (double x : table.data()) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return out;
}

EmbeddingTable decode_embt(std::string_view bytes, std::string provenance) {
  ByteReader in(bytes);
  if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw Error(ErrorKind::FormatError, "not an EMBT file (bad magic)");
  }
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kEmbtVersion) {
    throw Error(ErrorKind::VersionMismatch, "unsupported EMBT version " + std::to_string(version));
  }
  const std::size_t dim = in.get_le<std::uint32_t>("dim");
  const std::uint64_t count = in.get_le<std::uint64_t>("count");
  if (dim == 0) throw Error(ErrorKind::FormatError, "EMBT dim is 0");
  // Each entry needs at least 4 label-length bytes and 4 * dim value bytes.
  if (count > in.remaining() / (4 + 4 * static_cast<std::uint64_t>(dim))) {
    throw Error(ErrorKind::FormatError, "EMBT count exceeds file size");
  }

  std::vector<std::string> labels;
  labels.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = in.get_le<std::uint32_t>("label length");
    labels.emplace_back(in.take(len, "label"));
  }
  std::vector<double> data(count * dim);
  for (double& x : data) {
    x = static_cast<double>(std::bit_cast<float>(in.get_le<std::uint32_t>("values")));
  }
  if (in.remaining() != 0) throw Error(ErrorKind::FormatError, "trailing bytes after EMBT payload");

  for (std::uint64_t i = 0; i < count; ++i) {
    double* row = data.data() + i * dim;
    const double norm = l2_norm(std::span<const double>(row, dim));
    if (!std::isfinite(norm)) {
      throw Error(ErrorKind::NonFinite, "non-finite embedding row for '" + labels[i] + "'");
    }
    if (norm < 1e-12) throw Error(ErrorKind::ZeroVector, "zero embedding row for '" + labels[i] + "'");
    // Rows already unit at float precision are kept as stored so that
    // decode followed by encode reproduces the input bytes.
    if (std::abs(norm - 1.0) > 1e-6) {
      for (std::size_t d = 0; d < dim; ++d) row[d] /= norm;
    }
  }
  return EmbeddingTable(dim, std::move(labels), std::move(data), std::move(provenance));
}

void write_embt(const fs::path& path, const EmbeddingTable& table) {
  atomic_write(path, encode_embt(table));
}

EmbeddingTable read_embt(const fs::path& path) {
  return decode_embt(read_file(path), "embt:" + path.filename().string());
}

// ---- mined ----

void write_mined(const fs::path& path, const MinedLabelSet& set, const ConfigEcho& config) {
  TextWriter w("clipscope-mined", config);
  const std::size_t dim = set.table.dim();
  w.meta("dim", std::to_string(dim));
  w.meta("count", std::to_string(set.size()));
  w.row("columns", "label", "side", "distance", "candidate_index", "embedding");
  auto& out = w.stream();
  for (std::size_t i = 0; i < set.size(); ++i) {
    check_field(set.table.label(i), "label");
    out << "label\t" << set.table.label(i) << '\t' << to_string(set.sides[i]) << '\t'
        << format_real(set.distances[i]) << '\t' << set.candidate_index[i];
    for (double x : set.table.row(i)) out << '\t' << format_real(x);
    out << '\n';
  }
  w.commit(path);
}

MinedLabelSet read_mined(const fs::path& path, ConfigEcho* config) {
  const TextFile file = parse_text(path, "clipscope-mined");
  const std::size_t dim = parse_uint(file.meta_value("dim"));
  const std::size_t count = parse_uint(file.meta_value("count"));
  MinedLabelSet set;
  std::vector<std::string> labels;
  std::vector<double> data;
  for (const auto& row : file.rows) {
    if (row[0] == "columns") continue;
    if (row[0] != "label") throw Error(ErrorKind::FormatError, "unexpected row '" + row[0] + "'");
    expect_width(row, 5 + dim, "mined");
    labels.push_back(row[1]);
    set.sides.push_back(parse_side(row[2]));
    set.distances.push_back(parse_real(row[3]));
    set.candidate_index.push_back(parse_uint(row[4]));
    for (std::size_t d = 0; d < dim; ++d) data.push_back(parse_real(row[5 + d]));
  }
  if (labels.size() != count) {
    throw Error(ErrorKind::FormatError, "mined file declares " + std::to_string(count) +
                                            " labels but holds " + std::to_string(labels.size()));
  }
  set.table = EmbeddingTable(dim, std::move(labels), std::move(data), "mined:" + path.filename().string());
  if (config) *config = file.config;
  return set;
}

// ---- histogram ----

void write_histogram(const fs::path& path, const ClassHistogram& hist,
                     const std::vector<std::string>& class_labels, const ConfigEcho& config) {
  if (!class_labels.empty() && class_labels.size() != hist.size()) {
    throw Error(ErrorKind::DimensionMismatch, "histogram labels do not match its bins");
  }
  TextWriter w("clipscope-histogram", config);
  w.meta("classes", std::to_string(hist.size()));
  w.meta("total", std::to_string(hist.total()));
  w.row("columns", "class", "label", "count");
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const std::string& label = class_labels.empty() ? std::string() : class_labels[i];
    check_field(label, "label");
    w.row("bin", i, label, hist.count(i));
  }
  w.commit(path);
}

ClassHistogram read_histogram(const fs::path& path, ConfigEcho* config) {
  const TextFile file = parse_text(path, "clipscope-histogram");
  const std::size_t classes = parse_uint(file.meta_value("classes"));
  std::vector<std::uint64_t> counts;
  for (const auto& row : file.rows) {
    if (row[0] == "columns") continue;
    if (row[0] != "bin") throw Error(ErrorKind::FormatError, "unexpected row '" + row[0] + "'");
    expect_width(row, 4, "histogram");
    if (parse_uint(row[1]) != counts.size()) {
      throw Error(ErrorKind::FormatError, "histogram bins out of order");
    }
    counts.push_back(parse_uint(row[3]));
  }
  if (counts.size() != classes) throw Error(ErrorKind::FormatError, "histogram bin count mismatch");
  auto hist = ClassHistogram::restore(counts);
  if (hist.total() != parse_uint(file.meta_value("total"))) {
    throw Error(ErrorKind::FormatError, "histogram total does not match its bins");
  }
  if (config) *config = file.config;
  return hist;
}

// ---- records ----

void write_records(const fs::path& path, std::span<const RecordRow> rows, const ConfigEcho& config) {
  TextWriter w("clipscope-records", config);
  w.meta("count", std::to_string(rows.size()));
  w.row("columns", "index", "sample", "origin", "i_star", "p0", "p1", "p2", "score", "verdict");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    check_field(r.sample, "sample");
    w.row("record", i, r.sample, origin_name(r.origin), r.record.i_star, format_real(r.record.p0),
          format_real(r.record.p1), format_real(r.record.p2), format_real(r.record.score),
          to_string(r.record.verdict));
  }
  w.commit(path);
}

std::vector<RecordRow> read_records(const fs::path& path, ConfigEcho* config) {
  const TextFile file = parse_text(path, "clipscope-records");
  std::vector<RecordRow> out;
  for (const auto& row : file.rows) {
    if (row[0] == "columns") continue;
    if (row[0] != "record") throw Error(ErrorKind::FormatError, "unexpected row '" + row[0] + "'");
    expect_width(row, 10, "record");
    RecordRow r;
    r.sample = row[2];
    r.origin = parse_origin(row[3]);
    r.record.i_star = parse_uint(row[4]);
    r.record.p0 = parse_real(row[5]);
    r.record.p1 = parse_real(row[6]);
    r.record.p2 = parse_real(row[7]);
    r.record.score = parse_real(row[8]);
    r.record.verdict = parse_verdict(row[9]);
    out.push_back(std::move(r));
  }
  if (out.size() != parse_uint(file.meta_value("count"))) {
    throw Error(ErrorKind::FormatError, "record count mismatch");
  }
  if (config) *config = file.config;
  return out;
}

// ---- reports ----

void write_reports(const fs::path& path, std::span<const EvalReport> reports,
                   const ConfigEcho& config) {
  TextWriter w("clipscope-report", config);
  w.meta("reports", std::to_string(reports.size()));
  for (const auto& r : reports) {
    check_field(r.label, "report label");
    w.row("report", r.label);
    w.row("field", "mode", to_string(r.mode));
    w.row("field", "order", to_string(r.ordering.kind));
    w.row("field", "seed", r.ordering.seed);
    w.row("field", "trials", r.ordering.trials);
    w.row("field", "tau", format_real(r.tau));
    w.row("field", "gamma", format_real(r.gamma));
    w.row("field", "n_negatives", r.n_negatives);
    w.row("field", "rng", r.rng_algorithm);
    if (r.mining) {
      w.row("field", "m", r.mining->m);
      w.row("field", "eta", format_real(r.mining->eta));
      w.row("field", "selection", to_string(r.mining->selection));
      w.row("field", "exclude_id_overlap", r.mining->exclude_id_overlap ? "true" : "false");
    }
    for (const auto& t : r.per_trial) {
      w.row("trial", t.seed, format_real(t.auroc), format_real(t.fpr95));
    }
    w.row("mean", format_real(r.auroc), format_real(r.fpr95));
    w.row("end");
  }
  w.commit(path);
}

std::vector<EvalReport> read_reports(const fs::path& path, ConfigEcho* config) {
  const TextFile file = parse_text(path, "clipscope-report");
  std::vector<EvalReport> out;
  EvalReport* cur = nullptr;
  const auto mining = [&]() -> MiningConfig& {
    if (!cur->mining) cur->mining = MiningConfig{};
    return *cur->mining;
  };
  for (const auto& row : file.rows) {
    const std::string& tag = row[0];
    if (tag == "report") {
      expect_width(row, 2, "report");
      out.emplace_back();
      cur = &out.back();
      cur->label = row[1];
      continue;
    }
    if (!cur) throw Error(ErrorKind::FormatError, "report row before a report header");
    if (tag == "field") {
      expect_width(row, 3, "field");
      const std::string& key = row[1];
      const std::string& v = row[2];
      if (key == "mode") cur->mode = parse_score_mode(v);
      else if (key == "order") cur->ordering.kind = parse_order_kind(v);
      else if (key == "seed") cur->ordering.seed = parse_uint(v);
      else if (key == "trials") cur->ordering.trials = parse_uint(v);
      else if (key == "tau") cur->tau = parse_real(v);
      else if (key == "gamma") cur->gamma = parse_real(v);
      else if (key == "n_negatives") cur->n_negatives = parse_uint(v);
      else if (key == "rng") cur->rng_algorithm = v;
      else if (key == "m") mining().m = parse_uint(v);
      else if (key == "eta") mining().eta = parse_real(v);
      else if (key == "selection") mining().selection = parse_selection(v);
      else if (key == "exclude_id_overlap") mining().exclude_id_overlap = v == "true";
      else throw Error(ErrorKind::FormatError, "unknown report field '" + key + "'");
    } else if (tag == "trial") {
      expect_width(row, 4, "trial");
      cur->per_trial.push_back({parse_uint(row[1]), parse_real(row[2]), parse_real(row[3])});
    } else if (tag == "mean") {
      expect_width(row, 3, "mean");
      cur->auroc = parse_real(row[1]);
      cur->fpr95 = parse_real(row[2]);
    } else if (tag == "end") {
      cur = nullptr;
    } else {
      throw Error(ErrorKind::FormatError, "unexpected report row '" + tag + "'");
    }
  }
  if (out.size() != parse_uint(file.meta_value("reports"))) {
    throw Error(ErrorKind::FormatError, "report count mismatch");
  }
  if (config) *config = file.config;
  return out;
}

// ---- profiles ----

void write_profile(const fs::path& path, const ClassLikelihoodProfile& p,
                   const std::vector<std::string>& class_labels, const ConfigEcho& config) {
  const std::size_t n = p.p0_all.size();
  if (!class_labels.empty() && class_labels.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "profile labels do not match its classes");
  }
  TextWriter w("clipscope-profile", config);
  w.meta("classes", std::to_string(n));
  w.meta("ood_global_correlation", format_real(n >= 2 ? p.ood_global_correlation() : 0.0));
  w.row("columns", "class", "label", "p0_id", "p0_ood", "p0_all", "p_ood_given_class");
  for (std::size_t c = 0; c < n; ++c) {
    const std::string& label = class_labels.empty() ? std::string() : class_labels[c];
    check_field(label, "label");
    w.row("class", c, label, format_real(p.p0_id[c]), format_real(p.p0_ood[c]),
          format_real(p.p0_all[c]), format_real(p.p_ood_given_class[c]));
  }
  w.commit(path);
}

ClassLikelihoodProfile read_profile(const fs::path& path, ConfigEcho* config) {
  const TextFile file = parse_text(path, "clipscope-profile");
  ClassLikelihoodProfile p;
  for (const auto& row : file.rows) {
    if (row[0] == "columns") continue;
    if (row[0] != "class") throw Error(ErrorKind::FormatError, "unexpected row '" + row[0] + "'");
    expect_width(row, 7, "profile");
    p.p0_id.push_back(parse_real(row[3]));
    p.p0_ood.push_back(parse_real(row[4]));
    p.p0_all.push_back(parse_real(row[5]));
    p.p_ood_given_class.push_back(parse_real(row[6]));
  }
  if (p.p0_all.size() != parse_uint(file.meta_value("classes"))) {
    throw Error(ErrorKind::FormatError, "profile class count mismatch");
  }
  if (config) *config = file.config;
  return p;
}

}  // namespace clipscope::io
