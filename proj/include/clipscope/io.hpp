#pragma once

// On-disk formats.
//
// Embedding tables use the binary EMBT v1 layout (little-endian):
//   "EMBT" | u32 version = 1 | u32 dim | u64 count
//   | count x (u32 byte length, UTF-8 label bytes)
//   | count * dim IEEE-754 binary32 values, row-major
//
// Everything else is line-oriented UTF-8 with tab-separated fields:
//   <kind>\t<version>            first line, e.g. "clipscope-mined\t1"
//   config\t<key>\t<value>       effective configuration echo
//   meta\t<key>\t<value>         artifact-level values
//   ...                          kind-specific rows
// Reals use 17 significant digits with '.' as decimal point.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clipscope/embedding.hpp"
#include "clipscope/evaluation.hpp"
#include "clipscope/mining.hpp"
#include "clipscope/scorer.hpp"

namespace clipscope::io {

inline constexpr std::uint32_t kEmbtVersion = 1;
inline constexpr std::uint32_t kTextVersion = 1;

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

std::string format_real(double x);
double parse_real(std::string_view text);

/// Writes content to a sibling temp file, then renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// ---- EMBT ----

std::string encode_embt(const EmbeddingTable& table);
/// Rows are upcast to double and re-normalized unless their norm is already
/// within 1e-6 of 1; zero rows are rejected.
EmbeddingTable decode_embt(std::string_view bytes, std::string provenance = {});
void write_embt(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embt(const std::filesystem::path& path);

// ---- mined label sets ----

void write_mined(const std::filesystem::path& path, const MinedLabelSet& set,
                 const ConfigEcho& config);
MinedLabelSet read_mined(const std::filesystem::path& path, ConfigEcho* config = nullptr);

// ---- histogram snapshots ----

void write_histogram(const std::filesystem::path& path, const ClassHistogram& hist,
                     const std::vector<std::string>& class_labels, const ConfigEcho& config);
ClassHistogram read_histogram(const std::filesystem::path& path, ConfigEcho* config = nullptr);

// ---- score records ----

struct RecordRow {
  std::string sample;
  Origin origin = Origin::ID;
  ScoreRecord record;
  bool operator==(const RecordRow&) const = default;
};

void write_records(const std::filesystem::path& path, std::span<const RecordRow> rows,
                   const ConfigEcho& config);
std::vector<RecordRow> read_records(const std::filesystem::path& path,
                                    ConfigEcho* config = nullptr);

// ---- evaluation reports ----

void write_reports(const std::filesystem::path& path, std::span<const EvalReport> reports,
                   const ConfigEcho& config);
std::vector<EvalReport> read_reports(const std::filesystem::path& path,
                                     ConfigEcho* config = nullptr);

// ---- class likelihood profiles ----

void write_profile(const std::filesystem::path& path, const ClassLikelihoodProfile& profile,
                   const std::vector<std::string>& class_labels, const ConfigEcho& config);
ClassLikelihoodProfile read_profile(const std::filesystem::path& path,
                                    ConfigEcho* config = nullptr);

}  // namespace clipscope::io
