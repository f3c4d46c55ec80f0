#pragma once

#include "cursor/dataset.hpp"
#include "cursor/reduce.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cursor::io {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::uint32_t kPcaFormatVersion = 1;

/// Binary dataset container, little-endian:
///   "CRSR", u32 version, u32 Dz, u32 De, u32 N,
///   f64[N*Dz] stimuli, f64[N*De] responses (row-major), u8 flags,
///   [flags & 1] u32 n_targets, f64[n_targets*Dz] targets, u32[N] target index, f64[N] distances,
///   [flags & 2] u32 length, provenance JSON bytes.
void write_dataset_binary(const StimulusResponseDataset& ds, const std::filesystem::path& path);
StimulusResponseDataset read_dataset_binary(const std::filesystem::path& path);

/// CSV with header stim_*, resp_*, optional true_dist (and target_idx for
/// several targets); dims, provenance and hidden targets go to `<path>.json`.
void write_dataset_csv(const StimulusResponseDataset& ds, const std::filesystem::path& path);
StimulusResponseDataset read_dataset_csv(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Dispatches on extension: ".bin" binary, anything else CSV.
void write_dataset(const StimulusResponseDataset& ds, const std::filesystem::path& path);
StimulusResponseDataset read_dataset(const std::filesystem::path& path);

/// "CRPC", u32 version, u32 input_dim, u32 k, f64 mean, f64 components, f64 variances.
void write_pca_binary(const PcaModel& m, const std::filesystem::path& path);
PcaModel read_pca_binary(const std::filesystem::path& path);

/// Fixed 12-significant-digit formatting used for result tables.
std::string format_number(double v);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
void write_jsonl(const std::vector<nlohmann::json>& rows, const std::filesystem::path& path);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Simple CSV table: header plus rows of already formatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const Table& t, const std::filesystem::path& path);
Table read_csv(const std::filesystem::path& path);

}  // namespace cursor::io
