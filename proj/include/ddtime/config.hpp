#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ddtime/distill.hpp"
#include "ddtime/eval.hpp"
#include "ddtime/expert_buffer.hpp"
#include "ddtime/models.hpp"
#include "ddtime/series.hpp"

namespace ddtime {

enum class StandardizeScope { train, global };

struct DataConfig {
  std::string path;  // empty selects the built-in sinusoid benchmark
  TextFormat format;
  std::array<double, 3> split{0.70, 0.15, 0.15};
  StandardizeScope scope = StandardizeScope::train;
  double epsilon = 1e-8;
  std::size_t t_in = 24;
  std::size_t t_out = 24;
  std::size_t stride = 12;
  // Built-in benchmark, used when `path` is empty.
  std::size_t bench_vars = 2;
  std::size_t bench_length = 600;
  double bench_noise = 0.1;
  std::uint64_t bench_seed = 0;
};

struct TeacherRunConfig {
  std::size_t trajectories = 40;
  std::size_t group_size = kDefaultGroupSize;
  TeacherConfig train;
};

/// A complete, reproducible run description. Serialized as flat
/// `section.key=value` lines; `#` starts a comment.
struct RunConfig {
  DataConfig data;
  ModelSpec model;  // t_in/t_out/n_vars are filled from the data at run time
  TeacherRunConfig teachers;
  DistillConfig distill;
  EvalConfig eval;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

/// Standardized, split and windowed data ready for every stage.
struct PreparedData {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  StandardizationStats stats;
  std::size_t n_vars = 0;
};

/// Two-or-more noisy sinusoids with distinct periods and phases; the
/// default benchmark when no data path is configured.
RawSeries noisy_sinusoids(std::size_t n_vars, std::size_t length, double noise, std::uint64_t seed);

PreparedData prepare_data(const RunConfig& config);
PreparedData prepare_data(const RawSeries& series, const DataConfig& data);

/// Model spec with window sizes and variable count taken from the data.
ModelSpec resolve_model(const RunConfig& config, const PreparedData& data);

}  // namespace ddtime
