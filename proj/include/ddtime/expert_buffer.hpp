#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ddtime/models.hpp"
#include "ddtime/rng.hpp"
#include "ddtime/series.hpp"

namespace ddtime {

/// One teacher's training run: parameters at init and after every epoch,
/// plus per-epoch metrics. Checkpoints hold 32-bit-representable values so
/// they survive the buffer file unchanged.
struct ExpertTrajectory {
  std::vector<ParameterVector> checkpoints;
  std::uint64_t seed = 0;
  std::vector<double> train_mse;
  std::vector<double> test_mse;
  std::vector<double> train_mae;
  std::vector<double> test_mae;

  std::size_t epochs() const noexcept { return checkpoints.empty() ? 0 : checkpoints.size() - 1; }
  bool operator==(const ExpertTrajectory&) const = default;
};

struct TeacherConfig {
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  double lr = 5e-4;
  double momentum = 0.9;
};

/// Shuffled mini-batch SGD with momentum. Test metrics are NaN when no test
/// set is given.
ExpertTrajectory train_teacher(const WindowedDataset& train, const WindowedDataset* test, const ModelSpec& spec,
                               const TeacherConfig& config, std::uint64_t seed);

inline constexpr std::uint16_t kBufferVersion = 1;
inline constexpr std::size_t kDefaultGroupSize = 5;

/// Binary replay-buffer file ("DDTB"), all fields little-endian:
///   magic "DDTB" | u16 version | u16 model kind | u32 t_in | u32 t_out |
///   u32 n_vars | u32 hidden count | u32 dims... | u32 trajectory count |
///   u32 checkpoints per trajectory | u64 param_dim |
///   per trajectory: u64 seed, checkpoints as f32, then train_mse, test_mse,
///   train_mae, test_mae as f64 (epochs values each) |
///   u32 CRC32 of every preceding byte.
/// A JSON sidecar with the same stem mirrors the header.
void save_buffer(std::span<const ExpertTrajectory> trajectories, const ModelSpec& spec,
                 const std::filesystem::path& path);

struct LoadedBuffer {
  ModelSpec spec;
  std::vector<ExpertTrajectory> trajectories;
};

LoadedBuffer load_buffer(const std::filesystem::path& path);

/// Writes replay_buffer_<k>.ddtb files of `group_size` trajectories each.
std::vector<std::filesystem::path> save_buffers(std::span<const ExpertTrajectory> trajectories,
                                                const ModelSpec& spec, const std::filesystem::path& dir,
                                                std::size_t group_size = kDefaultGroupSize);

/// Loads every replay_buffer_*.ddtb in `dir`, in index order.
LoadedBuffer load_buffers(const std::filesystem::path& dir);

struct SegmentSample {
  ParameterVector theta_start;
  ParameterVector theta_target;
  std::size_t expert_index = 0;
  std::size_t start_epoch = 0;
  std::size_t span = 0;
};

/// Uniform over experts long enough for `span`, then uniform start epoch.
SegmentSample sample_segment(std::span<const ExpertTrajectory> trajectories, std::size_t span, Rng& rng);

/// Every (expert, start) segment of the given span.
std::vector<SegmentSample> enumerate_segments(std::span<const ExpertTrajectory> trajectories, std::size_t span);

struct SegmentMatch {
  std::size_t index = 0;
  double loss = 0.0;
};

/// Exhaustive form of the min-over-experts parameter term: the segment
/// whose normalized distance to `theta_s` is smallest.
SegmentMatch min_param_match(std::span<const double> theta_s, std::span<const SegmentSample> segments);

}  // namespace ddtime
