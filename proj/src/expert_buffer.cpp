#include "ddtime/expert_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <regex>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "ddtime/error.hpp"
#include "ddtime/losses.hpp"
#include "ddtime/metrics.hpp"

namespace ddtime {
namespace {

constexpr std::string_view kMagic = "DDTB";
constexpr double kMinSegmentSq = 1e-20;

ParameterVector to_f32_precision(const ParameterVector& p) {
  ParameterVector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<double>(static_cast<float>(p[i]));
  return out;
}

void write_sidecar(const std::filesystem::path& path, const ModelSpec& spec, std::size_t n_traj,
                   std::size_t n_ckpt, std::span<const ExpertTrajectory> trajectories) {
  nlohmann::ordered_json meta;
  meta["format"] = "DDTB";
  meta["version"] = kBufferVersion;
  meta["model_kind"] = spec.kind == ModelKind::mlp ? "mlp" : "channel_linear";
  meta["t_in"] = spec.t_in;
  meta["t_out"] = spec.t_out;
  meta["n_vars"] = spec.n_vars;
  meta["hidden_dims"] = spec.hidden_dims;
  meta["trajectory_count"] = n_traj;
  meta["checkpoints_per_trajectory"] = n_ckpt;
  meta["param_dim"] = parameter_count(spec);
  std::vector<std::uint64_t> seeds;
  for (const auto& t : trajectories) seeds.push_back(t.seed);
  meta["seeds"] = seeds;
  auto side = path;
  side.replace_extension(".json");
  std::ofstream out(side, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + side.string());
  out << meta.dump(2) << '\n';
}

}  // namespace

ExpertTrajectory train_teacher(const WindowedDataset& train, const WindowedDataset* test, const ModelSpec& spec,
                               const TeacherConfig& config, std::uint64_t seed) {
  if (train.empty()) throw Error(ErrorCode::empty_dataset, "teacher needs training windows");
  if (config.batch_size == 0 || config.epochs == 0) {
    throw Error(ErrorCode::invalid_argument, "epochs and batch size must be positive");
  }
  if (train.t_in != spec.t_in || train.t_out != spec.t_out) {
    throw Error(ErrorCode::shape_mismatch, "dataset windows do not match the model");
  }
  Rng rng(seed);
  ParameterVector params = init_params(spec, rng());
  OptimizerState state = OptimizerState::sgd(params.size());

  ExpertTrajectory traj;
  traj.seed = seed;
  traj.checkpoints.push_back(to_f32_precision(params));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<WindowPair> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(train.pairs[order[k]]);
      const auto lg = loss_and_grad(spec, params, batch);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::divergence, "teacher loss became non-finite in epoch " + std::to_string(epoch));
      }
      sgd_momentum_step(params, lg.grad, config.lr, config.momentum, state);
    }
    traj.checkpoints.push_back(to_f32_precision(params));
    const auto tm = evaluate_forecasts(spec, params, train);
    traj.train_mse.push_back(tm.mse);
    traj.train_mae.push_back(tm.mae);
    if (test != nullptr) {
      const auto te = evaluate_forecasts(spec, params, *test);
      traj.test_mse.push_back(te.mse);
      traj.test_mae.push_back(te.mae);
    } else {
      traj.test_mse.push_back(std::numeric_limits<double>::quiet_NaN());
      traj.test_mae.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return traj;
}

void save_buffer(std::span<const ExpertTrajectory> trajectories, const ModelSpec& spec,
                 const std::filesystem::path& path) {
  if (trajectories.empty()) throw Error(ErrorCode::invalid_argument, "no trajectories to save");
  validate(spec);
  const std::size_t n_ckpt = trajectories.front().checkpoints.size();
  const std::size_t dim = parameter_count(spec);
  for (const auto& t : trajectories) {
    if (t.checkpoints.size() != n_ckpt || n_ckpt < 2) {
      throw Error(ErrorCode::invalid_argument, "trajectories in one buffer must share their checkpoint count");
    }
    const std::size_t epochs = n_ckpt - 1;
    if (t.train_mse.size() != epochs || t.test_mse.size() != epochs || t.train_mae.size() != epochs ||
        t.test_mae.size() != epochs) {
      throw Error(ErrorCode::invalid_argument, "metric curves must have one entry per epoch");
    }
    for (const auto& c : t.checkpoints) {
      if (c.size() != dim) throw Error(ErrorCode::shape_mismatch, "checkpoint length differs from the model");
    }
  }

  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u16(kBufferVersion);
  w.put_u16(static_cast<std::uint16_t>(spec.kind));
  w.put_u32(static_cast<std::uint32_t>(spec.t_in));
  w.put_u32(static_cast<std::uint32_t>(spec.t_out));
  w.put_u32(static_cast<std::uint32_t>(spec.n_vars));
  const auto& hidden = spec.kind == ModelKind::mlp ? spec.hidden_dims : std::vector<std::size_t>{};
  w.put_u32(static_cast<std::uint32_t>(hidden.size()));
  for (auto h : hidden) w.put_u32(static_cast<std::uint32_t>(h));
  w.put_u32(static_cast<std::uint32_t>(trajectories.size()));
  w.put_u32(static_cast<std::uint32_t>(n_ckpt));
  w.put_u64(dim);
  for (const auto& t : trajectories) {
    w.put_u64(t.seed);
    for (const auto& c : t.checkpoints) {
      for (double x : c) w.put_f32(static_cast<float>(x));
    }
    for (const auto* curve : {&t.train_mse, &t.test_mse, &t.train_mae, &t.test_mae}) {
      for (double x : *curve) w.put_f64(x);
    }
  }
  w.seal();
  w.write_file(path);
  write_sidecar(path, spec, trajectories.size(), n_ckpt, trajectories);
}

LoadedBuffer load_buffer(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic(kMagic);
  const auto version = r.u16();
  if (version != kBufferVersion) {
    throw Error(ErrorCode::version_mismatch, "buffer version " + std::to_string(version));
  }
  LoadedBuffer out;
  const auto kind = r.u16();
  if (kind > static_cast<std::uint16_t>(ModelKind::mlp)) throw Error(ErrorCode::checksum_failure, "unknown model kind");
  out.spec.kind = static_cast<ModelKind>(kind);
  out.spec.t_in = r.u32();
  out.spec.t_out = r.u32();
  out.spec.n_vars = r.u32();
  const auto n_hidden = r.u32();
  if (n_hidden > r.size()) throw Error(ErrorCode::truncated_file, "hidden-layer count exceeds file size");
  for (std::uint32_t i = 0; i < n_hidden; ++i) out.spec.hidden_dims.push_back(r.u32());
  const std::uint64_t n_traj = r.u32();
  const std::uint64_t n_ckpt = r.u32();
  const std::uint64_t dim = r.u64();
  if (dim != parameter_count(out.spec) || n_ckpt < 2) {
    throw Error(ErrorCode::checksum_failure, "header fields are inconsistent");
  }
  const std::uint64_t per_traj = 8 + n_ckpt * dim * 4 + 4 * (n_ckpt - 1) * 8;
  r.verify_crc(r.position() + n_traj * per_traj);

  const std::size_t epochs = n_ckpt - 1;
  out.trajectories.resize(n_traj);
  for (auto& t : out.trajectories) {
    t.seed = r.u64();
    t.checkpoints.assign(n_ckpt, ParameterVector(dim));
    for (auto& c : t.checkpoints) {
      for (auto& x : c) x = static_cast<double>(r.f32());
    }
    for (auto* curve : {&t.train_mse, &t.test_mse, &t.train_mae, &t.test_mae}) {
      curve->resize(epochs);
      for (auto& x : *curve) x = r.f64();
    }
  }
  return out;
}

std::vector<std::filesystem::path> save_buffers(std::span<const ExpertTrajectory> trajectories,
                                                const ModelSpec& spec, const std::filesystem::path& dir,
                                                std::size_t group_size) {
  if (group_size == 0) throw Error(ErrorCode::invalid_argument, "group size must be positive");
  std::vector<std::filesystem::path> files;
  for (std::size_t begin = 0, k = 0; begin < trajectories.size(); begin += group_size, ++k) {
    const std::size_t n = std::min(group_size, trajectories.size() - begin);
    auto path = dir / ("replay_buffer_" + std::to_string(k) + ".ddtb");
    save_buffer(trajectories.subspan(begin, n), spec, path);
    files.push_back(std::move(path));
  }
  return files;
}

LoadedBuffer load_buffers(const std::filesystem::path& dir) {
  std::map<std::size_t, std::filesystem::path> files;
  const std::regex pattern(R"(replay_buffer_(\d+)\.ddtb)");
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::missing_file, dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace(std::stoul(m[1].str()), entry.path());
  }
  if (files.empty()) throw Error(ErrorCode::missing_file, "no replay_buffer_*.ddtb files in " + dir.string());
  LoadedBuffer out;
  bool first = true;
  for (const auto& [index, path] : files) {
    auto part = load_buffer(path);
    if (first) {
      out.spec = part.spec;
      first = false;
    } else if (!(part.spec == out.spec)) {
      throw Error(ErrorCode::shape_mismatch, path.string() + " holds a different model spec");
    }
    for (auto& t : part.trajectories) out.trajectories.push_back(std::move(t));
  }
  return out;
}

SegmentSample sample_segment(std::span<const ExpertTrajectory> trajectories, std::size_t span, Rng& rng) {
  if (span == 0) throw Error(ErrorCode::invalid_argument, "segment span must be at least 1");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].epochs() >= span) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw Error(ErrorCode::span_too_large, "no trajectory has " + std::to_string(span) + " epochs");
  }
  const std::size_t expert = eligible[uniform_index(rng, eligible.size())];
  const auto& t = trajectories[expert];
  const std::size_t start = uniform_index(rng, t.epochs() - span + 1);
  return {t.checkpoints[start], t.checkpoints[start + span], expert, start, span};
}

std::vector<SegmentSample> enumerate_segments(std::span<const ExpertTrajectory> trajectories, std::size_t span) {
  if (span == 0) throw Error(ErrorCode::invalid_argument, "segment span must be at least 1");
  std::vector<SegmentSample> out;
  for (std::size_t e = 0; e < trajectories.size(); ++e) {
    const auto& t = trajectories[e];
    for (std::size_t s = 0; s + span <= t.epochs(); ++s) {
      out.push_back({t.checkpoints[s], t.checkpoints[s + span], e, s, span});
    }
  }
  if (out.empty()) throw Error(ErrorCode::span_too_large, "no segment of span " + std::to_string(span));
  return out;
}

SegmentMatch min_param_match(std::span<const double> theta_s, std::span<const SegmentSample> segments) {
  SegmentMatch best{0, std::numeric_limits<double>::infinity()};
  bool found = false;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (param_sq_distance(segments[i].theta_target, segments[i].theta_start) <= kMinSegmentSq) continue;
    const double loss = param_match_loss(theta_s, segments[i].theta_start, segments[i].theta_target);
    if (loss < best.loss) {
      best = {i, loss};
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::degenerate_segment, "every segment has zero length");
  return best;
}

}  // namespace ddtime
