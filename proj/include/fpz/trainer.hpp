#pragma once
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fpz/network.hpp"
#include "fpz/systems.hpp"

namespace fpz::train {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Piecewise-constant decaying learning rate: piece i applies for
// iterations k ≥ from_i (1-based k, last matching piece wins).
struct LrSchedule {
  struct Piece {
    std::int64_t from = 0;
    double lr = 0;
  };
  std::vector<Piece> pieces;

  static LrSchedule default_schedule();  // 5e-3 / 1e-3 / 5e-4 / 1e-4 at 0/1000/2000/10000
  double at(std::int64_t k) const;    // k ≥ 1
  void validate() const;  // first piece at 0, breakpoints increasing, rates positive non-increasing
};

struct TrainConfig {
  net::Architecture arch;
  std::int64_t iterations = 10000;  // E
  int batch_size = 1000;            // N
  int resample_every = 10;          // τ: batch is redrawn after every step divisible by τ
  LrSchedule lr = LrSchedule::default_schedule();
  AdamParams adam;
  std::uint64_t seed = 1;
  int precision_bits = 64;  // 32 or 64
  std::int64_t checkpoint_every = 1000;
  std::int64_t trace_every = 100;
  int block_size = 128;
  bool deterministic = false;  // wall_ms columns written as 0 so reruns are byte-identical
  std::string out_dir;         // empty: train in memory only, write nothing

  void validate() const;
};

struct TraceRow {
  std::int64_t iteration = 0;
  double loss = 0;
  double lr = 0;
  double wall_ms = 0;  // cumulative within the run
};

template <class T>
struct TrainState {
  net::Params<T> params;
  std::vector<T> adam_m, adam_v;  // first/second moment accumulators, θ-shaped
  std::int64_t iteration = 0;     // completed optimizer steps
  std::uint64_t seed = 0;
  std::vector<TraceRow> trace;
};

// One bias-corrected Adam update; advances state.iteration by exactly 1.
// A non-finite gradient entry aborts with the iteration and the name of the
// parameter block holding the offending coordinate.
template <class T>
void adam_step(TrainState<T>& state, std::span<const T> grad, double lr, const AdamParams& ap);

template <class T>
struct TrainResult {
  TrainState<T> state;
  double final_loss = 0;
  std::string final_checkpoint;  // set when out_dir is configured
  std::string trace_path;
};

using ProgressFn = std::function<void(const TraceRow&)>;

// Algorithm: sample N points from Ω_I; per iteration compute ∇_θ of the mean
// squared log-form residual over the batch, take an Adam step with the
// scheduled rate, and redraw the batch after every τ-th step. Loss rows are
// recorded every trace_every steps (and at the final step); checkpoints are
// written every checkpoint_every steps and at the end. Runs resumed from a
// checkpoint reproduce the unbroken run bit-for-bit: batches depend only on
// (seed, epoch) and reductions are schedule-independent.
template <class T>
TrainResult<T> train(const sys::DriftSystem& system, const TrainConfig& cfg,
                     const TrainState<T>* resume = nullptr, const ProgressFn& progress = {});

// ---- checkpoint file: "FPZK" magic, version, precision bits, flags, arch
// ---- (d,m,L), seed, iteration, parameter count, θ in declaration order,
// ---- Adam moments, trace rows; little-endian throughout. Writes go to a
// ---- temp file renamed into place.

struct CheckpointInfo {
  int precision_bits = 0;
  net::Architecture arch;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  bool has_optimizer = false;
};

template <class T>
void checkpoint_save(const std::string& path, const TrainState<T>& state);

// Header-only read, any precision.
CheckpointInfo checkpoint_peek(const std::string& path);

// Full load; the file's precision must match T (no silent widening).
template <class T>
TrainState<T> checkpoint_load(const std::string& path);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::string& path);

extern template void adam_step<float>(TrainState<float>&, std::span<const float>, double, const AdamParams&);
extern template void adam_step<double>(TrainState<double>&, std::span<const double>, double, const AdamParams&);
extern template TrainResult<float> train<float>(const sys::DriftSystem&, const TrainConfig&, const TrainState<float>*, const ProgressFn&);
extern template TrainResult<double> train<double>(const sys::DriftSystem&, const TrainConfig&, const TrainState<double>*, const ProgressFn&);
extern template void checkpoint_save<float>(const std::string&, const TrainState<float>&);
extern template void checkpoint_save<double>(const std::string&, const TrainState<double>&);
extern template TrainState<float> checkpoint_load<float>(const std::string&);
extern template TrainState<double> checkpoint_load<double>(const std::string&);

}  // namespace fpz::train
