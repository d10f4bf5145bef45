// bench — times the batched loss/gradient engine against the serial tape
// reference on ring systems of growing dimension, checks that the two agree,
// and fits the ms-per-iteration scaling in d.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fpz/analysis.hpp"
#include "fpz/kernels.hpp"
#include "fpz/network.hpp"
#include "fpz/rng.hpp"
#include "fpz/systems.hpp"

using namespace fpz;
using clk = std::chrono::steady_clock;

namespace {

double ms_since(clk::time_point t0) {
  return std::chrono::duration<double, std::milli>(clk::now() - t0).count();
}

template <class F>
double time_reps(int reps, F&& f) {
  f();  // warmup
  const auto t0 = clk::now();
  for (int r = 0; r < reps; ++r) f();
  return ms_since(t0) / reps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bench — batched kernels vs serial tape reference"};
  std::string dims_arg = "2,4,6,8,10";
  int batch = 1000, hidden = 50, layers = 3, reps = 5, block = 128;
  std::uint64_t seed = 1;
  app.add_option("--dims", dims_arg, "comma-separated even ring dimensions");
  app.add_option("--batch", batch, "points per iteration");
  app.add_option("--hidden", hidden, "hidden width m");
  app.add_option("--layers", layers, "stacked layers L");
  app.add_option("--reps", reps, "timed repetitions per case");
  app.add_option("--block", block, "engine block size");
  app.add_option("--seed", seed, "rng seed");
  CLI11_PARSE(app, argc, argv);

  std::vector<int> dims;
  for (std::size_t pos = 0; pos < dims_arg.size();) {
    dims.push_back(std::atoi(dims_arg.c_str() + pos));
    pos = dims_arg.find(',', pos);
    if (pos == std::string::npos) break;
    ++pos;
  }

  std::printf("batch=%d hidden=%d layers=%d reps=%d block=%d\n", batch, hidden, layers, reps,
              block);
  std::printf("%4s %14s %14s %9s %12s %12s\n", "d", "engine ms/it", "tape ms/it", "speedup",
              "loss rel dev", "grad rel dev");

  std::vector<std::pair<int, double>> engine_runs;
  for (int d : dims) {
    const sys::DriftSystem s = sys::make_system("ring", d, 1.0);
    const net::Architecture arch{d, hidden, layers};
    const net::Params<double> params = net::glorot_init<double>(arch, seed);
    rng::Stream stream(seed, rng::StreamTag::misc, static_cast<std::uint64_t>(d));
    const std::vector<double> pts = sys::sample_uniform(s.domain, batch, stream);

    kernels::BatchEngine<double> engine(s, arch, block);
    ad::LossGrad<double> lg_engine, lg_tape;
    const double ms_engine =
        time_reps(reps, [&] { lg_engine = engine.loss_grad(params, pts.data(), batch); });
    const double ms_tape = time_reps(
        reps, [&] { lg_tape = kernels::batch_loss_grad_reference(s, params, pts.data(), batch); });

    double loss_dev = std::abs(lg_engine.loss - lg_tape.loss) /
                      std::max({std::abs(lg_engine.loss), std::abs(lg_tape.loss), 1e-300});
    double grad_dev = 0, scale = 0;
    for (std::size_t i = 0; i < lg_engine.grad.size(); ++i) {
      grad_dev = std::max(grad_dev, std::abs(lg_engine.grad[i] - lg_tape.grad[i]));
      scale = std::max(scale, std::abs(lg_tape.grad[i]));
    }
    grad_dev /= std::max(scale, 1e-300);

    std::printf("%4d %14.3f %14.3f %8.1fx %12.2e %12.2e\n", d, ms_engine, ms_tape,
                ms_tape / ms_engine, loss_dev, grad_dev);
    engine_runs.emplace_back(d, ms_engine);
  }

  if (engine_runs.size() >= 2) {
    const an::ScalingTable table = an::scaling_table(engine_runs);
    std::printf("engine scaling: ms/it ≈ %.4f·d + %.4f\n", table.slope, table.intercept);
  }
  return 0;
}
