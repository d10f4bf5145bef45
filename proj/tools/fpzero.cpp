// fpzero — stationary Fokker–Planck zeros via residual training.
//
// Subcommands: train (Adam on the log-form residual loss), mc (Euler–Maruyama
// baseline histogram), eval (loss / sup-distance / normalization report),
// marginal (quadrature marginals of the learned density), verify (derivative,
// quadrature, Lyapunov, and residual self-checks), schema (config reference).

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpz/analysis.hpp"
#include "fpz/autodiff.hpp"
#include "fpz/config.hpp"
#include "fpz/grid.hpp"
#include "fpz/kernels.hpp"
#include "fpz/montecarlo.hpp"
#include "fpz/network.hpp"
#include "fpz/quadrature.hpp"
#include "fpz/rng.hpp"
#include "fpz/systems.hpp"
#include "fpz/trainer.hpp"
#include "plot_svg.hpp"

namespace fs = std::filesystem;
using namespace fpz;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> precision;
  bool force = false;
  bool deterministic = false;
};

void attach_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--precision", c.precision, "parameter precision override")
      ->check(CLI::IsMember({32, 64}));
  cmd->add_flag("--force", c.force, "overwrite existing outputs");
  cmd->add_flag("--deterministic", c.deterministic,
                "write wall-clock columns as 0 so reruns are byte-identical");
}

cfg::ExperimentConfig load_with_overrides(const CommonOpts& c) {
  cfg::ExperimentConfig ec = cfg::load_config(c.config_path);
  if (c.seed) {
    ec.seed = *c.seed;
    ec.train.seed = *c.seed;
  }
  if (c.precision) ec.train.precision_bits = *c.precision;
  if (c.deterministic) ec.train.deterministic = true;
  return ec;
}

fs::path resolve_out(const cfg::ExperimentConfig& ec) {
  fs::path p = ec.out_dir;
  if (const char* root = std::getenv("FPZERO_OUT_ROOT"); root && *root && p.is_relative())
    p = fs::path(root) / p;
  return p;
}

void refuse_overwrite(const fs::path& p, bool force) {
  if (!force && fs::exists(p))
    throw std::runtime_error(p.string() + " already exists; pass --force to overwrite");
}

// Full-tensor quadrature cost is (subintervals·points)^dim; cap the per-axis
// node count so normalization integrals stay tractable. Per-axis composites
// (marginals) always run at the configured resolution.
int tensor_subintervals(int dim, int subintervals, int points) {
  const int cap = dim <= 2 ? 512 : dim == 3 ? 128 : 40;
  return std::max(1, std::min(subintervals, cap / std::max(1, points)));
}

an::SupOptions make_sup_options(const cfg::ExperimentConfig& ec, const sys::DriftSystem& s) {
  an::SupOptions o;
  const int kept = s.dim <= 3 ? s.dim : 2;
  o.bins.assign(kept, ec.analysis.sup_bins);
  o.gl_n = ec.quadrature.points;
  o.subintervals = tensor_subintervals(std::min(s.dim, 3), ec.quadrature.subintervals, o.gl_n);
  if (ec.analysis.slice_axes && s.dim > 3) {
    o.slice_u = ec.analysis.slice_axes->first;
    o.slice_v = ec.analysis.slice_axes->second;
  }
  return o;
}

template <class T>
std::vector<T> fresh_batch(const sys::DriftSystem& s, int n, std::uint64_t seed) {
  rng::Stream stream(seed, rng::StreamTag::misc, 0);
  std::vector<double> pts = sys::sample_uniform(s.domain, n, stream);
  return std::vector<T>(pts.begin(), pts.end());
}

void check_arch(const train::CheckpointInfo& info, const net::Architecture& expect) {
  if (info.arch == expect) return;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "checkpoint architecture (d=%d, m=%d, L=%d) does not match config (d=%d, m=%d, "
                "L=%d)",
                info.arch.input_dim, info.arch.hidden, info.arch.layers, expect.input_dim,
                expect.hidden, expect.layers);
  throw std::runtime_error(buf);
}

// ---- train ----------------------------------------------------------------

template <class T>
int run_train(const cfg::ExperimentConfig& ec_in, const CommonOpts& opts,
              const std::string& resume_path, bool plot) {
  cfg::ExperimentConfig ec = ec_in;
  const sys::DriftSystem s = cfg::build_system(ec.system);
  const fs::path out = resolve_out(ec);
  ec.train.out_dir = out.string();
  refuse_overwrite(out / "trace.csv", opts.force || !resume_path.empty());

  std::optional<train::TrainState<T>> resume;
  if (!resume_path.empty()) resume = train::checkpoint_load<T>(resume_path);

  std::int64_t last_print = -1;
  auto progress = [&](const train::TraceRow& row) {
    if (row.iteration == last_print) return;
    last_print = row.iteration;
    std::printf("k=%8lld  loss=%.6e  lr=%g\n", static_cast<long long>(row.iteration), row.loss,
                row.lr);
    std::fflush(stdout);
  };

  const train::TrainResult<T> res =
      train::train<T>(s, ec.train, resume ? &*resume : nullptr, progress);
  std::printf("final_loss=%.12e\ncheckpoint=%s\ntrace=%s\n", res.final_loss,
              res.final_checkpoint.c_str(), res.trace_path.c_str());

  if (plot && res.state.trace.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& r : res.state.trace) {
      xs.push_back(static_cast<double>(r.iteration));
      ys.push_back(r.loss);
    }
    const fs::path p = out / "loss_curve.svg";
    plot::svg_line(xs, ys, p.string(), "training loss (" + s.name + ")", /*log_y=*/true);
    std::printf("plot=%s\n", p.string().c_str());
  }
  return 0;
}

// ---- mc -------------------------------------------------------------------

int run_mc(const cfg::ExperimentConfig& ec, const CommonOpts& opts, bool plot) {
  const sys::DriftSystem s = cfg::build_system(ec.system);
  const fs::path out = resolve_out(ec);
  const fs::path density_path = out / "mc_density.csv";
  refuse_overwrite(density_path, opts.force);

  double cells = 1;
  for (int a = 0; a < s.dim; ++a) cells *= ec.mc.bins;
  if (cells > 2e7)
    throw std::runtime_error("mc: " + std::to_string(ec.mc.bins) + "^" + std::to_string(s.dim) +
                             " histogram cells is beyond the in-memory grid; reduce mc.bins");

  std::printf("simulating %lld particles, h=%g, %lld steps (time %g)\n",
              static_cast<long long>(ec.mc.particles), ec.mc.h,
              static_cast<long long>(ec.mc.steps), ec.mc.h * static_cast<double>(ec.mc.steps));
  const mc::Ensemble ens = mc::simulate(s, ec.mc.particles, ec.mc.h, ec.mc.steps, ec.seed);
  const std::vector<int> bins(static_cast<std::size_t>(s.dim), ec.mc.bins);
  const grid::GridDensity g = mc::histogram(ens, s.domain, bins);

  fs::create_directories(out);
  grid::write_csv(g, density_path.string());
  std::printf("density=%s\nin_box_mass=%.6f  out_of_box_fraction=%.6f\n", density_path.c_str(),
              g.mass(), g.out_of_box_fraction);
  if (plot && s.dim == 2) {
    const fs::path p = out / "mc_density.svg";
    plot::svg_heatmap(g, p.string(), "Monte Carlo density (" + s.name + ")");
    std::printf("plot=%s\n", p.string().c_str());
  }
  return 0;
}

// ---- eval -----------------------------------------------------------------

template <class T>
int run_eval(const cfg::ExperimentConfig& ec, const std::string& ckpt_path) {
  const sys::DriftSystem s = cfg::build_system(ec.system);
  const train::TrainState<T> st = train::checkpoint_load<T>(ckpt_path);

  std::printf("checkpoint=%s\niteration=%lld  params=%lld  precision=%d-bit\n", ckpt_path.c_str(),
              static_cast<long long>(st.iteration),
              static_cast<long long>(net::param_count(st.params.arch)), int(sizeof(T) * 8));

  const int n = ec.train.batch_size;
  const std::vector<T> pts = fresh_batch<T>(s, n, ec.seed);
  const ad::LossGrad<T> lg = kernels::batch_loss_grad(s, st.params, pts.data(), n);
  std::printf("fresh_batch_loss=%.12e  (n=%d)\n", lg.loss, n);
  if (!st.trace.empty())
    std::printf("last_trace_loss=%.12e  (iteration %lld)\n", st.trace.back().loss,
                static_cast<long long>(st.trace.back().iteration));

  if (s.has_potential()) {
    const an::SupReport rep = an::sup_distance<T>(s, st.params, make_sup_options(ec, s));
    std::printf("sup_distance=%.6e  max_p_true=%.6e  ratio=%.4f%s\n", rep.sup_error,
                rep.max_p_true, rep.sup_error / rep.max_p_true,
                rep.sliced ? "  (2D slice, other axes 0)" : "");
    std::printf("normalization_c=%.12e\n", rep.c);
  } else {
    std::printf("sup_distance=n/a (no closed-form density for %s)\n", s.name.c_str());
  }

  if (s.dim <= 3) {
    const int sub = tensor_subintervals(s.dim, ec.quadrature.subintervals, ec.quadrature.points);
    const double z = an::learned_mass<T>(st.params, s.domain, sub, ec.quadrature.points);
    std::printf("Z=%.12e  (interest box, %d x %d-point rule per axis)\n", z, sub,
                ec.quadrature.points);
  }
  return 0;
}

// ---- marginal ---------------------------------------------------------------

struct Composite1D {
  std::vector<double> nodes, weights;  // over [lo, hi]
};

Composite1D composite_rule(double lo, double hi, int subintervals, int n) {
  const quad::QuadRule rule = quad::gl_rule(n);
  Composite1D out;
  const double h = (hi - lo) / subintervals;
  for (int sub = 0; sub < subintervals; ++sub) {
    const double c = lo + (sub + 0.5) * h;
    for (int i = 0; i < n; ++i) {
      out.nodes.push_back(c + 0.5 * h * rule.nodes[i]);
      out.weights.push_back(0.5 * h * rule.weights[i]);
    }
  }
  return out;
}

template <class T>
int run_marginal(const cfg::ExperimentConfig& ec, const CommonOpts& opts,
                 const std::string& ckpt_path, std::vector<int> axes, bool plot) {
  const sys::DriftSystem s = cfg::build_system(ec.system);
  const train::TrainState<T> st = train::checkpoint_load<T>(ckpt_path);
  const int d = s.dim;

  if (axes.size() != 2) throw std::runtime_error("marginal: pass exactly two axes, e.g. 0,2");
  if (axes[0] > axes[1]) std::swap(axes[0], axes[1]);
  if (axes[0] < 0 || axes[1] >= d || axes[0] == axes[1])
    throw std::runtime_error("marginal: invalid axes for a " + std::to_string(d) +
                             "-dimensional system");
  std::vector<int> integrated;
  for (int a = 0; a < d; ++a)
    if (a != axes[0] && a != axes[1]) integrated.push_back(a);
  if (integrated.size() > 2)
    throw std::runtime_error(
        "marginal: integrating more than two axes is a tensor-node explosion; use eval's slice "
        "report instead");

  const fs::path out = resolve_out(ec);
  const fs::path path =
      out / ("marginal_" + std::to_string(axes[0]) + "_" + std::to_string(axes[1]) + ".csv");
  refuse_overwrite(path, opts.force);

  // normalization over the full interest box
  const int zsub = tensor_subintervals(d, ec.quadrature.subintervals, ec.quadrature.points);
  const double z = an::learned_mass<T>(st.params, s.domain, zsub, ec.quadrature.points);
  if (!(z > 0) || !std::isfinite(z)) throw std::runtime_error("marginal: normalization is not finite");
  const double c = 1.0 / z;

  // composite rule per integrated axis; cap when two axes are integrated
  const int per_axis_sub = integrated.size() <= 1
                               ? ec.quadrature.subintervals
                               : tensor_subintervals(4, ec.quadrature.subintervals,
                                                     ec.quadrature.points);
  std::vector<Composite1D> rules;
  for (int a : integrated)
    rules.push_back(
        composite_rule(s.domain.lo[a], s.domain.hi[a], per_axis_sub, ec.quadrature.points));

  // tensor the integrated-axis nodes
  std::vector<std::vector<double>> qpts;  // node tuple per quadrature point
  std::vector<double> qwts;
  if (integrated.empty()) {
    qpts.push_back({});
    qwts.push_back(1.0);
  } else if (integrated.size() == 1) {
    for (std::size_t i = 0; i < rules[0].nodes.size(); ++i) {
      qpts.push_back({rules[0].nodes[i]});
      qwts.push_back(rules[0].weights[i]);
    }
  } else {
    for (std::size_t i = 0; i < rules[0].nodes.size(); ++i)
      for (std::size_t j = 0; j < rules[1].nodes.size(); ++j) {
        qpts.push_back({rules[0].nodes[i], rules[1].nodes[j]});
        qwts.push_back(rules[0].weights[i] * rules[1].weights[j]);
      }
  }

  const int bins = ec.analysis.density_bins;
  sys::Box plane{{s.domain.lo[axes[0]], s.domain.lo[axes[1]]},
                 {s.domain.hi[axes[0]], s.domain.hi[axes[1]]}};
  grid::GridDensity g = grid::make_grid(plane, std::vector<int>{bins, bins});
  const double wu = (plane.hi[0] - plane.lo[0]) / bins;
  const double wv = (plane.hi[1] - plane.lo[1]) / bins;

  const std::size_t q = qpts.size();
  std::vector<T> row_pts(static_cast<std::size_t>(bins) * q * d);
  std::vector<T> row_out(static_cast<std::size_t>(bins) * q);
  for (int iu = 0; iu < bins; ++iu) {
    const double xu = plane.lo[0] + (iu + 0.5) * wu;
    for (int iv = 0; iv < bins; ++iv) {
      const double xv = plane.lo[1] + (iv + 0.5) * wv;
      T* base = row_pts.data() + static_cast<std::size_t>(iv) * q * d;
      for (std::size_t k = 0; k < q; ++k) {
        T* p = base + k * d;
        p[axes[0]] = static_cast<T>(xu);
        p[axes[1]] = static_cast<T>(xv);
        for (std::size_t t = 0; t < integrated.size(); ++t)
          p[integrated[t]] = static_cast<T>(qpts[k][t]);
      }
    }
    kernels::batch_forward<T>(st.params, row_pts.data(), static_cast<int>(bins * q),
                           row_out.data());
    for (int iv = 0; iv < bins; ++iv) {
      double acc = 0;
      const T* vals = row_out.data() + static_cast<std::size_t>(iv) * q;
      for (std::size_t k = 0; k < q; ++k) acc += qwts[k] * std::exp(static_cast<double>(vals[k]));
      g.values[static_cast<std::size_t>(iu) * bins + iv] = c * acc;
    }
  }

  fs::create_directories(out);
  grid::write_csv(g, path.string());
  std::printf("marginal=%s  (axes %d,%d; %zu quadrature nodes per cell; mass %.6f)\n",
              path.c_str(), axes[0], axes[1], q, g.mass());
  if (plot) {
    const fs::path sp = out / ("marginal_" + std::to_string(axes[0]) + "_" +
                               std::to_string(axes[1]) + ".svg");
    plot::svg_heatmap(g, sp.string(),
                      "marginal over axes (" + std::to_string(axes[0]) + ", " +
                          std::to_string(axes[1]) + ") — " + s.name);
    std::printf("plot=%s\n", sp.string().c_str());
  }
  return 0;
}

// ---- verify -----------------------------------------------------------------

int run_verify(const cfg::ExperimentConfig& ec, bool corrupt_divergence) {
  const sys::DriftSystem s = cfg::build_system(ec.system);
  bool all_ok = true;
  auto report = [&](bool ok, const char* name, const std::string& detail) {
    std::printf("[%s] %-26s %s\n", ok ? " ok " : "FAIL", name, detail.c_str());
    all_ok = all_ok && ok;
  };

  {  // parameter count vs the enumerated layout, config arch plus spot shapes
    bool ok = true;
    const net::Architecture probes[] = {
        ec.train.arch, {1, 1, 1}, {3, 10, 2}, {10, 50, 3}};
    for (const auto& a : probes) {
      const net::ParamLayout layout = net::ParamLayout::make(a);
      std::int64_t enumerated = 0;
      for (const auto& blk : layout.blocks) enumerated += blk.size();
      ok = ok && layout.total == enumerated && net::param_count(a) == enumerated;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "param_count(d=%d, m=%d, L=%d) = %lld",
                  ec.train.arch.input_dim, ec.train.arch.hidden, ec.train.arch.layers,
                  static_cast<long long>(net::param_count(ec.train.arch)));
    report(ok, "parameter count", buf);
  }

  {  // closed-form divergence vs central differences of the drift
    rng::Stream stream(ec.seed, rng::StreamTag::misc, 1);
    const int n = 200;
    const std::vector<double> pts = sys::sample_uniform(s.domain, n, stream);
    double worst = 0;
    std::vector<double> xp(s.dim), xm(s.dim), mp(s.dim), mm(s.dim);
    for (int i = 0; i < n; ++i) {
      std::span<const double> x(pts.data() + static_cast<std::size_t>(i) * s.dim,
                                static_cast<std::size_t>(s.dim));
      double fd = 0;
      for (int k = 0; k < s.dim; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
        std::copy(x.begin(), x.end(), xp.begin());
        std::copy(x.begin(), x.end(), xm.begin());
        xp[k] += h;
        xm[k] -= h;
        sys::drift<double>(s, xp, mp);
        sys::drift<double>(s, xm, mm);
        fd += (mp[k] - mm[k]) / (2 * h);
      }
      double closed = sys::drift_divergence<double>(s, x);
      if (corrupt_divergence) closed += 0.01 * (1.0 + std::abs(closed));
      worst = std::max(worst, std::abs(closed - fd) / std::max(1.0, std::abs(fd)));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max rel dev %.3e over %d points%s", worst, n,
                  corrupt_divergence ? "  (divergence deliberately corrupted)" : "");
    report(worst <= 1e-7, "drift divergence", buf);
  }

  {  // derivative cross-check against central differences
    ad::FdOptions fo;
    fo.seed = ec.seed;
    std::string detail;
    bool ok = true;
    if (ec.train.precision_bits == 32) {
      const net::Params<float> p = net::glorot_init<float>(ec.train.arch, ec.seed);
      const ad::FdReport rep = ad::finite_difference_report<float>(s, p, fo);
      for (const auto& c : rep.checks)
        detail += c.quantity + " " + std::to_string(c.max_rel_err) + "  ";
      detail += "(32-bit: report-only)";
    } else {
      const net::Params<double> p = net::glorot_init<double>(ec.train.arch, ec.seed);
      const ad::FdReport rep = ad::finite_difference_report<double>(s, p, fo);
      for (const auto& c : rep.checks) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "%s %.2e (tol %.0e)  ", c.quantity.c_str(), c.max_rel_err,
                      c.tolerance);
        detail += buf;
      }
      ok = rep.passed;
    }
    report(ok, "derivatives vs FD", detail);
  }

  {  // quadrature exactness: degree 2n−1 polynomials and a smooth integral
    bool ok = true;
    for (int n = 1; n <= 10; ++n) {
      const quad::QuadRule r = quad::gl_rule(n);
      double odd = 0, even = 0;
      for (int i = 0; i < n; ++i) {
        odd += r.weights[i] * std::pow(r.nodes[i], 2 * n - 1);
        even += r.weights[i] * std::pow(r.nodes[i], 2 * n - 2);
      }
      const double exact_even = 2.0 / (2 * n - 1);
      ok = ok && std::abs(odd) < 1e-13 && std::abs(even - exact_even) < 1e-12 * exact_even + 1e-14;
    }
    const double cosint =
        quad::integrate_1d([](double t) { return std::cos(t); }, 0.0, 1.0, 4, 5);
    ok = ok && std::abs(cosint - std::sin(1.0)) < 1e-12;
    report(ok, "quadrature exactness", "degree 2n-1 exact for n in [1,10]; smooth integral 1e-12");
  }

  if (s.lyapunov) {  // drift condition outside the sublevel set
    rng::Stream stream(ec.seed, rng::StreamTag::lyapunov, 0);
    const sys::LyapunovReport rep = sys::lyapunov_report(s, 10000, stream);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d checked, %d violations, worst margin %.3e", rep.n_checked,
                  rep.n_violations, rep.worst_margin);
    report(rep.n_violations == 0 && rep.n_checked > 0, "Lyapunov certificate", buf);
  } else {
    report(true, "Lyapunov certificate", "skipped (no certificate attached)");
  }

  if (s.has_potential()) {  // the analytic zero must sit on the operator's kernel
    const an::ResidualSurvey survey = an::analytic_residual_survey<double>(s, 10000, ec.seed);
    char buf[96];
    std::snprintf(buf, sizeof buf, "max |residual| %.3e at 10^4 points", survey.max_abs);
    report(survey.max_abs <= 1e-10, "analytic-zero residual", buf);
  } else {
    report(true, "analytic-zero residual", "skipped (no closed-form density)");
  }

  std::printf("%s\n", all_ok ? "verify: all checks passed" : "verify: FAILURES detected");
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fpzero — non-trivial zeros of stationary Fokker-Planck operators"};
  app.require_subcommand(1);

  CommonOpts train_opts, mc_opts, eval_opts, marg_opts, verify_opts;
  std::string resume_path, eval_ckpt, marg_ckpt, marg_axes;
  bool train_plot = false, mc_plot = false, marg_plot = false, corrupt = false;

  CLI::App* t = app.add_subcommand("train", "minimize the residual loss (Adam)");
  attach_common(t, train_opts);
  t->add_option("--resume", resume_path, "checkpoint to continue from")
      ->check(CLI::ExistingFile);
  t->add_flag("--plot", train_plot, "write loss_curve.svg");

  CLI::App* m = app.add_subcommand("mc", "Euler-Maruyama baseline histogram");
  attach_common(m, mc_opts);
  m->add_flag("--plot", mc_plot, "write mc_density.svg (2D systems)");

  CLI::App* e = app.add_subcommand("eval", "evaluate a checkpoint (read-only)");
  attach_common(e, eval_opts);
  e->add_option("--checkpoint", eval_ckpt, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* g = app.add_subcommand("marginal", "quadrature marginal of the learned density");
  attach_common(g, marg_opts);
  g->add_option("--checkpoint", marg_ckpt, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  g->add_option("--axes", marg_axes, "two kept axes, e.g. 0,2")->required();
  g->add_flag("--plot", marg_plot, "write an SVG heatmap next to the CSV");

  CLI::App* v = app.add_subcommand("verify", "self-checks: derivatives, quadrature, Lyapunov");
  attach_common(v, verify_opts);
  v->add_flag("--corrupt-divergence", corrupt,
              "test hook: bias the closed-form divergence so the check must fail");

  CLI::App* sc = app.add_subcommand("schema", "print the config schema with defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc->parsed()) {
      std::printf("%s\n", cfg::schema_text().c_str());
      return 0;
    }
    if (t->parsed()) {
      const cfg::ExperimentConfig ec = load_with_overrides(train_opts);
      return ec.train.precision_bits == 32
                 ? run_train<float>(ec, train_opts, resume_path, train_plot)
                 : run_train<double>(ec, train_opts, resume_path, train_plot);
    }
    if (m->parsed()) return run_mc(load_with_overrides(mc_opts), mc_opts, mc_plot);
    if (e->parsed()) {
      const cfg::ExperimentConfig ec = load_with_overrides(eval_opts);
      const train::CheckpointInfo info = train::checkpoint_peek(eval_ckpt);
      net::Architecture expect = ec.train.arch;
      check_arch(info, expect);
      return info.precision_bits == 32 ? run_eval<float>(ec, eval_ckpt)
                                       : run_eval<double>(ec, eval_ckpt);
    }
    if (g->parsed()) {
      const cfg::ExperimentConfig ec = load_with_overrides(marg_opts);
      const train::CheckpointInfo info = train::checkpoint_peek(marg_ckpt);
      check_arch(info, ec.train.arch);
      std::vector<int> axes;
      int a = 0, b = 0;
      if (std::sscanf(marg_axes.c_str(), "%d,%d", &a, &b) != 2)
        throw std::runtime_error("marginal: --axes wants the form u,v");
      axes = {a, b};
      return info.precision_bits == 32
                 ? run_marginal<float>(ec, marg_opts, marg_ckpt, axes, marg_plot)
                 : run_marginal<double>(ec, marg_opts, marg_ckpt, axes, marg_plot);
    }
    if (v->parsed()) return run_verify(load_with_overrides(verify_opts), corrupt);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
