#include "fpz/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fpz/kernels.hpp"

namespace fpz::train {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

LrSchedule LrSchedule::default_schedule() {
  return {{{0, 5e-3}, {1000, 1e-3}, {2000, 5e-4}, {10000, 1e-4}}};
}

void LrSchedule::validate() const {
  if (pieces.empty()) throw std::invalid_argument("lr schedule: no pieces");
  if (pieces.front().from != 0)
    throw std::invalid_argument("lr schedule: first piece must start at 0");
  for (size_t i = 0; i < pieces.size(); ++i) {
    if (!(pieces[i].lr > 0)) throw std::invalid_argument("lr schedule: rates must be positive");
    if (i > 0) {
      if (pieces[i].from <= pieces[i - 1].from)
        throw std::invalid_argument("lr schedule: breakpoints must increase");
      if (pieces[i].lr > pieces[i - 1].lr)
        throw std::invalid_argument("lr schedule: rates must be non-increasing");
    }
  }
}

double LrSchedule::at(std::int64_t k) const {
  if (k < 1) throw std::invalid_argument("lr schedule: iterations are 1-based");
  double lr = pieces.front().lr;
  for (const Piece& p : pieces)
    if (p.from <= k) lr = p.lr;
  return lr;
}

void TrainConfig::validate() const {
  arch.validate();
  lr.validate();
  if (iterations < 1) throw std::invalid_argument("train config: iterations must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (resample_every < 1)
    throw std::invalid_argument("train config: resample_every must be >= 1");
  if (precision_bits != 32 && precision_bits != 64)
    throw std::invalid_argument("train config: precision must be 32 or 64");
  if (checkpoint_every < 1)
    throw std::invalid_argument("train config: checkpoint_every must be >= 1");
  if (trace_every < 1) throw std::invalid_argument("train config: trace_every must be >= 1");
  if (block_size < 1) throw std::invalid_argument("train config: block_size must be >= 1");
  if (!(adam.beta1 > 0 && adam.beta1 < 1 && adam.beta2 > 0 && adam.beta2 < 1))
    throw std::invalid_argument("train config: adam betas must lie in (0,1)");
  if (!(adam.epsilon > 0)) throw std::invalid_argument("train config: adam epsilon must be > 0");
}

template <class T>
void adam_step(TrainState<T>& state, std::span<const T> grad, double lr, const AdamParams& ap) {
  const size_t n = state.params.theta.size();
  if (grad.size() != n || state.adam_m.size() != n || state.adam_v.size() != n)
    throw std::invalid_argument("adam step: gradient/moment shape mismatch");
  const std::int64_t k = state.iteration + 1;
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(grad[i]))) {
      const net::ParamLayout layout = net::ParamLayout::make(state.params.arch);
      const auto& blk = layout.block_at(static_cast<std::int64_t>(i));
      throw std::runtime_error("non-finite gradient at iteration " + std::to_string(k) +
                               " in parameter block " + blk.name);
    }
  }
  const T b1 = static_cast<T>(ap.beta1), b2 = static_cast<T>(ap.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(ap.beta1, static_cast<double>(k)));
  const T corr2 = static_cast<T>(1.0 - std::pow(ap.beta2, static_cast<double>(k)));
  const T step = static_cast<T>(lr), eps = static_cast<T>(ap.epsilon);
  T* th = state.params.theta.data();
  T* m = state.adam_m.data();
  T* v = state.adam_v.data();
  for (size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const T mhat = m[i] / corr1;
    const T vhat = v[i] / corr2;
    th[i] -= step * mhat / (std::sqrt(vhat) + eps);
  }
  state.iteration = k;
}

namespace {

std::string checkpoint_name(std::int64_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%08lld.fpzk", static_cast<long long>(iteration));
  return buf;
}

template <class T>
std::vector<T> draw_batch(const sys::DriftSystem& system, std::uint64_t seed,
                          std::int64_t epoch, int n) {
  rng::Stream st(seed, rng::stream_id(rng::StreamTag::batch, static_cast<std::uint64_t>(epoch)));
  const std::vector<double> pts = sys::sample_uniform(system.domain, n, st);
  if constexpr (std::is_same_v<T, double>) {
    return pts;
  } else {
    std::vector<T> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = static_cast<T>(pts[i]);
    return out;
  }
}

}  // namespace

template <class T>
TrainResult<T> train(const sys::DriftSystem& system, const TrainConfig& cfg,
                     const TrainState<T>* resume, const ProgressFn& progress) {
  cfg.validate();
  constexpr int kBits = std::is_same_v<T, float> ? 32 : 64;
  if (cfg.precision_bits != kBits)
    throw std::invalid_argument("train: config precision does not match scalar type");
  if (system.dim != cfg.arch.input_dim)
    throw std::invalid_argument("train: system/architecture dimension mismatch");

  TrainResult<T> out;
  TrainState<T>& st = out.state;
  if (resume) {
    if (resume->params.arch != cfg.arch)
      throw std::invalid_argument("train: resume state architecture differs from config");
    if (resume->iteration >= cfg.iterations)
      throw std::invalid_argument("train: resume state already at or past target iterations");
    st = *resume;
  } else {
    st.params = net::glorot_init<T>(cfg.arch, cfg.seed);
    st.adam_m.assign(st.params.theta.size(), T(0));
    st.adam_v.assign(st.params.theta.size(), T(0));
    st.iteration = 0;
    st.seed = cfg.seed;
  }

  const bool writing = !cfg.out_dir.empty();
  if (writing) std::filesystem::create_directories(cfg.out_dir);
  auto flush_outputs = [&](std::int64_t k) {
    if (!writing) return std::string();
    const std::string path = cfg.out_dir + "/" + checkpoint_name(k);
    checkpoint_save(path, st);
    out.trace_path = cfg.out_dir + "/trace.csv";
    write_trace_csv(out.trace_path, st.trace);
    return path;
  };

  kernels::BatchEngine<T> engine(system, cfg.arch, cfg.block_size);
  std::vector<T> batch;
  std::int64_t batch_epoch = -1;

  const auto t0 = std::chrono::steady_clock::now();
  double loss = 0;
  for (std::int64_t k = st.iteration + 1; k <= cfg.iterations; ++k) {
    const std::int64_t epoch = (k - 1) / cfg.resample_every;
    if (epoch != batch_epoch) {
      batch = draw_batch<T>(system, st.seed, epoch, cfg.batch_size);
      batch_epoch = epoch;
    }
    const ad::LossGrad<T> lg = engine.loss_grad(st.params, batch.data(), cfg.batch_size);
    loss = lg.loss;
    if (!std::isfinite(loss)) {
      flush_outputs(st.iteration);  // keep the last good state on disk
      throw std::runtime_error("non-finite loss at iteration " + std::to_string(k) +
                               "; last checkpoint retained");
    }
    const double lr = cfg.lr.at(k);
    adam_step(st, std::span<const T>(lg.grad), lr, cfg.adam);

    if (k % cfg.trace_every == 0 || k == cfg.iterations) {
      const double wall =
          cfg.deterministic
              ? 0.0
              : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
      st.trace.push_back({k, loss, lr, wall});
      if (progress) progress(st.trace.back());
    }
    if (k % cfg.checkpoint_every == 0 && k != cfg.iterations) flush_outputs(k);
  }
  out.final_loss = loss;
  out.final_checkpoint = flush_outputs(st.iteration);
  return out;
}

// ---- serialization

namespace {

constexpr char kMagic[4] = {'F', 'P', 'Z', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagOptimizer = 1;

template <class V>
void put(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V get(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

struct Header {
  std::uint32_t version = 0, precision = 0, flags = 0;
  std::int32_t d = 0, m = 0, L = 0;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0, n_params = 0, n_trace = 0;
};

Header read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a checkpoint file");
  Header h;
  h.version = get<std::uint32_t>(is);
  if (h.version != kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(h.version));
  h.precision = get<std::uint32_t>(is);
  h.flags = get<std::uint32_t>(is);
  h.d = get<std::int32_t>(is);
  h.m = get<std::int32_t>(is);
  h.L = get<std::int32_t>(is);
  h.seed = get<std::uint64_t>(is);
  h.iteration = get<std::int64_t>(is);
  h.n_params = get<std::int64_t>(is);
  h.n_trace = get<std::int64_t>(is);
  if (h.precision != 32 && h.precision != 64)
    throw std::runtime_error(path + ": corrupt precision tag");
  net::Architecture a{h.d, h.m, h.L};
  a.validate();
  if (h.n_params != net::param_count(a))
    throw std::runtime_error(path + ": parameter count does not match architecture header");
  return h;
}

}  // namespace

template <class T>
void checkpoint_save(const std::string& path, const TrainState<T>& state) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error(tmp + ": cannot open for writing");
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, static_cast<std::uint32_t>(std::is_same_v<T, float> ? 32 : 64));
    put(os, kFlagOptimizer);
    put(os, static_cast<std::int32_t>(state.params.arch.input_dim));
    put(os, static_cast<std::int32_t>(state.params.arch.hidden));
    put(os, static_cast<std::int32_t>(state.params.arch.layers));
    put(os, state.seed);
    put(os, state.iteration);
    put(os, static_cast<std::int64_t>(state.params.theta.size()));
    put(os, static_cast<std::int64_t>(state.trace.size()));
    auto dump = [&os](const std::vector<T>& v) {
      os.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(T)));
    };
    dump(state.params.theta);
    dump(state.adam_m);
    dump(state.adam_v);
    for (const TraceRow& r : state.trace) {
      put(os, r.iteration);
      put(os, r.loss);
      put(os, r.lr);
      put(os, r.wall_ms);
    }
    if (!os) throw std::runtime_error(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo checkpoint_peek(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  const Header h = read_header(is, path);
  CheckpointInfo info;
  info.precision_bits = static_cast<int>(h.precision);
  info.arch = {h.d, h.m, h.L};
  info.seed = h.seed;
  info.iteration = h.iteration;
  info.has_optimizer = (h.flags & kFlagOptimizer) != 0;
  return info;
}

template <class T>
TrainState<T> checkpoint_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  const Header h = read_header(is, path);
  constexpr std::uint32_t kBits = std::is_same_v<T, float> ? 32 : 64;
  if (h.precision != kBits)
    throw std::runtime_error(path + ": precision mismatch — file holds " +
                             std::to_string(h.precision) + "-bit parameters, run expects " +
                             std::to_string(kBits) + "-bit");
  TrainState<T> st;
  st.params.arch = {h.d, h.m, h.L};
  st.seed = h.seed;
  st.iteration = h.iteration;
  auto slurp = [&is, &path](std::vector<T>& v, std::int64_t n) {
    v.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw std::runtime_error(path + ": truncated parameter data");
  };
  slurp(st.params.theta, h.n_params);
  if (h.flags & kFlagOptimizer) {
    slurp(st.adam_m, h.n_params);
    slurp(st.adam_v, h.n_params);
  } else {
    st.adam_m.assign(static_cast<size_t>(h.n_params), T(0));
    st.adam_v.assign(static_cast<size_t>(h.n_params), T(0));
  }
  st.trace.resize(static_cast<size_t>(h.n_trace));
  for (TraceRow& r : st.trace) {
    r.iteration = get<std::int64_t>(is);
    r.loss = get<double>(is);
    r.lr = get<double>(is);
    r.wall_ms = get<double>(is);
  }
  return st;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error(tmp + ": cannot open for writing");
    os << "iteration,loss,lr,wall_ms\n";
    char buf[160];
    for (const TraceRow& r : rows) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(r.iteration), r.loss, r.lr, r.wall_ms);
      os << buf;
    }
    if (!os) throw std::runtime_error(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(is, line) || line != "iteration,loss,lr,wall_ms")
    throw std::runtime_error(path + ": missing trace header");
  std::vector<TraceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    TraceRow r;
    long long it = 0;
    if (std::sscanf(line.c_str(), "%lld,%lg,%lg,%lg", &it, &r.loss, &r.lr, &r.wall_ms) != 4)
      throw std::runtime_error(path + ": malformed trace row: " + line);
    r.iteration = it;
    rows.push_back(r);
  }
  return rows;
}

template void adam_step<float>(TrainState<float>&, std::span<const float>, double, const AdamParams&);
template void adam_step<double>(TrainState<double>&, std::span<const double>, double, const AdamParams&);
template TrainResult<float> train<float>(const sys::DriftSystem&, const TrainConfig&, const TrainState<float>*, const ProgressFn&);
template TrainResult<double> train<double>(const sys::DriftSystem&, const TrainConfig&, const TrainState<double>*, const ProgressFn&);
template void checkpoint_save<float>(const std::string&, const TrainState<float>&);
template void checkpoint_save<double>(const std::string&, const TrainState<double>&);
template TrainState<float> checkpoint_load<float>(const std::string&);
template TrainState<double> checkpoint_load<double>(const std::string&);

}  // namespace fpz::train
