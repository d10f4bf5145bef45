#include "fpz/network.hpp"

#include <cmath>
#include <stdexcept>

namespace fpz::net {

void Architecture::validate() const {
  if (input_dim < 1 || hidden < 1 || layers < 1)
    throw std::invalid_argument("architecture: d, m, L must all be >= 1");
}

std::int64_t param_count(const Architecture& a) {
  a.validate();
  const std::int64_t d = a.input_dim, m = a.hidden, L = a.layers;
  return 4 * m * (d * (L + 1) + m * (L - 1)) + m * (4 * L + 1) + 1;
}

ParamLayout ParamLayout::make(const Architecture& a) {
  a.validate();
  ParamLayout layout;
  layout.arch = a;
  const int d = a.input_dim, m = a.hidden;
  std::int64_t off = 0;
  auto push = [&](const std::string& name, int rows, int cols, bool bias) {
    layout.blocks.push_back(Block{name, off, rows, cols, bias});
    off += static_cast<std::int64_t>(rows) * cols;
  };
  static const char* gates = "fgrs";
  for (int layer = 1; layer <= a.layers; ++layer) {
    const int u_cols = layer == 1 ? d : m;  // h_0 lives in R^d
    for (int gi = 0; gi < 4; ++gi) {
      const std::string g(1, gates[gi]);
      const std::string suffix = "." + std::to_string(layer);
      push("W_" + g + suffix, m, d, false);
      push("U_" + g + suffix, m, u_cols, false);
      push("b_" + g + suffix, m, 1, true);
    }
  }
  push("w_out", m, 1, false);
  push("b_out", 1, 1, true);
  layout.total = off;
  if (layout.total != param_count(a))
    throw std::logic_error("param layout disagrees with param_count");
  return layout;
}

const ParamLayout::Block& ParamLayout::block(const std::string& name) const {
  for (const Block& b : blocks)
    if (b.name == name) return b;
  throw std::invalid_argument("param layout: no block named " + name);
}

const ParamLayout::Block& ParamLayout::block_at(std::int64_t flat_index) const {
  for (const Block& b : blocks)
    if (flat_index >= b.offset && flat_index < b.offset + b.size()) return b;
  throw std::out_of_range("param layout: flat index out of range");
}

template <class T>
Params<T> glorot_init(const Architecture& a, std::uint64_t seed) {
  const ParamLayout layout = ParamLayout::make(a);
  Params<T> p;
  p.arch = a;
  p.theta.assign(static_cast<size_t>(layout.total), T(0));
  rng::Stream stream(seed, rng::StreamTag::init, 0);
  for (const auto& blk : layout.blocks) {
    if (blk.is_bias) continue;  // biases stay zero
    const double bound = std::sqrt(6.0 / (blk.rows + blk.cols));
    for (std::int64_t i = 0; i < blk.size(); ++i)
      p.theta[static_cast<size_t>(blk.offset + i)] = static_cast<T>(stream.uniform(-bound, bound));
  }
  return p;
}

namespace {

// offsets of one layer's twelve blocks, in declaration order
struct LayerOffsets {
  std::int64_t w[4], u[4], b[4];
  int u_cols;
};

LayerOffsets layer_offsets(const Architecture& a, int layer) {
  const std::int64_t d = a.input_dim, m = a.hidden;
  const std::int64_t per_gate_1 = m * d + m * d + m;       // layer 1: U is m×d
  const std::int64_t per_gate_n = m * d + m * m + m;       // layers ≥ 2
  std::int64_t base = layer == 1 ? 0 : 4 * per_gate_1 + static_cast<std::int64_t>(layer - 2) * 4 * per_gate_n;
  const std::int64_t per_gate = layer == 1 ? per_gate_1 : per_gate_n;
  LayerOffsets off;
  off.u_cols = layer == 1 ? static_cast<int>(d) : static_cast<int>(m);
  for (int g = 0; g < 4; ++g) {
    off.w[g] = base + g * per_gate;
    off.u[g] = off.w[g] + m * d;
    off.b[g] = off.u[g] + m * off.u_cols;
  }
  return off;
}

}  // namespace

template <class T>
T forward(const Params<T>& p, std::span<const T> x) {
  const Architecture& a = p.arch;
  a.validate();
  if (static_cast<int>(x.size()) != a.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  if (static_cast<std::int64_t>(p.theta.size()) != param_count(a))
    throw std::invalid_argument("forward: parameter vector has wrong length");

  const int d = a.input_dim, m = a.hidden;
  const T* th = p.theta.data();

  std::vector<T> h_prev, h(m), c(m, T(0)), gate[4];
  for (auto& g : gate) g.resize(m);

  for (int layer = 1; layer <= a.layers; ++layer) {
    const LayerOffsets off = layer_offsets(a, layer);
    for (int g = 0; g < 4; ++g) {
      const T* W = th + off.w[g];
      const T* U = th + off.u[g];
      const T* b = th + off.b[g];
      for (int i = 0; i < m; ++i) {
        T acc = b[i];
        for (int j = 0; j < d; ++j) acc += W[static_cast<std::int64_t>(i) * d + j] * x[j];
        if (layer > 1)  // layer 1 adds U·h_0 = 0
          for (int j = 0; j < m; ++j) acc += U[static_cast<std::int64_t>(i) * m + j] * h_prev[j];
        gate[g][i] = std::tanh(acc);
      }
    }
    // c ← f⊙c + g⊙s;  h ← r⊙tanh(c)   (gate order f,g,r,s)
    for (int i = 0; i < m; ++i) {
      c[i] = gate[0][i] * c[i] + gate[1][i] * gate[3][i];
      h[i] = gate[2][i] * std::tanh(c[i]);
    }
    h_prev = h;
  }

  const ParamLayout layout = ParamLayout::make(a);
  const T* w_out = th + layout.block("w_out").offset;
  T out = th[layout.block("b_out").offset];
  for (int i = 0; i < m; ++i) out += w_out[i] * h[i];
  return out;
}

template Params<float> glorot_init<float>(const Architecture&, std::uint64_t);
template Params<double> glorot_init<double>(const Architecture&, std::uint64_t);
template float forward<float>(const Params<float>&, std::span<const float>);
template double forward<double>(const Params<double>&, std::span<const double>);

}  // namespace fpz::net
