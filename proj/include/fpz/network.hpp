#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpz/rng.hpp"

namespace fpz::net {

// Recurrent-gated architecture: L stacked cells of width m over input
// dimension d, scalar output. The depth index plays the role of "time": each
// cell re-reads the input x and transforms the running (h, c) pair.
struct Architecture {
  int input_dim = 2;  // d
  int hidden = 50;    // m
  int layers = 3;     // L

  bool operator==(const Architecture&) const = default;
  void validate() const;
};

// Number of stored scalars:
//   per layer, four gates with W (m×d), U (m×m, except m×d at layer 1), b (m);
//   plus the output pair (w in R^m, scalar bias)
// = 4m[d(L+1) + m(L−1)] + m(4L+1) + 1.
std::int64_t param_count(const Architecture& a);

// Flat-vector layout of every parameter block, declaration order:
// layer 1..L: [W_f U_f b_f  W_g U_g b_g  W_r U_r b_r  W_s U_s b_s], then
// w_out, b_out. Matrices are row-major within their block.
struct ParamLayout {
  struct Block {
    std::string name;  // e.g. "W_f.2", "U_s.1", "b_g.3", "w_out", "b_out"
    std::int64_t offset = 0;
    int rows = 0, cols = 0;
    std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
    bool is_bias = false;
  };
  Architecture arch;
  std::vector<Block> blocks;
  std::int64_t total = 0;

  static ParamLayout make(const Architecture& a);
  const Block& block(const std::string& name) const;
  // name of the block containing flat index i (diagnostics)
  const Block& block_at(std::int64_t flat_index) const;
};

template <class T>
struct Params {
  Architecture arch;
  std::vector<T> theta;
};

using ParamsF = Params<float>;
using ParamsD = Params<double>;

// Uniform Glorot draws in ±√(6/(rows+cols)) per weight block, biases zero,
// one stream per seed — bit-identical for identical (arch, seed).
template <class T>
Params<T> glorot_init(const Architecture& a, std::uint64_t seed);

// Plain scalar evaluation n_θ(x). Reference implementation: straight loops,
// no batching — the batched/dual versions must agree with this one.
template <class T>
T forward(const Params<T>& p, std::span<const T> x);

extern template Params<float> glorot_init<float>(const Architecture&, std::uint64_t);
extern template Params<double> glorot_init<double>(const Architecture&, std::uint64_t);
extern template float forward<float>(const Params<float>&, std::span<const float>);
extern template double forward<double>(const Params<double>&, std::span<const double>);

}  // namespace fpz::net
