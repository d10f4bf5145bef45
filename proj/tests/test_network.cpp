#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "fpz/network.hpp"

using namespace fpz;

TEST_CASE("param_count closed form") {
  auto count = [](int d, int m, int L) {
    return net::param_count(net::Architecture{d, m, L});
  };
  CHECK(count(1, 1, 1) == 14);
  CHECK(count(2, 3, 2) == 136);
  CHECK(count(2, 50, 3) == 22251);
  CHECK(count(3, 50, 3) == 23051);
  CHECK(count(10, 50, 3) == 28651);
  CHECK_THROWS(count(0, 1, 1));
  CHECK_THROWS(count(1, 0, 1));
  CHECK_THROWS(count(1, 1, 0));
}

TEST_CASE("layout enumerates contiguous blocks in declaration order") {
  const net::Architecture a{3, 5, 2};
  const net::ParamLayout layout = net::ParamLayout::make(a);
  REQUIRE(static_cast<int>(layout.blocks.size()) == 12 * a.layers + 2);
  CHECK(layout.total == net::param_count(a));

  std::int64_t off = 0;
  for (const auto& blk : layout.blocks) {
    CHECK(blk.offset == off);
    off += blk.size();
  }
  CHECK(off == layout.total);

  // layer 1 recurrent blocks read the d-dimensional initial state
  CHECK(layout.block("U_f.1").cols == a.input_dim);
  CHECK(layout.block("U_s.1").cols == a.input_dim);
  CHECK(layout.block("U_f.2").cols == a.hidden);
  CHECK(layout.block("W_g.2").rows == a.hidden);
  CHECK(layout.block("W_g.2").cols == a.input_dim);
  CHECK(layout.block("b_r.1").is_bias);
  CHECK(layout.block("b_r.1").size() == a.hidden);
  CHECK(layout.block("w_out").size() == a.hidden);
  CHECK_FALSE(layout.block("w_out").is_bias);
  CHECK(layout.block("b_out").size() == 1);
  CHECK(layout.blocks.front().name == "W_f.1");
  CHECK(layout.blocks.back().name == "b_out");
  CHECK_THROWS(layout.block("W_q.1"));

  // block_at inverts offsets
  CHECK(layout.block_at(0).name == "W_f.1");
  CHECK(layout.block_at(layout.total - 1).name == "b_out");
  const auto& us1 = layout.block("U_s.1");
  CHECK(layout.block_at(us1.offset + us1.size() - 1).name == "U_s.1");
  CHECK_THROWS(layout.block_at(layout.total));
  CHECK_THROWS(layout.block_at(-1));
}

TEST_CASE("glorot_init: deterministic, bounded weights, zero biases") {
  const net::Architecture a{2, 7, 3};
  const net::ParamsD p1 = net::glorot_init<double>(a, 42);
  const net::ParamsD p2 = net::glorot_init<double>(a, 42);
  const net::ParamsD p3 = net::glorot_init<double>(a, 43);
  CHECK(p1.theta == p2.theta);
  CHECK(p1.theta != p3.theta);
  REQUIRE(static_cast<std::int64_t>(p1.theta.size()) == net::param_count(a));

  const net::ParamLayout layout = net::ParamLayout::make(a);
  for (const auto& blk : layout.blocks) {
    if (blk.is_bias) {
      for (std::int64_t i = 0; i < blk.size(); ++i)
        CHECK(p1.theta[static_cast<size_t>(blk.offset + i)] == 0.0);
      continue;
    }
    const double bound = std::sqrt(6.0 / (blk.rows + blk.cols));
    double lo = 1e300, hi = -1e300;
    for (std::int64_t i = 0; i < blk.size(); ++i) {
      const double v = p1.theta[static_cast<size_t>(blk.offset + i)];
      CHECK(std::abs(v) <= bound);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (blk.size() > 1) CHECK(hi > lo);  // not a constant block
  }
}

TEST_CASE("glorot_init float is the cast of the double draw") {
  const net::Architecture a{2, 5, 2};
  const net::ParamsD pd = net::glorot_init<double>(a, 7);
  const net::ParamsF pf = net::glorot_init<float>(a, 7);
  REQUIRE(pd.theta.size() == pf.theta.size());
  for (size_t i = 0; i < pd.theta.size(); ++i)
    CHECK(pf.theta[i] == static_cast<float>(pd.theta[i]));
}

TEST_CASE("forward closed form, one unit one layer") {
  // c₁ = g·s (forget gate sees c₀ = 0), h₁ = r·tanh(c₁), out = w·h₁ + b
  net::Params<double> p;
  p.arch = {1, 1, 1};
  //          W_f   U_f  b_f  W_g  U_g  b_g   W_r  U_r  b_r   W_s   U_s  b_s  w_out b_out
  p.theta = {0.3, 9.0, 0.1, 0.5, 9.0, -0.2, 0.7, 9.0, 0.11, -0.4, 9.0, 0.3, 2.0, 0.25};
  const double x = 0.9;
  const double g = std::tanh(0.5 * x - 0.2);
  const double s = std::tanh(-0.4 * x + 0.3);
  const double r = std::tanh(0.7 * x + 0.11);
  const double want = 2.0 * (r * std::tanh(g * s)) + 0.25;
  const std::vector<double> xv{x};
  CHECK(net::forward<double>(p, xv) == doctest::Approx(want).epsilon(1e-15));

  // U_*.1 and the layer-1 forget blocks must not affect the output
  net::Params<double> q = p;
  q.theta[0] = -5.0;  // W_f.1
  q.theta[1] = 123.0; // U_f.1
  q.theta[2] = 4.0;   // b_f.1
  q.theta[4] = -7.0;  // U_g.1
  q.theta[7] = 3.5;   // U_r.1
  q.theta[10] = 0.77; // U_s.1
  CHECK(net::forward<double>(q, xv) == net::forward<double>(p, xv));
}

TEST_CASE("forward closed form, one unit two layers") {
  net::Params<double> p;
  p.arch = {1, 1, 2};
  REQUIRE(net::param_count(p.arch) == 26);
  p.theta.resize(26);
  for (size_t i = 0; i < 26; ++i) p.theta[i] = 0.4 * std::sin(1.7 * (static_cast<double>(i) + 1));
  const double* t = p.theta.data();
  const double x = -0.6;

  // layer 1 (offsets: each gate is [W,U,b] of one scalar each)
  const double g1 = std::tanh(t[3] * x + t[5]);
  const double r1 = std::tanh(t[6] * x + t[8]);
  const double s1 = std::tanh(t[9] * x + t[11]);
  const double c1 = g1 * s1;
  const double h1 = r1 * std::tanh(c1);
  // layer 2 at offset 12: gates read x and h1
  const double f2 = std::tanh(t[12] * x + t[13] * h1 + t[14]);
  const double g2 = std::tanh(t[15] * x + t[16] * h1 + t[17]);
  const double r2 = std::tanh(t[18] * x + t[19] * h1 + t[20]);
  const double s2 = std::tanh(t[21] * x + t[22] * h1 + t[23]);
  const double c2 = f2 * c1 + g2 * s2;
  const double h2 = r2 * std::tanh(c2);
  const double want = t[24] * h2 + t[25];

  const std::vector<double> xv{x};
  CHECK(net::forward<double>(p, xv) == doctest::Approx(want).epsilon(1e-15));
}

namespace {

// Straight re-derivation of the forward pass from the documented layout,
// written independently of the library's offset helpers.
double reference_forward(const net::Params<double>& p, const std::vector<double>& x) {
  const int d = p.arch.input_dim, m = p.arch.hidden, L = p.arch.layers;
  const net::ParamLayout layout = net::ParamLayout::make(p.arch);
  auto blockv = [&](const std::string& name) {
    const auto& b = layout.block(name);
    return p.theta.data() + b.offset;
  };
  std::vector<double> h(m, 0.0), c(m, 0.0), hp;
  for (int layer = 1; layer <= L; ++layer) {
    const std::string suf = "." + std::to_string(layer);
    std::vector<std::vector<double>> gate(4, std::vector<double>(m));
    const char* names = "fgrs";
    for (int gi = 0; gi < 4; ++gi) {
      const std::string g(1, names[gi]);
      const double* W = blockv("W_" + g + suf);
      const double* U = blockv("U_" + g + suf);
      const double* b = blockv("b_" + g + suf);
      for (int i = 0; i < m; ++i) {
        double acc = b[i];
        for (int j = 0; j < d; ++j) acc += W[i * d + j] * x[j];
        if (layer > 1)
          for (int j = 0; j < m; ++j) acc += U[i * m + j] * hp[j];
        gate[gi][i] = std::tanh(acc);
      }
    }
    for (int i = 0; i < m; ++i) {
      c[i] = gate[0][i] * c[i] + gate[1][i] * gate[3][i];
      h[i] = gate[2][i] * std::tanh(c[i]);
    }
    hp = h;
  }
  const double* w = blockv("w_out");
  double out = *blockv("b_out");
  for (int i = 0; i < m; ++i) out += w[i] * h[i];
  return out;
}

}  // namespace

TEST_CASE("forward agrees with a multi-unit reference") {
  const net::Architecture a{2, 3, 2};
  net::ParamsD p = net::glorot_init<double>(a, 11);
  const std::vector<double> xs[] = {{0.0, 0.0}, {1.5, -0.5}, {-2.0, 2.0}, {0.3, 0.7}};
  for (const auto& x : xs)
    CHECK(net::forward<double>(p, x) ==
          doctest::Approx(reference_forward(p, x)).epsilon(1e-15));
}

TEST_CASE("forward validates shapes") {
  net::ParamsD p = net::glorot_init<double>(net::Architecture{2, 3, 1}, 1);
  const std::vector<double> wrong{1.0};
  CHECK_THROWS(net::forward<double>(p, wrong));
  p.theta.pop_back();
  const std::vector<double> ok{1.0, 2.0};
  CHECK_THROWS(net::forward<double>(p, ok));
}

TEST_CASE("forward float tracks double") {
  const net::Architecture a{2, 10, 3};
  const net::ParamsD pd = net::glorot_init<double>(a, 5);
  const net::ParamsF pf = net::glorot_init<float>(a, 5);
  const std::vector<double> xd{0.4, -1.2};
  const std::vector<float> xf{0.4f, -1.2f};
  const double vd = net::forward<double>(pd, xd);
  const float vf = net::forward<float>(pf, xf);
  CHECK(std::abs(static_cast<double>(vf) - vd) <= 1e-5 * (1.0 + std::abs(vd)));
}
