#include "fpz/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace fpz::cfg {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& source, const std::string& msg) {
  throw std::runtime_error("config error (" + source + "): " + msg);
}

void require_object(const json& j, const std::string& src, const std::string& path) {
  if (!j.is_object()) fail(src, "\"" + path + "\" must be an object");
}

// Strictness lives here: every object's keys are checked against the schema.
void reject_unknown(const json& j, const std::string& src, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  require_object(j, src, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(src, "unknown key \"" + path + "." + it.key() + "\"");
  }
}

double get_number(const json& j, const std::string& src, const std::string& path) {
  if (!j.is_number()) fail(src, "\"" + path + "\" must be a number");
  return j.get<double>();
}

std::int64_t get_integer(const json& j, const std::string& src, const std::string& path) {
  if (!j.is_number_integer()) fail(src, "\"" + path + "\" must be an integer");
  return j.get<std::int64_t>();
}

std::uint64_t get_u64(const json& j, const std::string& src, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  fail(src, "\"" + path + "\" must be a non-negative integer");
}

bool get_bool(const json& j, const std::string& src, const std::string& path) {
  if (!j.is_boolean()) fail(src, "\"" + path + "\" must be a boolean");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& src, const std::string& path) {
  if (!j.is_string()) fail(src, "\"" + path + "\" must be a string");
  return j.get<std::string>();
}

std::vector<double> get_number_array(const json& j, const std::string& src,
                                     const std::string& path) {
  if (!j.is_array()) fail(src, "\"" + path + "\" must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) fail(src, "\"" + path + "\" must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

SystemConfig parse_system(const json& j, const std::string& src) {
  reject_unknown(j, src, "system",
                 {"name", "dim", "diffusion", "domain", "b", "alpha", "beta", "rho"});
  SystemConfig sc;
  if (!j.contains("name")) fail(src, "missing required field \"system.name\"");
  sc.name = get_string(j.at("name"), src, "system.name");
  if (j.contains("dim")) {
    sc.dim = static_cast<int>(get_integer(j.at("dim"), src, "system.dim"));
    if (sc.dim < 1) fail(src, "\"system.dim\" must be ≥ 1");
  }
  if (j.contains("diffusion")) {
    sc.diffusion = get_number(j.at("diffusion"), src, "system.diffusion");
    if (*sc.diffusion <= 0) fail(src, "\"system.diffusion\" must be positive");
  }
  if (j.contains("domain")) {
    const json& d = j.at("domain");
    reject_unknown(d, src, "system.domain", {"lo", "hi"});
    if (!d.contains("lo") || !d.contains("hi"))
      fail(src, "\"system.domain\" needs both \"lo\" and \"hi\"");
    sc.domain_lo = get_number_array(d.at("lo"), src, "system.domain.lo");
    sc.domain_hi = get_number_array(d.at("hi"), src, "system.domain.hi");
  }
  if (j.contains("b")) sc.b = get_number(j.at("b"), src, "system.b");
  if (j.contains("alpha")) sc.alpha = get_number(j.at("alpha"), src, "system.alpha");
  if (j.contains("beta")) sc.beta = get_number(j.at("beta"), src, "system.beta");
  if (j.contains("rho")) sc.rho = get_number(j.at("rho"), src, "system.rho");

  const bool is_thomas = sc.name == "thomas";
  const bool is_l63 = sc.name == "lorenz63";
  if (sc.b && !is_thomas) fail(src, "\"system.b\" only applies to thomas");
  if ((sc.alpha || sc.beta || sc.rho) && !is_l63)
    fail(src, "\"system.alpha\"/\"beta\"/\"rho\" only apply to lorenz63");
  return sc;
}

train::LrSchedule parse_lr(const json& j, const std::string& src) {
  if (!j.is_array()) fail(src, "\"train.lr\" must be an array of [from, rate] pairs");
  train::LrSchedule sched;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto path = "train.lr[" + std::to_string(i) + "]";
    const json& p = j[i];
    if (!p.is_array() || p.size() != 2) fail(src, "\"" + path + "\" must be a [from, rate] pair");
    train::LrSchedule::Piece piece;
    piece.from = get_integer(p[0], src, path + "[0]");
    piece.lr = get_number(p[1], src, path + "[1]");
    sched.pieces.push_back(piece);
  }
  try {
    sched.validate();
  } catch (const std::exception& e) {
    fail(src, std::string("\"train.lr\": ") + e.what());
  }
  return sched;
}

void parse_train(const json& j, const std::string& src, train::TrainConfig& tc) {
  reject_unknown(j, src, "train",
                 {"hidden", "layers", "iterations", "batch_size", "resample_every", "lr", "adam",
                  "precision", "checkpoint_every", "trace_every", "block_size", "deterministic"});
  if (j.contains("hidden"))
    tc.arch.hidden = static_cast<int>(get_integer(j.at("hidden"), src, "train.hidden"));
  if (j.contains("layers"))
    tc.arch.layers = static_cast<int>(get_integer(j.at("layers"), src, "train.layers"));
  if (j.contains("iterations"))
    tc.iterations = get_integer(j.at("iterations"), src, "train.iterations");
  if (j.contains("batch_size"))
    tc.batch_size = static_cast<int>(get_integer(j.at("batch_size"), src, "train.batch_size"));
  if (j.contains("resample_every"))
    tc.resample_every =
        static_cast<int>(get_integer(j.at("resample_every"), src, "train.resample_every"));
  if (j.contains("lr")) tc.lr = parse_lr(j.at("lr"), src);
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    reject_unknown(a, src, "train.adam", {"beta1", "beta2", "epsilon"});
    if (a.contains("beta1")) tc.adam.beta1 = get_number(a.at("beta1"), src, "train.adam.beta1");
    if (a.contains("beta2")) tc.adam.beta2 = get_number(a.at("beta2"), src, "train.adam.beta2");
    if (a.contains("epsilon"))
      tc.adam.epsilon = get_number(a.at("epsilon"), src, "train.adam.epsilon");
  }
  if (j.contains("precision")) {
    tc.precision_bits = static_cast<int>(get_integer(j.at("precision"), src, "train.precision"));
    if (tc.precision_bits != 32 && tc.precision_bits != 64)
      fail(src, "\"train.precision\" must be 32 or 64");
  }
  if (j.contains("checkpoint_every"))
    tc.checkpoint_every = get_integer(j.at("checkpoint_every"), src, "train.checkpoint_every");
  if (j.contains("trace_every"))
    tc.trace_every = get_integer(j.at("trace_every"), src, "train.trace_every");
  if (j.contains("block_size"))
    tc.block_size = static_cast<int>(get_integer(j.at("block_size"), src, "train.block_size"));
  if (j.contains("deterministic"))
    tc.deterministic = get_bool(j.at("deterministic"), src, "train.deterministic");
}

void parse_mc(const json& j, const std::string& src, McConfig& mc) {
  reject_unknown(j, src, "mc", {"particles", "h", "steps", "bins"});
  if (j.contains("particles")) mc.particles = get_integer(j.at("particles"), src, "mc.particles");
  if (j.contains("h")) mc.h = get_number(j.at("h"), src, "mc.h");
  if (j.contains("steps")) mc.steps = get_integer(j.at("steps"), src, "mc.steps");
  if (j.contains("bins")) mc.bins = static_cast<int>(get_integer(j.at("bins"), src, "mc.bins"));
  if (mc.particles < 1) fail(src, "\"mc.particles\" must be ≥ 1");
  if (!(mc.h > 0)) fail(src, "\"mc.h\" must be positive");
  if (mc.steps < 0) fail(src, "\"mc.steps\" must be ≥ 0");
  if (mc.bins < 1) fail(src, "\"mc.bins\" must be ≥ 1");
}

void parse_quadrature(const json& j, const std::string& src, QuadConfig& q) {
  reject_unknown(j, src, "quadrature", {"subintervals", "points"});
  if (j.contains("subintervals"))
    q.subintervals =
        static_cast<int>(get_integer(j.at("subintervals"), src, "quadrature.subintervals"));
  if (j.contains("points"))
    q.points = static_cast<int>(get_integer(j.at("points"), src, "quadrature.points"));
  if (q.subintervals < 1) fail(src, "\"quadrature.subintervals\" must be ≥ 1");
  if (q.points < 1 || q.points > 32) fail(src, "\"quadrature.points\" must be in [1, 32]");
}

void parse_analysis(const json& j, const std::string& src, AnalysisConfig& a) {
  reject_unknown(j, src, "analysis", {"sup_bins", "density_bins", "eval_every", "slice_axes"});
  if (j.contains("sup_bins"))
    a.sup_bins = static_cast<int>(get_integer(j.at("sup_bins"), src, "analysis.sup_bins"));
  if (j.contains("density_bins"))
    a.density_bins =
        static_cast<int>(get_integer(j.at("density_bins"), src, "analysis.density_bins"));
  if (j.contains("eval_every"))
    a.eval_every = get_integer(j.at("eval_every"), src, "analysis.eval_every");
  if (j.contains("slice_axes")) {
    const json& s = j.at("slice_axes");
    if (!s.is_array() || s.size() != 2)
      fail(src, "\"analysis.slice_axes\" must be a pair of axis indices");
    a.slice_axes = {static_cast<int>(get_integer(s[0], src, "analysis.slice_axes[0]")),
                    static_cast<int>(get_integer(s[1], src, "analysis.slice_axes[1]"))};
  }
  if (a.sup_bins < 2) fail(src, "\"analysis.sup_bins\" must be ≥ 2");
  if (a.density_bins < 1) fail(src, "\"analysis.density_bins\" must be ≥ 1");
  if (a.eval_every < 1) fail(src, "\"analysis.eval_every\" must be ≥ 1");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(source, std::string("not valid JSON — ") + e.what());
  }
  reject_unknown(j, source, "$",
                 {"system", "train", "mc", "quadrature", "analysis", "out_dir", "seed"});
  if (!j.contains("system")) fail(source, "missing required field \"system\"");

  ExperimentConfig ec;
  ec.system = parse_system(j.at("system"), source);
  if (j.contains("train")) parse_train(j.at("train"), source, ec.train);
  if (j.contains("mc")) parse_mc(j.at("mc"), source, ec.mc);
  if (j.contains("quadrature")) parse_quadrature(j.at("quadrature"), source, ec.quadrature);
  if (j.contains("analysis")) parse_analysis(j.at("analysis"), source, ec.analysis);
  if (j.contains("out_dir")) ec.out_dir = get_string(j.at("out_dir"), source, "out_dir");
  if (j.contains("seed")) ec.seed = get_u64(j.at("seed"), source, "seed");

  // The drift system must materialize for the config to count as valid.
  const sys::DriftSystem s = build_system(ec.system);
  ec.train.arch.input_dim = s.dim;
  ec.train.seed = ec.seed;
  try {
    ec.train.validate();
  } catch (const std::exception& e) {
    fail(source, std::string("\"train\": ") + e.what());
  }
  return ec;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config error: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.filename().string());
}

sys::DriftSystem build_system(const SystemConfig& sc) {
  sys::SystemOverrides ov;
  ov.b = sc.b;
  ov.alpha = sc.alpha;
  ov.beta = sc.beta;
  ov.rho = sc.rho;

  int dim = sc.dim;
  if (dim == 0) {
    if (sc.name == "ring")
      dim = 2;
    else if (sc.name == "hypersphere")
      dim = 10;
    else
      dim = 3;
  }

  if (sc.domain_lo || sc.domain_hi) {
    if (!sc.domain_lo || !sc.domain_hi)
      throw std::runtime_error("config error: \"system.domain\" needs both \"lo\" and \"hi\"");
    sys::Box box{*sc.domain_lo, *sc.domain_hi};
    if (box.dim() != dim || static_cast<int>(box.hi.size()) != dim)
      throw std::runtime_error("config error: \"system.domain\" length must equal system dim " +
                               std::to_string(dim));
    box.validate();
    ov.domain = box;
  }

  double diffusion = sc.diffusion.value_or(sc.name == "lorenz63" ? 50.0 : 1.0);
  if (sc.name == "hypersphere") {
    sys::DriftSystem s = sys::make_hypersphere(dim, diffusion);
    if (ov.domain) s.domain = *ov.domain;
    return s;
  }
  return sys::make_system(sc.name, dim, diffusion, ov);
}

std::string schema_text() {
  return R"({
  "system": {                       // required
    "name": "ring",                 // ring | lorenz63 | thomas | hypersphere
    "dim": 2,                       // ring: even ≥ 2; lorenz63/thomas: 3; hypersphere default 10
    "diffusion": 1.0,               // default 1.0 (lorenz63: 50.0)
    "domain": {"lo": [-2, -2], "hi": [2, 2]},  // optional interest-box override
    "b": 0.2,                       // thomas only
    "alpha": 10.0, "beta": 2.6666666666666665, "rho": 28.0  // lorenz63 only
  },
  "train": {
    "hidden": 50, "layers": 3,
    "iterations": 10000, "batch_size": 1000, "resample_every": 10,
    "lr": [[0, 5e-3], [1000, 1e-3], [2000, 5e-4], [10000, 1e-4]],
    "adam": {"beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
    "precision": 64,                // 32 or 64
    "checkpoint_every": 1000, "trace_every": 100,
    "block_size": 128, "deterministic": false
  },
  "mc": {"particles": 1000000, "h": 0.01, "steps": 1000, "bins": 100},
  "quadrature": {"subintervals": 60, "points": 8},
  "analysis": {"sup_bins": 200, "density_bins": 100, "eval_every": 1000,
               "slice_axes": [4, 5]},  // slice_axes optional, dim > 3 only
  "out_dir": "out",
  "seed": 1
})";
}

}  // namespace fpz::cfg
