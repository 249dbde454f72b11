#pragma once

#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "zkinfer/errors.hpp"
#include "zkinfer/model.hpp"
#include "zkinfer/pipeline.hpp"

namespace zkinfer {

// ---------------------------------------------------------------------------
// Sweep model generators
// ---------------------------------------------------------------------------

namespace detail {

// Portable deterministic uniform doubles; distributions in <random> are not
// bit-stable across standard libraries.
class WeightRng {
public:
  explicit WeightRng(u64 seed) : rng_(seed) {}

  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double symmetric(double bound) { return (2.0 * unit() - 1.0) * bound; }  // [-bound, bound)

  std::vector<double> tensor(std::size_t n, double bound) {
    std::vector<double> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.push_back(symmetric(bound));
    return v;
  }

private:
  std::mt19937_64 rng_;
};

}  // namespace detail

// LeNet-style depth family: the first two blocks are conv-ReLU-maxpool and
// any extra depth stacks further 3x3 convolutions (stride 1, pad 1) without
// additional pooling, ending in reshape plus a one-layer classifier tail with
// its own ReLU. Counts: c = d convs, p = min(d,2) pools, f = 1 FC,
// r = d + 1 ReLUs.
//
// Channel schedule: conv1 maps 1 -> channels, every later conv maps to
// 2*channels. Weights are uniform in [-1/fan_in, 1/fan_in), biases in
// [-0.05, 0.05), which keeps per-layer gain around 1/2 so quantization error
// stays flat with depth.
inline ModelGraph make_depth_model(int depth, int input_side, int channels, u64 seed) {
  if (depth < 1) fail(ErrorKind::Config, "depth must be >= 1");
  if (channels < 1) fail(ErrorKind::Config, "channels must be >= 1");
  const int pools = std::min(depth, 2);
  const int pool_factor = 1 << pools;
  if (input_side < pool_factor || input_side % pool_factor != 0)
    fail(ErrorKind::ShapeMismatch,
         "input side " + std::to_string(input_side) + " does not survive " + std::to_string(pools) +
             " 2x2 poolings (must be a positive multiple of " + std::to_string(pool_factor) + ")");

  detail::WeightRng rng(seed);
  ModelGraph g;
  g.input = TensorSpec{"x", {1, 1, input_side, input_side}};

  std::string cur = "x";
  int cur_channels = 1;
  int side = input_side;
  for (int i = 1; i <= depth; ++i) {
    const int out_channels = i == 1 ? channels : 2 * channels;
    const std::string w_name = "conv" + std::to_string(i) + "_w";
    const std::string b_name = "conv" + std::to_string(i) + "_b";
    const std::size_t fan_in = static_cast<std::size_t>(cur_channels) * 9;
    g.initializers[w_name] =
        FloatTensor{{out_channels, cur_channels, 3, 3},
                    rng.tensor(static_cast<std::size_t>(out_channels) * fan_in, 1.0 / fan_in)};
    g.initializers[b_name] = FloatTensor{{out_channels}, rng.tensor(out_channels, 0.05)};

    ModelNode conv;
    conv.name = "conv" + std::to_string(i);
    conv.op = OpKind::Conv2D;
    conv.inputs = {cur, w_name, b_name};
    conv.output = "c" + std::to_string(i);
    conv.attrs.strides = {1, 1};
    conv.attrs.pads = {1, 1};
    g.nodes.push_back(conv);

    ModelNode relu;
    relu.name = "relu" + std::to_string(i);
    relu.op = OpKind::ReLU;
    relu.inputs = {conv.output};
    relu.output = "a" + std::to_string(i);
    g.nodes.push_back(relu);
    cur = relu.output;
    cur_channels = out_channels;

    if (i <= pools) {
      ModelNode pool;
      pool.name = "pool" + std::to_string(i);
      pool.op = OpKind::MaxPool2D;
      pool.inputs = {cur};
      pool.output = "p" + std::to_string(i);
      pool.attrs.window = {2, 2};
      pool.attrs.strides = {2, 2};
      g.nodes.push_back(pool);
      cur = pool.output;
      side /= 2;
    }
  }

  const std::int64_t features = static_cast<std::int64_t>(cur_channels) * side * side;
  ModelNode reshape;
  reshape.name = "reshape";
  reshape.op = OpKind::Reshape;
  reshape.inputs = {cur};
  reshape.output = "flat";
  reshape.attrs.reshape_shape = {1, features};
  g.nodes.push_back(reshape);

  const int classes = 10;
  g.initializers["fc_w"] = FloatTensor{
      {features, classes},
      rng.tensor(static_cast<std::size_t>(features) * classes, 1.0 / static_cast<double>(features))};
  g.initializers["fc_b"] = FloatTensor{{classes}, rng.tensor(classes, 0.05)};
  ModelNode fc;
  fc.name = "fc";
  fc.op = OpKind::Gemm;
  fc.inputs = {"flat", "fc_w", "fc_b"};
  fc.output = "logits";
  g.nodes.push_back(fc);

  ModelNode relu_out;
  relu_out.name = "relu_fc";
  relu_out.op = OpKind::ReLU;
  relu_out.inputs = {"logits"};
  relu_out.output = "y";
  g.nodes.push_back(relu_out);
  g.output_name = "y";

  validate_model(g);
  return g;
}

// Breadth family: architecture pinned at d = 5 (c = 5, p = 2, f = 1, r = 6);
// only the input spatial size varies.
inline ModelGraph make_breadth_model(int input_side, u64 seed) {
  return make_depth_model(5, input_side, 4, seed);
}

inline u64 parameter_count(const ModelGraph& g) {
  u64 n = 0;
  for (const auto& [name, t] : g.initializers) n += static_cast<u64>(t.num_elements());
  return n;
}

struct LayerCounts {
  int convs = 0;
  int pools = 0;
  int fcs = 0;
  int relus = 0;
};

inline LayerCounts count_layers(const ModelGraph& g) {
  LayerCounts c;
  for (const auto& node : g.nodes) {
    switch (node.op) {
      case OpKind::Conv2D: ++c.convs; break;
      case OpKind::MaxPool2D: ++c.pools; break;
      case OpKind::Gemm: ++c.fcs; break;
      case OpKind::ReLU: ++c.relus; break;
      case OpKind::Reshape: break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Robust outlier flagging and least squares
// ---------------------------------------------------------------------------

namespace detail {

inline double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace detail

// Modified z-score z = 0.6745 * |x - median| / MAD, flagging z > 3.5. When
// MAD is zero (at least half the points identical) exactly the points that
// differ from the median are flagged.
inline std::vector<bool> mad_outliers(const std::vector<double>& xs) {
  if (xs.size() < 2) fail(ErrorKind::Config, "mad_outliers needs at least two points");
  double med = detail::median_of(xs);
  std::vector<double> dev;
  dev.reserve(xs.size());
  for (double x : xs) dev.push_back(std::fabs(x - med));
  double mad = detail::median_of(dev);

  std::vector<bool> flags(xs.size(), false);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (mad == 0.0)
      flags[i] = xs[i] != med;
    else
      flags[i] = 0.6745 * dev[i] / mad > 3.5;
  }
  return flags;
}

inline double mad_z_score(const std::vector<double>& xs, std::size_t i) {
  double med = detail::median_of(xs);
  std::vector<double> dev;
  dev.reserve(xs.size());
  for (double x : xs) dev.push_back(std::fabs(x - med));
  double mad = detail::median_of(dev);
  if (mad == 0.0) return xs[i] == med ? 0.0 : std::numeric_limits<double>::infinity();
  return 0.6745 * std::fabs(xs[i] - med) / mad;
}

struct RegressionResult {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::vector<bool> outliers;  // points excluded from the fit
};

// Ordinary least squares over the non-excluded points. Constant y fits a
// horizontal line with R^2 defined as 0 (zero variance explained).
inline RegressionResult linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<bool>& exclude = {}) {
  if (x.size() != y.size()) fail(ErrorKind::Config, "linear_fit: size mismatch");
  if (!exclude.empty() && exclude.size() != x.size())
    fail(ErrorKind::Config, "linear_fit: exclusion flag size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!exclude.empty() && exclude[i]) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  if (xs.size() < 2) fail(ErrorKind::Config, "linear_fit needs at least two non-excluded points");

  double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) fail(ErrorKind::Config, "linear_fit: x values are degenerate (all equal)");

  RegressionResult r;
  r.outliers = exclude.empty() ? std::vector<bool>(x.size(), false) : exclude;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy == 0.0) {
    r.r_squared = 0.0;
    return r;
  }
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double e = ys[i] - (r.intercept + r.slope * xs[i]);
    ss_res += e * e;
  }
  r.r_squared = 1.0 - ss_res / syy;
  return r;
}

// MAD-flag y, then fit on the surviving points.
inline RegressionResult linear_fit_robust(const std::vector<double>& x, const std::vector<double>& y) {
  return linear_fit(x, y, mad_outliers(y));
}

// ---------------------------------------------------------------------------
// Peak-RSS sampling
// ---------------------------------------------------------------------------

// High-water sampling of the process resident set: a observer thread polls
// /proc/self/statm. Best effort and approximate by design; within one process
// the allocator rarely returns pages, so phase peaks are upper bounds.
class PeakRssSampler {
public:
  static u64 current_rss_bytes() {
    if (FILE* f = std::fopen("/proc/self/statm", "r")) {
      unsigned long long total = 0, resident = 0;
      int got = std::fscanf(f, "%llu %llu", &total, &resident);
      std::fclose(f);
      if (got == 2) return static_cast<u64>(resident) * static_cast<u64>(sysconf(_SC_PAGESIZE));
    }
    struct rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<u64>(ru.ru_maxrss) * 1024;
  }

  void start() {
    peak_.store(current_rss_bytes());
    running_.store(true);
    thread_ = std::thread([this] {
      while (running_.load()) {
        u64 now = current_rss_bytes();
        u64 prev = peak_.load();
        while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
    });
  }

  u64 stop() {
    running_.store(false);
    if (thread_.joinable()) thread_.join();
    u64 final_rss = current_rss_bytes();
    return std::max(final_rss, peak_.load());
  }

private:
  std::atomic<bool> running_{false};
  std::atomic<u64> peak_{0};
  std::thread thread_;
};

// ---------------------------------------------------------------------------
// Sweep runner and reports
// ---------------------------------------------------------------------------

struct SweepSpec {
  enum class Kind { Depth, Breadth };
  Kind kind = Kind::Depth;
  std::vector<int> sizes;  // depths, or input sides
  int input_side = 16;     // depth sweep only
  int channels = 4;
  u64 seed = 1;

  void validate() const {
    if (sizes.empty()) fail(ErrorKind::Config, "sweep has no sizes");
    for (int s : sizes)
      if (s < 1) fail(ErrorKind::Config, "sweep sizes must be >= 1");
  }
};

struct PhaseStats {
  bool ran = false;
  double seconds = 0;
  u64 peak_rss = 0;
};

struct SweepRecord {
  int size = 0;  // d for depth sweeps, h for breadth sweeps
  int convs = 0, pools = 0, fcs = 0, relus = 0;
  u64 parameters = 0;
  u64 total_cost = 0;
  u64 constraints = 0;
  bool ok = false;
  std::string error;
  PhaseStats compile, witness, prove, verify;
  u64 circuit_bytes = 0, witness_bytes = 0, proof_bytes = 0;
};

namespace detail {

struct PhaseRun {
  int exit_code = 0;
  double seconds = 0;
  u64 peak_rss = 0;
};

template <typename F>
PhaseRun run_phase(F&& fn) {
  PeakRssSampler sampler;
  sampler.start();
  auto start = std::chrono::steady_clock::now();
  int code = fn();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  u64 peak = sampler.stop();
  return {code, secs, peak};
}

inline u64 file_size_or_zero(const std::string& path) {
  std::error_code ec;
  auto size = std::filesystem::file_size(path, ec);
  return ec ? 0 : static_cast<u64>(size);
}

}  // namespace detail

// Runs every phase `iterations` times per model and reports per-phase mean
// runtime and peak memory. A failing model is recorded and the sweep moves on.
inline std::vector<SweepRecord> run_sweep(const SweepSpec& spec, int iterations,
                                          const std::string& out_dir, const PipelineConfig& cfg) {
  spec.validate();
  if (iterations < 1) fail(ErrorKind::Config, "iterations must be >= 1");
  std::filesystem::create_directories(out_dir);

  std::vector<SweepRecord> records;
  for (int size : spec.sizes) {
    SweepRecord rec;
    rec.size = size;
    const std::string tag =
        (spec.kind == SweepSpec::Kind::Depth ? "d" : "h") + std::to_string(size);
    const std::string dir = out_dir + "/" + tag;

    ModelGraph graph;
    try {
      graph = spec.kind == SweepSpec::Kind::Depth
                  ? make_depth_model(size, spec.input_side, spec.channels, spec.seed)
                  : make_breadth_model(size, spec.seed);
    } catch (const Error& e) {
      rec.error = e.what();
      records.push_back(std::move(rec));
      continue;
    }
    LayerCounts layers = count_layers(graph);
    rec.convs = layers.convs;
    rec.pools = layers.pools;
    rec.fcs = layers.fcs;
    rec.relus = layers.relus;
    rec.parameters = parameter_count(graph);

    std::filesystem::create_directories(dir);
    const std::string model_path = dir + "/model.json";
    const std::string input_path = dir + "/input.json";
    const std::string circuit_path = dir + "/circuit.bin";
    const std::string witness_path = dir + "/witness.bin";
    const std::string output_path = dir + "/output.json";
    const std::string proof_path = dir + "/proof.bin";
    write_file_text(model_path, serialize_model(graph));

    InputData in;
    in.shape = graph.input.shape;
    detail::WeightRng rng(spec.seed + static_cast<u64>(size) * 7919);
    for (std::int64_t i = 0; i < graph.input.num_elements(); ++i)
      in.values.push_back(rng.symmetric(1.0));
    write_input_json(input_path, in);

    std::ostringstream sink;
    CommandOutput quiet{false, &sink};
    bool all_ok = true;
    for (int it = 0; it < iterations && all_ok; ++it) {
      auto compile = detail::run_phase(
          [&] { return cmd_compile(model_path, circuit_path, cfg, quiet); });
      rec.compile.ran = true;
      rec.compile.seconds += compile.seconds;
      rec.compile.peak_rss = std::max(rec.compile.peak_rss, compile.peak_rss);
      if (compile.exit_code != 0) {
        rec.error = "compile exited " + std::to_string(compile.exit_code);
        all_ok = false;
        break;
      }
      auto witness = detail::run_phase(
          [&] { return cmd_witness(circuit_path, input_path, output_path, witness_path, quiet); });
      rec.witness.ran = true;
      rec.witness.seconds += witness.seconds;
      rec.witness.peak_rss = std::max(rec.witness.peak_rss, witness.peak_rss);
      if (witness.exit_code != 0) {
        rec.error = "witness exited " + std::to_string(witness.exit_code);
        all_ok = false;
        break;
      }
      auto prove = detail::run_phase(
          [&] { return cmd_prove(circuit_path, witness_path, proof_path, quiet); });
      rec.prove.ran = true;
      rec.prove.seconds += prove.seconds;
      rec.prove.peak_rss = std::max(rec.prove.peak_rss, prove.peak_rss);
      if (prove.exit_code != 0) {
        rec.error = "prove exited " + std::to_string(prove.exit_code);
        all_ok = false;
        break;
      }
      auto verify = detail::run_phase([&] {
        return cmd_verify(circuit_path, input_path, output_path, witness_path, proof_path, quiet);
      });
      rec.verify.ran = true;
      rec.verify.seconds += verify.seconds;
      rec.verify.peak_rss = std::max(rec.verify.peak_rss, verify.peak_rss);
      if (verify.exit_code != 0) {
        rec.error = "verify exited " + std::to_string(verify.exit_code);
        all_ok = false;
        break;
      }
    }
    if (all_ok) {
      rec.ok = true;
      rec.compile.seconds /= iterations;
      rec.witness.seconds /= iterations;
      rec.prove.seconds /= iterations;
      rec.verify.seconds /= iterations;
      rec.circuit_bytes = detail::file_size_or_zero(circuit_path);
      rec.witness_bytes = detail::file_size_or_zero(witness_path);
      rec.proof_bytes = detail::file_size_or_zero(proof_path);
      LoadedCircuit loaded = read_circuit_file(circuit_path);
      rec.total_cost = loaded.cs.total_cost();
      rec.constraints = loaded.cs.counters().n_constraints;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// CSV + markdown reports, with "--" cells for phases that never ran.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string phase_cell(const PhaseStats& p, bool memory, bool markdown) {
  if (!p.ran) return markdown ? "--" : "";
  return csv_double(memory ? static_cast<double>(p.peak_rss) : p.seconds);
}

}  // namespace detail

inline std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  os << (spec.kind == SweepSpec::Kind::Depth ? "d" : "h")
     << ",c,p,f,r,parameters,total_cost,constraints,ok"
     << ",compile_s,witness_s,prove_s,verify_s"
     << ",compile_rss,witness_rss,prove_rss,verify_rss"
     << ",circuit_bytes,witness_bytes,proof_bytes,error\n";
  for (const auto& r : records) {
    os << r.size << "," << r.convs << "," << r.pools << "," << r.fcs << "," << r.relus << ","
       << r.parameters << "," << r.total_cost << "," << r.constraints << "," << (r.ok ? 1 : 0);
    for (const auto* p : {&r.compile, &r.witness, &r.prove, &r.verify})
      os << "," << detail::phase_cell(*p, false, false);
    for (const auto* p : {&r.compile, &r.witness, &r.prove, &r.verify})
      os << "," << detail::phase_cell(*p, true, false);
    os << "," << r.circuit_bytes << "," << r.witness_bytes << "," << r.proof_bytes;
    std::string err = r.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    os << "," << err << "\n";
  }
  return os.str();
}

inline std::string sweep_markdown(const SweepSpec& spec, const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  const char* dim = spec.kind == SweepSpec::Kind::Depth ? "d" : "h";
  os << "| " << dim
     << " | c | p | f | r | parameters | total cost | compile (s) | witness (s) | prove (s) | "
        "verify (s) | compile (B) | witness (B) | prove (B) | verify (B) | circuit (B) | "
        "witness file (B) | proof (B) |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : records) {
    os << "| " << r.size << " | " << r.convs << " | " << r.pools << " | " << r.fcs << " | "
       << r.relus << " | " << r.parameters << " | ";
    if (r.ok)
      os << r.total_cost;
    else
      os << "--";
    os << " | ";
    for (const auto* p : {&r.compile, &r.witness, &r.prove, &r.verify})
      os << detail::phase_cell(*p, false, true) << " | ";
    for (const auto* p : {&r.compile, &r.witness, &r.prove, &r.verify})
      os << detail::phase_cell(*p, true, true) << " | ";
    auto bytes_cell = [&](u64 v) { return r.ok ? std::to_string(v) : std::string("--"); };
    os << bytes_cell(r.circuit_bytes) << " | " << bytes_cell(r.witness_bytes) << " | "
       << bytes_cell(r.proof_bytes) << " |\n";
  }
  return os.str();
}

inline void emit_report(const std::string& dir, const SweepSpec& spec,
                        const std::vector<SweepRecord>& records) {
  if (records.empty()) fail(ErrorKind::Config, "no sweep records to report");
  std::filesystem::create_directories(dir);
  write_file_text(dir + "/sweep.csv", sweep_csv(spec, records));
  write_file_text(dir + "/sweep.md", sweep_markdown(spec, records));
}

inline std::vector<SweepRecord> parse_sweep_csv(const std::string& text) {
  std::vector<SweepRecord> records;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::Schema, "empty sweep CSV");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (cells.size() < 21) cells.push_back("");
    SweepRecord r;
    r.size = std::stoi(cells[0]);
    r.convs = std::stoi(cells[1]);
    r.pools = std::stoi(cells[2]);
    r.fcs = std::stoi(cells[3]);
    r.relus = std::stoi(cells[4]);
    r.parameters = std::stoull(cells[5]);
    r.total_cost = std::stoull(cells[6]);
    r.constraints = std::stoull(cells[7]);
    r.ok = cells[8] == "1";
    PhaseStats* phases[4] = {&r.compile, &r.witness, &r.prove, &r.verify};
    for (int i = 0; i < 4; ++i) {
      if (!cells[9 + i].empty()) {
        phases[i]->ran = true;
        phases[i]->seconds = std::stod(cells[9 + i]);
      }
      if (!cells[13 + i].empty())
        phases[i]->peak_rss = static_cast<u64>(std::stod(cells[13 + i]));
    }
    r.circuit_bytes = std::stoull(cells[17]);
    r.witness_bytes = std::stoull(cells[18]);
    r.proof_bytes = std::stoull(cells[19]);
    r.error = cells[20];
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace zkinfer
