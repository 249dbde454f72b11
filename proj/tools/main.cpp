// zkinfer CLI: compile / witness / prove / verify pipeline plus the bench
// sweep runner and a sweep-model generator.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zkinfer/zkinfer.hpp"

namespace {

using namespace zkinfer;

struct GlobalFlags {
  std::string config_path;
  bool json = false;
};

PipelineConfig resolve_config(const GlobalFlags& flags) {
  std::string path = flags.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("ZKINFER_CONFIG")) path = env;
  }
  return path.empty() ? PipelineConfig{} : load_pipeline_config(path);
}

int run_bench(const GlobalFlags& flags, const std::string& kind, std::vector<int> sizes,
              int input_side, int channels, int iterations, u64 seed, const std::string& out_dir) {
  PipelineConfig cfg = resolve_config(flags);
  SweepSpec spec;
  if (kind == "depth")
    spec.kind = SweepSpec::Kind::Depth;
  else if (kind == "breadth")
    spec.kind = SweepSpec::Kind::Breadth;
  else
    fail(ErrorKind::Config, "sweep kind must be 'depth' or 'breadth'");
  spec.sizes = std::move(sizes);
  spec.input_side = input_side;
  spec.channels = channels;
  spec.seed = seed;

  std::vector<SweepRecord> records = run_sweep(spec, iterations, out_dir, cfg);
  emit_report(out_dir, spec, records);

  if (flags.json) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records) {
      out.push_back({{"size", r.size},
                     {"ok", r.ok},
                     {"parameters", r.parameters},
                     {"total_cost", r.total_cost},
                     {"constraints", r.constraints},
                     {"compile_s", r.compile.seconds},
                     {"witness_s", r.witness.seconds},
                     {"prove_s", r.prove.seconds},
                     {"verify_s", r.verify.seconds},
                     {"circuit_bytes", r.circuit_bytes},
                     {"witness_bytes", r.witness_bytes},
                     {"proof_bytes", r.proof_bytes},
                     {"error", r.error}});
    }
    std::cout << out.dump() << "\n";
  } else {
    std::cout << sweep_markdown(spec, records);
    std::vector<double> cost, compile_s;
    for (const auto& r : records) {
      if (!r.ok) continue;
      cost.push_back(static_cast<double>(r.total_cost));
      compile_s.push_back(r.compile.seconds);
    }
    if (cost.size() >= 3) {
      try {
        RegressionResult fit = linear_fit_robust(cost, compile_s);
        std::cout << "compile time vs total cost: R^2 = " << fit.r_squared << " (slope "
                  << fit.slope << ")\n";
      } catch (const Error&) {
        // not enough surviving points for a fit; the table stands on its own
      }
    }
    std::cout << "report written to " << out_dir << "/sweep.csv and sweep.md\n";
  }
  bool any_failed = false;
  for (const auto& r : records) any_failed = any_failed || !r.ok;
  return any_failed ? 1 : 0;
}

int run_gen(const std::string& kind, int size, int input_side, int channels, u64 seed,
            const std::string& model_out, const std::string& input_out) {
  ModelGraph graph = kind == "breadth" ? make_breadth_model(size, seed)
                                       : make_depth_model(size, input_side, channels, seed);
  write_file_text(model_out, serialize_model(graph));
  std::cout << "wrote " << model_out << " (" << graph.nodes.size() << " nodes, "
            << parameter_count(graph) << " parameters)\n";
  if (!input_out.empty()) {
    InputData in;
    in.shape = graph.input.shape;
    detail::WeightRng rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (std::int64_t i = 0; i < graph.input.num_elements(); ++i)
      in.values.push_back(rng.symmetric(1.0));
    write_input_json(input_out, in);
    std::cout << "wrote " << input_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"verifiable quantized neural-network inference pipeline"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config_path,
                 "pipeline config JSON (or set ZKINFER_CONFIG)");
  app.add_flag("--json", flags.json, "machine-readable output");

  // compile
  std::string model_path, circuit_path;
  auto* compile = app.add_subcommand("compile", "import, quantize, compile circuit");
  compile->add_option("-m,--model", model_path, "model JSON")->required();
  compile->add_option("-c,--circuit", circuit_path, "circuit output path")->required();
  std::uint32_t opt_s = 0, opt_nu = 0, opt_kappa = 0;
  u64 opt_prime = 0;
  double opt_bound = 0;
  bool no_fuse = false, per_product = false;
  compile->add_option("--scale-bits", opt_s, "scale exponent s (alpha = 2^s)");
  compile->add_option("--nu", opt_nu, "quotient bit-width");
  compile->add_option("--kappa", opt_kappa, "range-check bit-width");
  compile->add_option("--prime", opt_prime, "field modulus");
  compile->add_option("--input-bound", opt_bound, "assumed |input| bound for the overflow audit");
  compile->add_flag("--no-fuse-relu", no_fuse, "disable the MatMul/Conv + ReLU fusion pass");
  compile->add_flag("--rescale-per-product", per_product,
                    "rescale each scalar product instead of the accumulated sum");

  // witness
  std::string input_path, output_path, witness_path;
  auto* witness = app.add_subcommand("witness", "run quantized model, produce witness");
  witness->add_option("-c,--circuit", circuit_path, "circuit file")->required();
  witness->add_option("-i,--input", input_path, "input JSON")->required();
  witness->add_option("-o,--output", output_path, "output JSON path")->required();
  witness->add_option("-w,--witness", witness_path, "witness output path")->required();

  // prove
  std::string proof_path;
  auto* prove = app.add_subcommand("prove", "generate proof");
  prove->add_option("-c,--circuit", circuit_path, "circuit file")->required();
  prove->add_option("-w,--witness", witness_path, "witness file")->required();
  prove->add_option("-p,--proof", proof_path, "proof output path")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "verify proof");
  verify->add_option("-c,--circuit", circuit_path, "circuit file")->required();
  verify->add_option("-i,--input", input_path, "input JSON")->required();
  verify->add_option("-o,--output", output_path, "output JSON")->required();
  verify->add_option("-w,--witness", witness_path, "witness file")->required();
  verify->add_option("-p,--proof", proof_path, "proof file")->required();

  // bench
  std::string sweep_kind = "depth", bench_dir = "bench_out";
  std::vector<int> sweep_sizes;
  int bench_input_side = 16, bench_channels = 4, bench_iterations = 1;
  u64 bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "run a depth or breadth sweep");
  bench->add_option("--kind", sweep_kind, "depth | breadth");
  bench->add_option("--sizes", sweep_sizes, "depths (or input sides for breadth)")->required();
  bench->add_option("--input-side", bench_input_side, "input side for depth sweeps");
  bench->add_option("--channels", bench_channels, "base channel count");
  bench->add_option("--iterations", bench_iterations, "end-to-end iterations per model");
  bench->add_option("--seed", bench_seed, "weight/input seed");
  bench->add_option("--out", bench_dir, "report directory");

  // gen
  std::string gen_kind = "depth", gen_model_out = "model.json", gen_input_out;
  int gen_size = 3, gen_input_side = 16, gen_channels = 4;
  u64 gen_seed = 1;
  auto* gen = app.add_subcommand("gen", "generate a sweep-family model file");
  gen->add_option("--kind", gen_kind, "depth | breadth");
  gen->add_option("--size", gen_size, "depth (or input side for breadth)");
  gen->add_option("--input-side", gen_input_side, "input side for depth models");
  gen->add_option("--channels", gen_channels, "base channel count");
  gen->add_option("--seed", gen_seed, "weight seed");
  gen->add_option("-o,--model-out", gen_model_out, "model output path");
  gen->add_option("--input-out", gen_input_out, "also write a random input JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    CommandOutput out{flags.json, &std::cout};
    if (compile->parsed()) {
      PipelineConfig cfg = resolve_config(flags);
      if (opt_s) cfg.quant.s = opt_s;
      if (opt_nu) cfg.quant.nu = opt_nu;
      if (opt_kappa) cfg.quant.kappa = opt_kappa;
      if (opt_prime) {
        cfg.prime = opt_prime;
        cfg.field_name = opt_prime == Field::kMersenne61 ? "m61" : "p" + std::to_string(opt_prime);
      }
      if (opt_bound > 0) cfg.options.input_abs_bound = opt_bound;
      if (no_fuse) cfg.options.fuse_relu = false;
      if (per_product) cfg.options.rescale_per_product = true;
      return cmd_compile(model_path, circuit_path, cfg, out);
    }
    if (witness->parsed()) return cmd_witness(circuit_path, input_path, output_path, witness_path, out);
    if (prove->parsed()) return cmd_prove(circuit_path, witness_path, proof_path, out);
    if (verify->parsed())
      return cmd_verify(circuit_path, input_path, output_path, witness_path, proof_path, out);
    if (bench->parsed())
      return run_bench(flags, sweep_kind, sweep_sizes, bench_input_side, bench_channels,
                       bench_iterations, bench_seed, bench_dir);
    if (gen->parsed())
      return run_gen(gen_kind, gen_size, gen_input_side, gen_channels, gen_seed, gen_model_out,
                     gen_input_out);
  } catch (const zkinfer::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return zkinfer::exit_code_for(e.kind());
  }
  return 0;
}
