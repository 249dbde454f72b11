#pragma once

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zkinfer/artifacts.hpp"
#include "zkinfer/compiler.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/model.hpp"
#include "zkinfer/proof.hpp"
#include "zkinfer/witness.hpp"

namespace zkinfer {

// Exit codes shared by every subcommand. No failure path exits 0.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitSchema = 2,
  kExitUnsupportedOp = 3,
  kExitOverflow = 4,
  kExitShape = 5,
  kExitArtifactMismatch = 6,
  kExitProverRefusal = 7,
  kExitVerifyReject = 8,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::Schema: return kExitSchema;
    case ErrorKind::Config: return kExitSchema;
    case ErrorKind::UnsupportedOp: return kExitUnsupportedOp;
    case ErrorKind::Overflow: return kExitOverflow;
    case ErrorKind::ShapeMismatch: return kExitShape;
    case ErrorKind::Range: return kExitShape;
    case ErrorKind::ArtifactMismatch: return kExitArtifactMismatch;
    case ErrorKind::ConstraintViolation: return kExitProverRefusal;
  }
  return kExitSchema;
}

struct PipelineConfig {
  u64 prime = Field::kMersenne61;
  std::string field_name = "m61";
  QuantConfig quant;
  CostConfig cost;
  CompileOptions options;

  Field field() const { return Field(prime, field_name); }
};

// --config file: every key optional, flat JSON mirroring PipelineConfig.
inline PipelineConfig load_pipeline_config(const std::string& path) {
  nlohmann::json root = nlohmann::json::parse(read_file_text(path), nullptr, false);
  if (root.is_discarded() || !root.is_object())
    fail(ErrorKind::Schema, "config file '" + path + "' is not valid JSON");
  PipelineConfig cfg;
  try {
    if (root.contains("field")) {
      const auto& f = root["field"];
      if (f.contains("p")) cfg.prime = f["p"].get<u64>();
      if (f.contains("name")) cfg.field_name = f["name"].get<std::string>();
    }
    if (root.contains("quant")) {
      const auto& q = root["quant"];
      if (q.contains("s")) cfg.quant.s = q["s"].get<std::uint32_t>();
      if (q.contains("nu")) cfg.quant.nu = q["nu"].get<std::uint32_t>();
      if (q.contains("kappa")) cfg.quant.kappa = q["kappa"].get<std::uint32_t>();
    }
    if (root.contains("cost")) {
      const auto& c = root["cost"];
      if (c.contains("input")) cfg.cost.c_input = c["input"].get<u64>();
      if (c.contains("var")) cfg.cost.c_var = c["var"].get<u64>();
      if (c.contains("mul")) cfg.cost.c_mul = c["mul"].get<u64>();
      if (c.contains("add")) cfg.cost.c_add = c["add"].get<u64>();
      if (c.contains("const")) cfg.cost.c_const = c["const"].get<u64>();
    }
    if (root.contains("options")) {
      const auto& o = root["options"];
      if (o.contains("fuse_relu")) cfg.options.fuse_relu = o["fuse_relu"].get<bool>();
      if (o.contains("rescale_per_product"))
        cfg.options.rescale_per_product = o["rescale_per_product"].get<bool>();
      if (o.contains("input_abs_bound"))
        cfg.options.input_abs_bound = o["input_abs_bound"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, "config file '" + path + "': " + e.what());
  }
  return cfg;
}

struct CommandOutput {
  bool json = false;
  std::ostream* stream = &std::cout;
};

namespace detail {

class PhaseTimer {
public:
  PhaseTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

inline nlohmann::json counters_json(const CircuitCounters& c, u64 cost) {
  return {{"inputs", c.n_inputs},   {"gates", c.n_gates},   {"mul", c.n_mul},
          {"add", c.n_add},         {"const", c.n_cst},     {"constraints", c.n_constraints},
          {"hints", c.n_hints},     {"wires", c.n_wires},   {"total_cost", cost}};
}

inline void print_counters(std::ostream& os, const CircuitCounters& c, u64 cost) {
  os << "inputs:      " << c.n_inputs << "\n"
     << "gates:       " << c.n_gates << " (mul " << c.n_mul << ", add " << c.n_add << ", const "
     << c.n_cst << ")\n"
     << "hints:       " << c.n_hints << "\n"
     << "constraints: " << c.n_constraints << "\n"
     << "wires:       " << c.n_wires << "\n"
     << "total cost:  " << cost << "\n";
}

inline int report_error(const Error& e, const CommandOutput& out, const char* command) {
  int code = exit_code_for(e.kind());
  if (out.json) {
    nlohmann::json j{{"command", command}, {"status", "error"}, {"exit_code", code},
                     {"message", e.what()}};
    *out.stream << j.dump() << "\n";
  } else {
    *out.stream << "error: " << e.what() << "\n";
  }
  return code;
}

}  // namespace detail

// compile: model JSON -> circuit file + quantized-model sidecar. Prints the
// counter block and total cost.
inline int cmd_compile(const std::string& model_path, const std::string& circuit_path,
                       const PipelineConfig& cfg, const CommandOutput& out = {}) {
  try {
    detail::PhaseTimer timer;
    ModelGraph graph = parse_model(read_file_text(model_path));
    CompileResult result = compile_model(graph, cfg.quant, cfg.field(), cfg.cost, cfg.options);

    std::vector<std::uint8_t> bytes = serialize_circuit(result.cs);
    write_file_bytes(circuit_path, bytes);
    Digest32 digest = Sha256::hash(bytes);

    Sidecar sc;
    sc.circuit_digest_hex = digest_hex(digest);
    sc.prime = result.cs.field.modulus();
    sc.qmodel = std::move(result.qmodel);
    write_sidecar(sidecar_path_for(circuit_path), sc);

    CircuitCounters counters = result.cs.counters();
    u64 cost = result.cs.total_cost();
    if (out.json) {
      nlohmann::json j{{"command", "compile"},
                       {"status", "ok"},
                       {"circuit", circuit_path},
                       {"sidecar", sidecar_path_for(circuit_path)},
                       {"circuit_digest", digest_hex(digest)},
                       {"circuit_bytes", bytes.size()},
                       {"counters", detail::counters_json(counters, cost)},
                       {"seconds", timer.seconds()}};
      *out.stream << j.dump() << "\n";
    } else {
      detail::print_counters(*out.stream, counters, cost);
      *out.stream << "wrote " << circuit_path << " (" << bytes.size() << " bytes), digest "
                  << digest_hex(digest) << "\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    return detail::report_error(e, out, "compile");
  }
}

// witness: circuit + sidecar + raw input JSON -> witness file + output JSON.
// Inputs are quantized here with the circuit's own QuantConfig.
inline int cmd_witness(const std::string& circuit_path, const std::string& input_path,
                       const std::string& output_path, const std::string& witness_path,
                       const CommandOutput& out = {}) {
  try {
    detail::PhaseTimer timer;
    LoadedCircuit loaded = read_circuit_file(circuit_path);
    Sidecar sc = read_sidecar(sidecar_path_for(circuit_path));
    if (sc.circuit_digest_hex != digest_hex(loaded.digest))
      fail(ErrorKind::ArtifactMismatch,
           "sidecar was produced for a different circuit (stale digest); recompile");

    InputData in = read_input_json(input_path);
    if (in.shape != sc.qmodel.input.shape)
      fail(ErrorKind::ShapeMismatch, "input shape " + shape_to_string(in.shape) +
                                         " does not match model input " +
                                         shape_to_string(sc.qmodel.input.shape));
    if (static_cast<std::int64_t>(in.values.size()) != shape_num_elements(in.shape))
      fail(ErrorKind::ShapeMismatch, "input value count does not match its shape");

    FloatTensor floats{in.shape, in.values};
    QuantizedTensor quantized = quantize(floats, loaded.cs.quant);
    Witness w = generate_witness(loaded.cs, quantized);

    write_witness_file(witness_path, loaded.digest, w);
    OutputData od;
    od.shape = sc.qmodel.output.shape;
    od.scale_exponent = loaded.cs.quant.s;
    for (u64 v : w.public_outputs()) od.values.push_back(loaded.cs.field.decode_signed({v}));
    write_output_json(output_path, od);

    if (out.json) {
      nlohmann::json j{{"command", "witness"},    {"status", "ok"},
                       {"witness", witness_path}, {"output", output_path},
                       {"wires", w.values.size()}, {"seconds", timer.seconds()}};
      *out.stream << j.dump() << "\n";
    } else {
      *out.stream << "wrote " << witness_path << " (" << w.values.size() << " wires) and "
                  << output_path << "\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    return detail::report_error(e, out, "witness");
  }
}

// prove: circuit + witness -> proof artifact. Refuses violated witnesses.
inline int cmd_prove(const std::string& circuit_path, const std::string& witness_path,
                     const std::string& proof_path, const CommandOutput& out = {}) {
  try {
    detail::PhaseTimer timer;
    LoadedCircuit loaded = read_circuit_file(circuit_path);
    WitnessFile wf = read_witness_file(witness_path);
    if (wf.circuit_digest != loaded.digest)
      fail(ErrorKind::ArtifactMismatch, "witness was generated for a different circuit");
    if (wf.values.size() != loaded.cs.n_wires)
      fail(ErrorKind::Schema, "witness wire count does not match the circuit");
    for (u64 v : wf.values)
      if (v >= loaded.cs.field.modulus())
        fail(ErrorKind::Schema, "witness contains a non-residue value");

    Witness w;
    w.values = std::move(wf.values);
    w.n_inputs = loaded.cs.n_inputs;
    w.output_wires = loaded.cs.output_wires;
    ProofArtifact pa = prove(loaded.cs, w);
    std::vector<std::uint8_t> bytes = serialize_proof(pa);
    write_file_bytes(proof_path, bytes);

    if (out.json) {
      nlohmann::json j{{"command", "prove"},
                       {"status", "ok"},
                       {"proof", proof_path},
                       {"proof_bytes", bytes.size()},
                       {"circuit_digest", digest_hex(pa.circuit_digest)},
                       {"io_digest", digest_hex(pa.io_digest)},
                       {"witness_digest", digest_hex(pa.witness_digest)},
                       {"openings", pa.openings.size()},
                       {"seconds", timer.seconds()}};
      *out.stream << j.dump() << "\n";
    } else {
      *out.stream << "wrote " << proof_path << " (" << bytes.size() << " bytes, "
                  << pa.openings.size() << " openings)\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    return detail::report_error(e, out, "prove");
  }
}

// verify: recomputes the public IO from the input/output files and checks the
// proof against circuit, IO, and witness. Exit 0 on accept, 8 on reject.
inline int cmd_verify(const std::string& circuit_path, const std::string& input_path,
                      const std::string& output_path, const std::string& witness_path,
                      const std::string& proof_path, const CommandOutput& out = {}) {
  try {
    detail::PhaseTimer timer;
    LoadedCircuit loaded = read_circuit_file(circuit_path);
    WitnessFile wf = read_witness_file(witness_path);
    ProofArtifact pa = deserialize_proof(read_file_bytes(proof_path));
    InputData in = read_input_json(input_path);
    OutputData od = read_output_json(output_path);

    auto finish = [&](bool accepted, const std::string& reason) {
      if (out.json) {
        nlohmann::json j{{"command", "verify"},
                         {"status", accepted ? "accept" : "reject"},
                         {"reason", reason},
                         {"seconds", timer.seconds()}};
        *out.stream << j.dump() << "\n";
      } else if (accepted) {
        *out.stream << "OK: proof verified against circuit, IO, and witness\n";
      } else {
        *out.stream << "REJECT: " << reason << "\n";
      }
      return accepted ? kExitOk : kExitVerifyReject;
    };

    if (wf.circuit_digest != loaded.digest)
      return finish(false, "witness header binds a different circuit");
    if (wf.values.size() != loaded.cs.n_wires)
      fail(ErrorKind::Schema, "witness wire count does not match the circuit");
    for (u64 v : wf.values)
      if (v >= loaded.cs.field.modulus())
        fail(ErrorKind::Schema, "witness contains a non-residue value");

    PublicIo io;
    {
      FloatTensor floats{in.shape, in.values};
      QuantizedTensor quantized = quantize(floats, loaded.cs.quant);
      for (i64 v : quantized.data) io.inputs.push_back(loaded.cs.field.encode_signed(v).value);
      if (od.scale_exponent != loaded.cs.quant.s)
        return finish(false, "output file scale does not match the circuit");
      for (i64 v : od.values) io.outputs.push_back(loaded.cs.field.encode_signed(v).value);
    }

    Witness w;
    w.values = std::move(wf.values);
    w.n_inputs = loaded.cs.n_inputs;
    w.output_wires = loaded.cs.output_wires;
    VerifyResult result = verify(loaded.cs, io, w, pa);
    return finish(result.accepted, result.reason);
  } catch (const Error& e) {
    // Malformed artifacts are format errors (exit 2), distinct from rejects.
    if (e.kind() == ErrorKind::Io) return detail::report_error(e, out, "verify");
    return detail::report_error(Error(ErrorKind::Schema, e.what()), out, "verify");
  }
}

}  // namespace zkinfer
