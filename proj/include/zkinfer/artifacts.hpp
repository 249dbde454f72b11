#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zkinfer/circuit.hpp"
#include "zkinfer/compiler.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/quant.hpp"
#include "zkinfer/sha256.hpp"
#include "zkinfer/witness.hpp"

namespace zkinfer {

// All artifacts are relocatable: no absolute paths are ever serialized.

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "read error on '" + path + "'");
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write error on '" + path + "'");
}

inline std::string read_file_text(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

inline void write_file_text(const std::string& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------
// Circuit file: exactly the canonical circuit encoding; the digest other
// artifacts bind to is SHA-256 over the file bytes.
// ---------------------------------------------------------------------------

struct LoadedCircuit {
  ConstraintSystem cs;
  Digest32 digest{};
};

inline void write_circuit_file(const std::string& path, const ConstraintSystem& cs) {
  write_file_bytes(path, serialize_circuit(cs));
}

inline LoadedCircuit read_circuit_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  LoadedCircuit loaded;
  loaded.cs = deserialize_circuit(bytes);
  loaded.digest = Sha256::hash(bytes);
  return loaded;
}

// ---------------------------------------------------------------------------
// Witness file: header (format version, circuit digest, wire count) plus
// packed little-endian residues for every wire, hints included.
// ---------------------------------------------------------------------------

inline constexpr char kWitnessMagic[8] = {'Z', 'K', 'W', 'I', 'T', 'N', '0', '1'};
inline constexpr std::uint32_t kWitnessFormatVersion = 1;

struct WitnessFile {
  Digest32 circuit_digest{};
  std::vector<u64> values;
};

inline std::vector<std::uint8_t> serialize_witness(const Digest32& circuit_digest,
                                                   const std::vector<u64>& values) {
  using namespace wire_format;
  std::vector<std::uint8_t> out;
  out.reserve(48 + values.size() * 8);
  out.insert(out.end(), kWitnessMagic, kWitnessMagic + 8);
  put_u32(out, kWitnessFormatVersion);
  out.insert(out.end(), circuit_digest.begin(), circuit_digest.end());
  put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (u64 v : values) put_u64(out, v);
  return out;
}

inline void write_witness_file(const std::string& path, const Digest32& circuit_digest,
                               const Witness& w) {
  write_file_bytes(path, serialize_witness(circuit_digest, w.values));
}

inline WitnessFile read_witness_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  wire_format::Reader r(bytes);
  char magic[8];
  r.bytes(reinterpret_cast<std::uint8_t*>(magic), 8);
  if (std::memcmp(magic, kWitnessMagic, 8) != 0)
    fail(ErrorKind::Schema, "not a witness file (bad magic)");
  if (r.u32() != kWitnessFormatVersion) fail(ErrorKind::Schema, "unsupported witness format version");
  WitnessFile wf;
  r.bytes(wf.circuit_digest.data(), 32);
  std::uint32_t n = r.u32();
  wf.values.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) wf.values.push_back(r.u64v());
  if (!r.at_end()) fail(ErrorKind::Schema, "trailing bytes after witness");
  return wf;
}

// ---------------------------------------------------------------------------
// Quantized-model sidecar: JSON written at compile time next to the circuit,
// carrying the circuit digest so stage mismatches surface eagerly.
// ---------------------------------------------------------------------------

inline constexpr int kSidecarFormatVersion = 1;

inline std::string sidecar_path_for(const std::string& circuit_path) {
  return circuit_path + ".qmodel.json";
}

struct Sidecar {
  std::string circuit_digest_hex;
  u64 prime = 0;
  QuantizedModel qmodel;
};

inline void write_sidecar(const std::string& path, const Sidecar& sc) {
  nlohmann::json root;
  root["format_version"] = kSidecarFormatVersion;
  root["circuit_digest"] = sc.circuit_digest_hex;
  root["field"] = {{"p", sc.prime}};
  root["quant"] = {{"s", sc.qmodel.quant.s}, {"nu", sc.qmodel.quant.nu}, {"kappa", sc.qmodel.quant.kappa}};
  root["audit_input_bound"] = sc.qmodel.audit_input_bound;
  root["input"] = {{"name", sc.qmodel.input.name}, {"shape", sc.qmodel.input.shape}};
  root["output"] = {{"name", sc.qmodel.output.name}, {"shape", sc.qmodel.output.shape}};
  nlohmann::json inits = nlohmann::json::object();
  for (const auto& [name, t] : sc.qmodel.initializers)
    inits[name] = {{"shape", t.shape}, {"scale_exponent", t.scale_exponent}, {"data", t.data}};
  root["initializers"] = std::move(inits);
  write_file_text(path, root.dump(1));
}

inline Sidecar read_sidecar(const std::string& path) {
  nlohmann::json root = nlohmann::json::parse(read_file_text(path), nullptr, false);
  if (root.is_discarded() || !root.is_object())
    fail(ErrorKind::Schema, "sidecar '" + path + "' is not valid JSON");
  try {
    Sidecar sc;
    if (root.at("format_version").get<int>() != kSidecarFormatVersion)
      fail(ErrorKind::Schema, "unsupported sidecar format version");
    sc.circuit_digest_hex = root.at("circuit_digest").get<std::string>();
    sc.prime = root.at("field").at("p").get<u64>();
    sc.qmodel.quant.s = root.at("quant").at("s").get<std::uint32_t>();
    sc.qmodel.quant.nu = root.at("quant").at("nu").get<std::uint32_t>();
    sc.qmodel.quant.kappa = root.at("quant").at("kappa").get<std::uint32_t>();
    sc.qmodel.audit_input_bound = root.at("audit_input_bound").get<i64>();
    sc.qmodel.input.name = root.at("input").at("name").get<std::string>();
    sc.qmodel.input.shape = root.at("input").at("shape").get<Shape>();
    sc.qmodel.output.name = root.at("output").at("name").get<std::string>();
    sc.qmodel.output.shape = root.at("output").at("shape").get<Shape>();
    for (auto it = root.at("initializers").begin(); it != root.at("initializers").end(); ++it) {
      QuantizedTensor t;
      t.shape = it.value().at("shape").get<Shape>();
      t.scale_exponent = it.value().at("scale_exponent").get<std::uint32_t>();
      t.data = it.value().at("data").get<std::vector<i64>>();
      sc.qmodel.initializers.emplace(it.key(), std::move(t));
    }
    return sc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, "sidecar '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Input file: {"input": flat float array, "shape": [...]}.
// ---------------------------------------------------------------------------

struct InputData {
  std::vector<double> values;
  Shape shape;
};

inline InputData read_input_json(const std::string& path) {
  nlohmann::json root = nlohmann::json::parse(read_file_text(path), nullptr, false);
  if (root.is_discarded() || !root.is_object())
    fail(ErrorKind::Schema, "input file '" + path + "' is not valid JSON");
  if (!root.contains("input") || !root["input"].is_array())
    fail(ErrorKind::Schema, "input file: missing 'input' array");
  if (!root.contains("shape") || !root["shape"].is_array())
    fail(ErrorKind::Schema, "input file: missing 'shape' array");
  InputData in;
  for (const auto& v : root["input"]) {
    if (!v.is_number()) fail(ErrorKind::Schema, "input file: 'input' must contain numbers");
    in.values.push_back(v.get<double>());
  }
  for (const auto& d : root["shape"]) {
    if (!d.is_number_integer()) fail(ErrorKind::Schema, "input file: 'shape' must contain integers");
    in.shape.push_back(d.get<std::int64_t>());
  }
  return in;
}

inline void write_input_json(const std::string& path, const InputData& in) {
  nlohmann::json root;
  root["input"] = in.values;
  root["shape"] = in.shape;
  write_file_text(path, root.dump(1));
}

// ---------------------------------------------------------------------------
// Output file: quantized integers plus a dequantized float view.
// ---------------------------------------------------------------------------

struct OutputData {
  std::vector<i64> values;
  Shape shape;
  std::uint32_t scale_exponent = 0;
};

inline void write_output_json(const std::string& path, const OutputData& out) {
  nlohmann::json root;
  root["output"] = out.values;
  root["shape"] = out.shape;
  root["scale_exponent"] = out.scale_exponent;
  std::vector<double> float_view;
  float_view.reserve(out.values.size());
  const double alpha = static_cast<double>(u64{1} << out.scale_exponent);
  for (i64 v : out.values) float_view.push_back(static_cast<double>(v) / alpha);
  root["float_view"] = float_view;
  write_file_text(path, root.dump(1));
}

inline OutputData read_output_json(const std::string& path) {
  nlohmann::json root = nlohmann::json::parse(read_file_text(path), nullptr, false);
  if (root.is_discarded() || !root.is_object())
    fail(ErrorKind::Schema, "output file '" + path + "' is not valid JSON");
  try {
    OutputData out;
    out.values = root.at("output").get<std::vector<i64>>();
    out.shape = root.at("shape").get<Shape>();
    out.scale_exponent = root.at("scale_exponent").get<std::uint32_t>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, "output file '" + path + "': " + e.what());
  }
}

}  // namespace zkinfer
