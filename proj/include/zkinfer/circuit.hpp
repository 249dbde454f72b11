#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "zkinfer/errors.hpp"
#include "zkinfer/field.hpp"
#include "zkinfer/quant.hpp"
#include "zkinfer/sha256.hpp"

namespace zkinfer {

// Dense wire index. Input wires occupy [0, n_inputs); every other wire is
// the output of exactly one gate or hint, and operands always precede the
// wire they feed (the circuit is feed-forward).
struct WireId {
  std::uint32_t index = 0;

  friend bool operator==(WireId a, WireId b) { return a.index == b.index; }
  friend bool operator!=(WireId a, WireId b) { return a.index != b.index; }
  friend bool operator<(WireId a, WireId b) { return a.index < b.index; }
};

enum class GateKind : std::uint8_t { Add = 0, Mul = 1, Const = 2 };

struct Gate {
  GateKind kind = GateKind::Add;
  WireId a, b;           // operands (unused for Const)
  u64 const_value = 0;   // residue, Const only
  WireId out;
};

// Prover-computed advice. The wire carries whatever the hint computes during
// honest evaluation; nothing enforces it, so every hint wire must be bound
// downstream by booleanity/equality constraints (see the binding audit).
enum class HintKind : std::uint8_t { BitAnd = 0, ShiftRight = 1, IntDiv = 2, IntMod = 3 };

struct Hint {
  HintKind kind = HintKind::BitAnd;
  WireId in;
  u64 imm = 0;
  WireId out;
};

enum class ConstraintKind : std::uint8_t { AssertZero = 0, AssertEqual = 1, AssertBool = 2 };

struct Constraint {
  ConstraintKind kind = ConstraintKind::AssertZero;
  WireId a, b;  // b used by AssertEqual only
};

// Weights for the scalar total-cost metric. Defaults are configurable; they
// make inputs dominate gates and multiplications dominate additions.
struct CostConfig {
  u64 c_input = 1000;
  u64 c_var = 100;
  u64 c_mul = 10;
  u64 c_add = 3;
  u64 c_const = 3;
};

struct CircuitCounters {
  u64 n_inputs = 0;
  u64 n_gates = 0;
  u64 n_mul = 0;
  u64 n_add = 0;
  u64 n_cst = 0;
  u64 n_constraints = 0;
  u64 n_hints = 0;
  u64 n_wires = 0;

  friend bool operator==(const CircuitCounters&, const CircuitCounters&) = default;
};

inline u64 total_cost(const CircuitCounters& c, const CostConfig& w) {
  return c.n_inputs * w.c_input + c.n_gates * w.c_var + c.n_mul * w.c_mul + c.n_add * w.c_add +
         c.n_cst * w.c_const;
}

// Options that change how a graph lowers to constraints. Recorded in the
// circuit header so later pipeline stages can reproduce the semantics.
struct CompileOptions {
  bool fuse_relu = true;             // fold MatMul/Conv + ReLU into one gadget
  bool rescale_per_product = false;  // rescale every scalar product instead of the sum
  double input_abs_bound = 1.0;      // |input floats| assumed by the overflow audit
};

class ConstraintSystem {
public:
  Field field;
  QuantConfig quant;
  CostConfig cost;
  i64 audit_input_bound = 0;  // largest quantized input magnitude the audit covers
  bool rescale_per_product = false;
  bool fused = true;

  std::uint32_t n_inputs = 0;
  std::uint32_t n_wires = 0;
  std::vector<Gate> gates;
  std::vector<Hint> hints;
  std::vector<Constraint> constraints;
  std::vector<WireId> output_wires;

  CircuitCounters counters() const {
    CircuitCounters c;
    c.n_inputs = n_inputs;
    c.n_gates = gates.size();
    for (const auto& g : gates) {
      switch (g.kind) {
        case GateKind::Add: ++c.n_add; break;
        case GateKind::Mul: ++c.n_mul; break;
        case GateKind::Const: ++c.n_cst; break;
      }
    }
    c.n_constraints = constraints.size();
    c.n_hints = hints.size();
    c.n_wires = n_wires;
    return c;
  }

  u64 total_cost_with(const CostConfig& w) const { return zkinfer::total_cost(counters(), w); }
  u64 total_cost() const { return total_cost_with(cost); }
};

inline u64 total_cost(const ConstraintSystem& cs, const CostConfig& w) {
  return cs.total_cost_with(w);
}

// ---------------------------------------------------------------------------
// Canonical binary encoding (the circuit file body). Byte-identical for
// identical inputs; the circuit digest is SHA-256 over these bytes.
// ---------------------------------------------------------------------------

namespace wire_format {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, u64 v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_i64(std::vector<std::uint8_t>& out, i64 v) { put_u64(out, static_cast<u64>(v)); }

class Reader {
public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit Reader(const std::vector<std::uint8_t>& bytes) : Reader(bytes.data(), bytes.size()) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  u64 u64v() {
    need(8);
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= u64(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  i64 i64v() { return static_cast<i64>(u64v()); }
  void bytes(std::uint8_t* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_ + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == size_; }
  std::size_t remaining() const { return size_ - pos_; }

private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) fail(ErrorKind::Schema, "truncated artifact");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace wire_format

inline constexpr char kCircuitMagic[8] = {'Z', 'K', 'C', 'I', 'R', 'C', '0', '1'};
inline constexpr std::uint32_t kCircuitFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_circuit(const ConstraintSystem& cs) {
  using namespace wire_format;
  std::vector<std::uint8_t> out;
  out.reserve(64 + cs.gates.size() * 21 + cs.hints.size() * 17 + cs.constraints.size() * 9);
  out.insert(out.end(), kCircuitMagic, kCircuitMagic + 8);
  put_u32(out, kCircuitFormatVersion);
  put_u64(out, cs.field.modulus());
  put_u32(out, cs.quant.s);
  put_u32(out, cs.quant.nu);
  put_u32(out, cs.quant.kappa);
  put_u64(out, cs.cost.c_input);
  put_u64(out, cs.cost.c_var);
  put_u64(out, cs.cost.c_mul);
  put_u64(out, cs.cost.c_add);
  put_u64(out, cs.cost.c_const);
  put_i64(out, cs.audit_input_bound);
  put_u8(out, cs.rescale_per_product ? 1 : 0);
  put_u8(out, cs.fused ? 1 : 0);
  put_u32(out, cs.n_inputs);
  put_u32(out, cs.n_wires);

  put_u64(out, cs.gates.size());
  for (const auto& g : cs.gates) {
    put_u8(out, static_cast<std::uint8_t>(g.kind));
    put_u32(out, g.a.index);
    put_u32(out, g.b.index);
    put_u64(out, g.const_value);
    put_u32(out, g.out.index);
  }
  put_u64(out, cs.hints.size());
  for (const auto& h : cs.hints) {
    put_u8(out, static_cast<std::uint8_t>(h.kind));
    put_u32(out, h.in.index);
    put_u64(out, h.imm);
    put_u32(out, h.out.index);
  }
  put_u64(out, cs.constraints.size());
  for (const auto& c : cs.constraints) {
    put_u8(out, static_cast<std::uint8_t>(c.kind));
    put_u32(out, c.a.index);
    put_u32(out, c.b.index);
  }
  put_u32(out, static_cast<std::uint32_t>(cs.output_wires.size()));
  for (auto w : cs.output_wires) put_u32(out, w.index);

  CircuitCounters counters = cs.counters();
  put_u64(out, counters.n_gates);
  put_u64(out, counters.n_mul);
  put_u64(out, counters.n_add);
  put_u64(out, counters.n_cst);
  put_u64(out, counters.n_constraints);
  return out;
}

inline ConstraintSystem deserialize_circuit(const std::vector<std::uint8_t>& bytes) {
  using namespace wire_format;
  Reader r(bytes);
  char magic[8];
  r.bytes(reinterpret_cast<std::uint8_t*>(magic), 8);
  if (std::memcmp(magic, kCircuitMagic, 8) != 0)
    fail(ErrorKind::Schema, "not a circuit file (bad magic)");
  if (r.u32() != kCircuitFormatVersion) fail(ErrorKind::Schema, "unsupported circuit format version");

  ConstraintSystem cs;
  u64 p = r.u64v();
  cs.field = Field(p, p == Field::kMersenne61 ? "m61" : "p" + std::to_string(p));
  cs.quant.s = r.u32();
  cs.quant.nu = r.u32();
  cs.quant.kappa = r.u32();
  cs.cost.c_input = r.u64v();
  cs.cost.c_var = r.u64v();
  cs.cost.c_mul = r.u64v();
  cs.cost.c_add = r.u64v();
  cs.cost.c_const = r.u64v();
  cs.audit_input_bound = r.i64v();
  cs.rescale_per_product = r.u8() != 0;
  cs.fused = r.u8() != 0;
  cs.n_inputs = r.u32();
  cs.n_wires = r.u32();

  auto check_wire = [&](WireId w) {
    if (w.index >= cs.n_wires) fail(ErrorKind::Schema, "circuit references wire out of range");
  };

  u64 n_gates = r.u64v();
  cs.gates.reserve(n_gates);
  for (u64 i = 0; i < n_gates; ++i) {
    Gate g;
    std::uint8_t kind = r.u8();
    if (kind > 2) fail(ErrorKind::Schema, "unknown gate kind");
    g.kind = static_cast<GateKind>(kind);
    g.a.index = r.u32();
    g.b.index = r.u32();
    g.const_value = r.u64v();
    g.out.index = r.u32();
    check_wire(g.out);
    if (g.kind != GateKind::Const) {
      check_wire(g.a);
      check_wire(g.b);
      if (g.a.index >= g.out.index || g.b.index >= g.out.index)
        fail(ErrorKind::Schema, "circuit is not feed-forward");
    } else if (g.const_value >= cs.field.modulus()) {
      fail(ErrorKind::Schema, "constant exceeds field modulus");
    }
    cs.gates.push_back(g);
  }
  u64 n_hints = r.u64v();
  cs.hints.reserve(n_hints);
  for (u64 i = 0; i < n_hints; ++i) {
    Hint h;
    std::uint8_t kind = r.u8();
    if (kind > 3) fail(ErrorKind::Schema, "unknown hint kind");
    h.kind = static_cast<HintKind>(kind);
    h.in.index = r.u32();
    h.imm = r.u64v();
    h.out.index = r.u32();
    check_wire(h.in);
    check_wire(h.out);
    if (h.in.index >= h.out.index) fail(ErrorKind::Schema, "circuit is not feed-forward");
    cs.hints.push_back(h);
  }
  u64 n_constraints = r.u64v();
  cs.constraints.reserve(n_constraints);
  for (u64 i = 0; i < n_constraints; ++i) {
    Constraint c;
    std::uint8_t kind = r.u8();
    if (kind > 2) fail(ErrorKind::Schema, "unknown constraint kind");
    c.kind = static_cast<ConstraintKind>(kind);
    c.a.index = r.u32();
    c.b.index = r.u32();
    check_wire(c.a);
    if (c.kind == ConstraintKind::AssertEqual) check_wire(c.b);
    cs.constraints.push_back(c);
  }
  std::uint32_t n_outputs = r.u32();
  cs.output_wires.reserve(n_outputs);
  for (std::uint32_t i = 0; i < n_outputs; ++i) {
    WireId w{r.u32()};
    check_wire(w);
    cs.output_wires.push_back(w);
  }

  CircuitCounters recount = cs.counters();
  if (r.u64v() != recount.n_gates || r.u64v() != recount.n_mul || r.u64v() != recount.n_add ||
      r.u64v() != recount.n_cst || r.u64v() != recount.n_constraints)
    fail(ErrorKind::Schema, "circuit counter block does not match its contents");
  if (!r.at_end()) fail(ErrorKind::Schema, "trailing bytes after circuit");

  // Every non-input wire must be produced exactly once.
  std::vector<std::uint8_t> produced(cs.n_wires, 0);
  for (std::uint32_t i = 0; i < cs.n_inputs && i < cs.n_wires; ++i) produced[i] = 1;
  auto mark = [&](WireId w) {
    if (produced[w.index]) fail(ErrorKind::Schema, "wire produced twice");
    produced[w.index] = 1;
  };
  for (const auto& g : cs.gates) mark(g.out);
  for (const auto& h : cs.hints) mark(h.out);
  for (std::uint32_t i = 0; i < cs.n_wires; ++i)
    if (!produced[i]) fail(ErrorKind::Schema, "wire " + std::to_string(i) + " has no producer");

  return cs;
}

inline Digest32 circuit_digest(const ConstraintSystem& cs) {
  return Sha256::hash(serialize_circuit(cs));
}

}  // namespace zkinfer
