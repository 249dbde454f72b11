#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "zkinfer/circuit.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/model.hpp"
#include "zkinfer/quant.hpp"

namespace zkinfer {

// Full assignment of field residues to every circuit wire, hints included.
struct Witness {
  std::vector<u64> values;
  std::uint32_t n_inputs = 0;
  std::vector<WireId> output_wires;

  std::vector<u64> public_inputs() const {
    return {values.begin(), values.begin() + n_inputs};
  }
  std::vector<u64> public_outputs() const {
    std::vector<u64> out;
    out.reserve(output_wires.size());
    for (auto w : output_wires) out.push_back(values[w.index]);
    return out;
  }
};

struct CheckReport {
  std::vector<std::size_t> gate_violations;        // gate indices whose equation fails
  std::vector<std::size_t> constraint_violations;  // failing assert constraint indices

  bool ok() const { return gate_violations.empty() && constraint_violations.empty(); }

  std::string summary() const {
    if (ok()) return "all constraints satisfied";
    std::string s;
    if (!gate_violations.empty())
      s += std::to_string(gate_violations.size()) + " gate equation(s) violated (first: gate " +
           std::to_string(gate_violations.front()) + ")";
    if (!constraint_violations.empty()) {
      if (!s.empty()) s += "; ";
      s += std::to_string(constraint_violations.size()) + " constraint(s) violated (first: constraint " +
           std::to_string(constraint_violations.front()) + ")";
    }
    return s;
  }
};

namespace detail {

inline u64 eval_hint(const Hint& h, u64 x) {
  switch (h.kind) {
    case HintKind::BitAnd: return x & h.imm;
    case HintKind::ShiftRight: return h.imm >= 64 ? 0 : x >> h.imm;
    case HintKind::IntDiv: return x / h.imm;
    case HintKind::IntMod: return x % h.imm;
  }
  return 0;
}

}  // namespace detail

// Evaluates every gate and hint in wire order. No constraint check; callers
// that need the witness of a deliberately unsatisfiable assignment (soundness
// sweeps) use this directly.
inline Witness evaluate_witness(const ConstraintSystem& cs, const std::vector<u64>& input_residues) {
  if (input_residues.size() != cs.n_inputs)
    fail(ErrorKind::ShapeMismatch, "expected " + std::to_string(cs.n_inputs) + " input values, got " +
                                       std::to_string(input_residues.size()));
  for (u64 v : input_residues)
    if (v >= cs.field.modulus()) fail(ErrorKind::Range, "input value is not a field residue");

  // Producer table: 0 = input, 1 = gate, 2 = hint.
  std::vector<std::uint8_t> kind(cs.n_wires, 0);
  std::vector<std::uint32_t> index(cs.n_wires, 0);
  for (std::size_t i = 0; i < cs.gates.size(); ++i) {
    kind[cs.gates[i].out.index] = 1;
    index[cs.gates[i].out.index] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t i = 0; i < cs.hints.size(); ++i) {
    kind[cs.hints[i].out.index] = 2;
    index[cs.hints[i].out.index] = static_cast<std::uint32_t>(i);
  }

  Witness w;
  w.n_inputs = cs.n_inputs;
  w.output_wires = cs.output_wires;
  w.values.resize(cs.n_wires, 0);
  for (std::uint32_t i = 0; i < cs.n_inputs; ++i) w.values[i] = input_residues[i];

  const Field& f = cs.field;
  for (std::uint32_t i = cs.n_inputs; i < cs.n_wires; ++i) {
    if (kind[i] == 1) {
      const Gate& g = cs.gates[index[i]];
      switch (g.kind) {
        case GateKind::Add:
          w.values[i] = f.add({w.values[g.a.index]}, {w.values[g.b.index]}).value;
          break;
        case GateKind::Mul:
          w.values[i] = f.mul({w.values[g.a.index]}, {w.values[g.b.index]}).value;
          break;
        case GateKind::Const:
          w.values[i] = g.const_value;
          break;
      }
    } else {
      const Hint& h = cs.hints[index[i]];
      w.values[i] = detail::eval_hint(h, w.values[h.in.index]);
    }
  }
  return w;
}

// Checks every gate equation and every assert constraint over the field.
// Hint wires are deliberately not recomputed: they are prover advice, bound
// only by the constraints the circuit placed on them.
inline CheckReport check_constraints(const ConstraintSystem& cs, const Witness& w) {
  if (w.values.size() != cs.n_wires)
    fail(ErrorKind::ShapeMismatch, "witness has " + std::to_string(w.values.size()) +
                                       " wires, circuit has " + std::to_string(cs.n_wires));
  CheckReport report;
  const Field& f = cs.field;
  for (std::size_t i = 0; i < cs.gates.size(); ++i) {
    const Gate& g = cs.gates[i];
    u64 expect = 0;
    switch (g.kind) {
      case GateKind::Add: expect = f.add({w.values[g.a.index]}, {w.values[g.b.index]}).value; break;
      case GateKind::Mul: expect = f.mul({w.values[g.a.index]}, {w.values[g.b.index]}).value; break;
      case GateKind::Const: expect = g.const_value; break;
    }
    if (w.values[g.out.index] != expect) report.gate_violations.push_back(i);
  }
  for (std::size_t i = 0; i < cs.constraints.size(); ++i) {
    const Constraint& c = cs.constraints[i];
    u64 va = w.values[c.a.index];
    bool ok = true;
    switch (c.kind) {
      case ConstraintKind::AssertZero: ok = va == 0; break;
      case ConstraintKind::AssertEqual: ok = va == w.values[c.b.index]; break;
      case ConstraintKind::AssertBool: ok = va == 0 || va == 1; break;
    }
    if (!ok) report.constraint_violations.push_back(i);
  }
  return report;
}

// Quantized input -> full witness. Validates the input against the circuit's
// public-input spec and the audited window, then self-checks: an intermediate
// escaping its window shows up as a violated constraint and aborts rather
// than producing a wrong-but-plausible witness.
inline Witness generate_witness(const ConstraintSystem& cs, const QuantizedTensor& input) {
  if (input.num_elements() != static_cast<std::int64_t>(cs.n_inputs))
    fail(ErrorKind::ShapeMismatch, "input has " + std::to_string(input.num_elements()) +
                                       " elements, circuit expects " + std::to_string(cs.n_inputs));
  if (input.scale_exponent != cs.quant.s)
    fail(ErrorKind::ShapeMismatch, "input scale 2^" + std::to_string(input.scale_exponent) +
                                       " does not match circuit scale 2^" + std::to_string(cs.quant.s));
  const i64 budget = cs.quant.kappa_budget();
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    i64 v = input.data[i];
    if (v < -budget - 1 || v > budget)
      fail(ErrorKind::ShapeMismatch,
           "input element " + std::to_string(i) + " exceeds the kappa budget");
    if (cs.audit_input_bound > 0 && (v < -cs.audit_input_bound || v > cs.audit_input_bound))
      fail(ErrorKind::ShapeMismatch,
           "input element " + std::to_string(i) + " (" + std::to_string(v) +
               ") exceeds the audited input bound " + std::to_string(cs.audit_input_bound));
  }

  std::vector<u64> residues;
  residues.reserve(input.data.size());
  for (i64 v : input.data) residues.push_back(cs.field.encode_signed(v).value);
  Witness w = evaluate_witness(cs, residues);

  CheckReport report = check_constraints(cs, w);
  if (!report.ok())
    fail(ErrorKind::Range,
         "honest evaluation left its audited window; this indicates an audit bug: " + report.summary());
  return w;
}

// ---------------------------------------------------------------------------
// Plain floating-point inference, the fidelity reference for the quantized
// pipeline.
// ---------------------------------------------------------------------------

inline FloatTensor run_float_reference(const ModelGraph& graph, const FloatTensor& input) {
  if (shape_num_elements(input.shape) != graph.input.num_elements())
    fail(ErrorKind::ShapeMismatch, "reference input does not match the graph input shape");
  auto shapes = infer_shapes(graph);

  std::map<std::string, FloatTensor> env;
  env[graph.input.name] = FloatTensor{graph.input.shape, input.data};
  for (const auto& [name, t] : graph.initializers) env[name] = t;

  for (auto idx : topological_order(graph)) {
    const ModelNode& node = graph.nodes[idx];
    const Shape& out_shape = shapes.at(node.output).shape;
    FloatTensor out{out_shape, std::vector<double>(static_cast<std::size_t>(shape_num_elements(out_shape)), 0.0)};
    switch (node.op) {
      case OpKind::Gemm: {
        const FloatTensor& a = env.at(node.inputs[0]);
        const FloatTensor& b = env.at(node.inputs[1]);
        const FloatTensor* bias = node.inputs.size() == 3 ? &env.at(node.inputs[2]) : nullptr;
        std::int64_t m = out_shape[0], n = out_shape[1];
        std::int64_t k = node.attrs.trans_a ? a.shape[0] : a.shape[1];
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0;
            for (std::int64_t kk = 0; kk < k; ++kk) {
              double av = node.attrs.trans_a ? a.data[kk * m + i] : a.data[i * k + kk];
              double bv = node.attrs.trans_b ? b.data[j * k + kk] : b.data[kk * n + j];
              acc += av * bv;
            }
            if (bias) acc += bias->data[j];
            out.data[i * n + j] = acc;
          }
        break;
      }
      case OpKind::Conv2D: {
        const FloatTensor& x = env.at(node.inputs[0]);
        const FloatTensor& w = env.at(node.inputs[1]);
        const FloatTensor* bias = node.inputs.size() == 3 ? &env.at(node.inputs[2]) : nullptr;
        std::int64_t cin = x.shape[1], h = x.shape[2], wd = x.shape[3];
        std::int64_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
        std::int64_t ho = out_shape[2], wo = out_shape[3];
        auto [sh, sw] = node.attrs.strides;
        auto [ph, pw] = node.attrs.pads;
        for (std::int64_t nb = 0; nb < out_shape[0]; ++nb)
          for (std::int64_t m = 0; m < cout; ++m)
            for (std::int64_t oy = 0; oy < ho; ++oy)
              for (std::int64_t ox = 0; ox < wo; ++ox) {
                double acc = bias ? bias->data[m] : 0.0;
                for (std::int64_t c = 0; c < cin; ++c)
                  for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                      std::int64_t iy = oy * sh - ph + ky;
                      std::int64_t ix = ox * sw - pw + kx;
                      if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                      acc += x.data[((nb * cin + c) * h + iy) * wd + ix] *
                             w.data[((m * cin + c) * kh + ky) * kw + kx];
                    }
                out.data[((nb * cout + m) * ho + oy) * wo + ox] = acc;
              }
        break;
      }
      case OpKind::MaxPool2D: {
        const FloatTensor& x = env.at(node.inputs[0]);
        std::int64_t ch = x.shape[1], h = x.shape[2], wd = x.shape[3];
        std::int64_t ho = out_shape[2], wo = out_shape[3];
        auto [wh, ww] = node.attrs.window;
        auto [sh, sw] = node.attrs.strides;
        for (std::int64_t nb = 0; nb < out_shape[0]; ++nb)
          for (std::int64_t c = 0; c < ch; ++c)
            for (std::int64_t oy = 0; oy < ho; ++oy)
              for (std::int64_t ox = 0; ox < wo; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                for (std::int64_t ky = 0; ky < wh; ++ky)
                  for (std::int64_t kx = 0; kx < ww; ++kx) {
                    double v = x.data[((nb * ch + c) * h + oy * sh + ky) * wd + ox * sw + kx];
                    best = std::max(best, v);
                  }
                out.data[((nb * ch + c) * ho + oy) * wo + ox] = best;
              }
        break;
      }
      case OpKind::ReLU: {
        const FloatTensor& x = env.at(node.inputs[0]);
        for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::max(0.0, x.data[i]);
        break;
      }
      case OpKind::Reshape: {
        out.data = env.at(node.inputs[0]).data;
        break;
      }
    }
    env[node.output] = std::move(out);
  }
  return env.at(graph.output_name);
}

}  // namespace zkinfer
