#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "zkinfer/circuit.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/field.hpp"
#include "zkinfer/quant.hpp"

namespace zkinfer {

// Emits gates, hints, and constraints into a ConstraintSystem. Wire numbering
// is purely sequential, so identical call sequences give identical circuits.
//
// Hints are cheap but carry no soundness: a bit extracted with BitAnd /
// ShiftRight is only trusted once booleanity and reconstruction constraints
// bind it to the unique binary expansion of its source.
class CircuitBuilder {
public:
  CircuitBuilder(Field field, QuantConfig quant, CostConfig cost, std::uint32_t n_inputs) {
    cs_.field = std::move(field);
    cs_.quant = quant;
    cs_.cost = cost;
    cs_.n_inputs = n_inputs;
    next_wire_ = n_inputs;
  }

  const ConstraintSystem& system() const { return cs_; }
  const Field& field() const { return cs_.field; }
  std::uint32_t num_wires() const { return next_wire_; }

  WireId input(std::uint32_t i) const {
    if (i >= cs_.n_inputs) fail(ErrorKind::Config, "input index out of range");
    return WireId{i};
  }

  // -- gates ---------------------------------------------------------------

  WireId constant(u64 residue) {
    Gate g;
    g.kind = GateKind::Const;
    g.const_value = residue % cs_.field.modulus();
    g.out = new_wire();
    cs_.gates.push_back(g);
    return g.out;
  }

  WireId constant_signed(i64 value) { return constant(cs_.field.encode_signed(value).value); }

  WireId add(WireId a, WireId b) { return binary(GateKind::Add, a, b); }
  WireId mul(WireId a, WireId b) { return binary(GateKind::Mul, a, b); }

  // a - b as a + (-1)*b, staying within the add/mul/const gate set.
  WireId sub(WireId a, WireId b) {
    WireId neg_one = constant(cs_.field.modulus() - 1);
    return add(a, mul(neg_one, b));
  }

  // -- hints ---------------------------------------------------------------

  WireId bit_and(WireId x, u64 imm) { return hint(HintKind::BitAnd, x, imm); }
  WireId shift_right(WireId x, u64 imm) { return hint(HintKind::ShiftRight, x, imm); }
  WireId int_div(WireId x, u64 imm) {
    if (imm == 0) fail(ErrorKind::Config, "integer division hint by zero");
    return hint(HintKind::IntDiv, x, imm);
  }
  WireId int_mod(WireId x, u64 imm) {
    if (imm == 0) fail(ErrorKind::Config, "integer modulo hint by zero");
    return hint(HintKind::IntMod, x, imm);
  }

  // -- constraints ---------------------------------------------------------

  void assert_zero(WireId w) { cs_.constraints.push_back({ConstraintKind::AssertZero, w, WireId{}}); }
  void assert_equal(WireId a, WireId b) {
    cs_.constraints.push_back({ConstraintKind::AssertEqual, a, b});
  }
  void assert_bool(WireId w) { cs_.constraints.push_back({ConstraintKind::AssertBool, w, WireId{}}); }

  // -- gadgets ---------------------------------------------------------------

  // Little-endian bits of x's least nonnegative residue, as unconstrained
  // hint wires. Not sound on its own; callers must bind the bits.
  std::vector<WireId> unconstrained_to_bits(WireId x, std::uint32_t n_bits) {
    check_bit_width(n_bits);
    std::vector<WireId> bits;
    bits.reserve(n_bits);
    WireId cur = x;
    for (std::uint32_t i = 0; i < n_bits; ++i) {
      bits.push_back(bit_and(cur, 1));
      if (i + 1 < n_bits) cur = shift_right(cur, 1);
    }
    return bits;
  }

  // Booleanity d_i(d_i - 1) = 0 on every bit plus the weighted sum
  // d_0 + 2 d_1 + ... Binding happens when the caller asserts the returned
  // accumulator equal to the decomposed wire.
  WireId assert_bits_and_reconstruct(const std::vector<WireId>& bits) {
    if (bits.empty()) fail(ErrorKind::Config, "empty bit vector");
    WireId acc = constant(0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      assert_bool(bits[i]);
      WireId weight = constant(u64{1} << i);
      acc = add(acc, mul(weight, bits[i]));
    }
    return acc;
  }

  // Satisfiable iff the residue of x is in [0, 2^kappa - 1]. Returns the bit
  // wires so callers can reuse the decomposition (the msb trick).
  std::vector<WireId> range_check_unsigned(WireId x, std::uint32_t kappa) {
    check_bit_width(kappa);
    std::vector<WireId> bits = unconstrained_to_bits(x, kappa);
    WireId recon = assert_bits_and_reconstruct(bits);
    assert_equal(x, recon);
    return bits;
  }

  // Satisfiable iff x decodes to [-2^(kappa-1), 2^(kappa-1) - 1]: shift by
  // 2^(kappa-1) into [0, 2^kappa - 1] and range check there.
  void range_check_signed(WireId x, std::uint32_t kappa) {
    check_bit_width(kappa);
    WireId shift = constant(u64{1} << (kappa - 1));
    WireId x_sharp = add(x, shift);
    range_check_unsigned(x_sharp, kappa);
  }

  // Satisfiable iff x = max(a, b): both differences are proven nonnegative
  // via unsigned range checks and the selection product (x-a)(x-b) vanishes.
  void assert_max(WireId x, WireId a, WireId b, std::uint32_t kappa) {
    WireId da = sub(x, a);
    range_check_unsigned(da, kappa);
    WireId db = sub(x, b);
    range_check_unsigned(db, kappa);
    assert_zero(mul(da, db));
  }

  // Computes max(a, b) with a selector bit hint, then binds the result with
  // assert_max. The selector only needs booleanity: a wrong selector drives
  // one of the differences negative, which the range checks reject.
  WireId max_of(WireId a, WireId b, std::uint32_t kappa) {
    check_bit_width(kappa);
    WireId d = sub(a, b);
    WireId shifted = add(d, constant(u64{1} << (kappa - 1)));
    WireId sel = shift_right(shifted, kappa - 1);
    assert_bool(sel);
    WireId x = add(b, mul(sel, d));
    assert_max(x, a, b, kappa);
    return x;
  }

  // y = max(c, 0): the max gadget with b = 0. The zero branch collapses, so
  // the second range check lands on y itself.
  WireId relu(WireId c, std::uint32_t kappa) {
    check_bit_width(kappa);
    WireId shifted = add(c, constant(u64{1} << (kappa - 1)));
    WireId sel = shift_right(shifted, kappa - 1);
    assert_bool(sel);
    WireId y = mul(sel, c);
    WireId yc = sub(y, c);
    range_check_unsigned(yc, kappa);
    range_check_unsigned(y, kappa);
    assert_zero(mul(yc, y));
    return y;
  }

  struct RequantWires {
    WireId q;    // quotient at scale alpha, q = q_sharp - 2^(nu-1)
    WireId msb;  // top bit of q_sharp's decomposition; 1 iff q >= 0
  };

  // Verified rescaling of a scale-alpha^2 value back to scale alpha:
  //   ab + alpha*2^(nu-1) = alpha*q_sharp + r
  // with q_sharp and r supplied as integer div/mod hints and bound by the
  // equality above plus unsigned range checks on both.
  RequantWires requantize(WireId ab) {
    const QuantConfig& q = cs_.quant;
    q.validate(cs_.field);
    const u64 alpha = q.alpha();
    const u64 translation = alpha << (q.nu - 1);

    WireId t = add(ab, constant(translation));
    WireId q_sharp = int_div(t, alpha);
    WireId r = int_mod(t, alpha);
    assert_equal(t, add(mul(constant(alpha), q_sharp), r));
    range_check_unsigned(r, q.s);
    std::vector<WireId> q_bits = range_check_unsigned(q_sharp, q.nu);
    WireId quotient = add(q_sharp, constant_signed(-(i64{1} << (q.nu - 1))));
    return {quotient, q_bits[q.nu - 1]};
  }

  // Requantization followed by ReLU, reusing the msb of q_sharp's existing
  // decomposition as the sign: y = msb * q. One extra Mul, no second
  // decomposition.
  WireId fused_requant_relu(WireId ab) {
    RequantWires rq = requantize(ab);
    return mul(rq.msb, rq.q);
  }

  ConstraintSystem finish(std::vector<WireId> outputs) {
    for (auto w : outputs)
      if (w.index >= next_wire_) fail(ErrorKind::Config, "output wire does not exist");
    cs_.output_wires = std::move(outputs);
    cs_.n_wires = next_wire_;
    return std::move(cs_);
  }

private:
  WireId new_wire() { return WireId{next_wire_++}; }

  WireId binary(GateKind kind, WireId a, WireId b) {
    if (a.index >= next_wire_ || b.index >= next_wire_)
      fail(ErrorKind::Config, "gate operand does not exist");
    Gate g;
    g.kind = kind;
    g.a = a;
    g.b = b;
    g.out = new_wire();
    cs_.gates.push_back(g);
    return g.out;
  }

  WireId hint(HintKind kind, WireId in, u64 imm) {
    if (in.index >= next_wire_) fail(ErrorKind::Config, "hint operand does not exist");
    Hint h;
    h.kind = kind;
    h.in = in;
    h.imm = imm;
    h.out = new_wire();
    cs_.hints.push_back(h);
    return h.out;
  }

  void check_bit_width(std::uint32_t n_bits) const {
    if (n_bits == 0) fail(ErrorKind::Config, "bit width must be positive");
    if (n_bits >= 63 || (u128{1} << n_bits) > cs_.field.modulus())
      fail(ErrorKind::Config, "2^" + std::to_string(n_bits) + " exceeds the field modulus");
  }

  ConstraintSystem cs_;
  std::uint32_t next_wire_ = 0;
};

// Static audit: every hint wire must reach, through gate or hint uses, a wire
// referenced by some constraint. A hint that fails this is a free degree of
// freedom in the witness.
inline std::vector<WireId> unbound_hint_wires(const ConstraintSystem& cs) {
  std::vector<std::uint8_t> leads(cs.n_wires, 0);
  for (const auto& c : cs.constraints) {
    leads[c.a.index] = 1;
    if (c.kind == ConstraintKind::AssertEqual) leads[c.b.index] = 1;
  }
  // Gate outputs are rechecked against their operands, so feeding any gate
  // whose output is (transitively) relevant counts as bound. Walk edges in
  // reverse wire order; all edges point forward.
  struct Edge {
    std::uint32_t from;
    std::uint32_t to;
  };
  std::vector<Edge> edges;
  edges.reserve(cs.gates.size() * 2 + cs.hints.size());
  for (const auto& g : cs.gates) {
    if (g.kind == GateKind::Const) continue;
    edges.push_back({g.a.index, g.out.index});
    edges.push_back({g.b.index, g.out.index});
  }
  for (const auto& h : cs.hints) edges.push_back({h.in.index, h.out.index});
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.to > y.to; });
  for (const auto& e : edges)
    if (leads[e.to]) leads[e.from] = 1;

  std::vector<WireId> unbound;
  for (const auto& h : cs.hints)
    if (!leads[h.out.index]) unbound.push_back(h.out);
  return unbound;
}

}  // namespace zkinfer
