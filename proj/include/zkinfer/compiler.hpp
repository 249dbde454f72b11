#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "zkinfer/circuit.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/field.hpp"
#include "zkinfer/gadgets.hpp"
#include "zkinfer/model.hpp"
#include "zkinfer/quant.hpp"

namespace zkinfer {

// Compile-time cache of the quantized graph, written next to the circuit so
// the witness stage reuses the exact integers the circuit was built from.
struct QuantizedModel {
  QuantConfig quant;
  TensorSpec input;
  TensorSpec output;
  i64 audit_input_bound = 0;
  std::map<std::string, QuantizedTensor> initializers;
};

struct CompileResult {
  ConstraintSystem cs;
  QuantizedModel qmodel;
};

namespace lowering {

struct TensorWires {
  std::vector<WireId> wires;
  Shape shape;
  u128 honest_bound = 0;  // max magnitude reachable by honest runs within the audited input bound
  u128 cert_bound = 0;    // max magnitude any constraint-satisfying witness can exhibit
};

// One weighted term of a sum-product reduction.
struct Term {
  WireId wire;
  i64 weight;
};

class GraphLowering {
public:
  GraphLowering(const ModelGraph& graph, const QuantConfig& qcfg, const Field& field,
                const CostConfig& ccfg, const CompileOptions& options)
      : graph_(graph),
        options_(options),
        quant_(qcfg),
        builder_(field, qcfg, ccfg, static_cast<std::uint32_t>(graph.input.num_elements())) {
    qcfg.validate(field);
    shapes_ = infer_shapes(graph);
  }

  CompileResult run() {
    quantize_initializers();
    plan_fusion();

    // Public inputs come first and are range checked so the audit's budget
    // assumptions hold for whatever input the witness claims.
    audit_bound_ = static_cast<i64>(std::floor(static_cast<double>(quant_.alpha()) *
                                               options_.input_abs_bound));
    if (options_.input_abs_bound <= 0 || audit_bound_ < 1)
      fail(ErrorKind::Config, "audit input bound must be positive");
    if (audit_bound_ > quant_.kappa_budget())
      fail(ErrorKind::Overflow, "audited input bound exceeds the kappa budget; raise kappa or lower "
                                "the assumed input range");

    TensorWires in;
    in.shape = graph_.input.shape;
    in.honest_bound = static_cast<u128>(audit_bound_);
    in.cert_bound = u128{1} << (quant_.kappa - 1);
    const std::uint32_t n_in = static_cast<std::uint32_t>(graph_.input.num_elements());
    for (std::uint32_t i = 0; i < n_in; ++i) {
      in.wires.push_back(builder_.input(i));
      builder_.range_check_signed(in.wires.back(), quant_.kappa);
    }
    env_[graph_.input.name] = std::move(in);

    for (auto idx : topological_order(graph_)) {
      if (fused_relu_nodes_.count(idx)) continue;  // consumed by the fusion pass
      lower_node(idx);
    }

    const TensorWires& out = env_.at(graph_.output_name);
    CompileResult result{builder_.finish(out.wires), std::move(qmodel_)};
    result.cs.audit_input_bound = audit_bound_;
    result.cs.rescale_per_product = options_.rescale_per_product;
    result.cs.fused = options_.fuse_relu;
    result.qmodel.audit_input_bound = audit_bound_;
    result.qmodel.input = graph_.input;
    result.qmodel.output = TensorSpec{graph_.output_name, out.shape};

    auto unbound = unbound_hint_wires(result.cs);
    if (!unbound.empty())
      fail(ErrorKind::Config, "internal: " + std::to_string(unbound.size()) +
                                  " hint wire(s) escaped the binding audit");
    return result;
  }

private:
  // -- setup ---------------------------------------------------------------

  void quantize_initializers() {
    qmodel_.quant = quant_;
    for (const auto& [name, tensor] : graph_.initializers) {
      try {
        qmodel_.initializers.emplace(name, quantize(tensor, quant_));
      } catch (const Error& e) {
        fail(e.kind(), "initializer '" + name + "': " + e.what());
      }
    }
  }

  // Peephole over the topological order: a Gemm/Conv2D whose output feeds
  // exactly one node, a ReLU, and is not the graph output, lowers as a single
  // fused gadget.
  void plan_fusion() {
    if (!options_.fuse_relu || options_.rescale_per_product) return;
    std::map<std::string, int> consumer_count;
    for (const auto& node : graph_.nodes)
      for (const auto& in : node.inputs) ++consumer_count[in];
    std::map<std::string, std::size_t> relu_by_input;
    for (std::size_t i = 0; i < graph_.nodes.size(); ++i)
      if (graph_.nodes[i].op == OpKind::ReLU) relu_by_input[graph_.nodes[i].inputs[0]] = i;

    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) {
      const ModelNode& node = graph_.nodes[i];
      if (node.op != OpKind::Gemm && node.op != OpKind::Conv2D) continue;
      if (node.output == graph_.output_name) continue;
      if (consumer_count[node.output] != 1) continue;
      auto it = relu_by_input.find(node.output);
      if (it == relu_by_input.end()) continue;
      fused_relu_nodes_.insert(it->second);
      fused_producers_[i] = it->second;
    }
  }

  // -- audit helpers ---------------------------------------------------------

  u128 modulus_half() const { return (builder_.field().modulus() - 1) >> 1; }

  [[noreturn]] void overflow(const ModelNode& node, u128 needed) const {
    std::uint32_t nu_req = quant_.nu;
    while (nu_req < 62 && (static_cast<u128>(quant_.alpha()) << (nu_req - 1)) <= needed) ++nu_req;
    fail(ErrorKind::Overflow, "node '" + node.name + "' (" + op_kind_name(node.op) +
                                  "): accumulated magnitude exceeds the requantization window; "
                                  "nu >= " + std::to_string(nu_req + 1) + " would be required");
  }

  void audit_reduction(const ModelNode& node, u128 weight_abs_sum, u128 weight_abs_max,
                       u128 bias_abs_max, std::size_t max_terms, const TensorWires& in,
                       bool fused) const {
    const u128 alpha = quant_.alpha();
    const u128 window = (alpha << (quant_.nu - 1)) - 1;
    const u128 translation = alpha << (quant_.nu - 1);
    const u128 rhs_max = alpha << quant_.nu;
    const u128 p = builder_.field().modulus();

    if (!options_.rescale_per_product) {
      u128 honest = weight_abs_sum * in.honest_bound + (fused ? alpha * bias_abs_max : 0);
      if (honest > window) overflow(node, honest);
      u128 cert = weight_abs_sum * in.cert_bound + (fused ? alpha * bias_abs_max : 0);
      if (cert > modulus_half() || cert + translation + rhs_max >= p)
        fail(ErrorKind::Overflow,
             "node '" + node.name + "': adversarial accumulation could wrap modulo p");
    } else {
      u128 honest = weight_abs_max * in.honest_bound;
      if (honest > window) overflow(node, honest);
      u128 cert_sum = static_cast<u128>(max_terms) * (u128{1} << (quant_.nu - 1)) + bias_abs_max;
      if (weight_abs_max * in.cert_bound + translation + rhs_max >= p || cert_sum > modulus_half())
        fail(ErrorKind::Overflow,
             "node '" + node.name + "': adversarial per-product rescaling could wrap modulo p");
    }
  }

  // -- reductions ------------------------------------------------------------

  WireId node_constant(i64 value) {
    auto it = const_cache_.find(value);
    if (it != const_cache_.end()) return it->second;
    WireId w = builder_.constant_signed(value);
    const_cache_.emplace(value, w);
    return w;
  }

  // Sum-product over `terms` followed by verified rescaling. In the fused
  // form the alpha-scaled bias joins the accumulator before requantization
  // (floor((acc + alpha*b)/alpha) = floor(acc/alpha) + b, so the unfused
  // post-requantization bias add computes the same function) and the msb of
  // the quotient decomposition applies the ReLU.
  WireId lower_reduction(const std::vector<Term>& terms, bool has_bias, i64 bias, bool fuse_relu) {
    if (options_.rescale_per_product) {
      WireId acc{};
      bool first = true;
      for (const auto& t : terms) {
        WireId prod = builder_.mul(t.wire, node_constant(t.weight));
        WireId q = builder_.requantize(prod).q;
        acc = first ? q : builder_.add(acc, q);
        first = false;
      }
      return has_bias ? builder_.add(acc, node_constant(bias)) : acc;
    }

    WireId acc{};
    bool first = true;
    for (const auto& t : terms) {
      WireId prod = builder_.mul(t.wire, node_constant(t.weight));
      acc = first ? prod : builder_.add(acc, prod);
      first = false;
    }
    if (fuse_relu && has_bias)
      acc = builder_.add(acc, node_constant(bias * static_cast<i64>(quant_.alpha())));
    CircuitBuilder::RequantWires rq = builder_.requantize(acc);
    if (fuse_relu) return builder_.mul(rq.msb, rq.q);
    return has_bias ? builder_.add(rq.q, node_constant(bias)) : rq.q;
  }

  std::pair<u128, u128> reduction_output_bounds(u128 weight_abs_sum, u128 weight_abs_max,
                                                u128 bias_abs_max, std::size_t max_terms,
                                                const TensorWires& in, bool fused) const {
    const u128 alpha = quant_.alpha();
    u128 honest, cert;
    if (!options_.rescale_per_product) {
      honest = weight_abs_sum * in.honest_bound / alpha + 1 + (fused ? 0 : bias_abs_max);
      cert = (u128{1} << (quant_.nu - 1)) + (fused ? 0 : bias_abs_max);
    } else {
      honest = weight_abs_sum * in.honest_bound / alpha + max_terms + bias_abs_max;
      cert = static_cast<u128>(max_terms) * (u128{1} << (quant_.nu - 1)) + bias_abs_max;
    }
    return {honest, cert};
  }

  // -- per-node lowering -----------------------------------------------------

  void lower_node(std::size_t idx) {
    const ModelNode& node = graph_.nodes[idx];
    const_cache_.clear();
    switch (node.op) {
      case OpKind::Gemm: lower_gemm(idx); break;
      case OpKind::Conv2D: lower_conv2d(idx); break;
      case OpKind::ReLU: lower_relu(node); break;
      case OpKind::MaxPool2D: lower_maxpool(node); break;
      case OpKind::Reshape: {
        TensorWires out = env_.at(node.inputs[0]);
        out.shape = shapes_.at(node.output).shape;
        env_[node.output] = std::move(out);
        break;
      }
    }
  }

  void lower_gemm(std::size_t idx) {
    const ModelNode& node = graph_.nodes[idx];
    const TensorWires& a = env_.at(node.inputs[0]);
    const QuantizedTensor& b = qmodel_.initializers.at(node.inputs[1]);
    const QuantizedTensor* bias =
        node.inputs.size() == 3 ? &qmodel_.initializers.at(node.inputs[2]) : nullptr;
    const Shape& out_shape = shapes_.at(node.output).shape;
    const std::int64_t m = out_shape[0], n = out_shape[1];
    const std::int64_t k = node.attrs.trans_a ? a.shape[0] : a.shape[1];
    const bool fuse = fused_producers_.count(idx) > 0;

    u128 w_sum_max = 0, w_abs_max = 0, b_abs_max = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      u128 col = 0;
      for (std::int64_t kk = 0; kk < k; ++kk) {
        i64 w = node.attrs.trans_b ? b.data[j * k + kk] : b.data[kk * n + j];
        u128 mag = w < 0 ? static_cast<u128>(-(w + 1)) + 1 : static_cast<u128>(w);
        col += mag;
        w_abs_max = std::max(w_abs_max, mag);
      }
      w_sum_max = std::max(w_sum_max, col);
    }
    if (bias)
      for (i64 v : bias->data)
        b_abs_max = std::max(b_abs_max, v < 0 ? static_cast<u128>(-v) : static_cast<u128>(v));
    audit_reduction(node, w_sum_max, w_abs_max, b_abs_max, static_cast<std::size_t>(k), a, fuse);

    TensorWires out;
    out.shape = out_shape;
    std::tie(out.honest_bound, out.cert_bound) = reduction_output_bounds(
        w_sum_max, w_abs_max, b_abs_max, static_cast<std::size_t>(k), a, fuse);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        std::vector<Term> terms;
        terms.reserve(static_cast<std::size_t>(k));
        for (std::int64_t kk = 0; kk < k; ++kk) {
          WireId av = node.attrs.trans_a ? a.wires[kk * m + i] : a.wires[i * k + kk];
          i64 wv = node.attrs.trans_b ? b.data[j * k + kk] : b.data[kk * n + j];
          terms.push_back({av, wv});
        }
        out.wires.push_back(lower_reduction(terms, bias != nullptr, bias ? bias->data[j] : 0, fuse));
      }
    publish(idx, node, std::move(out), fuse);
  }

  void lower_conv2d(std::size_t idx) {
    const ModelNode& node = graph_.nodes[idx];
    const TensorWires& x = env_.at(node.inputs[0]);
    const QuantizedTensor& w = qmodel_.initializers.at(node.inputs[1]);
    const QuantizedTensor* bias =
        node.inputs.size() == 3 ? &qmodel_.initializers.at(node.inputs[2]) : nullptr;
    const Shape& out_shape = shapes_.at(node.output).shape;
    const std::int64_t cin = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const std::int64_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    const std::int64_t ho = out_shape[2], wo = out_shape[3];
    const auto [sh, sw] = node.attrs.strides;
    const auto [ph, pw] = node.attrs.pads;
    const bool fuse = fused_producers_.count(idx) > 0;

    u128 w_sum_max = 0, w_abs_max = 0, b_abs_max = 0;
    for (std::int64_t m = 0; m < cout; ++m) {
      u128 sum = 0;
      for (std::int64_t i = 0; i < cin * kh * kw; ++i) {
        i64 v = w.data[m * cin * kh * kw + i];
        u128 mag = v < 0 ? static_cast<u128>(-(v + 1)) + 1 : static_cast<u128>(v);
        sum += mag;
        w_abs_max = std::max(w_abs_max, mag);
      }
      w_sum_max = std::max(w_sum_max, sum);
    }
    if (bias)
      for (i64 v : bias->data)
        b_abs_max = std::max(b_abs_max, v < 0 ? static_cast<u128>(-v) : static_cast<u128>(v));
    audit_reduction(node, w_sum_max, w_abs_max, b_abs_max,
                    static_cast<std::size_t>(cin * kh * kw), x, fuse);

    TensorWires out;
    out.shape = out_shape;
    std::tie(out.honest_bound, out.cert_bound) = reduction_output_bounds(
        w_sum_max, w_abs_max, b_abs_max, static_cast<std::size_t>(cin * kh * kw), x, fuse);
    for (std::int64_t nb = 0; nb < out_shape[0]; ++nb)
      for (std::int64_t m = 0; m < cout; ++m)
        for (std::int64_t oy = 0; oy < ho; ++oy)
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            std::vector<Term> terms;
            for (std::int64_t c = 0; c < cin; ++c)
              for (std::int64_t ky = 0; ky < kh; ++ky)
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                  std::int64_t iy = oy * sh - ph + ky;
                  std::int64_t ix = ox * sw - pw + kx;
                  if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;  // zero padding
                  terms.push_back({x.wires[((nb * cin + c) * h + iy) * wd + ix],
                                   w.data[((m * cin + c) * kh + ky) * kw + kx]});
                }
            out.wires.push_back(
                lower_reduction(terms, bias != nullptr, bias ? bias->data[m] : 0, fuse));
          }
    publish(idx, node, std::move(out), fuse);
  }

  void lower_relu(const ModelNode& node) {
    const TensorWires& x = env_.at(node.inputs[0]);
    if (x.honest_bound > (u128{1} << (quant_.kappa - 1)) - 1)
      fail(ErrorKind::Overflow,
           "node '" + node.name + "': honest activations exceed the signed kappa budget");
    check_comparison_no_wrap(node, x.cert_bound);
    TensorWires out;
    out.shape = x.shape;
    out.honest_bound = x.honest_bound;
    out.cert_bound = (u128{1} << quant_.kappa) - 1;
    for (auto wire : x.wires) out.wires.push_back(builder_.relu(wire, quant_.kappa));
    env_[node.output] = std::move(out);
  }

  void lower_maxpool(const ModelNode& node) {
    const TensorWires& x = env_.at(node.inputs[0]);
    if (2 * x.honest_bound > (u128{1} << (quant_.kappa - 1)) - 1)
      fail(ErrorKind::Overflow,
           "node '" + node.name + "': honest activation differences exceed the signed kappa budget");
    check_comparison_no_wrap(node, 2 * x.cert_bound);
    const Shape& out_shape = shapes_.at(node.output).shape;
    const std::int64_t ch = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const std::int64_t ho = out_shape[2], wo = out_shape[3];
    const auto [wh, ww] = node.attrs.window;
    const auto [sh, sw] = node.attrs.strides;

    TensorWires out;
    out.shape = out_shape;
    out.honest_bound = x.honest_bound;
    std::size_t levels = 0;
    for (std::int64_t n = 1; n < wh * ww; n *= 2) ++levels;
    out.cert_bound = x.cert_bound + static_cast<u128>(levels) * ((u128{1} << quant_.kappa) - 1);
    for (std::int64_t nb = 0; nb < out_shape[0]; ++nb)
      for (std::int64_t c = 0; c < ch; ++c)
        for (std::int64_t oy = 0; oy < ho; ++oy)
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            std::vector<WireId> window;
            for (std::int64_t ky = 0; ky < wh; ++ky)
              for (std::int64_t kx = 0; kx < ww; ++kx)
                window.push_back(x.wires[((nb * ch + c) * h + oy * sh + ky) * wd + ox * sw + kx]);
            // Balanced pairwise reduction; an odd element rides up a level.
            while (window.size() > 1) {
              std::vector<WireId> next;
              for (std::size_t i = 0; i + 1 < window.size(); i += 2)
                next.push_back(builder_.max_of(window[i], window[i + 1], quant_.kappa));
              if (window.size() % 2 == 1) next.push_back(window.back());
              window = std::move(next);
            }
            out.wires.push_back(window[0]);
          }
    env_[node.output] = std::move(out);
  }

  void check_comparison_no_wrap(const ModelNode& node, u128 cert_diff) const {
    if (cert_diff + (u128{1} << (quant_.kappa - 1)) > modulus_half())
      fail(ErrorKind::Overflow,
           "node '" + node.name + "': adversarial comparison operands could wrap modulo p");
  }

  // Stores the node result; a fused producer publishes under the consumed
  // ReLU's output name.
  void publish(std::size_t idx, const ModelNode& node, TensorWires out, bool fused) {
    if (fused) {
      const ModelNode& relu_node = graph_.nodes[fused_producers_.at(idx)];
      env_[relu_node.output] = std::move(out);
    } else {
      env_[node.output] = std::move(out);
    }
  }

  const ModelGraph& graph_;
  CompileOptions options_;
  QuantConfig quant_;
  CircuitBuilder builder_;
  std::map<std::string, TensorSpec> shapes_;
  std::map<std::string, TensorWires> env_;
  std::map<i64, WireId> const_cache_;  // per node
  std::map<std::size_t, std::size_t> fused_producers_;  // producer idx -> relu idx
  std::set<std::size_t> fused_relu_nodes_;
  QuantizedModel qmodel_;
  i64 audit_bound_ = 0;
};

}  // namespace lowering

inline CompileResult compile_model(const ModelGraph& graph, const QuantConfig& qcfg,
                                   const Field& field, const CostConfig& ccfg,
                                   const CompileOptions& options = {}) {
  validate_model(graph);
  lowering::GraphLowering lower(graph, qcfg, field, ccfg, options);
  return lower.run();
}

inline ConstraintSystem compile(const ModelGraph& graph, const QuantConfig& qcfg, const Field& field,
                                const CostConfig& ccfg, const CompileOptions& options = {}) {
  return compile_model(graph, qcfg, field, ccfg, options).cs;
}

}  // namespace zkinfer
