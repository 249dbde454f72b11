#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/tensor.hpp"

namespace zkinfer {

enum class OpKind { Gemm, Conv2D, ReLU, MaxPool2D, Reshape };

inline const char* op_kind_name(OpKind op) {
  switch (op) {
    case OpKind::Gemm: return "Gemm";
    case OpKind::Conv2D: return "Conv2D";
    case OpKind::ReLU: return "ReLU";
    case OpKind::MaxPool2D: return "MaxPool2D";
    case OpKind::Reshape: return "Reshape";
  }
  return "?";
}

struct NodeAttributes {
  std::array<std::int64_t, 2> strides{1, 1};  // Conv2D / MaxPool2D
  std::array<std::int64_t, 2> pads{0, 0};     // Conv2D
  std::array<std::int64_t, 2> window{0, 0};   // MaxPool2D
  bool trans_a = false;                       // Gemm
  bool trans_b = false;                       // Gemm
  Shape reshape_shape;                        // Reshape
};

struct ModelNode {
  std::string name;
  OpKind op = OpKind::ReLU;
  std::vector<std::string> inputs;  // tensor names
  std::string output;               // tensor name
  NodeAttributes attrs;
};

// Typed DAG of supported operators. Immutable after validation; exactly one
// graph input tensor and one graph output tensor.
struct ModelGraph {
  std::vector<ModelNode> nodes;
  std::map<std::string, FloatTensor> initializers;
  TensorSpec input;
  std::string output_name;
};

// ---------------------------------------------------------------------------
// Structural validation and ordering
// ---------------------------------------------------------------------------

// Producer-before-consumer order over node indices, ties broken by
// declaration order. Throws on cycles and dangling tensor references.
inline std::vector<std::size_t> topological_order(const ModelGraph& graph) {
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& node = graph.nodes[i];
    if (node.output == graph.input.name || graph.initializers.count(node.output))
      fail(ErrorKind::Schema, "node '" + node.name + "' writes reserved tensor '" + node.output + "'");
    if (!producer.emplace(node.output, i).second)
      fail(ErrorKind::Schema, "tensor '" + node.output + "' has two producers");
  }

  std::vector<std::size_t> pending_deps(graph.nodes.size(), 0);
  std::vector<std::vector<std::size_t>> consumers(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (const auto& in : graph.nodes[i].inputs) {
      if (in == graph.input.name || graph.initializers.count(in)) continue;
      auto it = producer.find(in);
      if (it == producer.end())
        fail(ErrorKind::Schema,
             "node '" + graph.nodes[i].name + "' reads undefined tensor '" + in + "'");
      consumers[it->second].push_back(i);
      ++pending_deps[i];
    }
  }

  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    if (pending_deps[i] == 0) ready.insert(i);

  std::vector<std::size_t> order;
  order.reserve(graph.nodes.size());
  while (!ready.empty()) {
    std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (auto c : consumers[i])
      if (--pending_deps[c] == 0) ready.insert(c);
  }
  if (order.size() != graph.nodes.size())
    fail(ErrorKind::Schema, "model graph contains a cycle");
  return order;
}

namespace detail {

inline const FloatTensor& require_initializer(const ModelGraph& graph, const ModelNode& node,
                                              const std::string& name) {
  auto it = graph.initializers.find(name);
  if (it == graph.initializers.end())
    fail(ErrorKind::Schema,
         "node '" + node.name + "' expects initializer '" + name + "', which is missing");
  return it->second;
}

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t pad, std::int64_t kernel,
                                 std::int64_t stride) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace detail

// Assigns a shape to every tensor (graph input, initializers, node outputs).
// Deterministic and total on valid graphs; names the offending node on
// mismatch.
inline std::map<std::string, TensorSpec> infer_shapes(const ModelGraph& graph) {
  std::map<std::string, TensorSpec> shapes;
  graph.input.validate();
  shapes[graph.input.name] = graph.input;
  for (const auto& [name, tensor] : graph.initializers) {
    TensorSpec spec{name, tensor.shape};
    spec.validate();
    if (tensor.num_elements() != static_cast<std::int64_t>(tensor.data.size()))
      fail(ErrorKind::Schema, "initializer '" + name + "' data length does not match its shape");
    shapes[name] = spec;
  }

  auto shape_of = [&](const ModelNode& node, const std::string& name) -> const Shape& {
    auto it = shapes.find(name);
    if (it == shapes.end())
      fail(ErrorKind::Schema, "node '" + node.name + "' reads tensor '" + name + "' before it is defined");
    return it->second.shape;
  };
  auto mismatch = [](const ModelNode& node, const std::string& detail) {
    fail(ErrorKind::ShapeMismatch, "node '" + node.name + "' (" + op_kind_name(node.op) + "): " + detail);
  };

  for (auto idx : topological_order(graph)) {
    const auto& node = graph.nodes[idx];
    Shape out;
    switch (node.op) {
      case OpKind::Gemm: {
        if (node.inputs.size() < 2 || node.inputs.size() > 3)
          mismatch(node, "expects 2 or 3 inputs");
        Shape a = shape_of(node, node.inputs[0]);
        Shape b = shape_of(node, node.inputs[1]);
        if (a.size() != 2 || b.size() != 2) mismatch(node, "operands must be rank-2");
        if (node.attrs.trans_a) std::swap(a[0], a[1]);
        if (node.attrs.trans_b) std::swap(b[0], b[1]);
        if (a[1] != b[0])
          mismatch(node, "inner dims disagree: " + shape_to_string(a) + " x " + shape_to_string(b));
        if (node.inputs.size() == 3) {
          const Shape& c = shape_of(node, node.inputs[2]);
          std::int64_t n = shape_num_elements(c);
          if (n != b[1]) mismatch(node, "bias has " + std::to_string(n) + " entries, expected " +
                                            std::to_string(b[1]));
        }
        out = {a[0], b[1]};
        break;
      }
      case OpKind::Conv2D: {
        if (node.inputs.size() < 2 || node.inputs.size() > 3)
          mismatch(node, "expects 2 or 3 inputs");
        const Shape& x = shape_of(node, node.inputs[0]);
        const Shape& w = shape_of(node, node.inputs[1]);
        if (x.size() != 4 || w.size() != 4) mismatch(node, "input and kernel must be rank-4");
        if (x[1] != w[1])
          mismatch(node, "channel mismatch: input has " + std::to_string(x[1]) + ", kernel expects " +
                             std::to_string(w[1]));
        if (node.inputs.size() == 3) {
          const Shape& b = shape_of(node, node.inputs[2]);
          if (shape_num_elements(b) != w[0]) mismatch(node, "bias length must equal output channels");
        }
        std::int64_t ho = detail::conv_out_dim(x[2], node.attrs.pads[0], w[2], node.attrs.strides[0]);
        std::int64_t wo = detail::conv_out_dim(x[3], node.attrs.pads[1], w[3], node.attrs.strides[1]);
        if (ho < 1 || wo < 1)
          mismatch(node, "kernel " + std::to_string(w[2]) + "x" + std::to_string(w[3]) +
                             " does not fit input " + shape_to_string(x));
        out = {x[0], w[0], ho, wo};
        break;
      }
      case OpKind::MaxPool2D: {
        if (node.inputs.size() != 1) mismatch(node, "expects 1 input");
        const Shape& x = shape_of(node, node.inputs[0]);
        if (x.size() != 4) mismatch(node, "input must be rank-4");
        std::int64_t ho = (x[2] - node.attrs.window[0]) / node.attrs.strides[0] + 1;
        std::int64_t wo = (x[3] - node.attrs.window[1]) / node.attrs.strides[1] + 1;
        if (node.attrs.window[0] > x[2] || node.attrs.window[1] > x[3] || ho < 1 || wo < 1)
          mismatch(node, "window does not fit input " + shape_to_string(x));
        out = {x[0], x[1], ho, wo};
        break;
      }
      case OpKind::ReLU: {
        if (node.inputs.size() != 1) mismatch(node, "expects 1 input");
        out = shape_of(node, node.inputs[0]);
        break;
      }
      case OpKind::Reshape: {
        if (node.inputs.size() != 1) mismatch(node, "expects 1 input");
        const Shape& x = shape_of(node, node.inputs[0]);
        out = node.attrs.reshape_shape;
        if (out.empty() || out.size() > 4) mismatch(node, "target shape must have rank 1..4");
        for (auto d : out)
          if (d < 1) mismatch(node, "target shape dims must be positive");
        if (shape_num_elements(out) != shape_num_elements(x))
          mismatch(node, "element count changes from " + shape_to_string(x) + " to " +
                             shape_to_string(out));
        break;
      }
    }
    TensorSpec spec{node.output, out};
    spec.validate();
    shapes[node.output] = spec;
  }
  return shapes;
}

// Full structural validation: attribute ranges, DAG property, single
// input/output contract, and shape consistency.
inline void validate_model(const ModelGraph& graph) {
  graph.input.validate();
  for (const auto& node : graph.nodes) {
    if (node.output.empty()) fail(ErrorKind::Schema, "node '" + node.name + "' has no output tensor");
    if (node.op == OpKind::Conv2D || node.op == OpKind::MaxPool2D) {
      if (node.attrs.strides[0] < 1 || node.attrs.strides[1] < 1)
        fail(ErrorKind::Schema, "node '" + node.name + "': stride must be >= 1");
    }
    if (node.op == OpKind::Conv2D) {
      if (node.attrs.pads[0] < 0 || node.attrs.pads[1] < 0)
        fail(ErrorKind::Schema, "node '" + node.name + "': padding must be >= 0");
    }
    if (node.op == OpKind::MaxPool2D) {
      if (node.attrs.window[0] < 1 || node.attrs.window[1] < 1)
        fail(ErrorKind::Schema, "node '" + node.name + "': window dims must be >= 1");
    }
  }
  bool produced = graph.output_name == graph.input.name;
  for (const auto& node : graph.nodes) produced = produced || node.output == graph.output_name;
  if (!produced)
    fail(ErrorKind::Schema, "graph output '" + graph.output_name + "' is not produced by any node");
  infer_shapes(graph);  // includes topological_order and per-node checks
}

// ---------------------------------------------------------------------------
// JSON import/export
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline const json& require_key(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    fail(ErrorKind::Schema, where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline std::int64_t require_int(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require_key(obj, key, where);
  if (!v.is_number_integer())
    fail(ErrorKind::Schema, where + ": field '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::string require_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require_key(obj, key, where);
  if (!v.is_string()) fail(ErrorKind::Schema, where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline Shape parse_shape(const json& v, const std::string& where) {
  if (!v.is_array()) fail(ErrorKind::Schema, where + ": shape must be an array");
  Shape shape;
  for (const auto& d : v) {
    if (!d.is_number_integer()) fail(ErrorKind::Schema, where + ": shape dims must be integers");
    shape.push_back(d.get<std::int64_t>());
  }
  return shape;
}

inline std::array<std::int64_t, 2> parse_pair(const json& v, const std::string& where) {
  if (v.is_number_integer()) {
    std::int64_t x = v.get<std::int64_t>();
    return {x, x};
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer())
    return {v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
  fail(ErrorKind::Schema, where + ": expected an integer or a pair of integers");
}

// Initializer data is row-major and may be nested to match the shape or flat.
inline void flatten_numbers(const json& v, std::vector<double>& out, const std::string& where) {
  if (v.is_number()) {
    out.push_back(v.get<double>());
    return;
  }
  if (!v.is_array()) fail(ErrorKind::Schema, where + ": data must contain numbers");
  for (const auto& e : v) flatten_numbers(e, out, where);
}

inline OpKind parse_op_kind(const std::string& op, const std::string& where) {
  if (op == "Gemm") return OpKind::Gemm;
  if (op == "Conv2D") return OpKind::Conv2D;
  if (op == "ReLU") return OpKind::ReLU;
  if (op == "MaxPool2D") return OpKind::MaxPool2D;
  if (op == "Reshape") return OpKind::Reshape;
  fail(ErrorKind::UnsupportedOp, where + ": unsupported operator '" + op + "'");
}

inline json nest_data(const std::vector<double>& data, const Shape& shape, std::size_t& pos,
                      std::size_t dim) {
  json arr = json::array();
  if (dim + 1 == shape.size()) {
    for (std::int64_t i = 0; i < shape[dim]; ++i) arr.push_back(data[pos++]);
  } else {
    for (std::int64_t i = 0; i < shape[dim]; ++i) arr.push_back(nest_data(data, shape, pos, dim + 1));
  }
  return arr;
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

inline ModelGraph parse_model(const std::string& document) {
  using detail::json;
  json root = json::parse(document, nullptr, false);
  if (root.is_discarded()) fail(ErrorKind::Schema, "model file is not valid JSON");
  if (!root.is_object()) fail(ErrorKind::Schema, "model file must be a JSON object");
  if (detail::require_int(root, "format_version", "model") != kModelFormatVersion)
    fail(ErrorKind::Schema, "unsupported model format_version");

  ModelGraph graph;
  const json& in = detail::require_key(root, "input", "model");
  graph.input.name = detail::require_string(in, "name", "model.input");
  graph.input.shape = detail::parse_shape(detail::require_key(in, "shape", "model.input"), "model.input");
  graph.output_name = detail::require_string(root, "output", "model");

  const json& inits = detail::require_key(root, "initializers", "model");
  if (!inits.is_object()) fail(ErrorKind::Schema, "model.initializers must be an object");
  for (auto it = inits.begin(); it != inits.end(); ++it) {
    const std::string where = "initializer '" + it.key() + "'";
    FloatTensor t;
    t.shape = detail::parse_shape(detail::require_key(it.value(), "shape", where), where);
    detail::flatten_numbers(detail::require_key(it.value(), "data", where), t.data, where);
    if (t.num_elements() != static_cast<std::int64_t>(t.data.size()))
      fail(ErrorKind::Schema, where + ": data has " + std::to_string(t.data.size()) +
                                  " values, shape wants " + std::to_string(t.num_elements()));
    graph.initializers.emplace(it.key(), std::move(t));
  }

  const json& nodes = detail::require_key(root, "nodes", "model");
  if (!nodes.is_array()) fail(ErrorKind::Schema, "model.nodes must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& jn = nodes[i];
    ModelNode node;
    node.name = jn.contains("name") && jn.at("name").is_string() ? jn.at("name").get<std::string>()
                                                                 : "node" + std::to_string(i);
    const std::string where = "node '" + node.name + "'";
    node.op = detail::parse_op_kind(detail::require_string(jn, "op", where), where);
    const json& jin = detail::require_key(jn, "inputs", where);
    if (!jin.is_array()) fail(ErrorKind::Schema, where + ": inputs must be an array");
    for (const auto& s : jin) {
      if (!s.is_string()) fail(ErrorKind::Schema, where + ": inputs must be tensor names");
      node.inputs.push_back(s.get<std::string>());
    }
    node.output = detail::require_string(jn, "output", where);

    json attrs = jn.contains("attributes") ? jn.at("attributes") : json::object();
    if (!attrs.is_object()) fail(ErrorKind::Schema, where + ": attributes must be an object");
    switch (node.op) {
      case OpKind::Conv2D:
        if (attrs.contains("strides")) node.attrs.strides = detail::parse_pair(attrs["strides"], where);
        if (attrs.contains("pads")) node.attrs.pads = detail::parse_pair(attrs["pads"], where);
        break;
      case OpKind::MaxPool2D:
        node.attrs.window = detail::parse_pair(detail::require_key(attrs, "window", where), where);
        node.attrs.strides = attrs.contains("strides") ? detail::parse_pair(attrs["strides"], where)
                                                       : node.attrs.window;
        break;
      case OpKind::Gemm:
        if (attrs.contains("trans_a")) node.attrs.trans_a = attrs["trans_a"].get<std::int64_t>() != 0;
        if (attrs.contains("trans_b")) node.attrs.trans_b = attrs["trans_b"].get<std::int64_t>() != 0;
        break;
      case OpKind::Reshape:
        node.attrs.reshape_shape =
            detail::parse_shape(detail::require_key(attrs, "shape", where), where);
        break;
      case OpKind::ReLU:
        break;
    }
    graph.nodes.push_back(std::move(node));
  }

  validate_model(graph);
  return graph;
}

inline std::string serialize_model(const ModelGraph& graph) {
  using detail::json;
  json root;
  root["format_version"] = kModelFormatVersion;
  root["input"] = {{"name", graph.input.name}, {"shape", graph.input.shape}};
  root["output"] = graph.output_name;
  json nodes = json::array();
  for (const auto& node : graph.nodes) {
    json jn;
    jn["name"] = node.name;
    jn["op"] = op_kind_name(node.op);
    jn["inputs"] = node.inputs;
    jn["output"] = node.output;
    json attrs = json::object();
    switch (node.op) {
      case OpKind::Conv2D:
        attrs["strides"] = node.attrs.strides;
        attrs["pads"] = node.attrs.pads;
        break;
      case OpKind::MaxPool2D:
        attrs["window"] = node.attrs.window;
        attrs["strides"] = node.attrs.strides;
        break;
      case OpKind::Gemm:
        attrs["trans_a"] = node.attrs.trans_a ? 1 : 0;
        attrs["trans_b"] = node.attrs.trans_b ? 1 : 0;
        break;
      case OpKind::Reshape:
        attrs["shape"] = node.attrs.reshape_shape;
        break;
      case OpKind::ReLU:
        break;
    }
    jn["attributes"] = attrs;
    nodes.push_back(std::move(jn));
  }
  root["nodes"] = std::move(nodes);
  json inits = json::object();
  for (const auto& [name, tensor] : graph.initializers) {
    std::size_t pos = 0;
    inits[name] = {{"shape", tensor.shape},
                   {"data", detail::nest_data(tensor.data, tensor.shape, pos, 0)}};
  }
  root["initializers"] = std::move(inits);
  return root.dump(1);
}

}  // namespace zkinfer
