#include "zoorun/ref_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "zoorun/errors.hpp"
#include "zoorun/kernels.hpp"
#include "zoorun/structured.hpp"

namespace zoorun::refengine {

namespace {

const std::map<std::string, RefOp::Kind> kKinds = {
    {"affine", RefOp::Kind::Affine},       {"relu", RefOp::Kind::Relu},
    {"sigmoid", RefOp::Kind::Sigmoid},     {"avgpool2", RefOp::Kind::AvgPool2},
    {"upsample2", RefOp::Kind::Upsample2}, {"blur3", RefOp::Kind::Blur3}};

std::vector<double> number_list(const nlohmann::ordered_json& v,
                                const std::string& what) {
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ParseError("graph: " + what + ": non-number");
      out.push_back(e.get<double>());
    }
    if (out.empty()) throw ParseError("graph: " + what + ": empty list");
    return out;
  }
  throw ParseError("graph: " + what + ": expected number or list");
}

// Moves y and x to the last two positions, keeping the rest in order.
Axes spatial_last(const Axes& axes) {
  std::string target;
  for (size_t i = 0; i < axes.rank(); ++i)
    if (axes[i] != 'y' && axes[i] != 'x') target += axes[i];
  return Axes(target + "yx");
}

Tensor spatial_op(const Tensor& in, const std::string& op_name, auto kernel,
                  double y_factor, double x_factor) {
  if (!in.axes().has('y') || !in.axes().has('x'))
    throw GraphError("op " + op_name + ": tensor '" + in.name() +
                     "' lacks y/x axes");
  const Axes canon = spatial_last(in.axes());
  Tensor src = in.reorder_axes(canon);
  const size_t rank = src.rank();
  const int64_t Y = src.shape()[rank - 2];
  const int64_t X = src.shape()[rank - 1];
  int64_t n = 1;
  for (size_t i = 0; i + 2 < rank; ++i) n *= src.shape()[i];

  std::vector<int64_t> out_shape = src.shape();
  out_shape[rank - 2] = static_cast<int64_t>(Y * y_factor);
  out_shape[rank - 1] = static_cast<int64_t>(X * x_factor);
  Tensor dst = Tensor::zeros(in.name(), canon, out_shape, DType::f64);
  if (dst.element_count() > 0 && src.element_count() > 0)
    kernel(src.values<double>().data(), dst.mutable_values<double>().data(),
           n, Y, X);
  return dst.reorder_axes(in.axes());
}

Tensor apply_op(const RefOp& op, const Tensor& input) {
  Tensor in = input.dtype() == DType::f64 ? input : input.cast(DType::f64);
  switch (op.kind) {
    case RefOp::Kind::Affine: {
      Tensor out = Tensor::zeros(in.name(), in.axes(), in.shape(), DType::f64);
      if (op.a.size() <= 1 && op.b.size() <= 1) {
        const double a = op.a.empty() ? 1.0 : op.a[0];
        const double b = op.b.empty() ? 0.0 : op.b[0];
        kernels::map(in.values<double>(), out.mutable_values<double>(),
                     [a, b](double x) { return a * x + b; });
        return out;
      }
      const int c = in.axes().index_of('c');
      if (c < 0)
        throw GraphError("op affine: per-channel parameters need a 'c' axis");
      const int64_t channels = in.shape()[static_cast<size_t>(c)];
      auto param = [&](const std::vector<double>& v, int64_t ch,
                       double dflt) {
        if (v.empty()) return dflt;
        if (v.size() == 1) return v[0];
        if (static_cast<int64_t>(v.size()) != channels)
          throw GraphError("op affine: parameter count != channels");
        return v[static_cast<size_t>(ch)];
      };
      auto strides = row_major_strides(in.shape());
      const int64_t cstride = strides[static_cast<size_t>(c)];
      auto xs = in.values<double>();
      auto ys = out.mutable_values<double>();
      for (size_t i = 0; i < xs.size(); ++i) {
        const int64_t ch =
            (static_cast<int64_t>(i) / cstride) % channels;
        ys[i] = param(op.a, ch, 1.0) * xs[i] + param(op.b, ch, 0.0);
      }
      return out;
    }
    case RefOp::Kind::Relu: {
      Tensor out = Tensor::zeros(in.name(), in.axes(), in.shape(), DType::f64);
      kernels::map(in.values<double>(), out.mutable_values<double>(),
                   [](double x) { return std::max(x, 0.0); });
      return out;
    }
    case RefOp::Kind::Sigmoid: {
      Tensor out = Tensor::zeros(in.name(), in.axes(), in.shape(), DType::f64);
      kernels::map(in.values<double>(), out.mutable_values<double>(),
                   [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
      return out;
    }
    case RefOp::Kind::AvgPool2: {
      const int y = in.axes().index_of('y'), x = in.axes().index_of('x');
      if (y >= 0 && x >= 0) {
        const int64_t Y = in.shape()[static_cast<size_t>(y)];
        const int64_t X = in.shape()[static_cast<size_t>(x)];
        if (Y % 2 != 0 || X % 2 != 0)
          throw OddSizeError("op avgpool2: spatial sizes " +
                             std::to_string(Y) + "x" + std::to_string(X) +
                             " must be even");
      }
      return spatial_op(in, "avgpool2", kernels::avgpool2, 0.5, 0.5);
    }
    case RefOp::Kind::Upsample2:
      return spatial_op(in, "upsample2", kernels::upsample2, 2.0, 2.0);
    case RefOp::Kind::Blur3:
      return spatial_op(in, "blur3", kernels::blur3, 1.0, 1.0);
  }
  throw GraphError("unknown op kind");
}

}  // namespace

RefGraph parse_graph(const std::string& text) {
  nlohmann::ordered_json doc = load_document(text);
  if (!doc.is_object()) throw ParseError("graph: root must be a map");
  RefGraph g;
  if (!doc.contains("inputs") || !doc["inputs"].is_array() ||
      doc["inputs"].empty())
    throw ParseError("graph: inputs must be a non-empty list");
  for (const auto& v : doc["inputs"]) g.inputs.push_back(v.get<std::string>());
  if (!doc.contains("outputs") || !doc["outputs"].is_array() ||
      doc["outputs"].empty())
    throw ParseError("graph: outputs must be a non-empty list");
  for (const auto& v : doc["outputs"])
    g.outputs.push_back(v.get<std::string>());

  std::set<std::string> defined(g.inputs.begin(), g.inputs.end());
  if (doc.contains("ops")) {
    if (!doc["ops"].is_array()) throw ParseError("graph: ops must be a list");
    for (const auto& oj : doc["ops"]) {
      if (!oj.is_object()) throw ParseError("graph: op must be a map");
      RefOp op;
      const std::string kind = oj.at("kind").get<std::string>();
      auto it = kKinds.find(kind);
      if (it == kKinds.end())
        throw GraphError("graph: unknown op kind '" + kind + "'");
      op.kind = it->second;
      op.input = oj.at("input").get<std::string>();
      op.output = oj.at("output").get<std::string>();
      if (!defined.count(op.input))
        throw GraphError("graph: op input '" + op.input +
                         "' is not defined at this point");
      if (defined.count(op.output))
        throw GraphError("graph: op output '" + op.output +
                         "' is already defined");
      if (op.kind == RefOp::Kind::Affine) {
        if (oj.contains("a")) op.a = number_list(oj["a"], "affine a");
        if (oj.contains("b")) op.b = number_list(oj["b"], "affine b");
      }
      defined.insert(op.output);
      g.ops.push_back(std::move(op));
    }
  }
  for (const std::string& out : g.outputs)
    if (!defined.count(out))
      throw GraphError("graph: declared output '" + out +
                       "' is never produced");
  return g;
}

RefGraph parse_graph_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("graph: cannot open: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_graph(ss.str());
}

std::vector<Tensor> run_graph(const RefGraph& graph,
                              const std::vector<Tensor>& inputs) {
  if (inputs.size() != graph.inputs.size())
    throw GraphError("run_graph: " + std::to_string(inputs.size()) +
                     " inputs for " + std::to_string(graph.inputs.size()) +
                     " declared");
  std::map<std::string, Tensor> env;
  for (size_t i = 0; i < inputs.size(); ++i)
    env[graph.inputs[i]] = inputs[i].with_name(graph.inputs[i]);
  for (const RefOp& op : graph.ops) {
    auto it = env.find(op.input);
    if (it == env.end())
      throw GraphError("run_graph: missing tensor '" + op.input + "'");
    Tensor result = apply_op(op, it->second);
    env[op.output] = result.with_name(op.output);
  }
  std::vector<Tensor> outs;
  for (const std::string& name : graph.outputs) {
    auto it = env.find(name);
    if (it == env.end())
      throw GraphError("run_graph: output '" + name + "' not produced");
    outs.push_back(it->second);
  }
  return outs;
}

}  // namespace zoorun::refengine
