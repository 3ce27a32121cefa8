#include "strange/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kernels.hpp"
#include "strange/errors.hpp"

namespace strange::nn {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  float* d = dst.data();
  const float* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw UsageError("variable does not belong to this graph");
  return nodes_[v.id];
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second};
  Node n;
  n.value = p.value;
  n.requires_grad = record_;
  n.param = record_ ? &p : nullptr;
  Var v = push(std::move(n));
  bound_.emplace(&p, v.id);
  return v;
}

Var Graph::param(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second};
  Var v = input(p.value);
  bound_.emplace(&p, v.id);
  return v;
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

std::uint64_t Graph::kink_signature() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const Node& n : nodes_) {
    if (n.op != Op::activation || (n.act != Activation::relu && n.act != Activation::abs)) continue;
    for (float v : nodes_[n.inputs[0]].value.values()) {
      h = (h ^ static_cast<std::uint64_t>(v > 0.0f ? 2 : v < 0.0f ? 1 : 0)) * 1099511628211ull;
    }
  }
  return h;
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

Tensor& Graph::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Var Graph::linear(Var x, Var weight, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  const Tensor& bv = value(bias);
  if (wv.rank() != 2 || xv.cols() != wv.cols() || bv.size() != static_cast<std::size_t>(wv.rows())) {
    throw DimensionError("linear: input " + shape_string(xv.shape()) + ", weight " + shape_string(wv.shape()) +
                         ", bias " + shape_string(bv.shape()));
  }
  Node n;
  n.op = Op::linear;
  n.inputs = {x.id, weight.id, bias.id};
  n.requires_grad = needs(x.id) || needs(weight.id) || needs(bias.id);
  n.value = Tensor({xv.rows(), wv.rows()});
  kernels::linear_forward(xv.data(), xv.rows(), xv.cols(), wv.data(), bv.data(), wv.rows(), n.value.data());
  return push(std::move(n));
}

Var Graph::activation(Activation kind, Var x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::activation;
  n.act = kind;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  n.value = Tensor(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) n.value[i] = kernels::activate(kind, xv[i]);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "add");
  Node n;
  n.op = Op::add;
  n.inputs = {a.id, b.id};
  n.requires_grad = needs(a.id) || needs(b.id);
  n.value = av;
  add_into(n.value, bv);
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "sub");
  Node n;
  n.op = Op::sub;
  n.inputs = {a.id, b.id};
  n.requires_grad = needs(a.id) || needs(b.id);
  n.value = av;
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] -= bv[i];
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mul");
  Node n;
  n.op = Op::mul;
  n.inputs = {a.id, b.id};
  n.requires_grad = needs(a.id) || needs(b.id);
  n.value = av;
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] *= bv[i];
  return push(std::move(n));
}

Var Graph::scale(Var x, float factor) {
  Node n;
  n.op = Op::scale;
  n.inputs = {x.id};
  n.factor = factor;
  n.requires_grad = needs(x.id);
  n.value = value(x);
  for (float& v : n.value.values()) v *= factor;
  return push(std::move(n));
}

Var Graph::square(Var x) {
  Node n;
  n.op = Op::square;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  n.value = value(x);
  for (float& v : n.value.values()) v *= v;
  return push(std::move(n));
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const int rows = value(parts[0]).rows();
  int total = 0;
  Node n;
  n.op = Op::concat_cols;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    if (pv.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    total += pv.cols();
    n.inputs.push_back(p.id);
    n.requires_grad = n.requires_grad || needs(p.id);
  }
  n.value = Tensor({rows, total});
  int offset = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    const int c = pv.cols();
    for (int r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + static_cast<std::size_t>(r) * c, c,
                  n.value.data() + static_cast<std::size_t>(r) * total + offset);
    }
    offset += c;
  }
  return push(std::move(n));
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const int cols = value(parts[0]).cols();
  int total = 0;
  Node n;
  n.op = Op::concat_rows;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    if (pv.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    total += pv.rows();
    n.inputs.push_back(p.id);
    n.requires_grad = n.requires_grad || needs(p.id);
  }
  n.value = Tensor({total, cols});
  float* out = n.value.data();
  for (Var p : parts) {
    const Tensor& pv = value(p);
    out = std::copy_n(pv.data(), pv.size(), out);
  }
  return push(std::move(n));
}

Var Graph::reshape(Var x, Shape shape) {
  Node n;
  n.op = Op::reshape;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  n.value = value(x).reshaped(std::move(shape));
  return push(std::move(n));
}

Var Graph::slice_rows(Var x, int rows) {
  const Tensor& xv = value(x);
  if (rows < 1 || rows > xv.rows()) {
    throw DimensionError("slice_rows: " + std::to_string(rows) + " rows of " + shape_string(xv.shape()));
  }
  if (rows == xv.rows() && xv.rank() == 2) return x;
  Node n;
  n.op = Op::slice_rows;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  n.value = Tensor({rows, xv.cols()});
  std::copy_n(xv.data(), n.value.size(), n.value.data());
  return push(std::move(n));
}

Var Graph::gru(Var x, Var h, Var wz, Var bz, Var wr, Var br, Var wn, Var bn) {
  const Tensor& xv = value(x);
  const Tensor& hv = value(h);
  const int rows = xv.rows();
  const int in = xv.cols();
  const int d = hv.cols();
  const int cat = in + d;
  for (Var w : {wz, wr, wn}) {
    const Tensor& wv = value(w);
    if (wv.rank() != 2 || wv.rows() != d || wv.cols() != cat) {
      throw DimensionError("gru: gate weight " + shape_string(wv.shape()) + " for input " + std::to_string(in) +
                           " and hidden " + std::to_string(d));
    }
  }
  for (Var b : {bz, br, bn}) {
    if (value(b).size() != static_cast<std::size_t>(d)) throw DimensionError("gru: gate bias size");
  }
  if (hv.rows() != rows) throw DimensionError("gru: input and hidden row counts differ");

  Node n;
  n.op = Op::gru;
  n.inputs = {x.id, h.id, wz.id, bz.id, wr.id, br.id, wn.id, bn.id};
  for (auto id : n.inputs) n.requires_grad = n.requires_grad || needs(id);

  Tensor xh({rows, cat});
  for (int r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + static_cast<std::size_t>(r) * in, in, xh.data() + static_cast<std::size_t>(r) * cat);
    std::copy_n(hv.data() + static_cast<std::size_t>(r) * d, d, xh.data() + static_cast<std::size_t>(r) * cat + in);
  }
  Tensor z({rows, d});
  Tensor rg({rows, d});
  kernels::linear_forward(xh.data(), rows, cat, value(wz).data(), value(bz).data(), d, z.data());
  kernels::linear_forward(xh.data(), rows, cat, value(wr).data(), value(br).data(), d, rg.data());
  for (float& v : z.values()) v = kernels::sigmoid(v);
  for (float& v : rg.values()) v = kernels::sigmoid(v);
  Tensor xrh = xh;
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < d; ++j) xrh.at(r, in + j) = rg.at(r, j) * hv.at(r, j);
  }
  Tensor cand({rows, d});
  kernels::linear_forward(xrh.data(), rows, cat, value(wn).data(), value(bn).data(), d, cand.data());
  for (float& v : cand.values()) v = std::tanh(v);

  n.value = Tensor({rows, d});
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = (1.0f - z[i]) * cand[i] + z[i] * hv[i];
  if (n.requires_grad) n.aux = {std::move(xh), std::move(xrh), std::move(z), std::move(rg), std::move(cand)};
  return push(std::move(n));
}

Var Graph::rowwise_matvec(Var x, Var w, int m) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const int rows = xv.rows();
  const int nin = xv.cols();
  if (m <= 0 || wv.rows() != rows || wv.cols() != nin * m) {
    throw DimensionError("rowwise_matvec: x " + shape_string(xv.shape()) + ", w " + shape_string(wv.shape()) +
                         ", m " + std::to_string(m));
  }
  Node n;
  n.op = Op::rowwise_matvec;
  n.inputs = {x.id, w.id};
  n.index = {m};
  n.requires_grad = needs(x.id) || needs(w.id);
  n.value = Tensor({rows, m});
  for (int r = 0; r < rows; ++r) {
    const float* wr = wv.data() + static_cast<std::size_t>(r) * nin * m;
    float* out = n.value.data() + static_cast<std::size_t>(r) * m;
    for (int k = 0; k < nin; ++k) kernels::axpy(xv.at(r, k), wr + static_cast<std::size_t>(k) * m, out, m);
  }
  return push(std::move(n));
}

Var Graph::gather_cols(Var x, std::span<const int> index) {
  const Tensor& xv = value(x);
  if (index.size() != static_cast<std::size_t>(xv.rows())) throw DimensionError("gather_cols: index count");
  Node n;
  n.op = Op::gather_cols;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  n.index.assign(index.begin(), index.end());
  n.value = Tensor({xv.rows(), 1});
  for (int r = 0; r < xv.rows(); ++r) {
    const int c = index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= xv.cols()) throw DimensionError("gather_cols: column " + std::to_string(c) + " out of range");
    n.value[static_cast<std::size_t>(r)] = xv.at(r, c);
  }
  return push(std::move(n));
}

Var Graph::sum_cols(Var x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::sum_cols;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  n.value = Tensor({xv.rows(), 1});
  for (int r = 0; r < xv.rows(); ++r) {
    double s = 0.0;
    for (float v : xv.row(r)) s += v;
    n.value[static_cast<std::size_t>(r)] = static_cast<float>(s);
  }
  return push(std::move(n));
}

Var Graph::sum(Var x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::sum;
  n.inputs = {x.id};
  n.requires_grad = needs(x.id);
  double s = 0.0;
  for (float v : xv.values()) s += v;
  n.value = Tensor::scalar(static_cast<float>(s));
  return push(std::move(n));
}

Var Graph::softmax_xent(Var logits, std::span<const int> labels) {
  const Tensor& lv = value(logits);
  const int rows = lv.rows();
  const int c = lv.cols();
  if (labels.size() != static_cast<std::size_t>(rows)) throw DimensionError("softmax_xent: label count");
  Node n;
  n.op = Op::softmax_xent;
  n.inputs = {logits.id};
  n.requires_grad = needs(logits.id);
  n.index.assign(labels.begin(), labels.end());
  n.value = Tensor({rows, 1});
  Tensor probs({rows, c});
  for (int r = 0; r < rows; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= c) throw DimensionError("softmax_xent: label out of range");
    float mx = lv.at(r, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, lv.at(r, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(lv.at(r, j) - mx));
    for (int j = 0; j < c; ++j) probs.at(r, j) = static_cast<float>(std::exp(static_cast<double>(lv.at(r, j) - mx)) / z);
    n.value[static_cast<std::size_t>(r)] = static_cast<float>(std::log(z) - (lv.at(r, label) - mx));
  }
  if (n.requires_grad) n.aux = {std::move(probs)};
  return push(std::move(n));
}

void Graph::backward(Var loss) {
  if (!record_) throw UsageError("backward() on a graph built without recording");
  if (nodes_.empty()) throw UsageError("backward() called before any forward computation");
  const Node& root = node(loss);
  if (root.value.size() != 1) throw UsageError("backward() needs a one-element loss, got " + shape_string(root.value.shape()));
  for (Node& n : nodes_) n.grad = Tensor();
  if (!root.requires_grad) return;
  grad_buffer(loss.id).fill(1.0f);
  for (std::int64_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.op == Op::leaf) {
      if (n.param) add_into(n.param->grad, n.grad);
      continue;
    }
    backprop(n);
  }
}

void Graph::backprop(const Node& n) {
  const Tensor& g = n.grad;
  auto in = [&](int k) -> Node& { return nodes_[n.inputs[static_cast<std::size_t>(k)]]; };
  auto gin = [&](int k) -> float* {
    const auto id = n.inputs[static_cast<std::size_t>(k)];
    return needs(id) ? grad_buffer(id).data() : nullptr;
  };

  switch (n.op) {
    case Op::leaf:
      break;
    case Op::linear: {
      const Tensor& x = in(0).value;
      const Tensor& w = in(1).value;
      float* dx = gin(0);
      float* dw = gin(1);
      float* db = gin(2);
      kernels::linear_backward(x.data(), x.rows(), x.cols(), w.data(), w.rows(), g.data(), dx, dw, db);
      break;
    }
    case Op::activation: {
      const Tensor& x = in(0).value;
      float* dx = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * kernels::activate_grad(n.act, x[i], n.value[i]);
      break;
    }
    case Op::add:
    case Op::sub: {
      const float sign = n.op == Op::add ? 1.0f : -1.0f;
      if (float* da = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (float* db = gin(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += sign * g[i];
      }
      break;
    }
    case Op::mul: {
      const Tensor& a = in(0).value;
      const Tensor& b = in(1).value;
      if (float* da = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
      }
      if (float* db = gin(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
      }
      break;
    }
    case Op::scale: {
      float* dx = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * n.factor;
      break;
    }
    case Op::square: {
      const Tensor& x = in(0).value;
      float* dx = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += 2.0f * x[i] * g[i];
      break;
    }
    case Op::concat_cols: {
      const int rows = n.value.rows();
      int offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const int c = nodes_[n.inputs[k]].value.cols();
        if (float* dx = gin(static_cast<int>(k))) {
          for (int r = 0; r < rows; ++r) {
            for (int j = 0; j < c; ++j) dx[static_cast<std::size_t>(r) * c + j] += g.at(r, offset + j);
          }
        }
        offset += c;
      }
      break;
    }
    case Op::concat_rows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t count = nodes_[n.inputs[k]].value.size();
        if (float* dx = gin(static_cast<int>(k))) {
          for (std::size_t i = 0; i < count; ++i) dx[i] += g[offset + i];
        }
        offset += count;
      }
      break;
    }
    case Op::slice_rows:
    case Op::reshape: {
      float* dx = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      break;
    }
    case Op::gru: {
      const Tensor& xh = n.aux[0];
      const Tensor& xrh = n.aux[1];
      const Tensor& z = n.aux[2];
      const Tensor& rg = n.aux[3];
      const Tensor& cand = n.aux[4];
      const Tensor& h = in(1).value;
      const int rows = h.rows();
      const int d = h.cols();
      const int cat = xh.cols();
      const int nin = cat - d;

      Tensor dz_pre({rows, d});
      Tensor dn_pre({rows, d});
      Tensor dh({rows, d});
      for (std::size_t i = 0; i < g.size(); ++i) {
        const float dzi = g[i] * (h[i] - cand[i]);
        dz_pre[i] = dzi * z[i] * (1.0f - z[i]);
        dn_pre[i] = g[i] * (1.0f - z[i]) * (1.0f - cand[i] * cand[i]);
        dh[i] = g[i] * z[i];
      }
      Tensor dxrh({rows, cat});
      kernels::linear_backward(xrh.data(), rows, cat, in(6).value.data(), d, dn_pre.data(), dxrh.data(), gin(6),
                               gin(7));
      Tensor dr_pre({rows, d});
      for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < d; ++j) {
          const float drh = dxrh.at(r, nin + j);
          dh.at(r, j) += drh * rg.at(r, j);
          const float dr = drh * h.at(r, j);
          dr_pre.at(r, j) = dr * rg.at(r, j) * (1.0f - rg.at(r, j));
        }
      }
      Tensor dxh({rows, cat});
      kernels::linear_backward(xh.data(), rows, cat, in(2).value.data(), d, dz_pre.data(), dxh.data(), gin(2),
                               gin(3));
      kernels::linear_backward(xh.data(), rows, cat, in(4).value.data(), d, dr_pre.data(), dxh.data(), gin(4),
                               gin(5));
      if (float* dx = gin(0)) {
        for (int r = 0; r < rows; ++r) {
          for (int j = 0; j < nin; ++j) dx[static_cast<std::size_t>(r) * nin + j] += dxh.at(r, j) + dxrh.at(r, j);
        }
      }
      if (float* dhp = gin(1)) {
        for (int r = 0; r < rows; ++r) {
          for (int j = 0; j < d; ++j) dhp[static_cast<std::size_t>(r) * d + j] += dh.at(r, j) + dxh.at(r, nin + j);
        }
      }
      break;
    }
    case Op::rowwise_matvec: {
      const Tensor& x = in(0).value;
      const Tensor& w = in(1).value;
      const int m = n.index[0];
      const int rows = x.rows();
      const int nin = x.cols();
      float* dx = gin(0);
      float* dw = gin(1);
      for (int r = 0; r < rows; ++r) {
        const float* gr = g.data() + static_cast<std::size_t>(r) * m;
        const float* wr = w.data() + static_cast<std::size_t>(r) * nin * m;
        for (int k = 0; k < nin; ++k) {
          if (dx) {
            double s = 0.0;
            for (int j = 0; j < m; ++j) s += static_cast<double>(gr[j]) * wr[static_cast<std::size_t>(k) * m + j];
            dx[static_cast<std::size_t>(r) * nin + k] += static_cast<float>(s);
          }
          if (dw) kernels::axpy(x.at(r, k), gr, dw + static_cast<std::size_t>(r) * nin * m + static_cast<std::size_t>(k) * m, m);
        }
      }
      break;
    }
    case Op::gather_cols: {
      float* dx = gin(0);
      const int c = in(0).value.cols();
      for (std::size_t r = 0; r < n.index.size(); ++r) dx[r * c + n.index[r]] += g[r];
      break;
    }
    case Op::sum_cols: {
      float* dx = gin(0);
      const int c = in(0).value.cols();
      for (int r = 0; r < g.rows(); ++r) {
        for (int j = 0; j < c; ++j) dx[static_cast<std::size_t>(r) * c + j] += g[static_cast<std::size_t>(r)];
      }
      break;
    }
    case Op::sum: {
      float* dx = gin(0);
      const std::size_t count = in(0).value.size();
      for (std::size_t i = 0; i < count; ++i) dx[i] += g[0];
      break;
    }
    case Op::softmax_xent: {
      const Tensor& probs = n.aux[0];
      float* dx = gin(0);
      const int c = probs.cols();
      for (int r = 0; r < probs.rows(); ++r) {
        const float gr = g[static_cast<std::size_t>(r)];
        for (int j = 0; j < c; ++j) {
          const float target = j == n.index[static_cast<std::size_t>(r)] ? 1.0f : 0.0f;
          dx[static_cast<std::size_t>(r) * c + j] += gr * (probs.at(r, j) - target);
        }
      }
      break;
    }
  }
}

}  // namespace strange::nn
