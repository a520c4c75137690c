#include "gridcast/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace gridcast::ad {

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  if (!init.all_finite()) throw std::invalid_argument("parameter '" + name + "' has non-finite values");
  const std::size_t i = values_.size();
  index_.emplace(name, i);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return i;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParameterSet::index(std::string_view name) const {
  auto i = find(name);
  if (!i) throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
  return *i;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------
// kernels

namespace {

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m,k] += G[m,n] * B[k,n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[j] * bp[j];
      ci[p] += s;
    }
  }
}

// C[k,n] += A[m,k]^T * G[m,n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

double sigmoid_of(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Multiply: return "multiply";
    case OpKind::MatMul: return "matmul";
    case OpKind::Affine: return "affine";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Reshape: return "reshape";
    case OpKind::Dropout: return "dropout";
    case OpKind::CausalConv1d: return "causal_conv1d";
    case OpKind::LstmCell: return "lstm_cell";
    case OpKind::Mse: return "mse";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

Graph::Graph(const ParameterSet& params) : params_(&params), param_nodes_(params.size()) {}

Var Graph::push(Node n) {
  if (n.kind != OpKind::Parameter && !n.value.all_finite())
    throw std::domain_error("node #" + std::to_string(nodes_.size()) + " (" +
                            std::string(to_string(n.kind)) + ") produced non-finite values");
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph node reference");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.kind == OpKind::Parameter ? params_->value(n.a0) : n.value;
}

OpKind Graph::kind(Var v) const { return node(v).kind; }

void Graph::shape_error(OpKind kind, const std::string& detail) const {
  throw std::invalid_argument("shape mismatch at node #" + std::to_string(nodes_.size()) + " (" +
                              std::string(to_string(kind)) + "): " + detail);
}

Var Graph::input(Tensor value) {
  Node n{OpKind::Input, {}, std::move(value)};
  return push(std::move(n));
}

Var Graph::param(std::size_t index) {
  if (index >= params_->size()) throw std::out_of_range("parameter index out of range");
  if (param_nodes_[index]) return Var{*param_nodes_[index]};
  Node n{OpKind::Parameter, {}, {}};
  n.a0 = index;
  n.needs_grad = true;
  Var v = push(std::move(n));
  param_nodes_[index] = v.id;
  return v;
}

Var Graph::param(std::string_view name) { return param(params_->index(name)); }

namespace {
bool any_grad(const std::vector<bool>& flags) {
  for (bool f : flags)
    if (f) return true;
  return false;
}
}  // namespace

Var Graph::add(Var a, Var b) {
  const Tensor &x = value(a), &y = value(b);
  if (x.shape() != y.shape()) shape_error(OpKind::Add, to_string(x.shape()) + " vs " + to_string(y.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  Node n{OpKind::Add, {a.id, b.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor &x = value(a), &y = value(b);
  if (x.shape() != y.shape()) shape_error(OpKind::Sub, to_string(x.shape()) + " vs " + to_string(y.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  Node n{OpKind::Sub, {a.id, b.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor &x = value(a), &y = value(b);
  if (x.shape() != y.shape())
    shape_error(OpKind::Multiply, to_string(x.shape()) + " vs " + to_string(y.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  Node n{OpKind::Multiply, {a.id, b.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor &x = value(a), &y = value(b);
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0))
    shape_error(OpKind::MatMul, to_string(x.shape()) + " x " + to_string(y.shape()));
  const std::size_t m = x.dim(0), k = x.dim(1), nn = y.dim(1);
  Tensor out({m, nn});
  gemm_nn(x.data().data(), y.data().data(), out.data().data(), m, k, nn);
  Node n{OpKind::MatMul, {a.id, b.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Graph::affine(Var xv, Var wv, Var bv) {
  const Tensor &x = value(xv), &w = value(wv), &b = value(bv);
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) || b.dim(0) != w.dim(1))
    shape_error(OpKind::Affine,
                "x " + to_string(x.shape()) + ", w " + to_string(w.shape()) + ", b " + to_string(b.shape()));
  const std::size_t m = x.dim(0), k = x.dim(1), nn = w.dim(1);
  Tensor out({m, nn});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < nn; ++j) out[i * nn + j] = b[j];
  gemm_nn(x.data().data(), w.data().data(), out.data().data(), m, k, nn);
  Node n{OpKind::Affine, {xv.id, wv.id, bv.id}, std::move(out)};
  n.needs_grad = any_grad({node(xv).needs_grad, node(wv).needs_grad, node(bv).needs_grad});
  return push(std::move(n));
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  Node n{OpKind::Relu, {a.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data()) v = sigmoid_of(v);
  Node n{OpKind::Sigmoid, {a.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data()) v = std::tanh(v);
  Node n{OpKind::Tanh, {a.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Graph::concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) shape_error(OpKind::Concat, "no inputs");
  const Shape& first = value(parts[0]).shape();
  if (axis >= first.size()) shape_error(OpKind::Concat, "axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool grad = false;
  for (Var p : parts) {
    const Shape& s = value(p).shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) ok = false;
    if (!ok) shape_error(OpKind::Concat, to_string(s) + " vs " + to_string(first));
    out_shape[axis] += s[axis];
    grad = grad || node(p).needs_grad;
  }
  const std::size_t outer = prod(out_shape, 0, axis), inner = prod(out_shape, axis + 1, out_shape.size());
  Tensor out(out_shape);
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t offset = 0;
  std::vector<std::uint32_t> ids;
  for (Var p : parts) {
    const Tensor& t = value(p);
    const std::size_t row = t.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(t.data().data() + o * row, row, out.data().data() + o * out_row + offset);
    offset += row;
    ids.push_back(p.id);
  }
  Node n{OpKind::Concat, std::move(ids), std::move(out)};
  n.a0 = axis;
  n.needs_grad = grad;
  return push(std::move(n));
}

Var Graph::slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& t = value(a);
  if (axis >= t.rank() || begin >= end || end > t.dim(axis))
    shape_error(OpKind::Slice, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                                   std::to_string(axis) + " of " + to_string(t.shape()));
  Shape out_shape = t.shape();
  out_shape[axis] = end - begin;
  const std::size_t outer = prod(t.shape(), 0, axis), inner = prod(t.shape(), axis + 1, t.rank());
  Tensor out(out_shape);
  const std::size_t in_row = t.dim(axis) * inner, out_row = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(t.data().data() + o * in_row + begin * inner, out_row, out.data().data() + o * out_row);
  Node n{OpKind::Slice, {a.id}, std::move(out)};
  n.a0 = axis;
  n.a1 = begin;
  n.a2 = end;
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Graph::reshape(Var a, Shape shape) {
  const Tensor& t = value(a);
  if (element_count(shape) != t.size())
    shape_error(OpKind::Reshape, to_string(t.shape()) + " -> " + to_string(shape));
  Tensor out(std::move(shape), t.storage());
  Node n{OpKind::Reshape, {a.id}, std::move(out)};
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Graph::dropout(Var a, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0,1)");
  Tensor out = value(a);
  Tensor mask;
  if (rate > 0.0) {
    mask = Tensor(out.shape());
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < out.size(); ++i) {
      mask[i] = keep(rng) ? scale : 0.0;
      out[i] *= mask[i];
    }
  }
  Node n{OpKind::Dropout, {a.id}, std::move(out), std::move(mask)};
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Graph::causal_conv1d(Var xv, Var wv, Var bv, std::size_t dilation) {
  const Tensor &x = value(xv), &w = value(wv), &b = value(bv);
  if (dilation == 0) shape_error(OpKind::CausalConv1d, "dilation must be >= 1");
  if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1 || w.dim(1) != x.dim(1) || b.dim(0) != w.dim(0))
    shape_error(OpKind::CausalConv1d,
                "x " + to_string(x.shape()) + ", w " + to_string(w.shape()) + ", b " + to_string(b.shape()));
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2), cout = w.dim(0), k = w.dim(2);
  Tensor out({batch, cout, len});
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* od = out.data().data();
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t o = 0; o < cout; ++o) {
      double* orow = od + (s * cout + o) * len;
      for (std::size_t t = 0; t < len; ++t) orow[t] = b[o];
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = xd + (s * cin + c) * len;
        for (std::size_t j = 0; j < k; ++j) {
          const double wv_ = wd[(o * cin + c) * k + j];
          const std::size_t shift = (k - 1 - j) * dilation;
          for (std::size_t t = shift; t < len; ++t) orow[t] += wv_ * xrow[t - shift];
        }
      }
    }
  Node n{OpKind::CausalConv1d, {xv.id, wv.id, bv.id}, std::move(out)};
  n.a0 = dilation;
  n.needs_grad = any_grad({node(xv).needs_grad, node(wv).needs_grad, node(bv).needs_grad});
  return push(std::move(n));
}

Var Graph::lstm_cell(Var xv, Var sv, Var wv, Var bv) {
  const Tensor &x = value(xv), &s = value(sv), &w = value(wv), &b = value(bv);
  if (x.rank() != 2 || s.rank() != 2 || w.rank() != 2 || b.rank() != 1 || s.dim(0) != x.dim(0) ||
      s.dim(1) % 2 != 0)
    shape_error(OpKind::LstmCell, "x " + to_string(x.shape()) + ", state " + to_string(s.shape()));
  const std::size_t batch = x.dim(0), in = x.dim(1), hid = s.dim(1) / 2;
  if (w.dim(0) != in + hid || w.dim(1) != 4 * hid || b.dim(0) != 4 * hid)
    shape_error(OpKind::LstmCell, "w " + to_string(w.shape()) + ", b " + to_string(b.shape()) + " for input " +
                                      std::to_string(in) + ", hidden " + std::to_string(hid));
  const std::size_t g4 = 4 * hid;
  Tensor z({batch, g4});
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t j = 0; j < g4; ++j) z[r * g4 + j] = b[j];
  const double* wd = w.data().data();
  gemm_nn(x.data().data(), wd, z.data().data(), batch, in, g4);
  // h part of the state is the first H columns of each row.
  for (std::size_t r = 0; r < batch; ++r) {
    const double* h = s.data().data() + r * 2 * hid;
    double* zr = z.data().data() + r * g4;
    for (std::size_t p = 0; p < hid; ++p) {
      const double hv = h[p];
      if (hv == 0.0) continue;
      const double* wp = wd + (in + p) * g4;
      for (std::size_t j = 0; j < g4; ++j) zr[j] += hv * wp[j];
    }
  }
  Tensor out({batch, 2 * hid});
  Tensor aux({batch, 5 * hid});  // i f g o tanh(c')
  for (std::size_t r = 0; r < batch; ++r) {
    const double* zr = z.data().data() + r * g4;
    const double* c = s.data().data() + r * 2 * hid + hid;
    double* ar = aux.data().data() + r * 5 * hid;
    double* orow = out.data().data() + r * 2 * hid;
    for (std::size_t p = 0; p < hid; ++p) {
      const double ig = sigmoid_of(zr[p]);
      const double fg = sigmoid_of(zr[hid + p]);
      const double gg = std::tanh(zr[2 * hid + p]);
      const double og = sigmoid_of(zr[3 * hid + p]);
      const double cn = fg * c[p] + ig * gg;
      const double tc = std::tanh(cn);
      ar[p] = ig;
      ar[hid + p] = fg;
      ar[2 * hid + p] = gg;
      ar[3 * hid + p] = og;
      ar[4 * hid + p] = tc;
      orow[p] = og * tc;
      orow[hid + p] = cn;
    }
  }
  Node n{OpKind::LstmCell, {xv.id, sv.id, wv.id, bv.id}, std::move(out), std::move(aux)};
  n.needs_grad =
      any_grad({node(xv).needs_grad, node(sv).needs_grad, node(wv).needs_grad, node(bv).needs_grad});
  return push(std::move(n));
}

Var Graph::mse(Var prediction, Var target) {
  const Tensor &p = value(prediction), &t = value(target);
  if (p.shape() != t.shape()) shape_error(OpKind::Mse, to_string(p.shape()) + " vs " + to_string(t.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    s += d * d;
  }
  Node n{OpKind::Mse, {prediction.id, target.id}, Tensor::scalar(s / static_cast<double>(p.size()))};
  n.needs_grad = node(prediction).needs_grad || node(target).needs_grad;
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Reverse pass

std::vector<Tensor> Graph::backward(Var loss) const {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) throw std::invalid_argument("backward: loss node must be scalar, got " + to_string(lv.shape()));

  std::vector<Tensor> grads(loss.id + 1);
  grads[loss.id] = Tensor(lv.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.needs_grad || grads[i].empty() || n.kind == OpKind::Parameter || n.kind == OpKind::Input) continue;
    backprop_node(n, grads[i], grads);
  }

  std::vector<Tensor> out;
  out.reserve(params_->size());
  for (std::size_t p = 0; p < params_->size(); ++p) {
    const auto& id = param_nodes_[p];
    if (id && *id <= loss.id && !grads[*id].empty())
      out.push_back(std::move(grads[*id]));
    else
      out.emplace_back(params_->value(p).shape(), 0.0);
  }
  return out;
}

void Graph::backprop_node(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const {
  auto slot = [&](std::uint32_t id) -> Tensor* {
    const Node& in = nodes_[id];
    if (!in.needs_grad) return nullptr;
    if (grads[id].empty()) grads[id] = Tensor(value(Var{id}).shape(), 0.0);
    return &grads[id];
  };
  auto val = [&](std::size_t k) -> const Tensor& { return value(Var{n.inputs[k]}); };

  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Parameter:
      break;
    case OpKind::Add:
    case OpKind::Sub: {
      if (Tensor* ga = slot(n.inputs[0])) ga->accumulate(g);
      if (Tensor* gb = slot(n.inputs[1])) {
        const double sign = n.kind == OpKind::Add ? 1.0 : -1.0;
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += sign * g[i];
      }
      break;
    }
    case OpKind::Multiply: {
      const Tensor &a = val(0), &b = val(1);
      if (Tensor* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b[i];
      if (Tensor* gb = slot(n.inputs[1]))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a[i];
      break;
    }
    case OpKind::MatMul: {
      const Tensor &a = val(0), &b = val(1);
      const std::size_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
      if (Tensor* ga = slot(n.inputs[0])) gemm_nt(g.data().data(), b.data().data(), ga->data().data(), m, nn, k);
      if (Tensor* gb = slot(n.inputs[1])) gemm_tn(a.data().data(), g.data().data(), gb->data().data(), m, k, nn);
      break;
    }
    case OpKind::Affine: {
      const Tensor &x = val(0), &w = val(1);
      const std::size_t m = x.dim(0), k = x.dim(1), nn = w.dim(1);
      if (Tensor* gx = slot(n.inputs[0])) gemm_nt(g.data().data(), w.data().data(), gx->data().data(), m, nn, k);
      if (Tensor* gw = slot(n.inputs[1])) gemm_tn(x.data().data(), g.data().data(), gw->data().data(), m, k, nn);
      if (Tensor* gb = slot(n.inputs[2]))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < nn; ++j) (*gb)[j] += g[i * nn + j];
      break;
    }
    case OpKind::Relu: {
      if (Tensor* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i)
          if (n.value[i] > 0.0) (*ga)[i] += g[i];
      break;
    }
    case OpKind::Sigmoid: {
      if (Tensor* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case OpKind::Tanh: {
      if (Tensor* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::Concat: {
      const Shape& os = n.value.shape();
      const std::size_t axis = n.a0;
      const std::size_t outer = prod(os, 0, axis), inner = prod(os, axis + 1, os.size());
      const std::size_t out_row = os[axis] * inner;
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t row = val(k).dim(axis) * inner;
        if (Tensor* gp = slot(n.inputs[k]))
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t r = 0; r < row; ++r) (*gp)[o * row + r] += g[o * out_row + offset + r];
        offset += row;
      }
      break;
    }
    case OpKind::Slice: {
      if (Tensor* ga = slot(n.inputs[0])) {
        const Shape& is = val(0).shape();
        const std::size_t axis = n.a0, begin = n.a1, end = n.a2;
        const std::size_t outer = prod(is, 0, axis), inner = prod(is, axis + 1, is.size());
        const std::size_t in_row = is[axis] * inner, out_row = (end - begin) * inner;
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t r = 0; r < out_row; ++r) (*ga)[o * in_row + begin * inner + r] += g[o * out_row + r];
      }
      break;
    }
    case OpKind::Reshape: {
      if (Tensor* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      break;
    }
    case OpKind::Dropout: {
      if (Tensor* ga = slot(n.inputs[0])) {
        if (n.aux.empty())
          ga->accumulate(g);
        else
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * n.aux[i];
      }
      break;
    }
    case OpKind::CausalConv1d: {
      const Tensor &x = val(0), &w = val(1);
      const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2), cout = w.dim(0), k = w.dim(2);
      const std::size_t dil = n.a0;
      Tensor* gx = slot(n.inputs[0]);
      Tensor* gw = slot(n.inputs[1]);
      Tensor* gb = slot(n.inputs[2]);
      const double* xd = x.data().data();
      const double* wd = w.data().data();
      for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t o = 0; o < cout; ++o) {
          const double* grow = g.data().data() + (s * cout + o) * len;
          if (gb)
            for (std::size_t t = 0; t < len; ++t) (*gb)[o] += grow[t];
          for (std::size_t c = 0; c < cin; ++c) {
            const double* xrow = xd + (s * cin + c) * len;
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t shift = (k - 1 - j) * dil;
              if (shift >= len) continue;
              const std::size_t widx = (o * cin + c) * k + j;
              if (gw) {
                double acc = 0.0;
                for (std::size_t t = shift; t < len; ++t) acc += grow[t] * xrow[t - shift];
                (*gw)[widx] += acc;
              }
              if (gx) {
                double* gxrow = gx->data().data() + (s * cin + c) * len;
                const double wv_ = wd[widx];
                for (std::size_t t = shift; t < len; ++t) gxrow[t - shift] += grow[t] * wv_;
              }
            }
          }
        }
      break;
    }
    case OpKind::LstmCell: {
      const Tensor &x = val(0), &s = val(1), &w = val(2);
      const std::size_t batch = x.dim(0), in = x.dim(1), hid = s.dim(1) / 2, g4 = 4 * hid;
      Tensor dz({batch, g4});
      Tensor* gs = slot(n.inputs[1]);
      for (std::size_t r = 0; r < batch; ++r) {
        const double* ar = n.aux.data().data() + r * 5 * hid;
        const double* c = s.data().data() + r * 2 * hid + hid;
        const double* gr = g.data().data() + r * 2 * hid;
        double* dzr = dz.data().data() + r * g4;
        for (std::size_t p = 0; p < hid; ++p) {
          const double ig = ar[p], fg = ar[hid + p], gg = ar[2 * hid + p], og = ar[3 * hid + p],
                       tc = ar[4 * hid + p];
          const double dh = gr[p];
          const double dc = gr[hid + p] + dh * og * (1.0 - tc * tc);
          dzr[p] = dc * gg * ig * (1.0 - ig);
          dzr[hid + p] = dc * c[p] * fg * (1.0 - fg);
          dzr[2 * hid + p] = dc * ig * (1.0 - gg * gg);
          dzr[3 * hid + p] = dh * tc * og * (1.0 - og);
          if (gs) (*gs)[r * 2 * hid + hid + p] += dc * fg;
        }
      }
      const double* wd = w.data().data();
      if (Tensor* gx = slot(n.inputs[0])) gemm_nt(dz.data().data(), wd, gx->data().data(), batch, g4, in);
      if (gs)
        for (std::size_t r = 0; r < batch; ++r) {
          const double* dzr = dz.data().data() + r * g4;
          double* gh = gs->data().data() + r * 2 * hid;
          for (std::size_t p = 0; p < hid; ++p) {
            const double* wp = wd + (in + p) * g4;
            double acc = 0.0;
            for (std::size_t j = 0; j < g4; ++j) acc += dzr[j] * wp[j];
            gh[p] += acc;
          }
        }
      if (Tensor* gw = slot(n.inputs[2])) {
        gemm_tn(x.data().data(), dz.data().data(), gw->data().data(), batch, in, g4);
        for (std::size_t r = 0; r < batch; ++r) {
          const double* h = s.data().data() + r * 2 * hid;
          const double* dzr = dz.data().data() + r * g4;
          for (std::size_t p = 0; p < hid; ++p) {
            const double hv = h[p];
            if (hv == 0.0) continue;
            double* gwp = gw->data().data() + (in + p) * g4;
            for (std::size_t j = 0; j < g4; ++j) gwp[j] += hv * dzr[j];
          }
        }
      }
      if (Tensor* gb = slot(n.inputs[3]))
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t j = 0; j < g4; ++j) (*gb)[j] += dz[r * g4 + j];
      break;
    }
    case OpKind::Mse: {
      const Tensor &p = val(0), &t = val(1);
      const double scale = 2.0 * g[0] / static_cast<double>(p.size());
      if (Tensor* gp = slot(n.inputs[0]))
        for (std::size_t i = 0; i < p.size(); ++i) (*gp)[i] += scale * (p[i] - t[i]);
      if (Tensor* gt = slot(n.inputs[1]))
        for (std::size_t i = 0; i < p.size(); ++i) (*gt)[i] -= scale * (p[i] - t[i]);
      break;
    }
  }
}

}  // namespace gridcast::ad
