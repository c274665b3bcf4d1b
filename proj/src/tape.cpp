// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ncdyn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using CMapMat = Eigen::Map<const EMat>;

CMapMat as_mat(const Tensor& t) { return CMapMat(t.data(), t.rows(), t.cols()); }
MapMat as_mat(Tensor& t) { return MapMat(t.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const std::string& why) {
  throw std::invalid_argument(std::string(op) + ": " + why + " (got " + a.shape_str() + ")");
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::relu: return "relu";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::squared_norm: return "squared_norm";
    case OpKind::concat: return "concat";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::scatter_add_rows: return "scatter_add_rows";
    case OpKind::row_scale: return "row_scale";
    case OpKind::rows_sum_sq: return "rows_sum_sq";
    case OpKind::rows_norm: return "rows_norm";
    case OpKind::add_bias: return "add_bias";
    case OpKind::rsqrt: return "rsqrt";
  }
  return "?";
}

void Tape::check_var(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw std::logic_error("tape: invalid Var");
  }
}

Tape::Node& Tape::node(Var v) {
  check_var(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  check_var(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = OpKind::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() != n.value.size()) return Tensor(n.value.shape());
  return n.grad;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

// ---------------------------------------------------------------------------
// forward ops

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("add", ta, tb);
  Node n;
  n.op = OpKind::add;
  n.parents = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] + tb[i];
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
  Node n;
  n.op = OpKind::sub;
  n.parents = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] - tb[i];
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb) && !ta.is_scalar() && !tb.is_scalar()) shape_error("mul", ta, tb);
  Node n;
  n.op = OpKind::mul;
  n.parents = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  if (ta.is_scalar() && !tb.same_shape(ta)) {
    Tensor out(tb.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[0] * tb[i];
    n.value = std::move(out);
  } else if (tb.is_scalar() && !ta.same_shape(tb)) {
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] * tb[0];
    n.value = std::move(out);
  } else {
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] * tb[i];
    n.value = std::move(out);
  }
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  const Tensor& ta = value(a);
  Node n;
  n.op = OpKind::scale;
  n.parents = {a.id};
  n.requires_grad = requires_grad(a);
  n.scalar = c;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * ta[i];
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) shape_error("matmul", ta, tb);
  Node n;
  n.op = OpKind::matmul;
  n.parents = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  Tensor out({ta.rows(), tb.cols()});
  as_mat(out).noalias() = as_mat(ta) * as_mat(tb);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = OpKind::relu;
  n.parents = {a.id};
  n.requires_grad = requires_grad(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  if (tx.rank() != 2) shape_error("layer_norm", tx, "expected rank-2 input");
  const int rows = tx.rows();
  const int cols = tx.cols();
  if (tg.rank() != 1 || tg.dim(0) != cols) shape_error("layer_norm", tx, tg);
  if (tb.rank() != 1 || tb.dim(0) != cols) shape_error("layer_norm", tx, tb);
  Node n;
  n.op = OpKind::layer_norm;
  n.parents = {x.id, gain.id, bias.id};
  n.requires_grad = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  Tensor out({rows, cols});
  Tensor mu({rows});
  Tensor inv_std({rows});
  for (int r = 0; r < rows; ++r) {
    double m = 0.0;
    for (int c = 0; c < cols; ++c) m += tx.at(r, c);
    m /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      double d = tx.at(r, c) - m;
      var += d * d;
    }
    var /= cols;
    double is = 1.0 / std::sqrt(var + kLayerNormEps);
    mu[static_cast<std::size_t>(r)] = m;
    inv_std[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < cols; ++c) {
      out.at(r, c) = (tx.at(r, c) - m) * is * tg[static_cast<std::size_t>(c)] + tb[static_cast<std::size_t>(c)];
    }
  }
  n.value = std::move(out);
  n.saved_a = std::move(mu);
  n.saved_b = std::move(inv_std);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = OpKind::sum;
  n.parents = {a.id};
  n.requires_grad = requires_grad(a);
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta[i];
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Tensor& ta = value(a);
  if (ta.size() == 0) shape_error("mean", ta, "empty input");
  Node n;
  n.op = OpKind::mean;
  n.parents = {a.id};
  n.requires_grad = requires_grad(a);
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta[i];
  n.value = Tensor::scalar(s / static_cast<double>(ta.size()));
  return push(std::move(n));
}

Var Tape::squared_norm(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = OpKind::squared_norm;
  n.parents = {a.id};
  n.requires_grad = requires_grad(a);
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta[i] * ta[i];
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Tape::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  const Tensor& first = value(parts[0]);
  Node n;
  n.op = OpKind::concat;
  n.aux = axis;
  n.requires_grad = false;
  for (Var p : parts) {
    n.parents.push_back(p.id);
    n.requires_grad = n.requires_grad || requires_grad(p);
  }
  if (first.rank() == 1) {
    if (axis != 0) throw std::invalid_argument("concat: axis 1 needs rank-2 inputs");
    int total = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      if (t.rank() != 1) shape_error("concat", first, t);
      total += t.dim(0);
    }
    Tensor out({total});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      for (std::size_t i = 0; i < t.size(); ++i) out[off + i] = t[i];
      off += t.size();
    }
    n.value = std::move(out);
    return push(std::move(n));
  }
  if (first.rank() != 2) shape_error("concat", first, "expected rank-1 or rank-2 inputs");
  if (axis == 0) {
    int rows = 0;
    const int cols = first.cols();
    for (Var p : parts) {
      const Tensor& t = value(p);
      if (t.rank() != 2 || t.cols() != cols) shape_error("concat", first, t);
      rows += t.rows();
    }
    Tensor out({rows, cols});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      for (std::size_t i = 0; i < t.size(); ++i) out[off + i] = t[i];
      off += t.size();
    }
    n.value = std::move(out);
  } else {
    const int rows = first.rows();
    int cols = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      if (t.rank() != 2 || t.rows() != rows) shape_error("concat", first, t);
      cols += t.cols();
    }
    Tensor out({rows, cols});
    int coff = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < t.cols(); ++c) out.at(r, coff + c) = t.at(r, c);
      coff += t.cols();
    }
    n.value = std::move(out);
  }
  return push(std::move(n));
}

Var Tape::gather_rows(Var x, RowIndex rows) {
  const Tensor& tx = value(x);
  if (tx.rank() != 2) shape_error("gather_rows", tx, "expected rank-2 input");
  Node n;
  n.op = OpKind::gather_rows;
  n.parents = {x.id};
  n.requires_grad = requires_grad(x);
  n.rows = std::move(rows);
  const int cols = tx.cols();
  Tensor out({static_cast<int>(n.rows->size()), cols});
  for (std::size_t r = 0; r < n.rows->size(); ++r) {
    int src = (*n.rows)[r];
    if (src < 0 || src >= tx.rows()) throw std::out_of_range("gather_rows: index " + std::to_string(src));
    for (int c = 0; c < cols; ++c) out.at(static_cast<int>(r), c) = tx.at(src, c);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::scatter_add_rows(Var x, RowIndex rows, int out_rows) {
  const Tensor& tx = value(x);
  if (tx.rank() != 2) shape_error("scatter_add_rows", tx, "expected rank-2 input");
  if (static_cast<int>(rows->size()) != tx.rows()) {
    shape_error("scatter_add_rows", tx, "index count " + std::to_string(rows->size()) + " != rows");
  }
  Node n;
  n.op = OpKind::scatter_add_rows;
  n.parents = {x.id};
  n.requires_grad = requires_grad(x);
  n.rows = std::move(rows);
  n.aux = out_rows;
  const int cols = tx.cols();
  Tensor out({out_rows, cols});
  for (int r = 0; r < tx.rows(); ++r) {
    int dst = (*n.rows)[static_cast<std::size_t>(r)];
    if (dst < 0 || dst >= out_rows) throw std::out_of_range("scatter_add_rows: index " + std::to_string(dst));
    for (int c = 0; c < cols; ++c) out.at(dst, c) += tx.at(r, c);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::row_scale(Var scales, Var x) {
  const Tensor& ts = value(scales);
  const Tensor& tx = value(x);
  if (ts.rank() != 2 || ts.cols() != 1 || tx.rank() != 2 || ts.rows() != tx.rows()) {
    shape_error("row_scale", ts, tx);
  }
  Node n;
  n.op = OpKind::row_scale;
  n.parents = {scales.id, x.id};
  n.requires_grad = requires_grad(scales) || requires_grad(x);
  Tensor out(tx.shape());
  for (int r = 0; r < tx.rows(); ++r) {
    double s = ts.at(r, 0);
    for (int c = 0; c < tx.cols(); ++c) out.at(r, c) = s * tx.at(r, c);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::rows_sum_sq(Var x) {
  const Tensor& tx = value(x);
  if (tx.rank() != 2) shape_error("rows_sum_sq", tx, "expected rank-2 input");
  Node n;
  n.op = OpKind::rows_sum_sq;
  n.parents = {x.id};
  n.requires_grad = requires_grad(x);
  Tensor out({tx.rows(), 1});
  for (int r = 0; r < tx.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < tx.cols(); ++c) s += tx.at(r, c) * tx.at(r, c);
    out.at(r, 0) = s;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::rows_norm(Var x) {
  const Tensor& tx = value(x);
  if (tx.rank() != 2) shape_error("rows_norm", tx, "expected rank-2 input");
  Node n;
  n.op = OpKind::rows_norm;
  n.parents = {x.id};
  n.requires_grad = requires_grad(x);
  Tensor out({tx.rows(), 1});
  for (int r = 0; r < tx.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < tx.cols(); ++c) s += tx.at(r, c) * tx.at(r, c);
    out.at(r, 0) = std::sqrt(s);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::add_bias(Var x, Var b) {
  const Tensor& tx = value(x);
  const Tensor& tb = value(b);
  if (tx.rank() != 2 || tb.rank() != 1 || tb.dim(0) != tx.cols()) shape_error("add_bias", tx, tb);
  Node n;
  n.op = OpKind::add_bias;
  n.parents = {x.id, b.id};
  n.requires_grad = requires_grad(x) || requires_grad(b);
  Tensor out(tx.shape());
  for (int r = 0; r < tx.rows(); ++r)
    for (int c = 0; c < tx.cols(); ++c) out.at(r, c) = tx.at(r, c) + tb[static_cast<std::size_t>(c)];
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::rsqrt(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = OpKind::rsqrt;
  n.parents = {a.id};
  n.requires_grad = requires_grad(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i] <= 0.0) throw std::domain_error("rsqrt: non-positive input " + std::to_string(ta[i]));
    out[i] = 1.0 / std::sqrt(ta[i]);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::mse_loss(Var pred, Var target) {
  if (!value(pred).same_shape(value(target))) shape_error("mse_loss", value(pred), value(target));
  const std::size_t numel = value(pred).size();
  Var d = sub(pred, target);
  return scale(squared_norm(d), 1.0 / static_cast<double>(numel));
}

// ---------------------------------------------------------------------------
// backward

void Tape::backward(Var loss) {
  const Node& ln = node(loss);
  if (!ln.value.is_scalar()) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + ln.value.shape_str());
  }
  // Clear any previous gradients.
  for (Node& n : nodes_) n.grad = Tensor();
  // Mark nodes that can reach the loss.
  std::vector<char> reachable(nodes_.size(), 0);
  reachable[static_cast<std::size_t>(loss.id)] = 1;
  for (int i = loss.id; i >= 0; --i) {
    if (!reachable[static_cast<std::size_t>(i)]) continue;
    for (int p : nodes_[static_cast<std::size_t>(i)].parents) reachable[static_cast<std::size_t>(p)] = 1;
  }
  grad_buf(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    if (!reachable[static_cast<std::size_t>(i)]) continue;
    if (!nodes_[static_cast<std::size_t>(i)].requires_grad) continue;
    if (nodes_[static_cast<std::size_t>(i)].grad.size() == 0) continue;  // no upstream contribution
    backward_into(i);
  }
}

void Tape::backward_into(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Tensor& g = n.grad;
  auto parent_needs = [&](int slot) {
    return nodes_[static_cast<std::size_t>(n.parents[static_cast<std::size_t>(slot)])].requires_grad;
  };
  auto pvalue = [&](int slot) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.parents[static_cast<std::size_t>(slot)])].value;
  };
  auto pgrad = [&](int slot) -> Tensor& { return grad_buf(n.parents[static_cast<std::size_t>(slot)]); };

  switch (n.op) {
    case OpKind::leaf:
      break;
    case OpKind::add: {
      for (int s = 0; s < 2; ++s) {
        if (!parent_needs(s)) continue;
        Tensor& pg = pgrad(s);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      break;
    }
    case OpKind::sub: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      if (parent_needs(1)) {
        Tensor& pg = pgrad(1);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] -= g[i];
      }
      break;
    }
    case OpKind::mul: {
      const Tensor& a = pvalue(0);
      const Tensor& b = pvalue(1);
      bool a_scalar = a.is_scalar() && !a.same_shape(b);
      bool b_scalar = b.is_scalar() && !b.same_shape(a);
      if (a_scalar) {
        if (parent_needs(0)) {
          double s = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * b[i];
          pgrad(0)[0] += s;
        }
        if (parent_needs(1)) {
          Tensor& pg = pgrad(1);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * a[0];
        }
      } else if (b_scalar) {
        if (parent_needs(0)) {
          Tensor& pg = pgrad(0);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * b[0];
        }
        if (parent_needs(1)) {
          double s = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * a[i];
          pgrad(1)[0] += s;
        }
      } else {
        if (parent_needs(0)) {
          Tensor& pg = pgrad(0);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * b[i];
        }
        if (parent_needs(1)) {
          Tensor& pg = pgrad(1);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * a[i];
        }
      }
      break;
    }
    case OpKind::scale: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += n.scalar * g[i];
      }
      break;
    }
    case OpKind::matmul: {
      const Tensor& a = pvalue(0);
      const Tensor& b = pvalue(1);
      if (parent_needs(0)) {
        as_mat(pgrad(0)).noalias() += as_mat(g) * as_mat(b).transpose();
      }
      if (parent_needs(1)) {
        as_mat(pgrad(1)).noalias() += as_mat(a).transpose() * as_mat(g);
      }
      break;
    }
    case OpKind::relu: {
      if (parent_needs(0)) {
        const Tensor& x = pvalue(0);
        Tensor& pg = pgrad(0);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += x[i] > 0.0 ? g[i] : 0.0;
      }
      break;
    }
    case OpKind::layer_norm: {
      const Tensor& x = pvalue(0);
      const Tensor& gain = pvalue(1);
      const int rows = x.rows();
      const int cols = x.cols();
      const Tensor& mu = n.saved_a;
      const Tensor& inv_std = n.saved_b;
      bool need_x = parent_needs(0), need_g = parent_needs(1), need_b = parent_needs(2);
      for (int r = 0; r < rows; ++r) {
        double m = mu[static_cast<std::size_t>(r)];
        double is = inv_std[static_cast<std::size_t>(r)];
        double mean_gy = 0.0, mean_gyx = 0.0;
        for (int c = 0; c < cols; ++c) {
          double xhat = (x.at(r, c) - m) * is;
          double gy = g.at(r, c) * gain[static_cast<std::size_t>(c)];
          mean_gy += gy;
          mean_gyx += gy * xhat;
        }
        mean_gy /= cols;
        mean_gyx /= cols;
        for (int c = 0; c < cols; ++c) {
          double xhat = (x.at(r, c) - m) * is;
          if (need_x) {
            double gy = g.at(r, c) * gain[static_cast<std::size_t>(c)];
            pgrad(0).at(r, c) += is * (gy - mean_gy - xhat * mean_gyx);
          }
          if (need_g) pgrad(1)[static_cast<std::size_t>(c)] += g.at(r, c) * xhat;
          if (need_b) pgrad(2)[static_cast<std::size_t>(c)] += g.at(r, c);
        }
      }
      break;
    }
    case OpKind::sum: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[0];
      }
      break;
    }
    case OpKind::mean: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        double s = g[0] / static_cast<double>(pg.size());
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += s;
      }
      break;
    }
    case OpKind::squared_norm: {
      if (parent_needs(0)) {
        const Tensor& x = pvalue(0);
        Tensor& pg = pgrad(0);
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += 2.0 * g[0] * x[i];
      }
      break;
    }
    case OpKind::concat: {
      int axis = n.aux;
      if (axis == 0 || pvalue(0).rank() == 1) {
        std::size_t off = 0;
        for (std::size_t s = 0; s < n.parents.size(); ++s) {
          const Tensor& p = pvalue(static_cast<int>(s));
          if (parent_needs(static_cast<int>(s))) {
            Tensor& pg = pgrad(static_cast<int>(s));
            for (std::size_t i = 0; i < p.size(); ++i) pg[i] += g[off + i];
          }
          off += p.size();
        }
      } else {
        int coff = 0;
        const int rows = n.value.rows();
        for (std::size_t s = 0; s < n.parents.size(); ++s) {
          const Tensor& p = pvalue(static_cast<int>(s));
          if (parent_needs(static_cast<int>(s))) {
            Tensor& pg = pgrad(static_cast<int>(s));
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < p.cols(); ++c) pg.at(r, c) += g.at(r, coff + c);
          }
          coff += p.cols();
        }
      }
      break;
    }
    case OpKind::gather_rows: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        const int cols = n.value.cols();
        for (std::size_t r = 0; r < n.rows->size(); ++r) {
          int src = (*n.rows)[r];
          for (int c = 0; c < cols; ++c) pg.at(src, c) += g.at(static_cast<int>(r), c);
        }
      }
      break;
    }
    case OpKind::scatter_add_rows: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        const int cols = n.value.cols();
        for (int r = 0; r < pg.rows(); ++r) {
          int dst = (*n.rows)[static_cast<std::size_t>(r)];
          for (int c = 0; c < cols; ++c) pg.at(r, c) += g.at(dst, c);
        }
      }
      break;
    }
    case OpKind::row_scale: {
      const Tensor& s = pvalue(0);
      const Tensor& x = pvalue(1);
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        for (int r = 0; r < x.rows(); ++r) {
          double acc = 0.0;
          for (int c = 0; c < x.cols(); ++c) acc += g.at(r, c) * x.at(r, c);
          pg.at(r, 0) += acc;
        }
      }
      if (parent_needs(1)) {
        Tensor& pg = pgrad(1);
        for (int r = 0; r < x.rows(); ++r) {
          double sv = s.at(r, 0);
          for (int c = 0; c < x.cols(); ++c) pg.at(r, c) += sv * g.at(r, c);
        }
      }
      break;
    }
    case OpKind::rows_sum_sq: {
      if (parent_needs(0)) {
        const Tensor& x = pvalue(0);
        Tensor& pg = pgrad(0);
        for (int r = 0; r < x.rows(); ++r) {
          double gr = g.at(r, 0);
          for (int c = 0; c < x.cols(); ++c) pg.at(r, c) += 2.0 * x.at(r, c) * gr;
        }
      }
      break;
    }
    case OpKind::rows_norm: {
      if (parent_needs(0)) {
        const Tensor& x = pvalue(0);
        Tensor& pg = pgrad(0);
        for (int r = 0; r < x.rows(); ++r) {
          double norm = n.value.at(r, 0);
          if (norm == 0.0) continue;  // subgradient 0 at the origin
          double gr = g.at(r, 0) / norm;
          for (int c = 0; c < x.cols(); ++c) pg.at(r, c) += x.at(r, c) * gr;
        }
      }
      break;
    }
    case OpKind::add_bias: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      if (parent_needs(1)) {
        Tensor& pg = pgrad(1);
        const int rows = n.value.rows();
        const int cols = n.value.cols();
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) pg[static_cast<std::size_t>(c)] += g.at(r, c);
      }
      break;
    }
    case OpKind::rsqrt: {
      if (parent_needs(0)) {
        Tensor& pg = pgrad(0);
        const Tensor& y = n.value;
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += -0.5 * y[i] * y[i] * y[i] * g[i];
      }
      break;
    }
  }
}

}  // namespace ncdyn
