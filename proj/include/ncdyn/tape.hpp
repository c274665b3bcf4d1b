// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "ncdyn/tensor.hpp"

namespace ncdyn {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,          // elementwise; one side may be a scalar (the only broadcast allowed)
  scale,        // tensor * compile-time constant
  matmul,
  relu,
  layer_norm,   // (x, gain, bias), row-wise over the last axis
  sum,
  mean,
  squared_norm,
  concat,       // axis 0 or 1
  gather_rows,
  scatter_add_rows,
  row_scale,    // (scales [R,1], x [R,C])
  rows_sum_sq,  // [R,C] -> [R,1]
  rows_norm,    // [R,C] -> [R,1] L2 per row
  add_bias,     // (x [R,C], b [C])
  rsqrt,        // elementwise x^{-1/2}
};

const char* op_name(OpKind k);

// Handle into a Tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

using RowIndex = std::shared_ptr<const std::vector<int>>;

// Append-only reverse-mode tape. Nodes are topologically ordered by
// construction (parents always precede children). Single-threaded; run
// independent tapes on independent threads.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  Var relu(Var a);
  Var layer_norm(Var x, Var gain, Var bias);
  Var sum(Var a);
  Var mean(Var a);
  Var squared_norm(Var a);
  Var concat(const std::vector<Var>& parts, int axis);
  Var gather_rows(Var x, RowIndex rows);
  Var scatter_add_rows(Var x, RowIndex rows, int out_rows);
  Var row_scale(Var scales, Var x);
  Var rows_sum_sq(Var x);
  Var rows_norm(Var x);
  Var add_bias(Var x, Var b);
  Var rsqrt(Var a);

  // Mean of squared differences; composed from primitives.
  Var mse_loss(Var pred, Var target);

  // Populates gradients for every node that can reach `loss`.
  // `loss` must be scalar.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() w.r.t. v; zeros if v was unreachable.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op = OpKind::leaf;
    std::vector<int> parents;
    Tensor value;
    Tensor grad;  // empty until backward touches it
    bool requires_grad = false;
    double scalar = 0.0;    // scale factor
    int aux = 0;            // concat axis / scatter out_rows
    RowIndex rows;          // gather/scatter index list
    Tensor saved_a, saved_b;  // layer_norm row mean / inv-std
  };

  Var push(Node n);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_buf(int id);
  void check_var(Var v) const;
  void backward_into(int id);

  // Deque keeps value()/grad() references stable while new ops are recorded.
  std::deque<Node> nodes_;
};

}  // namespace ncdyn
