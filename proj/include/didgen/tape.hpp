// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "didgen/types.hpp"

namespace didgen::ad {

class Tape;

/// Lightweight handle to a tape node. All tensor values are dense matrices;
/// column vectors are N x 1 and scalars 1 x 1.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Append-only record of a forward computation. Nodes are stored in
/// topological order by construction; backward() sweeps them exactly once in
/// reverse, accumulating adjoints into per-node gradient buffers.
///
/// A tape is single-threaded; independent tapes may run concurrently.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, int self)>;

  Var leaf(Matrix value, bool requires_grad = true) {
    return make(std::move(value), requires_grad, nullptr, "leaf");
  }
  Var constant(Matrix value) {
    return make(std::move(value), false, nullptr, "constant");
  }
  Var scalar(double v, bool requires_grad = false) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return make(std::move(m), requires_grad, nullptr, "scalar");
  }

  /// Appends a node. `back` receives the tape and the node's own id and must
  /// push adjoints into the parents via add_grad(). Rejects non-finite
  /// forward values.
  Var make(Matrix value, bool requires_grad, BackFn back, const char* tag);

  const Matrix& value(Var v) const { return node(v.id).value; }
  double scalar_value(Var v) const;

  /// Gradient of the last backward() root w.r.t. v (zero if unreached).
  const Matrix& grad(Var v);

  /// Accumulates g into node id's gradient buffer (no-op for nodes that do
  /// not require gradients).
  void add_grad(int id, const Matrix& g);
  bool requires_grad(int id) const { return node(id).requires_grad; }
  bool grad_present(int id) const { return node(id).grad.size() > 0; }
  const Matrix& grad_of(int id) const { return node(id).grad; }

  /// Reverse sweep from a scalar root. Every node with index <= root is
  /// visited exactly once; the visit counter backs the single-visit
  /// invariant check.
  void backward(Var root);

  int size() const { return static_cast<int>(nodes_.size()); }
  int64_t backward_visits() const { return visits_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched
    BackFn back;
    bool requires_grad = false;
  };

  const Node& node(int id) const;
  Node& node(int id);

  std::vector<Node> nodes_;
  int64_t visits_ = 0;
  bool swept_ = false;
};

// ---- op builders -----------------------------------------------------
// Shape mismatches throw ShapeError naming both operand shapes.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);  // elementwise product
Var matmul(Var a, Var b);
Var transpose(Var a);
Var square(Var a);
Var sum(Var a);            // full reduction -> 1x1
Var row_sums(Var a);       // N x M -> N x 1
Var col_sums(Var a);       // N x M -> 1 x M
Var sigmoid(Var a);
Var softplus(Var a);
Var relu(Var a);
Var exp_elem(Var a);
Var log_elem(Var a);
Var sqrt_elem(Var a);
Var abs_elem(Var a);  // adjoint uses sign(x), 0 at the origin
Var scale(Var a, double s);
Var add_scalar(Var a, double c);
Var add_const(Var a, const Matrix& c);
Var mul_const(Var a, const Matrix& c);  // also serves dropout masks
Var add_rowvec(Var a, Var row);         // broadcast 1 x M over rows
Var div_by_scalar(Var a, Var s);        // s is 1x1
Var hconcat(const std::vector<Var>& parts);
Var vconcat(const std::vector<Var>& parts);
Var rows(Var a, int first, int count);
Var cols(Var a, int first, int count);
Var gather(Var a, std::vector<std::pair<int, int>> entries);  // -> K x 1

/// Elementwise x -> [x] + slope * (x - [x]) with [x] the round-half-up
/// function; the adjoint is exactly `slope` everywhere.
Var sloped_round(Var a, double slope);

/// Per-row near-argmax transform: the row maximum (ties: lowest column)
/// maps to 1 - a*(1 - x), every other entry to b*x.
Var sloped_max_rows(Var a, double a_max, double b_max);

/// Per-row log-softmax with the usual max-shift stabilization.
Var log_softmax_rows(Var a);

/// Batch normalization over rows (per-column statistics).
struct BatchNormState {
  Vector running_mean;
  Vector running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  int64_t batches_seen = 0;

  static BatchNormState fresh(int channels, double momentum = 0.1);
};

/// Train mode normalizes with batch statistics and updates the running
/// buffers; eval mode applies the frozen affine map. gamma/beta are 1 x C.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, bool train);

}  // namespace didgen::ad
