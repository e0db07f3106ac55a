// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace didgen::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void check_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

double round_half_up(double x) { return std::floor(x + 0.5); }

}  // namespace

Var Tape::make(Matrix value, bool requires_grad, BackFn back,
               const char* tag) {
  if (!value.allFinite()) {
    throw NumericError(std::string("op '") + tag +
                       "' produced non-finite values");
  }
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(int id) const {
  require(id >= 0 && id < size(), "bad node id");
  return nodes_[id];
}

Tape::Node& Tape::node(int id) {
  require(id >= 0 && id < size(), "bad node id");
  return nodes_[id];
}

double Tape::scalar_value(Var v) const {
  const Matrix& m = value(v);
  require(m.rows() == 1 && m.cols() == 1, "scalar_value on non-scalar node");
  return m(0, 0);
}

const Matrix& Tape::grad(Var v) {
  Node& n = node(v.id);
  if (n.grad.size() == 0) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::add_grad(int id, const Matrix& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  check_same_shape("add_grad", n.value, g);
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  require(root.tape == this, "root from another tape");
  require(!swept_, "backward may run once per tape");
  swept_ = true;
  const Matrix& rv = node(root.id).value;
  require(rv.rows() == 1 && rv.cols() == 1, "backward root must be scalar");
  node(root.id).requires_grad = true;
  node(root.id).grad = Matrix::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    ++visits_;
    Node& n = nodes_[i];
    if (n.back && n.requires_grad && n.grad.size() > 0) n.back(*this, i);
  }
}

namespace {

Tape* same_tape(Var a, Var b) {
  require(a.valid() && b.valid(), "invalid Var");
  require(a.tape == b.tape, "operands live on different tapes");
  return a.tape;
}

bool any_grad(std::initializer_list<Var> vs) {
  for (Var v : vs) {
    if (v.tape->requires_grad(v.id)) return true;
  }
  return false;
}

}  // namespace

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b);
  check_same_shape("add", t->value(a), t->value(b));
  int pa = a.id, pb = b.id;
  return t->make(t->value(a) + t->value(b), any_grad({a, b}),
                 [pa, pb](Tape& t, int self) {
                   t.add_grad(pa, t.grad_of(self));
                   t.add_grad(pb, t.grad_of(self));
                 },
                 "add");
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b);
  check_same_shape("sub", t->value(a), t->value(b));
  int pa = a.id, pb = b.id;
  return t->make(t->value(a) - t->value(b), any_grad({a, b}),
                 [pa, pb](Tape& t, int self) {
                   t.add_grad(pa, t.grad_of(self));
                   t.add_grad(pb, Matrix(-t.grad_of(self)));
                 },
                 "sub");
}

Var cmul(Var a, Var b) {
  Tape* t = same_tape(a, b);
  check_same_shape("cmul", t->value(a), t->value(b));
  int pa = a.id, pb = b.id;
  return t->make(t->value(a).cwiseProduct(t->value(b)), any_grad({a, b}),
                 [pa, pb](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   if (t.requires_grad(pa))
                     t.add_grad(pa, g.cwiseProduct(t.value(Var{&t, pb})));
                   if (t.requires_grad(pb))
                     t.add_grad(pb, g.cwiseProduct(t.value(Var{&t, pa})));
                 },
                 "cmul");
}

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b);
  const Matrix& av = t->value(a);
  const Matrix& bv = t->value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_str(av) +
                     " vs " + shape_str(bv));
  }
  int pa = a.id, pb = b.id;
  return t->make(av * bv, any_grad({a, b}),
                 [pa, pb](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   if (t.requires_grad(pa))
                     t.add_grad(pa, g * t.value(Var{&t, pb}).transpose());
                   if (t.requires_grad(pb))
                     t.add_grad(pb, t.value(Var{&t, pa}).transpose() * g);
                 },
                 "matmul");
}

Var transpose(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).transpose(), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   t.add_grad(pa, t.grad_of(self).transpose());
                 },
                 "transpose");
}

Var square(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).array().square().matrix(), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   t.add_grad(pa, (2.0 * t.value(Var{&t, pa}).array() *
                                   t.grad_of(self).array())
                                      .matrix());
                 },
                 "square");
}

Var sum(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  Matrix out(1, 1);
  out(0, 0) = t->value(a).sum();
  long r = t->value(a).rows(), c = t->value(a).cols();
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa, r, c](Tape& t, int self) {
                   t.add_grad(pa, Matrix::Constant(r, c, t.grad_of(self)(0, 0)));
                 },
                 "sum");
}

Var row_sums(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  long c = t->value(a).cols();
  return t->make(t->value(a).rowwise().sum(), t->requires_grad(pa),
                 [pa, c](Tape& t, int self) {
                   t.add_grad(pa, t.grad_of(self).replicate(1, c));
                 },
                 "row_sums");
}

Var col_sums(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  long r = t->value(a).rows();
  return t->make(t->value(a).colwise().sum(), t->requires_grad(pa),
                 [pa, r](Tape& t, int self) {
                   t.add_grad(pa, t.grad_of(self).replicate(r, 1));
                 },
                 "col_sums");
}

Var sigmoid(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  Matrix out = t->value(a).unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
  });
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   const auto s = t.value(Var{&t, self}).array();
                   t.add_grad(pa, (s * (1.0 - s) * t.grad_of(self).array())
                                      .matrix());
                 },
                 "sigmoid");
}

Var softplus(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  Matrix out = t->value(a).unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   Matrix s = t.value(Var{&t, pa}).unaryExpr([](double x) {
                     return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                   : std::exp(x) / (1.0 + std::exp(x));
                   });
                   t.add_grad(pa, s.cwiseProduct(t.grad_of(self)));
                 },
                 "softplus");
}

Var relu(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).cwiseMax(0.0), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   Matrix mask = (t.value(Var{&t, pa}).array() > 0.0)
                                     .cast<double>()
                                     .matrix();
                   t.add_grad(pa, mask.cwiseProduct(t.grad_of(self)));
                 },
                 "relu");
}

Var exp_elem(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).array().exp().matrix(), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   t.add_grad(pa, t.value(Var{&t, self})
                                      .cwiseProduct(t.grad_of(self)));
                 },
                 "exp");
}

Var log_elem(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).array().log().matrix(), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   t.add_grad(pa, t.grad_of(self)
                                      .cwiseQuotient(t.value(Var{&t, pa})));
                 },
                 "log");
}

Var sqrt_elem(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).array().sqrt().matrix(), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   t.add_grad(pa, (0.5 * t.grad_of(self).array() /
                                   t.value(Var{&t, self}).array())
                                      .matrix());
                 },
                 "sqrt");
}

Var abs_elem(Var a) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(t->value(a).cwiseAbs(), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   Matrix sign = t.value(Var{&t, pa}).unaryExpr([](double x) {
                     return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
                   });
                   t.add_grad(pa, sign.cwiseProduct(t.grad_of(self)));
                 },
                 "abs");
}

Var scale(Var a, double s) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make(s * t->value(a), t->requires_grad(pa),
                 [pa, s](Tape& t, int self) {
                   t.add_grad(pa, Matrix(s * t.grad_of(self)));
                 },
                 "scale");
}

Var add_scalar(Var a, double c) {
  Tape* t = a.tape;
  int pa = a.id;
  return t->make((t->value(a).array() + c).matrix(), t->requires_grad(pa),
                 [pa](Tape& t, int self) { t.add_grad(pa, t.grad_of(self)); },
                 "add_scalar");
}

Var add_const(Var a, const Matrix& c) {
  Tape* t = a.tape;
  check_same_shape("add_const", t->value(a), c);
  int pa = a.id;
  return t->make(t->value(a) + c, t->requires_grad(pa),
                 [pa](Tape& t, int self) { t.add_grad(pa, t.grad_of(self)); },
                 "add_const");
}

Var mul_const(Var a, const Matrix& c) {
  Tape* t = a.tape;
  check_same_shape("mul_const", t->value(a), c);
  int pa = a.id;
  Matrix cc = c;
  return t->make(t->value(a).cwiseProduct(c), t->requires_grad(pa),
                 [pa, cc](Tape& t, int self) {
                   t.add_grad(pa, cc.cwiseProduct(t.grad_of(self)));
                 },
                 "mul_const");
}

Var add_rowvec(Var a, Var row) {
  Tape* t = same_tape(a, row);
  const Matrix& av = t->value(a);
  const Matrix& rv = t->value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_rowvec: want 1x" + std::to_string(av.cols()) +
                     ", got " + shape_str(rv));
  }
  int pa = a.id, pr = row.id;
  return t->make(av.rowwise() + rv.row(0), any_grad({a, row}),
                 [pa, pr](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   t.add_grad(pa, g);
                   if (t.requires_grad(pr))
                     t.add_grad(pr, g.colwise().sum());
                 },
                 "add_rowvec");
}

Var div_by_scalar(Var a, Var s) {
  Tape* t = same_tape(a, s);
  const Matrix& sv = t->value(s);
  require(sv.rows() == 1 && sv.cols() == 1, "div_by_scalar needs 1x1 divisor");
  double d = sv(0, 0);
  require(d != 0.0, "division by zero scalar");
  int pa = a.id, ps = s.id;
  return t->make(t->value(a) / d, any_grad({a, s}),
                 [pa, ps, d](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   if (t.requires_grad(pa)) t.add_grad(pa, Matrix(g / d));
                   if (t.requires_grad(ps)) {
                     Matrix gs(1, 1);
                     gs(0, 0) = -(g.cwiseProduct(t.value(Var{&t, self}))).sum() / d;
                     t.add_grad(ps, gs);
                   }
                 },
                 "div_by_scalar");
}

Var hconcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "hconcat of nothing");
  Tape* t = parts[0].tape;
  long r = t->value(parts[0]).rows();
  long c = 0;
  bool needs = false;
  for (Var p : parts) {
    require(p.tape == t, "operands live on different tapes");
    require(t->value(p).rows() == r, "hconcat: row counts differ");
    c += t->value(p).cols();
    needs = needs || t->requires_grad(p.id);
  }
  Matrix out(r, c);
  std::vector<std::pair<int, std::pair<long, long>>> layout;  // id, (c0, nc)
  long at = 0;
  for (Var p : parts) {
    long nc = t->value(p).cols();
    out.middleCols(at, nc) = t->value(p);
    layout.push_back({p.id, {at, nc}});
    at += nc;
  }
  return t->make(std::move(out), needs,
                 [layout](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   for (const auto& [id, span] : layout) {
                     t.add_grad(id, g.middleCols(span.first, span.second));
                   }
                 },
                 "hconcat");
}

Var vconcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "vconcat of nothing");
  Tape* t = parts[0].tape;
  long c = t->value(parts[0]).cols();
  long r = 0;
  bool needs = false;
  for (Var p : parts) {
    require(p.tape == t, "operands live on different tapes");
    require(t->value(p).cols() == c, "vconcat: column counts differ");
    r += t->value(p).rows();
    needs = needs || t->requires_grad(p.id);
  }
  Matrix out(r, c);
  std::vector<std::pair<int, std::pair<long, long>>> layout;  // id, (r0, nr)
  long at = 0;
  for (Var p : parts) {
    long nr = t->value(p).rows();
    out.middleRows(at, nr) = t->value(p);
    layout.push_back({p.id, {at, nr}});
    at += nr;
  }
  return t->make(std::move(out), needs,
                 [layout](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   for (const auto& [id, span] : layout) {
                     t.add_grad(id, g.middleRows(span.first, span.second));
                   }
                 },
                 "vconcat");
}

Var rows(Var a, int first, int count) {
  Tape* t = a.tape;
  const Matrix& av = t->value(a);
  require(first >= 0 && count >= 0 && first + count <= av.rows(),
          "rows: slice out of range");
  int pa = a.id;
  long r = av.rows(), c = av.cols();
  return t->make(av.middleRows(first, count), t->requires_grad(pa),
                 [pa, first, count, r, c](Tape& t, int self) {
                   Matrix g = Matrix::Zero(r, c);
                   g.middleRows(first, count) = t.grad_of(self);
                   t.add_grad(pa, g);
                 },
                 "rows");
}

Var cols(Var a, int first, int count) {
  Tape* t = a.tape;
  const Matrix& av = t->value(a);
  require(first >= 0 && count >= 0 && first + count <= av.cols(),
          "cols: slice out of range");
  int pa = a.id;
  long r = av.rows(), c = av.cols();
  return t->make(av.middleCols(first, count), t->requires_grad(pa),
                 [pa, first, count, r, c](Tape& t, int self) {
                   Matrix g = Matrix::Zero(r, c);
                   g.middleCols(first, count) = t.grad_of(self);
                   t.add_grad(pa, g);
                 },
                 "cols");
}

Var gather(Var a, std::vector<std::pair<int, int>> entries) {
  Tape* t = a.tape;
  const Matrix& av = t->value(a);
  Matrix out(static_cast<long>(entries.size()), 1);
  for (size_t k = 0; k < entries.size(); ++k) {
    auto [i, j] = entries[k];
    require(i >= 0 && i < av.rows() && j >= 0 && j < av.cols(),
            "gather: index out of range");
    out(static_cast<long>(k), 0) = av(i, j);
  }
  int pa = a.id;
  long r = av.rows(), c = av.cols();
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa, entries = std::move(entries), r, c](Tape& t, int self) {
                   Matrix g = Matrix::Zero(r, c);
                   const Matrix& gs = t.grad_of(self);
                   for (size_t k = 0; k < entries.size(); ++k) {
                     g(entries[k].first, entries[k].second) +=
                         gs(static_cast<long>(k), 0);
                   }
                   t.add_grad(pa, g);
                 },
                 "gather");
}

Var sloped_round(Var a, double slope) {
  Tape* t = a.tape;
  require(slope > 0.0 && slope <= 1.0, "sloped_round slope must be in (0,1]");
  int pa = a.id;
  Matrix out = t->value(a).unaryExpr([slope](double x) {
    double r = round_half_up(x);
    return r + slope * (x - r);
  });
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa, slope](Tape& t, int self) {
                   t.add_grad(pa, Matrix(slope * t.grad_of(self)));
                 },
                 "sloped_round");
}

Var sloped_max_rows(Var a, double a_max, double b_max) {
  Tape* t = a.tape;
  const Matrix& av = t->value(a);
  require(av.cols() >= 1, "sloped_max_rows on empty rows");
  std::vector<int> argmax(av.rows());
  Matrix out(av.rows(), av.cols());
  for (long i = 0; i < av.rows(); ++i) {
    int best = 0;
    for (long j = 1; j < av.cols(); ++j) {
      if (av(i, j) > av(i, best)) best = static_cast<int>(j);
    }
    argmax[i] = best;
    for (long j = 0; j < av.cols(); ++j) {
      out(i, j) = (j == best) ? 1.0 - a_max * (1.0 - av(i, j))
                              : b_max * av(i, j);
    }
  }
  int pa = a.id;
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa, argmax = std::move(argmax), a_max, b_max](Tape& t,
                                                                int self) {
                   const Matrix& g = t.grad_of(self);
                   Matrix ga(g.rows(), g.cols());
                   for (long i = 0; i < g.rows(); ++i) {
                     for (long j = 0; j < g.cols(); ++j) {
                       ga(i, j) = g(i, j) * (j == argmax[i] ? a_max : b_max);
                     }
                   }
                   t.add_grad(pa, ga);
                 },
                 "sloped_max_rows");
}

Var log_softmax_rows(Var a) {
  Tape* t = a.tape;
  const Matrix& av = t->value(a);
  Matrix out(av.rows(), av.cols());
  for (long i = 0; i < av.rows(); ++i) {
    double m = av.row(i).maxCoeff();
    double lse = std::log((av.row(i).array() - m).exp().sum());
    out.row(i) = av.row(i).array() - m - lse;
  }
  int pa = a.id;
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa](Tape& t, int self) {
                   const Matrix& g = t.grad_of(self);
                   const Matrix& ls = t.value(Var{&t, self});
                   Matrix soft = ls.array().exp().matrix();
                   Vector gsum = g.rowwise().sum();
                   Matrix ga =
                       g - (soft.array().colwise() * gsum.array()).matrix();
                   t.add_grad(pa, ga);
                 },
                 "log_softmax_rows");
}

BatchNormState BatchNormState::fresh(int channels, double momentum) {
  BatchNormState st;
  st.running_mean = Vector::Zero(channels);
  st.running_var = Vector::Ones(channels);
  st.momentum = momentum;
  return st;
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, bool train) {
  Tape* t = same_tape(x, gamma);
  same_tape(gamma, beta);
  const Matrix& xv = t->value(x);
  const long r = xv.rows(), c = xv.cols();
  const Matrix& gv = t->value(gamma);
  const Matrix& bv = t->value(beta);
  require(gv.rows() == 1 && gv.cols() == c, "batch_norm: gamma must be 1xC");
  require(bv.rows() == 1 && bv.cols() == c, "batch_norm: beta must be 1xC");
  require(state.running_mean.size() == c, "batch_norm: state width mismatch");

  RowVector mean(c), invstd(c);
  if (train) {
    require(r >= 2, "batch_norm train mode needs >= 2 rows");
    mean = xv.colwise().mean();
    RowVector var =
        (xv.rowwise() - mean).array().square().colwise().mean().matrix();
    invstd = (var.array() + state.eps).sqrt().inverse().matrix();
    const double m = state.momentum;
    state.running_mean =
        ((1.0 - m) * state.running_mean.transpose() + m * mean).transpose();
    state.running_var =
        ((1.0 - m) * state.running_var.transpose() + m * var).transpose();
    ++state.batches_seen;
  } else {
    mean = state.running_mean.transpose();
    invstd = (state.running_var.transpose().array() + state.eps)
                 .sqrt()
                 .inverse()
                 .matrix();
  }

  Matrix xhat = (xv.rowwise() - mean).array().rowwise() * invstd.array();
  Matrix out = (xhat.array().rowwise() * gv.row(0).array()).rowwise() +
               bv.row(0).array();

  int px = x.id, pg = gamma.id, pb = beta.id;
  bool needs = any_grad({x, gamma, beta});
  return t->make(
      std::move(out), needs,
      [px, pg, pb, xhat = std::move(xhat), invstd, gv, train](Tape& t,
                                                              int self) {
        const Matrix& g = t.grad_of(self);
        if (t.requires_grad(pb)) t.add_grad(pb, g.colwise().sum());
        if (t.requires_grad(pg))
          t.add_grad(pg, g.cwiseProduct(xhat).colwise().sum());
        if (!t.requires_grad(px)) return;
        RowVector scale = gv.row(0).cwiseProduct(invstd.row(0));
        if (!train) {
          t.add_grad(px, (g.array().rowwise() * scale.array()).matrix());
          return;
        }
        RowVector gmean = g.colwise().mean();
        RowVector gxhat_mean = g.cwiseProduct(xhat).colwise().mean();
        Matrix centered = g;
        centered.rowwise() -= gmean;
        centered -= (xhat.array().rowwise() * gxhat_mean.array()).matrix();
        t.add_grad(px, (centered.array().rowwise() * scale.array()).matrix());
      },
      "batch_norm");
}

}  // namespace didgen::ad
