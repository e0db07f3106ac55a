// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/crippennet.hpp"

#include <cmath>

#include "didgen/graphbuild.hpp"

namespace didgen {

using ad::Tape;
using ad::Var;

namespace {

Matrix random_init(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(rows));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = sigma * rng.normal();
  return m;
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Column selector S (P+1 x K): S(element column of k, k) = 1. F * S gives
// the per-class one-hot mask.
Matrix class_mask_selector(const ClassRuleTable& table) {
  Matrix s = Matrix::Zero(kPaletteSize + 1, table.n_classes());
  for (int k = 0; k < table.n_classes(); ++k) {
    s(static_cast<int>(table.element_of(k)), k) = 1.0;
  }
  return s;
}

Matrix multi_hop_plain(const Matrix& a, const Matrix& f, int n_hops) {
  Matrix x(f.rows(), (n_hops + 1) * f.cols());
  Matrix cur = f;
  x.leftCols(f.cols()) = cur;
  for (int h = 1; h <= n_hops; ++h) {
    cur = a * cur;
    x.middleCols(h * f.cols(), f.cols()) = cur;
  }
  return x;
}

}  // namespace

int CrippenNetParams::n_params() const {
  int n = 0;
  for (const auto& h : heads) {
    if (!h) continue;
    n += static_cast<int>(h->w1.size() + h->b1.size() + h->w2.size() +
                          h->b2.size());
  }
  return n;
}

CrippenNetParams init_crippennet(const ClassRuleTable& table,
                                 const CrippenNetConfig& cfg, Rng& rng) {
  CrippenNetParams p;
  p.cfg = cfg;
  p.heads.resize(kPaletteSize);
  for (int e = 0; e < kRealElements; ++e) {
    const int n_classes =
        static_cast<int>(table.classes_of(static_cast<Element>(e)).size());
    if (n_classes <= 1) continue;
    CrippenNetHead head;
    head.w1 = random_init(rng, p.feature_width(), cfg.head_hidden);
    head.b1 = Matrix::Zero(1, cfg.head_hidden);
    head.w2 = random_init(rng, cfg.head_hidden, n_classes);
    head.b2 = Matrix::Zero(1, n_classes);
    p.heads[e] = std::move(head);
  }
  return p;
}

std::vector<Var> CrippenNetTapeParams::all() const {
  std::vector<Var> vars;
  for (const auto& h : heads) {
    if (!h) continue;
    vars.push_back(h->w1);
    vars.push_back(h->b1);
    vars.push_back(h->w2);
    vars.push_back(h->b2);
  }
  return vars;
}

CrippenNetTapeParams lift_crippennet(Tape& tape, const CrippenNetParams& p,
                                     bool trainable) {
  CrippenNetTapeParams tp;
  tp.heads.resize(p.heads.size());
  for (size_t e = 0; e < p.heads.size(); ++e) {
    if (!p.heads[e]) continue;
    tp.heads[e] = CrippenNetHeadVars{
        tape.leaf(p.heads[e]->w1, trainable),
        tape.leaf(p.heads[e]->b1, trainable),
        tape.leaf(p.heads[e]->w2, trainable),
        tape.leaf(p.heads[e]->b2, trainable),
    };
  }
  return tp;
}

CrippenNetOut crippennet_forward(Tape& tape, const CrippenNetTapeParams& tp,
                                 const CrippenNetParams& p,
                                 const ClassRuleTable& table, Var a, Var f) {
  const long n = tape.value(a).rows();
  require(tape.value(f).rows() == n &&
              tape.value(f).cols() == kPaletteSize + 1,
          "crippennet_forward: feature shape mismatch");

  std::vector<Var> hops{f};
  Var cur = f;
  for (int h = 1; h <= p.cfg.n_hops; ++h) {
    cur = ad::matmul(a, cur);
    hops.push_back(cur);
  }
  Var x = ad::hconcat(hops);  // n x feature_width

  // Per-element blocks of within-element log-softmax, assembled in global
  // class-id order (the table groups class ids by element).
  std::vector<Var> blocks;
  int expected_col = 0;
  for (int e = 0; e < kRealElements; ++e) {
    const auto& ids = table.classes_of(static_cast<Element>(e));
    if (ids.empty()) continue;
    require(ids.front() == expected_col,
            "rule table must group class ids by element");
    expected_col += static_cast<int>(ids.size());
    if (ids.size() == 1 || !tp.heads[e]) {
      // single class: probability 1, log-probability 0
      blocks.push_back(tape.constant(Matrix::Zero(n, ids.size())));
      continue;
    }
    const auto& head = *tp.heads[e];
    Var hidden = ad::softplus(ad::add_rowvec(ad::matmul(x, head.w1), head.b1));
    Var logits = ad::add_rowvec(ad::matmul(hidden, head.w2), head.b2);
    blocks.push_back(ad::log_softmax_rows(logits));
  }
  Var log_probs = ad::hconcat(blocks);  // n x K

  Var mask = ad::matmul(f, tape.constant(class_mask_selector(table)));
  Var probs = ad::cmul(ad::exp_elem(log_probs), mask);
  const Vector contrib = table.contribution_vector();
  Matrix contrib_rows = contrib.transpose().replicate(n, 1);
  Var logp = ad::sum(ad::mul_const(probs, contrib_rows));
  return {log_probs, logp};
}

Var crippennet_oracle_logp(Tape& tape, const ClassRuleTable& table, Var a,
                           Var f) {
  const Matrix& av = tape.value(a);
  const Matrix& fv = tape.value(f);
  const int n = static_cast<int>(av.rows());

  // Round the relaxed graph without validating; the rule lookup falls back
  // to wildcards for any odd environment mid-optimization.
  MolecularGraph rounded(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < kPaletteSize; ++j) {
      if (fv(i, j) > fv(i, best)) best = j;
    }
    rounded.set_element(i, static_cast<Element>(best));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int order = static_cast<int>(std::floor(av(i, j) + 0.5));
      if (order > 0) rounded.set_bond(i, j, order);
    }
  }
  const auto classes = classify_atoms(rounded, table);
  Matrix hard = Matrix::Zero(n, table.n_classes());
  for (int i = 0; i < n; ++i) {
    if (classes[i] >= 0) hard(i, classes[i]) = 1.0;
  }
  Var mask = ad::matmul(f, tape.constant(class_mask_selector(table)));
  Var picked = ad::mul_const(mask, hard);
  const Vector contrib = table.contribution_vector();
  return ad::sum(ad::mul_const(picked, contrib.transpose().replicate(n, 1)));
}

CrippenNetPrediction crippennet_predict(const CrippenNetParams& p,
                                        const ClassRuleTable& table,
                                        const MolecularGraph& mol) {
  auto [a, f] = exact_tensors(mol);
  const int n = mol.n_slots();
  const Matrix x = multi_hop_plain(a, f, p.cfg.n_hops);

  CrippenNetPrediction out;
  out.classes.assign(n, -1);
  out.probs = Matrix::Zero(n, table.n_classes());

  for (int e = 0; e < kRealElements; ++e) {
    const auto& ids = table.classes_of(static_cast<Element>(e));
    if (ids.empty()) continue;
    Matrix block;
    if (ids.size() == 1 || !p.heads[e]) {
      block = Matrix::Ones(n, ids.size());
    } else {
      const auto& head = *p.heads[e];
      Matrix hidden = x * head.w1;
      hidden.rowwise() += head.b1.row(0);
      hidden = hidden.unaryExpr([](double v) { return stable_softplus(v); });
      Matrix logits = hidden * head.w2;
      logits.rowwise() += head.b2.row(0);
      block.resize(n, ids.size());
      for (int i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd ex = (logits.row(i).array() - m).exp();
        block.row(i) = (ex / ex.sum()).matrix();
      }
    }
    for (int i = 0; i < n; ++i) {
      if (mol.element(i) != static_cast<Element>(e)) continue;
      int best = 0;
      for (size_t c = 1; c < ids.size(); ++c) {
        if (block(i, c) > block(i, best)) best = static_cast<int>(c);
      }
      out.classes[i] = ids[best];
      for (size_t c = 0; c < ids.size(); ++c) {
        out.probs(i, ids[c]) = block(i, c);
      }
    }
  }
  // per-atom accumulation in slot order, matching the oracle's sum
  for (int i = 0; i < n; ++i) {
    if (!mol.is_real(i)) continue;
    const auto& ids = table.classes_of(mol.element(i));
    double atom = 0.0;
    for (int k : ids) atom += out.probs(i, k) * table.contribution(k);
    out.logp += atom;
  }
  return out;
}

CrippenNetPrediction crippennet_predict_oracle(const ClassRuleTable& table,
                                               const MolecularGraph& mol) {
  CrippenNetPrediction out;
  out.classes = classify_atoms(mol, table);
  out.probs = Matrix::Zero(mol.n_slots(), table.n_classes());
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (out.classes[i] >= 0) {
      out.probs(i, out.classes[i]) = 1.0;
      out.logp += table.contribution(out.classes[i]);
    }
  }
  return out;
}

double sample_weight(double freq, double misclass_rate, double alpha,
                     double eps) {
  require(freq >= 0.0, "sample_weight: negative frequency");
  require(misclass_rate >= 0.0 && misclass_rate <= 1.0,
          "sample_weight: misclassification rate must be in [0,1]");
  return (1.0 + alpha * misclass_rate) / (freq + eps);
}

}  // namespace didgen
