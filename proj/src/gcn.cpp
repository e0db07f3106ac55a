// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/gcn.hpp"

#include <cmath>

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

Matrix dropout_mask(Rng& rng, long r, long c, double rate) {
  const double keep = 1.0 - rate;
  Matrix m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      m(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

double stable_sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

int GcnParams::n_params() const {
  int n = static_cast<int>(w_embed.size() + w_pool.size());
  for (const auto& w : w_conv) n += static_cast<int>(w.size());
  for (const auto& w : bn_gamma) n += static_cast<int>(w.size());
  for (const auto& w : bn_beta) n += static_cast<int>(w.size());
  for (const auto& w : w_fc) n += static_cast<int>(w.size());
  for (const auto& w : b_fc) n += static_cast<int>(w.size());
  return n;
}

GcnParams init_gcn_params(const GcnConfig& cfg, Rng& rng) {
  GcnParams p;
  p.cfg = cfg;
  p.w_embed = random_init(rng, cfg.input_width, cfg.embed);
  for (int l = 0; l < cfg.n_conv; ++l) {
    p.w_conv.push_back(random_init(rng, cfg.embed, cfg.embed));
    p.bn_gamma.push_back(Matrix::Ones(1, cfg.embed));
    p.bn_beta.push_back(Matrix::Zero(1, cfg.embed));
    p.bn.push_back(ad::BatchNormState::fresh(cfg.embed, cfg.bn_momentum));
  }
  p.w_pool = random_init(rng, cfg.embed, 1);
  int width = cfg.embed;
  for (int next : cfg.fc) {
    p.w_fc.push_back(random_init(rng, width, next));
    p.b_fc.push_back(Matrix::Zero(1, next));
    width = next;
  }
  p.w_fc.push_back(random_init(rng, width, 1));
  p.b_fc.push_back(Matrix::Zero(1, 1));
  return p;
}

std::vector<Var> GcnTapeParams::all() const {
  std::vector<Var> vars{w_embed};
  for (auto v : w_conv) vars.push_back(v);
  for (auto v : bn_gamma) vars.push_back(v);
  for (auto v : bn_beta) vars.push_back(v);
  vars.push_back(w_pool);
  for (auto v : w_fc) vars.push_back(v);
  for (auto v : b_fc) vars.push_back(v);
  return vars;
}

GcnTapeParams lift_gcn(Tape& tape, const GcnParams& p, bool trainable) {
  GcnTapeParams tp;
  tp.w_embed = tape.leaf(p.w_embed, trainable);
  for (const auto& w : p.w_conv) tp.w_conv.push_back(tape.leaf(w, trainable));
  for (const auto& w : p.bn_gamma)
    tp.bn_gamma.push_back(tape.leaf(w, trainable));
  for (const auto& w : p.bn_beta)
    tp.bn_beta.push_back(tape.leaf(w, trainable));
  tp.w_pool = tape.leaf(p.w_pool, trainable);
  for (const auto& w : p.w_fc) tp.w_fc.push_back(tape.leaf(w, trainable));
  for (const auto& w : p.b_fc) tp.b_fc.push_back(tape.leaf(w, trainable));
  return tp;
}

namespace {

// (A_m + I) H_m per block of the stacked hidden matrix; the adjacency blocks
// are training data, held as plain constants to keep gradient buffers to a
// single matrix.
Var block_matmul_const(Tape& tape, std::vector<Matrix> a_plus, Var h) {
  const Matrix& hv = tape.value(h);
  const long n = a_plus.empty() ? 0 : a_plus[0].rows();
  require(!a_plus.empty() && hv.rows() == static_cast<long>(a_plus.size()) * n,
          "block_matmul: row count mismatch");
  Matrix out(hv.rows(), hv.cols());
  for (size_t m = 0; m < a_plus.size(); ++m) {
    out.middleRows(m * n, n) = a_plus[m] * hv.middleRows(m * n, n);
  }
  int ph = h.id;
  return tape.make(
      std::move(out), tape.requires_grad(ph),
      [ph, a_plus = std::move(a_plus), n](Tape& t, int self) {
        const Matrix& g = t.grad_of(self);
        Matrix gh(g.rows(), g.cols());
        for (size_t m = 0; m < a_plus.size(); ++m) {
          gh.middleRows(m * n, n) =
              a_plus[m].transpose() * g.middleRows(m * n, n);
        }
        t.add_grad(ph, gh);
      },
      "block_matmul");
}

// Learned pooling per block: out.row(m) = gates_m^T H_m.
Var block_pool(Tape& tape, Var h, Var gates, long n) {
  const Matrix& hv = tape.value(h);
  const Matrix& gv = tape.value(gates);
  require(gv.cols() == 1 && gv.rows() == hv.rows() && hv.rows() % n == 0,
          "block_pool: shape mismatch");
  const long b = hv.rows() / n;
  Matrix out(b, hv.cols());
  for (long m = 0; m < b; ++m) {
    out.row(m) = gv.middleRows(m * n, n).transpose() * hv.middleRows(m * n, n);
  }
  int ph = h.id, pg = gates.id;
  return tape.make(
      std::move(out), tape.requires_grad(ph) || tape.requires_grad(pg),
      [ph, pg, n, b](Tape& t, int self) {
        const Matrix& g = t.grad_of(self);
        const Matrix& hv = t.value(Var{&t, ph});
        const Matrix& gv = t.value(Var{&t, pg});
        if (t.requires_grad(ph)) {
          Matrix gh(hv.rows(), hv.cols());
          for (long m = 0; m < b; ++m) {
            gh.middleRows(m * n, n) = gv.middleRows(m * n, n) * g.row(m);
          }
          t.add_grad(ph, gh);
        }
        if (t.requires_grad(pg)) {
          Matrix gg(gv.rows(), 1);
          for (long m = 0; m < b; ++m) {
            gg.middleRows(m * n, n) =
                hv.middleRows(m * n, n) * g.row(m).transpose();
          }
          t.add_grad(pg, gg);
        }
      },
      "block_pool");
}

}  // namespace

Var gcn_forward(Tape& tape, const GcnTapeParams& tp, GcnParams& state_owner,
                const std::vector<Var>& adjacency,
                const std::vector<Var>& features, bool train, Rng* rng) {
  require(!adjacency.empty() && adjacency.size() == features.size(),
          "gcn_forward: batch shape mismatch");
  require(!train || rng != nullptr, "gcn_forward: train mode needs an rng");
  const size_t batch = adjacency.size();
  const auto& cfg = state_owner.cfg;
  const long n = tape.value(adjacency[0]).rows();
  const Matrix eye = Matrix::Identity(n, n);

  // Single-molecule path works with adjacency Vars (gradients flow to the
  // graph itself); the batched path stacks molecules and requires constant
  // adjacency blocks.
  std::vector<Matrix> a_plus;
  Var h{};
  if (batch == 1) {
    h = ad::matmul(features[0], tp.w_embed);
  } else {
    a_plus.reserve(batch);
    std::vector<Var> f_parts;
    f_parts.reserve(batch);
    for (size_t m = 0; m < batch; ++m) {
      require(!tape.requires_grad(adjacency[m].id) &&
                  !tape.requires_grad(features[m].id),
              "batched gcn_forward expects constant inputs");
      require(tape.value(adjacency[m]).rows() == n,
              "gcn_forward: ragged batch");
      a_plus.push_back(tape.value(adjacency[m]) + eye);
      f_parts.push_back(features[m]);
    }
    h = ad::matmul(ad::vconcat(f_parts), tp.w_embed);
  }

  for (int l = 0; l < cfg.n_conv; ++l) {
    Var hd = h;
    if (train && cfg.dropout > 0) {
      hd = ad::mul_const(h, dropout_mask(*rng, tape.value(h).rows(),
                                         cfg.embed, cfg.dropout));
    }
    Var z1 = batch == 1
                 ? ad::matmul(ad::add_const(adjacency[0], eye), hd)
                 : block_matmul_const(tape, a_plus, hd);
    Var z = ad::matmul(z1, tp.w_conv[l]);
    Var normed = ad::batch_norm(z, tp.bn_gamma[l], tp.bn_beta[l],
                                state_owner.bn[l], train);
    h = ad::sigmoid(normed);
  }

  Var gates = ad::sigmoid(ad::matmul(h, tp.w_pool));  // (B n) x 1
  Var p = batch == 1 ? ad::matmul(ad::transpose(gates), h)
                     : block_pool(tape, h, gates, n);

  const size_t n_fc = tp.w_fc.size();
  for (size_t l = 0; l < n_fc; ++l) {
    if (train && cfg.dropout > 0) {
      p = ad::mul_const(p, dropout_mask(*rng, tape.value(p).rows(),
                                        tape.value(p).cols(), cfg.dropout));
    }
    p = ad::add_rowvec(ad::matmul(p, tp.w_fc[l]), tp.b_fc[l]);
    if (l + 1 < n_fc) p = ad::softplus(p);
  }
  return p;  // batch x 1
}

double gcn_eval(const GcnParams& p, const Matrix& adjacency,
                const Matrix& features) {
  const auto& cfg = p.cfg;
  const long n = adjacency.rows();
  require(features.rows() == n && features.cols() == cfg.input_width,
          "gcn_eval: feature shape mismatch");
  Matrix a_plus = adjacency + Matrix::Identity(n, n);
  Matrix h = features * p.w_embed;
  for (int l = 0; l < cfg.n_conv; ++l) {
    Matrix z = (a_plus * h) * p.w_conv[l];
    const auto& st = p.bn[l];
    for (long j = 0; j < z.cols(); ++j) {
      const double invstd = 1.0 / std::sqrt(st.running_var[j] + st.eps);
      const double gamma = p.bn_gamma[l](0, j), beta = p.bn_beta[l](0, j);
      for (long i = 0; i < z.rows(); ++i) {
        z(i, j) = (z(i, j) - st.running_mean[j]) * invstd * gamma + beta;
      }
    }
    h = z.unaryExpr([](double v) { return stable_sigmoid(v); });
  }
  Matrix gate = (h * p.w_pool).unaryExpr([](double v) {
    return stable_sigmoid(v);
  });
  Matrix out = gate.transpose() * h;  // 1 x embed
  for (size_t l = 0; l < p.w_fc.size(); ++l) {
    out = out * p.w_fc[l];
    out.row(0) += p.b_fc[l].row(0);
    if (l + 1 < p.w_fc.size()) {
      out = out.unaryExpr([](double v) { return stable_softplus(v); });
    }
  }
  return out(0, 0);
}

}  // namespace didgen
