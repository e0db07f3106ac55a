// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/invert.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace didgen {

using ad::Tape;
using ad::Var;

TargetSpec TargetSpec::point(double p, double tau, std::string property) {
  require(tau > 0.0, "point target needs tau > 0");
  TargetSpec t;
  t.kind = Kind::Point;
  t.value = p;
  t.tau = tau;
  t.property = std::move(property);
  return t;
}

TargetSpec TargetSpec::window(double lo, double hi, std::string property) {
  require(lo < hi, "window target needs lo < hi");
  TargetSpec t;
  t.kind = Kind::Window;
  t.lo = lo;
  t.hi = hi;
  t.property = std::move(property);
  return t;
}

bool TargetSpec::met(double prediction) const {
  return met_with_margin(prediction, 0.0);
}

bool TargetSpec::met_with_margin(double prediction, double margin) const {
  if (kind == Kind::Point) {
    return std::abs(prediction - value) <= tau * std::max(0.0, 1.0 - margin);
  }
  const double w = hi - lo;
  return prediction >= lo + margin * w && prediction <= hi - margin * w;
}

double TargetSpec::center() const {
  return kind == Kind::Point ? value : 0.5 * (lo + hi);
}

std::string TargetSpec::describe() const {
  std::ostringstream os;
  if (kind == Kind::Point) {
    os << property << " = " << value << " +- " << tau;
  } else {
    os << lo << " <= " << property << " <= " << hi;
  }
  return os.str();
}

void GenConfig::check() const {
  require(lambda_l >= 0 && lambda_s >= 0 && lambda_c >= 0,
          "loss weights must be nonnegative");
  require(lambda_l + lambda_s + lambda_c > 0,
          "at least one loss weight must be positive");
  require(max_steps > 0, "max_steps must be positive");
  if (composition.size() > 0) {
    require(composition.size() == kRealElements,
            "composition target must cover the real elements");
    require(std::abs(composition.sum() - 1.0) < 1e-9,
            "composition target must sum to 1");
  }
}

Var GcnProxy::forward(Tape& tape, Var adjacency, Var features) const {
  GcnTapeParams tp = lift_gcn(tape, params_, false);
  Var out = gcn_forward(tape, tp, params_, {adjacency}, {features}, false,
                        nullptr);
  if (gain_ != 1.0) out = ad::scale(out, gain_);
  if (offset_ != 0.0) out = ad::add_scalar(out, offset_);
  return out;
}

double GcnProxy::predict(const MolecularGraph& mol) const {
  auto [a, f] = exact_tensors(mol);
  return gain_ * gcn_eval(params_, a, f) + offset_;
}

Var CrippenProxy::forward(Tape& tape, Var adjacency, Var features) const {
  if (oracle_exact_) {
    return crippennet_oracle_logp(tape, *table_, adjacency, features);
  }
  CrippenNetTapeParams tp = lift_crippennet(tape, params_, false);
  return crippennet_forward(tape, tp, params_, *table_, adjacency, features)
      .logp;
}

double CrippenProxy::predict(const MolecularGraph& mol) const {
  if (oracle_exact_) return crippennet_predict_oracle(*table_, mol).logp;
  return crippennet_predict(params_, *table_, mol).logp;
}

Var composition_sq(Var features, const Vector& target) {
  require(target.size() == kRealElements,
          "composition target must cover the real elements");
  Tape* t = features.tape;
  Var real_block = ad::cols(features, 0, kRealElements);
  Var counts = ad::col_sums(real_block);        // 1 x 5 soft atom counts
  Var total = ad::sum(real_block);
  Var fractions = ad::div_by_scalar(counts, total);
  Var diff = ad::add_const(fractions, Matrix(-target.transpose()));
  (void)t;
  return ad::sum(ad::square(diff));
}

Var composition_loss(Var features, const Vector& target) {
  return ad::sqrt_elem(composition_sq(features, target));
}

LossBreakdown total_loss(Tape& tape, Var prediction, const TargetSpec& target,
                         Var adjacency, Var features, const GenConfig& cfg,
                         double lambda_s_effective) {
  const double ll = cfg.lambda_l, ls = lambda_s_effective, lc = cfg.lambda_c;
  require(ll + ls + lc > 0, "at least one loss weight must be positive");

  LossBreakdown out;
  Var acc = tape.scalar(0.0);

  Var l_l_sq{};
  if (target.kind == TargetSpec::Kind::Point) {
    Var d = ad::add_scalar(prediction, -target.value);
    out.l_l = std::abs(tape.scalar_value(d));
    l_l_sq = ad::square(d);
  } else {
    Var below = ad::relu(ad::add_scalar(ad::scale(prediction, -1.0), target.lo));
    Var above = ad::relu(ad::add_scalar(prediction, -target.hi));
    Var dist = ad::add(below, above);
    out.l_l = tape.scalar_value(dist);
    l_l_sq = ad::square(dist);
  }
  if (ll > 0) acc = ad::add(acc, ad::scale(l_l_sq, ll));

  if (ls > 0) {
    Var pen = valence_penalty(adjacency);
    out.l_s = tape.scalar_value(pen);
    acc = ad::add(acc, ad::scale(ad::square(pen), ls));
  }
  if (lc > 0) {
    require(cfg.composition.size() == kRealElements,
            "composition loss requested without a composition target");
    Var csq = composition_sq(features, cfg.composition);
    out.l_c = std::sqrt(tape.scalar_value(csq));
    acc = ad::add(acc, ad::scale(csq, lc));
  }
  out.total = ad::scale(acc, 1.0 / (ll + ls + lc));
  return out;
}

namespace {

GraphWeights random_init_weights(Rng& rng, const GenConfig& cfg) {
  GraphWeights w = GraphWeights::zeros(cfg.n_slots);
  for (int k = 0; k < w.w_adj.size(); ++k) {
    w.w_adj[k] = std::abs(rng.normal(0.0, 0.5));
  }
  for (int i = 0; i < w.w_fea.size(); ++i) w.w_fea[i] = rng.normal();
  return w;
}

}  // namespace

GenerateOutcome generate(const ProxyModel& proxy, const TargetSpec& target,
                         const GenConfig& cfg, uint64_t run_seed,
                         const std::vector<MolecularGraph>* init_pool) {
  cfg.check();
  Rng rng(run_seed);

  GraphWeights w;
  if (cfg.init == GenConfig::Init::FromMolecule) {
    require(init_pool && !init_pool->empty(),
            "from-molecule init needs a non-empty molecule pool");
    const auto& mol =
        (*init_pool)[rng.uniform_int(0, static_cast<int>(init_pool->size()) - 1)];
    w = weights_from_molecule(mol, cfg.n_slots, cfg.restart_noise, rng);
  } else {
    w = random_init_weights(rng, cfg);
  }
  // Strategy 1 (the loss penalty) only helps random starts; molecule starts
  // begin valid and rely on masking alone.
  const double lambda_s_eff =
      cfg.init == GenConfig::Init::Random ? cfg.lambda_s : 0.0;

  Matrix w_adj = w.w_adj;
  Matrix w_fea = w.w_fea;

  // Adaptive moments, matching the training optimizer family.
  Matrix m_adj = Matrix::Zero(w_adj.rows(), 1), v_adj = m_adj;
  Matrix m_fea = Matrix::Zero(w_fea.rows(), 1), v_fea = m_fea;
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  int64_t t_step = 0;

  GenerateOutcome out;
  out.trace.run_seed = run_seed;

  for (int step = 0; step < cfg.max_steps; ++step) {
    out.steps_used = step + 1;
    GraphWeights cur{Vector(w_adj), Vector(w_fea), cfg.n_slots};

    Tape tape;
    DiffGraph dg = build_diff_graph(tape, cur, cfg.build, true);
    Var pred_var = proxy.forward(tape, dg.adjacency, dg.features);
    const double pred = tape.scalar_value(pred_var);

    if (target.met_with_margin(pred, cfg.stop_margin)) {
      auto disc = discretize_weights(cur, cfg.build);
      TraceStep ts;
      ts.step = step;
      ts.prediction = pred;
      if (disc.ok() && disc.mol->n_real_atoms() > 0) {
        MolecularGraph mol = *disc.mol;
        bool pruned = false;
        if (connected_components(mol).size() > 1) {
          mol = largest_component(mol);
          pruned = true;
        }
        const double exact_pred = proxy.predict(mol);
        if (target.met(exact_pred)) {
          ts.event = pruned ? "emit-after-prune" : "emit";
          ts.prediction = exact_pred;
          out.trace.steps.push_back(ts);
          out.trace.accepted_step = step;
          out.mol = std::move(mol);
          out.final_prediction = exact_pred;
          return out;
        }
        ts.event = pruned ? "prune-missed-target" : "exact-missed-target";
      } else {
        ts.event = "discretize-failed";
      }
      // Shake the weights away from this state and keep optimizing.
      for (long k = 0; k < w_adj.rows(); ++k)
        w_adj(k, 0) += cfg.restart_noise * rng.normal();
      for (long k = 0; k < w_fea.rows(); ++k)
        w_fea(k, 0) += cfg.restart_noise * rng.normal();
      ts.event += "+restart-noise";
      out.trace.steps.push_back(ts);
      continue;
    }

    LossBreakdown loss =
        total_loss(tape, pred_var, target, dg.adjacency, dg.features, cfg,
                   lambda_s_eff);
    tape.backward(loss.total);
    Matrix g_adj = tape.grad(dg.w_adj);
    Matrix g_fea = tape.grad(dg.w_fea);

    const Matrix w_adj_prev = w_adj;
    ++t_step;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_step));
    auto adam_update = [&](Matrix& p, Matrix& m, Matrix& v, const Matrix& g) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      p -= (cfg.lr * (m / bc1).array() /
            ((v / bc2).array().sqrt() + adam_eps))
               .matrix();
    };
    adam_update(w_adj, m_adj, v_adj, g_adj);
    adam_update(w_fea, m_fea, v_fea, g_fea);

    int masked = 0;
    if (cfg.masking) {
      auto mask = mask_weight_updates(Vector(w_adj_prev), Vector(w_adj),
                                      cfg.n_slots, cfg.build.a_round);
      masked = static_cast<int>(mask.reverted.size());
      w_adj = mask.w;
    }

    TraceStep ts;
    ts.step = step;
    ts.loss = tape.scalar_value(loss.total);
    ts.l_l = loss.l_l;
    ts.l_s = loss.l_s;
    ts.l_c = loss.l_c;
    ts.prediction = pred;
    ts.masked = masked;
    out.trace.steps.push_back(ts);
  }

  out.error = "not converged within " + std::to_string(cfg.max_steps) +
              " steps (target " + target.describe() + ")";
  return out;
}

BatchResult generate_batch(const ProxyModel& proxy, const TargetSpec& target,
                           const GenConfig& cfg, int n, int jobs,
                           const std::vector<MolecularGraph>* init_pool,
                           std::vector<GenerationTrace>* traces) {
  require(n >= 1, "generate_batch needs n >= 1");
  BatchResult res;
  res.n_requested = n;
  const int max_attempts = std::max(n, cfg.attempt_factor * n);
  jobs = std::max(1, jobs);

  std::vector<GenerateOutcome> outcomes;
  outcomes.reserve(max_attempts);

  int next_attempt = 0;
  while (static_cast<int>(res.mols.size()) < n &&
         next_attempt < max_attempts) {
    const int block =
        std::min(jobs, max_attempts - next_attempt);
    std::vector<GenerateOutcome> block_out(block);
    if (block == 1) {
      block_out[0] = generate(proxy, target, cfg,
                              Rng::derive(cfg.seed, next_attempt), init_pool);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(block);
      for (int k = 0; k < block; ++k) {
        threads.emplace_back([&, k] {
          block_out[k] = generate(proxy, target, cfg,
                                  Rng::derive(cfg.seed, next_attempt + k),
                                  init_pool);
        });
      }
      for (auto& th : threads) th.join();
    }
    // Deterministic prefix scan: results join in attempt order no matter
    // which thread finished first.
    for (int k = 0; k < block && static_cast<int>(res.mols.size()) < n; ++k) {
      const auto& o = block_out[k];
      res.attempts = next_attempt + k + 1;
      if (o.ok()) {
        res.mols.push_back(*o.mol);
        res.final_preds.push_back(o.final_prediction);
        res.run_seeds.push_back(o.trace.run_seed);
        if (traces) traces->push_back(o.trace);
      }
    }
    next_attempt += block;
  }
  res.budget_exhausted = static_cast<int>(res.mols.size()) < n;
  return res;
}

GraphWeights safe_random_weights(Rng& rng, const GenConfig& cfg,
                                 double margin) {
  const auto& bp = cfg.build;
  const double x0 = bp.bell.x0();
  for (int attempt = 0; attempt < 100000; ++attempt) {
    GraphWeights w = random_init_weights(rng, cfg);
    const Matrix a = adjacency_values(w.w_adj, cfg.n_slots, bp.a_round);

    bool safe = true;
    // rounding boundaries of the squared pre-image
    for (int k = 0; k < w.w_adj.size() && safe; ++k) {
      const double s = w.w_adj[k] * w.w_adj[k];
      const double frac = s - std::floor(s + 0.5);
      if (std::abs(std::abs(frac) - 0.5) < margin) safe = false;
      if (std::abs(frac) < 1e-12 && s != 0.0) continue;
    }
    // bell junctions and the valence threshold
    for (int i = 0; i < cfg.n_slots && safe; ++i) {
      const double sum = a.row(i).sum();
      if (std::abs(sum - 4.5) < margin) safe = false;
      for (int j = 0; j < kPaletteSize && safe; ++j) {
        const double u = std::abs(sum - kElements[j].valence);
        if (std::abs(u - x0) < margin) safe = false;
      }
    }
    // argmax gaps in the feature scores
    if (safe) {
      const Matrix f_scores = feature_values(a, w.w_fea, bp);
      // recompute raw scores' top-2 gap via the one-hot block ordering
      for (int i = 0; i < cfg.n_slots && safe; ++i) {
        const double x = a.row(i).sum();
        const double sig = 1.0 / (1.0 + std::exp(-w.w_fea[i]));
        std::array<double, kPaletteSize> raw{};
        for (int j = 0; j < kPaletteSize; ++j) {
          double gate = 1.0;
          if (j == static_cast<int>(Element::H)) gate = 1.0 - sig;
          if (j == static_cast<int>(Element::F)) gate = sig;
          raw[j] = bell_value(x, kElements[j].valence, bp.bell) * gate;
        }
        std::sort(raw.begin(), raw.end());
        if (raw[kPaletteSize - 1] - raw[kPaletteSize - 2] < margin)
          safe = false;
      }
      (void)f_scores;
    }
    if (safe) return w;
  }
  throw NumericError("could not sample a safe weight configuration");
}

ad::GradCheckReport pipeline_gradcheck(const ProxyModel& proxy,
                                       const TargetSpec& target,
                                       const GenConfig& cfg, uint64_t seed,
                                       int n_points) {
  Rng rng(seed);
  const int n_adj = n_pairs(cfg.n_slots);
  ad::GradCheckReport worst;
  for (int p = 0; p < n_points; ++p) {
    // Resample until the prediction sits clear of the hinge kinks, so the
    // loss is smooth across the probe interval.
    GraphWeights w;
    for (int tries = 0;; ++tries) {
      require(tries < 1000, "could not find a hinge-safe weight sample");
      w = safe_random_weights(rng, cfg, 2e-3);
      if (target.kind == TargetSpec::Kind::Point) break;
      Tape probe_tape;
      DiffGraph dg = build_diff_graph(probe_tape, w, cfg.build, false);
      const double pred = probe_tape.scalar_value(
          proxy.forward(probe_tape, dg.adjacency, dg.features));
      if (std::abs(pred - target.lo) > 1e-2 &&
          std::abs(pred - target.hi) > 1e-2) {
        break;
      }
    }
    Matrix x(n_adj + cfg.n_slots, 1);
    x.topRows(n_adj) = w.w_adj;
    x.bottomRows(cfg.n_slots) = w.w_fea;

    ad::TapeFn fn = [&proxy, &target, &cfg, n_adj](Tape& tape, Var leaf) {
      Var w_adj = ad::rows(leaf, 0, n_adj);
      Var w_fea = ad::rows(leaf, n_adj, cfg.n_slots);
      Var a = build_adjacency(tape, w_adj, cfg.n_slots, cfg.build.a_round);
      Var f = build_features(tape, a, w_fea, cfg.build);
      Var pred = proxy.forward(tape, a, f);
      return total_loss(tape, pred, target, a, f, cfg, cfg.lambda_s).total;
    };
    ad::GradCheckReport rep = ad::gradcheck(fn, x, 1e-6);
    worst.checked += rep.checked;
    worst.near_discontinuity.insert(worst.near_discontinuity.end(),
                                    rep.near_discontinuity.begin(),
                                    rep.near_discontinuity.end());
    if (rep.max_rel_err > worst.max_rel_err) {
      worst.max_rel_err = rep.max_rel_err;
      worst.worst_index = rep.worst_index;
    }
  }
  return worst;
}

}  // namespace didgen
