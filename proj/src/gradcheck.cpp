// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/gradcheck.hpp"

#include <cmath>
#include <limits>

#include "didgen/rng.hpp"

namespace didgen::ad {

namespace {

double eval_at(const TapeFn& f, const Matrix& x) {
  Tape tape;
  Var leaf = tape.leaf(x, true);
  Var out = f(tape, leaf);
  return tape.scalar_value(out);
}

}  // namespace

GradCheckReport gradcheck(const TapeFn& f, const Matrix& x, double eps) {
  GradCheckReport rep;

  Matrix grad;
  {
    Tape tape;
    Var leaf = tape.leaf(x, true);
    Var out = f(tape, leaf);
    tape.backward(out);
    grad = tape.grad(leaf);
  }
  const double f0 = eval_at(f, x);

  const int n = static_cast<int>(x.size());
  for (int k = 0; k < n; ++k) {
    Matrix xp = x, xm = x;
    xp.data()[k] += eps;
    xm.data()[k] -= eps;
    const double fp = eval_at(f, xp);
    const double fm = eval_at(f, xm);

    // A smooth function moves O(eps^2) in the second difference; a jump
    // inside the probe interval dominates it. Flag those coordinates
    // instead of failing on them.
    const double second_diff = std::abs(fp - 2.0 * f0 + fm);
    if (second_diff > 10.0 * eps * (1.0 + std::abs(f0))) {
      rep.near_discontinuity.push_back(k);
      continue;
    }

    const double fd = (fp - fm) / (2.0 * eps);
    const double ad = grad.data()[k];
    ++rep.checked;
    // Central differences cannot resolve slopes below the cancellation
    // floor ~|f| * machine_eps / eps; agreement inside that band carries no
    // information either way.
    const double noise_floor =
        10.0 * (std::abs(f0) + 1.0) *
            std::numeric_limits<double>::epsilon() / eps +
        eps * eps;
    const double abs_err = std::abs(fd - ad);
    if (abs_err <= noise_floor) continue;
    const double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
    const double rel = abs_err / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = k;
    }
  }
  return rep;
}

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Adjoint corruption hook for the negative-control path.
Var maybe_corrupt_sigmoid(Var x, bool corrupt) {
  Var s = sigmoid(x);
  if (!corrupt) return s;
  Tape* t = s.tape;
  int ps = s.id;
  return t->make(t->value(s), true,
                 [ps](Tape& t, int self) {
                   t.add_grad(ps, Matrix(1.25 * t.grad_of(self)));
                 },
                 "corrupted_identity");
}

}  // namespace

std::vector<GradCheckSuiteEntry> gradcheck_suite(uint64_t seed,
                                                 const std::string& corrupt_op) {
  std::vector<GradCheckSuiteEntry> entries;
  Rng rng(seed);
  const bool corrupt_sigmoid = corrupt_op == "sigmoid";
  auto run = [&entries](const std::string& name, const TapeFn& f,
                        const Matrix& x, double tol) {
    GradCheckReport rep = gradcheck(f, x);
    entries.push_back({name, rep, tol, rep.passed(tol)});
  };

  const Matrix x5 = random_matrix(rng, 5, 5);
  const Matrix w5 = random_matrix(rng, 5, 5);

  run("sum(square(x))",
      [](Tape&, Var x) { return sum(square(x)); }, x5, 1e-7);
  run("sum(matmul(x, W))",
      [w5](Tape& t, Var x) { return sum(matmul(x, t.constant(w5))); }, x5,
      1e-6);
  run("sum(sigmoid(x))",
      [corrupt_sigmoid](Tape&, Var x) {
        return sum(maybe_corrupt_sigmoid(x, corrupt_sigmoid));
      },
      x5, 1e-6);
  run("sum(softplus(x))",
      [](Tape&, Var x) { return sum(softplus(x)); }, x5, 1e-6);
  run("sum(relu(x))", [](Tape&, Var x) { return sum(relu(x)); },
      (x5.array() + 3.0).matrix(), 1e-6);
  run("sum(square(transpose(x) - x))",
      [](Tape&, Var x) { return sum(square(sub(transpose(x), x))); }, x5,
      1e-6);
  run("log_softmax pick",
      [](Tape&, Var x) {
        return sum(gather(log_softmax_rows(x), {{0, 1}, {2, 3}, {4, 0}}));
      },
      x5, 1e-6);
  run("row/col sums chain",
      [](Tape&, Var x) {
        return sum(cmul(row_sums(x), row_sums(square(x))));
      },
      x5, 1e-6);
  {
    // keep the per-row argmax unambiguous so the probe interval stays on
    // one branch
    Matrix spread = random_matrix(rng, 4, 6);
    for (long i = 0; i < spread.rows(); ++i) {
      long best = 0;
      spread.row(i).maxCoeff(&best);
      spread(i, best) += 1.0;
    }
    run("sloped_max_rows",
        [](Tape&, Var x) {
          return sum(square(sloped_max_rows(x, 0.1, 0.05)));
        },
        spread, 1e-5);
  }
  // Keep entries clear of half-integers so the rounding step is locally
  // linear; the derivative there is exactly the slope.
  {
    Matrix safe = random_matrix(rng, 4, 4);
    safe = safe.unaryExpr([](double v) {
      double fr = v - std::floor(v + 0.5);
      if (std::abs(std::abs(fr) - 0.5) < 0.05) v += 0.1;
      return v;
    });
    run("sloped_round chain",
        [](Tape&, Var x) { return sum(square(sloped_round(x, 0.1))); },
        safe, 1e-6);
  }
  // Six-op random chain matching the documented 5x5 example.
  run("random 5x5 chain of 6 ops",
      [w5](Tape& t, Var x) {
        Var h = matmul(x, t.constant(w5));
        h = sigmoid(h);
        h = cmul(h, x);
        h = softplus(h);
        Var s = row_sums(h);
        return sum(square(s));
      },
      x5, 1e-5);
  return entries;
}

}  // namespace didgen::ad
