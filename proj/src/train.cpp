// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace didgen {

using ad::Tape;
using ad::Var;
using nlohmann::json;

void Adam::register_param(Matrix* p) {
  params_.push_back(p);
  m_.push_back(Matrix::Zero(p->rows(), p->cols()));
  v_.push_back(Matrix::Zero(p->rows(), p->cols()));
}

void Adam::step(const std::vector<Matrix>& grads) {
  require(grads.size() == params_.size(), "adam: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Matrix g = grads[k];
    if (cfg_.weight_decay > 0) g += cfg_.weight_decay * (*params_[k]);
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
    v_[k] = cfg_.beta2 * v_[k] +
            (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix mhat = m_[k] / bc1;
    Matrix vhat = v_[k] / bc2;
    *params_[k] -=
        (cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
  }
}

void Adam::restore(int64_t t, std::vector<Matrix> m, std::vector<Matrix> v) {
  require(m.size() == params_.size() && v.size() == params_.size(),
          "adam: restore size mismatch");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

namespace {

std::vector<Matrix*> param_ptrs(GcnParams& p) {
  std::vector<Matrix*> out{&p.w_embed};
  for (auto& w : p.w_conv) out.push_back(&w);
  for (auto& w : p.bn_gamma) out.push_back(&w);
  for (auto& w : p.bn_beta) out.push_back(&w);
  out.push_back(&p.w_pool);
  for (auto& w : p.w_fc) out.push_back(&w);
  for (auto& w : p.b_fc) out.push_back(&w);
  return out;
}

std::vector<Matrix*> param_ptrs(CrippenNetParams& p) {
  std::vector<Matrix*> out;
  for (auto& h : p.heads) {
    if (!h) continue;
    out.push_back(&h->w1);
    out.push_back(&h->b1);
    out.push_back(&h->w2);
    out.push_back(&h->b2);
  }
  return out;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    std::swap(idx[i], idx[rng.uniform_int(0, i)]);
  }
}

Matrix with_noise(const Matrix& m, double sigma, Rng& rng) {
  if (sigma <= 0) return m;
  Matrix out = m;
  for (long i = 0; i < out.rows(); ++i)
    for (long j = 0; j < out.cols(); ++j) out(i, j) += sigma * rng.normal();
  return out;
}

struct LoadedDataset {
  std::vector<MolecularGraph> mols;
  std::vector<double> labels;  // empty when property not requested
};

LoadedDataset load_graphs(const std::vector<MoleculeRecord>& dataset,
                          const std::string& property, int n_slots) {
  require(!dataset.empty(), "empty dataset");
  LoadedDataset out;
  out.mols.reserve(dataset.size());
  for (const auto& rec : dataset) {
    out.mols.push_back(to_graph(rec, n_slots));
    if (!property.empty()) {
      const auto it = rec.properties.find(property);
      if (it == rec.properties.end()) {
        throw std::invalid_argument("unknown property name: " + property);
      }
      out.labels.push_back(it->second);
    }
  }
  return out;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(size_t n,
                                                            double split,
                                                            Rng& rng) {
  require(split > 0.0 && split < 1.0, "split fraction must be in (0,1)");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle_indices(idx, rng);
  const size_t n_train = std::max<size_t>(1, static_cast<size_t>(n * split));
  return {std::vector<int>(idx.begin(), idx.begin() + n_train),
          std::vector<int>(idx.begin() + n_train, idx.end())};
}

}  // namespace

RegressorResult train_regressor(const std::vector<MoleculeRecord>& dataset,
                                const std::string& property, int n_slots,
                                const GcnConfig& arch, const TrainConfig& cfg,
                                const Checkpoint* resume) {
  auto data = load_graphs(dataset, property, n_slots);
  Rng split_rng(Rng::derive(cfg.seed, 0));
  auto [train_idx, test_idx] = split_indices(data.mols.size(), cfg.split,
                                             split_rng);

  std::vector<std::pair<Matrix, Matrix>> tensors;  // exact (A, F)
  tensors.reserve(data.mols.size());
  for (const auto& m : data.mols) tensors.push_back(exact_tensors(m));

  RegressorResult res;
  int64_t epoch_offset = 0;
  if (resume) {
    require(resume->gcn.has_value(), "resume checkpoint is not a regressor");
    res.params = *resume->gcn;
    epoch_offset = resume->epochs_done;
  } else {
    Rng init_rng(Rng::derive(cfg.seed, 1));
    res.params = init_gcn_params(arch, init_rng);
  }

  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  for (Matrix* p : param_ptrs(res.params)) opt.register_param(p);
  if (resume && !resume->adam_m.empty()) {
    opt.restore(resume->adam_t, resume->adam_m, resume->adam_v);
  }

  auto eval_mae = [&](const std::vector<int>& idx) {
    if (idx.empty()) return 0.0;
    double total = 0;
    for (int i : idx) {
      total += std::abs(gcn_eval(res.params, tensors[i].first,
                                 tensors[i].second) -
                        data.labels[i]);
    }
    return total / static_cast<double>(idx.size());
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::derive(cfg.seed, 100 + epoch_offset + epoch));
    std::vector<int> order = train_idx;
    shuffle_indices(order, rng);

    double loss_sum = 0;
    int n_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      const size_t stop = std::min(order.size(), start + cfg.batch);
      const size_t b = stop - start;
      Tape tape;
      GcnTapeParams tp = lift_gcn(tape, res.params, true);
      std::vector<Var> a_vars, f_vars;
      Matrix y(static_cast<long>(b), 1);
      for (size_t k = 0; k < b; ++k) {
        const int i = order[start + k];
        a_vars.push_back(tape.constant(
            with_noise(tensors[i].first, cfg.noise_sigma, rng)));
        f_vars.push_back(tape.constant(
            with_noise(tensors[i].second, cfg.noise_sigma, rng)));
        y(static_cast<long>(k), 0) = data.labels[i];
      }
      Var pred = gcn_forward(tape, tp, res.params, a_vars, f_vars, true, &rng);
      Var loss = ad::scale(
          ad::sum(ad::abs_elem(ad::add_const(pred, -y))), 1.0 / b);
      tape.backward(loss);
      loss_sum += tape.scalar_value(loss);
      ++n_batches;

      std::vector<Matrix> grads;
      for (Var v : tp.all()) grads.push_back(tape.grad(v));
      opt.step(grads);
    }

    EpochMetrics em;
    em.epoch = static_cast<int>(epoch_offset) + epoch + 1;
    em.train_loss = n_batches ? loss_sum / n_batches : 0.0;
    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      em.train_mae = eval_mae(train_idx);
      em.test_mae = eval_mae(test_idx);
    } else if (!res.history.empty()) {
      em.train_mae = res.history.back().train_mae;
      em.test_mae = res.history.back().test_mae;
    }
    res.history.push_back(em);
  }

  res.checkpoint.kind = "regressor";
  res.checkpoint.epochs_done = epoch_offset + cfg.epochs;
  res.checkpoint.gcn = res.params;
  res.checkpoint.adam_t = opt.steps_done();
  res.checkpoint.adam_m = opt.moments1();
  res.checkpoint.adam_v = opt.moments2();
  return res;
}

ClassifierResult train_classifier(const std::vector<MoleculeRecord>& dataset,
                                  const ClassRuleTable& table, int n_slots,
                                  const CrippenNetConfig& arch,
                                  const TrainConfig& cfg,
                                  const Checkpoint* resume) {
  auto data = load_graphs(dataset, "", n_slots);
  Rng split_rng(Rng::derive(cfg.seed, 0));
  auto [train_idx, test_idx] = split_indices(data.mols.size(), cfg.split,
                                             split_rng);

  const int K = table.n_classes();
  std::vector<std::vector<int>> classes(data.mols.size());
  std::vector<double> oracle_logp(data.mols.size());
  for (size_t i = 0; i < data.mols.size(); ++i) {
    classes[i] = classify_atoms(data.mols[i], table);
    oracle_logp[i] = crippen_logp(data.mols[i], table);
  }
  std::vector<std::pair<Matrix, Matrix>> tensors;
  tensors.reserve(data.mols.size());
  for (const auto& m : data.mols) tensors.push_back(exact_tensors(m));

  struct AtomExample {
    int mol;
    int slot;
    int cls;
  };
  std::vector<AtomExample> atoms;
  Vector freq = Vector::Zero(K);
  for (int i : train_idx) {
    for (int s = 0; s < n_slots; ++s) {
      if (classes[i][s] >= 0) {
        atoms.push_back({i, s, classes[i][s]});
        freq[classes[i][s]] += 1.0;
      }
    }
  }
  require(!atoms.empty(), "classifier training set has no atoms");
  freq /= static_cast<double>(atoms.size());

  ClassifierResult res;
  int64_t epoch_offset = 0;
  if (resume) {
    require(resume->crippen.has_value(),
            "resume checkpoint is not a classifier");
    res.params = *resume->crippen;
    epoch_offset = resume->epochs_done;
  } else {
    Rng init_rng(Rng::derive(cfg.seed, 1));
    res.params = init_crippennet(table, arch, init_rng);
  }

  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  for (Matrix* p : param_ptrs(res.params)) opt.register_param(p);
  if (resume && !resume->adam_m.empty()) {
    opt.restore(resume->adam_t, resume->adam_m, resume->adam_v);
  }

  // Misclassification-rate probe on a fixed train subsample.
  std::vector<int> probe_idx(
      train_idx.begin(),
      train_idx.begin() + std::min<size_t>(train_idx.size(), 600));

  Vector misclass = Vector::Zero(K);

  auto run_probe = [&](Vector& m_out) {
    Vector correct = Vector::Zero(K), total = Vector::Zero(K);
    int64_t hits = 0, count = 0;
    for (int i : probe_idx) {
      auto pred = crippennet_predict(res.params, table, data.mols[i]);
      for (int s = 0; s < n_slots; ++s) {
        if (classes[i][s] < 0) continue;
        total[classes[i][s]] += 1.0;
        ++count;
        if (pred.classes[s] == classes[i][s]) {
          correct[classes[i][s]] += 1.0;
          ++hits;
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      m_out[k] = total[k] > 0 ? 1.0 - correct[k] / total[k] : 0.0;
    }
    return count ? static_cast<double>(hits) / count : 0.0;
  };

  auto heldout_mae = [&]() {
    if (test_idx.empty()) return 0.0;
    double total = 0;
    for (int i : test_idx) {
      total += std::abs(
          crippennet_predict(res.params, table, data.mols[i]).logp -
          oracle_logp[i]);
    }
    return total / static_cast<double>(test_idx.size());
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::derive(cfg.seed, 500 + epoch_offset + epoch));

    // class-balanced cumulative weights over the atom pool
    std::vector<double> cum(atoms.size());
    double acc = 0;
    for (size_t a = 0; a < atoms.size(); ++a) {
      acc += sample_weight(freq[atoms[a].cls], misclass[atoms[a].cls],
                           cfg.cls_alpha, cfg.cls_epsilon);
      cum[a] = acc;
    }

    double loss_sum = 0;
    for (int b = 0; b < cfg.cls_batches_per_epoch; ++b) {
      std::map<int, std::vector<std::pair<int, int>>> by_mol;  // mol -> (slot, cls)
      for (int d = 0; d < cfg.cls_atoms_per_batch; ++d) {
        const double r = rng.uniform() * acc;
        const size_t a = std::upper_bound(cum.begin(), cum.end(), r) -
                         cum.begin();
        const auto& ex = atoms[std::min(a, atoms.size() - 1)];
        by_mol[ex.mol].emplace_back(ex.slot, ex.cls);
      }

      Tape tape;
      CrippenNetTapeParams tp = lift_crippennet(tape, res.params, true);
      std::vector<Var> picked;
      int n_sel = 0;
      for (const auto& [mol, sel] : by_mol) {
        Var a = tape.constant(
            with_noise(tensors[mol].first, cfg.noise_sigma, rng));
        Var f = tape.constant(
            with_noise(tensors[mol].second, cfg.noise_sigma, rng));
        auto fwd = crippennet_forward(tape, tp, res.params, table, a, f);
        std::vector<std::pair<int, int>> entries(sel.begin(), sel.end());
        picked.push_back(ad::gather(fwd.log_probs, std::move(entries)));
        n_sel += static_cast<int>(sel.size());
      }
      Var nll = ad::scale(ad::sum(ad::vconcat(picked)), -1.0 / n_sel);
      tape.backward(nll);
      loss_sum += tape.scalar_value(nll);

      std::vector<Matrix> grads;
      for (Var v : tp.all()) grads.push_back(tape.grad(v));
      opt.step(grads);
    }

    EpochMetrics em;
    em.epoch = static_cast<int>(epoch_offset) + epoch + 1;
    em.train_loss = loss_sum / cfg.cls_batches_per_epoch;
    em.atom_accuracy = run_probe(misclass);
    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      em.test_mae = heldout_mae();
    } else if (!res.history.empty()) {
      em.test_mae = res.history.back().test_mae;
    }
    res.history.push_back(em);
  }

  res.checkpoint.kind = "classifier";
  res.checkpoint.epochs_done = epoch_offset + cfg.epochs;
  res.checkpoint.crippen = res.params;
  res.checkpoint.adam_t = opt.steps_done();
  res.checkpoint.adam_m = opt.moments1();
  res.checkpoint.adam_v = opt.moments2();
  return res;
}

namespace {

void fill_buckets(EvalMetrics& m) {
  if (m.scatter.empty()) return;
  double lo = m.scatter[0].first, hi = lo;
  for (const auto& [t, p] : m.scatter) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const int n_buckets = 5;
  const double w = (hi - lo) / n_buckets;
  if (w <= 0) return;
  std::vector<double> sums(n_buckets, 0.0);
  std::vector<int> counts(n_buckets, 0);
  for (const auto& [t, p] : m.scatter) {
    int b = std::min(n_buckets - 1, static_cast<int>((t - lo) / w));
    sums[b] += std::abs(p - t);
    counts[b] += 1;
  }
  for (int b = 0; b < n_buckets; ++b) {
    if (!counts[b]) continue;
    std::ostringstream key;
    key << "[" << format_real(lo + b * w) << "," << format_real(lo + (b + 1) * w)
        << ")";
    m.bucket_mae[key.str()] = sums[b] / counts[b];
  }
}

}  // namespace

EvalMetrics evaluate_regressor(const GcnParams& params,
                               const std::vector<MoleculeRecord>& dataset,
                               const std::string& property, int n_slots) {
  auto data = load_graphs(dataset, property, n_slots);
  EvalMetrics m;
  double total = 0;
  for (size_t i = 0; i < data.mols.size(); ++i) {
    auto [a, f] = exact_tensors(data.mols[i]);
    const double pred = gcn_eval(params, a, f);
    m.scatter.emplace_back(data.labels[i], pred);
    total += std::abs(pred - data.labels[i]);
  }
  m.n = static_cast<int>(data.mols.size());
  m.mae = m.n ? total / m.n : 0.0;
  fill_buckets(m);
  return m;
}

EvalMetrics evaluate_classifier(const CrippenNetParams& params,
                                const ClassRuleTable& table,
                                const std::vector<MoleculeRecord>& dataset,
                                const std::string& property, int n_slots) {
  auto data = load_graphs(dataset, "", n_slots);
  EvalMetrics m;
  double total = 0;
  int64_t atom_hits = 0, atom_total = 0;
  for (size_t i = 0; i < data.mols.size(); ++i) {
    const auto truth_classes = classify_atoms(data.mols[i], table);
    const double truth = crippen_logp(data.mols[i], table);
    auto pred = crippennet_predict(params, table, data.mols[i]);
    m.scatter.emplace_back(truth, pred.logp);
    total += std::abs(pred.logp - truth);
    for (int s = 0; s < n_slots; ++s) {
      if (truth_classes[s] < 0) continue;
      ++atom_total;
      if (pred.classes[s] == truth_classes[s]) ++atom_hits;
    }
  }
  (void)property;
  m.n = static_cast<int>(data.mols.size());
  m.mae = m.n ? total / m.n : 0.0;
  m.atom_accuracy =
      atom_total ? static_cast<double>(atom_hits) / atom_total : 0.0;
  fill_buckets(m);
  return m;
}

void write_scatter(const std::string& path,
                   const std::vector<std::pair<double, double>>& scatter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write scatter file: " + path);
  out << "truth\tprediction\n";
  for (const auto& [t, p] : scatter) {
    out << format_real(t) << '\t' << format_real(p) << '\n';
  }
}

namespace {

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const long r = j.at("shape")[0].get<long>();
  const long c = j.at("shape")[1].get<long>();
  const auto& data = j.at("data");
  require(static_cast<long>(data.size()) == r * c,
          "checkpoint tensor size mismatch");
  Matrix m(r, c);
  long k = 0;
  for (long i = 0; i < r; ++i) {
    for (long jj = 0; jj < c; ++jj) m(i, jj) = data[k++].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  return matrix_to_json(Matrix(v));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json doc;
  doc["version"] = 1;
  doc["kind"] = ckpt.kind;
  doc["config_hash"] = ckpt.config_hash;
  doc["epochs_done"] = ckpt.epochs_done;
  json tensors;
  if (ckpt.gcn) {
    const auto& p = *ckpt.gcn;
    doc["arch"] = {{"input_width", p.cfg.input_width},
                   {"embed", p.cfg.embed},
                   {"n_conv", p.cfg.n_conv},
                   {"fc", p.cfg.fc},
                   {"dropout", p.cfg.dropout},
                   {"bn_momentum", p.cfg.bn_momentum}};
    tensors["w_embed"] = matrix_to_json(p.w_embed);
    for (size_t l = 0; l < p.w_conv.size(); ++l) {
      const std::string s = std::to_string(l);
      tensors["w_conv" + s] = matrix_to_json(p.w_conv[l]);
      tensors["bn_gamma" + s] = matrix_to_json(p.bn_gamma[l]);
      tensors["bn_beta" + s] = matrix_to_json(p.bn_beta[l]);
      tensors["bn_mean" + s] = vector_to_json(p.bn[l].running_mean);
      tensors["bn_var" + s] = vector_to_json(p.bn[l].running_var);
    }
    tensors["w_pool"] = matrix_to_json(p.w_pool);
    for (size_t l = 0; l < p.w_fc.size(); ++l) {
      tensors["w_fc" + std::to_string(l)] = matrix_to_json(p.w_fc[l]);
      tensors["b_fc" + std::to_string(l)] = matrix_to_json(p.b_fc[l]);
    }
  }
  if (ckpt.crippen) {
    const auto& p = *ckpt.crippen;
    doc["arch"] = {{"n_hops", p.cfg.n_hops},
                   {"head_hidden", p.cfg.head_hidden}};
    for (size_t e = 0; e < p.heads.size(); ++e) {
      if (!p.heads[e]) continue;
      const std::string base =
          std::string("head_") + kElements[e].symbol + "_";
      tensors[base + "w1"] = matrix_to_json(p.heads[e]->w1);
      tensors[base + "b1"] = matrix_to_json(p.heads[e]->b1);
      tensors[base + "w2"] = matrix_to_json(p.heads[e]->w2);
      tensors[base + "b2"] = matrix_to_json(p.heads[e]->b2);
    }
  }
  doc["tensors"] = std::move(tensors);
  doc["adam"] = {{"t", ckpt.adam_t}};
  json am = json::array(), av = json::array();
  for (const auto& m : ckpt.adam_m) am.push_back(matrix_to_json(m));
  for (const auto& v : ckpt.adam_v) av.push_back(matrix_to_json(v));
  doc["adam"]["m"] = std::move(am);
  doc["adam"]["v"] = std::move(av);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << doc.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint parse error: ") + e.what());
  }
  require(doc.at("version").get<int>() == 1, "unsupported checkpoint version");

  Checkpoint ckpt;
  ckpt.kind = doc.at("kind").get<std::string>();
  ckpt.config_hash = doc.value("config_hash", "");
  ckpt.epochs_done = doc.value("epochs_done", int64_t{0});
  const auto& tensors = doc.at("tensors");

  if (ckpt.kind == "regressor") {
    GcnParams p;
    const auto& arch = doc.at("arch");
    p.cfg.input_width = arch.at("input_width").get<int>();
    p.cfg.embed = arch.at("embed").get<int>();
    p.cfg.n_conv = arch.at("n_conv").get<int>();
    p.cfg.fc = arch.at("fc").get<std::vector<int>>();
    p.cfg.dropout = arch.at("dropout").get<double>();
    p.cfg.bn_momentum = arch.at("bn_momentum").get<double>();
    p.w_embed = matrix_from_json(tensors.at("w_embed"));
    for (int l = 0; l < p.cfg.n_conv; ++l) {
      const std::string s = std::to_string(l);
      p.w_conv.push_back(matrix_from_json(tensors.at("w_conv" + s)));
      p.bn_gamma.push_back(matrix_from_json(tensors.at("bn_gamma" + s)));
      p.bn_beta.push_back(matrix_from_json(tensors.at("bn_beta" + s)));
      auto st = ad::BatchNormState::fresh(p.cfg.embed, p.cfg.bn_momentum);
      st.running_mean = Vector(matrix_from_json(tensors.at("bn_mean" + s)));
      st.running_var = Vector(matrix_from_json(tensors.at("bn_var" + s)));
      p.bn.push_back(std::move(st));
    }
    p.w_pool = matrix_from_json(tensors.at("w_pool"));
    for (int l = 0;; ++l) {
      const std::string key = "w_fc" + std::to_string(l);
      if (!tensors.contains(key)) break;
      p.w_fc.push_back(matrix_from_json(tensors.at(key)));
      p.b_fc.push_back(
          matrix_from_json(tensors.at("b_fc" + std::to_string(l))));
    }
    ckpt.gcn = std::move(p);
  } else if (ckpt.kind == "classifier") {
    CrippenNetParams p;
    const auto& arch = doc.at("arch");
    p.cfg.n_hops = arch.at("n_hops").get<int>();
    p.cfg.head_hidden = arch.at("head_hidden").get<int>();
    p.heads.resize(kPaletteSize);
    for (int e = 0; e < kRealElements; ++e) {
      const std::string base =
          std::string("head_") + kElements[e].symbol + "_";
      if (!tensors.contains(base + "w1")) continue;
      CrippenNetHead head;
      head.w1 = matrix_from_json(tensors.at(base + "w1"));
      head.b1 = matrix_from_json(tensors.at(base + "b1"));
      head.w2 = matrix_from_json(tensors.at(base + "w2"));
      head.b2 = matrix_from_json(tensors.at(base + "b2"));
      p.heads[e] = std::move(head);
    }
    ckpt.crippen = std::move(p);
  } else {
    throw ParseError("unknown checkpoint kind: " + ckpt.kind);
  }

  if (doc.contains("adam")) {
    ckpt.adam_t = doc["adam"].value("t", int64_t{0});
    for (const auto& m : doc["adam"].value("m", json::array())) {
      ckpt.adam_m.push_back(matrix_from_json(m));
    }
    for (const auto& v : doc["adam"].value("v", json::array())) {
      ckpt.adam_v.push_back(matrix_from_json(v));
    }
  }
  return ckpt;
}

void append_metrics(const std::string& path,
                    const std::vector<EpochMetrics>& history,
                    const std::string& kind) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write metrics file: " + path);
  for (const auto& em : history) {
    json line{{"kind", kind},
              {"epoch", em.epoch},
              {"train_loss", em.train_loss},
              {"train_mae", em.train_mae},
              {"test_mae", em.test_mae}};
    if (em.atom_accuracy >= 0) line["atom_accuracy"] = em.atom_accuracy;
    out << line.dump() << '\n';
  }
}

}  // namespace didgen
