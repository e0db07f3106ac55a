// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "didgen/harness.hpp"

namespace {

using namespace didgen;
using namespace didgen::harness;

int dispatch(int argc, char** argv) {
  CLI::App app{"didgen: property-targeted molecular graph generation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset = "desk";
  app.add_option("--config", config_path, "configuration file (overlay)");
  app.add_option("--preset", preset, "base preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));

  // gen-dataset
  auto* gen_ds = app.add_subcommand(
      "gen-dataset", "synthesize a labeled random-molecule dataset");
  int ds_n = 10000;
  uint64_t ds_seed = 7;
  std::string ds_out;
  gen_ds->add_option("--n", ds_n, "number of molecules");
  gen_ds->add_option("--seed", ds_seed, "sampler seed");
  gen_ds->add_option("--out", ds_out, "output dataset path")->required();

  // train
  auto* train = app.add_subcommand("train", "train a property proxy");
  TrainOptions topt;
  train->add_option("--task", topt.task, "gap | logp")
      ->required()
      ->check(CLI::IsMember({"gap", "logp"}));
  train->add_option("--dataset", topt.dataset_path, "dataset file")
      ->required();
  train->add_option("--out", topt.out_checkpoint, "checkpoint output path")
      ->required();
  train->add_option("--metrics", topt.metrics_path,
                    "append per-epoch metrics to this file");
  train->add_option("--resume", topt.resume_from,
                    "resume from an existing checkpoint");

  // generate
  auto* gen = app.add_subcommand("generate",
                                 "optimize molecules toward a target");
  GenerateOptions gopt;
  std::string init_flag;
  gen->add_option("--checkpoint", gopt.checkpoint_path, "trained proxy")
      ->required();
  double target_value = 0, window_hw = 0, pct = 0;
  auto* t_opt = gen->add_option("--target", target_value,
                                "target value (window center with --window)");
  auto* w_opt = gen->add_option("--window", window_hw,
                                "half-width: target +- window");
  gen->add_option("--tau", gopt.tau, "point-target tolerance");
  auto* p_opt = gen->add_option("--target-percentile", pct,
                                "resolve target from dataset percentile");
  gen->add_option("--dataset", gopt.dataset_path,
                  "dataset for percentiles / from-dataset init");
  gen->add_option("--n", gopt.n, "molecules to generate");
  gen->add_option("--out", gopt.out_path, "emitted molecule file");
  gen->add_option("--report", gopt.report_path, "run report (structured)");
  gen->add_option("--trace", gopt.trace_dir, "directory for per-run traces");
  gen->add_option("--jobs", gopt.jobs, "parallel generation workers");
  gen->add_option("--init", init_flag, "random | from-dataset");
  gen->add_flag("--oracle-exact", gopt.oracle_exact,
                "classifier proxy: substitute oracle-exact classification");

  // evaluate
  auto* eval = app.add_subcommand("evaluate",
                                  "recompute oracle metrics for a file");
  EvaluateOptions eopt;
  double e_target = 0, e_window = 0;
  eval->add_option("--molecules", eopt.molecules_path, "molecule file")
      ->required();
  eval->add_option("--task", eopt.task, "gap | logp")
      ->required()
      ->check(CLI::IsMember({"gap", "logp"}));
  auto* et_opt = eval->add_option("--target", e_target, "target value");
  auto* ew_opt = eval->add_option("--window", e_window, "half-width");
  eval->add_option("--tau", eopt.tau, "point tolerance");
  eval->add_option("--checkpoint", eopt.checkpoint_path,
                   "proxy checkpoint for the scatter file");
  eval->add_option("--report", eopt.report_path, "report output path");
  eval->add_option("--scatter", eopt.scatter_path,
                   "oracle-vs-proxy scatter data output");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference gradient verification");
  std::string corrupt_op;
  gc->add_option("--corrupt-op", corrupt_op,
                 "negative control: corrupt the named op's adjoint");

  CLI11_PARSE(app, argc, argv);

  Config cfg = Config::load(config_path, preset);

  if (gen_ds->parsed()) {
    return run_gen_dataset(cfg, ds_n, ds_seed, ds_out, std::cout);
  }
  if (train->parsed()) {
    return run_train(cfg, topt, std::cout);
  }
  if (gen->parsed()) {
    if (t_opt->count()) gopt.target = target_value;
    if (w_opt->count()) gopt.window = window_hw;
    if (p_opt->count()) gopt.target_percentile = pct;
    if (!init_flag.empty()) gopt.init_override = init_flag;
    return run_generate(cfg, gopt, std::cout);
  }
  if (eval->parsed()) {
    if (et_opt->count()) eopt.target = e_target;
    if (ew_opt->count()) eopt.window = e_window;
    return run_evaluate(cfg, eopt, std::cout);
  }
  if (gc->parsed()) {
    return run_gradcheck(cfg, corrupt_op, std::cout);
  }
  return kUsageError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const didgen::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return didgen::harness::kIoError;
  } catch (const didgen::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return didgen::harness::kIoError;
  } catch (const didgen::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return didgen::harness::kBudgetError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return didgen::harness::kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return didgen::harness::kUsageError;
  }
}
