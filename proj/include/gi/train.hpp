// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Poisson-loss training (Adam, cosine annealing) and per-track Pearson
// evaluation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gi/data.hpp"
#include "gi/model.hpp"

namespace gi {

/// mean(ŷ − y·log ŷ) over all entries; the log y! constant is omitted.
/// Throws NumericError when any prediction is not strictly positive.
template <class Real>
Var<Real> poisson_nll(Var<Real> pred, const Tensor<double>& target);

struct AdamState {
  std::vector<Tensor<double>> m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Zero moments shaped like `params`.
  static AdamState like(const std::vector<Tensor<double>*>& params);
};

/// One bias-corrected Adam update. A non-finite gradient throws NumericError
/// naming the parameter; nothing is modified in that case.
void adam_step(const std::vector<Tensor<double>*>& params, const std::vector<Tensor<double>>& grads, AdamState& state,
               double lr);

struct LrSchedule {
  double base_lr = 3e-4;
  std::size_t t_max = 1000;
  double eta_min = 0.0;
};

/// eta_min + (base − eta_min)·(1 + cos(π·min(step, T_max)/T_max))/2.
double cosine_lr(std::size_t step, const LrSchedule& schedule);

/// Sample correlation, or nullopt when either side is constant.
/// Throws ContractError on length mismatch or fewer than two samples.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
  std::vector<std::string> track_groups;
  std::vector<std::optional<double>> per_track;
  /// Groups in order of first appearance; nullopt when no track in the group is defined.
  std::vector<std::pair<std::string, std::optional<double>>> group_means;
  std::optional<double> overall;
  std::vector<std::size_t> undefined;
  std::size_t records = 0;

  nlohmann::json to_json() const;
};

/// Builds the report from per-track correlations (group means, overall, undefined list).
MetricsReport summarize(const std::vector<std::optional<double>>& per_track,
                        const std::vector<std::string>& track_groups, std::size_t records);

/// Per-track Pearson over all records and bins of `ds`. Records are predicted
/// in parallel (GI_THREADS, default 1); the reduction order is fixed.
MetricsReport evaluate(const InterpreterParams& params, const InterpreterConfig& config, const AssayDataset& ds);

/// Worker count from GI_THREADS (minimum 1).
std::size_t default_threads();

struct TrainHyper {
  std::size_t batch = 8;
  std::size_t steps = 1000;
  LrSchedule schedule;     ///< t_max = 0 means "use steps"
  double clip_norm = 1.0;  ///< global gradient norm; ≤ 0 disables
  std::size_t eval_every = 50;

  void validate() const;
};

struct LogRow {
  std::size_t step = 0;  ///< 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_overall;
};

struct TrainResult {
  InterpreterParams params;  ///< best-validation parameters (final ones without validation data)
  std::vector<LogRow> log;
  std::optional<double> best_val;
  std::size_t best_step = 0;
  bool diverged = false;
  std::string diagnostic;
};

/// Deterministic given (config, data, hyper, seed): parameters come from
/// build(config, seed) and the epoch shuffles from fork(epoch) of a second stream.
/// On a non-finite loss or gradient training stops, `diverged` is set and
/// `params` holds the last good parameters.
TrainResult train_loop(const InterpreterConfig& config, const AssayDataset& train, const AssayDataset* val,
                       const TrainHyper& hyper, std::uint64_t seed);

/// Throws ConfigError when the dataset cannot feed the model.
void check_compatible(const InterpreterConfig& config, const AssayDataset& ds);

/// "step,lr,train_loss,val_overall_pearson" header plus one line per row.
std::string log_to_csv(const std::vector<LogRow>& log);

/// Flat parameter views in for_each_tensor order.
std::vector<Tensor<double>*> parameter_list(InterpreterParams& params);

}  // namespace gi
