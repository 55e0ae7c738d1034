// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "gi/rng.hpp"

namespace gi {
namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
// handled by exactly one worker; callers write results by index.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RecordGrad {
  double loss = 0.0;
  std::vector<Tensor<double>> grads;
};

RecordGrad record_gradient(const InterpreterParams& params, const InterpreterConfig& config, const Tensor<double>& x,
                           const Tensor<double>& y) {
  Tape<double> tape;
  InterpreterWeights<Var<double>> w = bind<double>(tape, params, true);
  const ModelOutput<double> out = forward(w, tape.constant(x), config);
  const Var<double> loss = poisson_nll(out.prediction, y);
  tape.backward(loss);
  RecordGrad r;
  r.loss = loss.value()[0];
  for_each_tensor(w, [&](const std::string&, Var<double>& v) { r.grads.push_back(v.grad()); });
  return r;
}

bool all_finite(const Tensor<double>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

template <class Real>
Var<Real> poisson_nll(Var<Real> pred, const Tensor<double>& target) {
  if (pred.shape() != target.shape())
    throw DimensionError("poisson_nll: prediction " + shape_string(pred.shape()) + " vs target " +
                         shape_string(target.shape()));
  const Tensor<Real>& p = pred.value();
  const double count = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double yhat = static_cast<double>(p[i]);
    if (!(yhat > 0.0))
      throw NumericError("poisson_nll: prediction " + format_double(yhat) + " at entry " + std::to_string(i) +
                         " is not positive");
    if (target[i] < 0.0) throw ContractError("poisson_nll: negative target at entry " + std::to_string(i));
    total += yhat - target[i] * std::log(yhat);
  }
  Tensor<Real> out({1});
  out[0] = static_cast<Real>(total / count);
  const std::size_t pi = pred.id();
  return pred.tape().record(std::move(out), {pred}, [pi, target, count](Tape<Real>& tape, std::size_t self) {
    const Real g = tape.output_grad(self)[0];
    const Tensor<Real>& pv = tape.value(pi);
    Tensor<Real>& gp = tape.grad_buffer(pi);
    for (std::size_t i = 0; i < pv.size(); ++i)
      gp[i] += g * static_cast<Real>((1.0 - target[i] / static_cast<double>(pv[i])) / count);
  });
}

template Var<float> poisson_nll(Var<float>, const Tensor<double>&);
template Var<double> poisson_nll(Var<double>, const Tensor<double>&);

AdamState AdamState::like(const std::vector<Tensor<double>*>& params) {
  AdamState s;
  for (const Tensor<double>* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(const std::vector<Tensor<double>*>& params, const std::vector<Tensor<double>>& grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size())
    throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                        std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) + " moments");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape())
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " is " + shape_string(params[i]->shape()) +
                           ", gradient " + shape_string(grads[i].shape()));
    for (std::size_t j = 0; j < grads[i].size(); ++j)
      if (!std::isfinite(grads[i][j]))
        throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i) + " at entry " +
                           std::to_string(j) + "; step aborted");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<double>& p = *params[i];
    Tensor<double>& m = state.m[i];
    Tensor<double>& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

double cosine_lr(std::size_t step, const LrSchedule& schedule) {
  if (schedule.t_max == 0) throw ConfigError("cosine schedule needs T_max > 0");
  const double frac = static_cast<double>(std::min(step, schedule.t_max)) / static_cast<double>(schedule.t_max);
  return schedule.eta_min + (schedule.base_lr - schedule.eta_min) * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ContractError("pearson: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " differ");
  if (a.size() < 2) throw ContractError("pearson: needs at least two samples");
  auto constant = [](std::span<const double> s) {
    return std::all_of(s.begin(), s.end(), [&](double v) { return v == s.front(); });
  };
  if (constant(a) || constant(b)) return std::nullopt;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricsReport summarize(const std::vector<std::optional<double>>& per_track,
                        const std::vector<std::string>& track_groups, std::size_t records) {
  if (per_track.size() != track_groups.size())
    throw ContractError("summarize: " + std::to_string(per_track.size()) + " tracks, " +
                        std::to_string(track_groups.size()) + " group labels");
  MetricsReport report;
  report.track_groups = track_groups;
  report.per_track = per_track;
  report.records = records;
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t t = 0; t < per_track.size(); ++t) {
    if (!per_track[t]) {
      report.undefined.push_back(t);
      continue;
    }
    total += *per_track[t];
    ++defined;
  }
  if (defined > 0) report.overall = total / static_cast<double>(defined);

  std::vector<std::string> order;
  for (const std::string& g : track_groups)
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);
  for (const std::string& g : order) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < per_track.size(); ++t)
      if (track_groups[t] == g && per_track[t]) {
        sum += *per_track[t];
        ++count;
      }
    report.group_means.emplace_back(g, count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt);
  }
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["records"] = records;
  j["tracks"] = per_track.size();
  j["overall_pearson"] = opt(overall);
  j["per_track"] = nlohmann::json::array();
  for (std::size_t t = 0; t < per_track.size(); ++t)
    j["per_track"].push_back({{"track", t}, {"group", track_groups[t]}, {"pearson", opt(per_track[t])}});
  j["groups"] = nlohmann::json::array();
  for (const auto& [name, mean] : group_means) {
    const auto members = std::count(track_groups.begin(), track_groups.end(), name);
    j["groups"].push_back({{"group", name}, {"tracks", members}, {"mean_pearson", opt(mean)}});
  }
  j["undefined_tracks"] = undefined;
  return j;
}

std::size_t default_threads() {
  const char* env = std::getenv("GI_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  return (end != env && v > 0) ? static_cast<std::size_t>(v) : 1;
}

void check_compatible(const InterpreterConfig& config, const AssayDataset& ds) {
  if (ds.n != config.n || ds.m != config.m || ds.tracks != config.tracks)
    throw ConfigError("dataset (n=" + std::to_string(ds.n) + ", m=" + std::to_string(ds.m) +
                      ", T=" + std::to_string(ds.tracks) + ") does not match model (n=" + std::to_string(config.n) +
                      ", m=" + std::to_string(config.m) + ", T=" + std::to_string(config.tracks) + ")");
  if (config.d_in != 4) throw ConfigError("model d_in must be 4 for one-hot sequence input");
}

MetricsReport evaluate(const InterpreterParams& params, const InterpreterConfig& config, const AssayDataset& ds) {
  if (ds.size() == 0) throw ContractError("evaluate: empty dataset");
  check_compatible(config, ds);
  std::vector<Tensor<double>> predictions(ds.size());
  parallel_for(ds.size(), default_threads(),
               [&](std::size_t i) { predictions[i] = predict<double>(params, config, ds.inputs[i]); });

  const std::size_t m = ds.m, count = ds.size() * m;
  std::vector<std::optional<double>> per_track(ds.tracks);
  std::vector<double> pred(count), truth(count);
  for (std::size_t t = 0; t < ds.tracks; ++t) {
    for (std::size_t r = 0; r < ds.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) {
        pred[r * m + j] = predictions[r](j, t);
        truth[r * m + j] = ds.targets[r](j, t);
      }
    per_track[t] = count >= 2 ? pearson(pred, truth) : std::nullopt;
  }
  std::vector<std::string> groups = config.track_groups;
  if (groups.size() != ds.tracks) groups = ds.track_groups;
  return summarize(per_track, groups, ds.size());
}

void TrainHyper::validate() const {
  if (batch == 0) throw ConfigError("batch size must be positive");
  if (!(schedule.base_lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (schedule.eta_min < 0.0 || schedule.eta_min > schedule.base_lr)
    throw ConfigError("eta_min must lie in [0, base_lr]");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
}

std::vector<Tensor<double>*> parameter_list(InterpreterParams& params) {
  std::vector<Tensor<double>*> out;
  for_each_tensor(params, [&](const std::string&, Tensor<double>& t) { out.push_back(&t); });
  return out;
}

TrainResult train_loop(const InterpreterConfig& config, const AssayDataset& train, const AssayDataset* val,
                       const TrainHyper& hyper, std::uint64_t seed) {
  config.validate();
  hyper.validate();
  check_compatible(config, train);
  if (val && val->size() > 0) check_compatible(config, *val);
  if (hyper.steps > 0 && train.size() == 0) throw ContractError("train_loop: empty training set");
  LrSchedule schedule = hyper.schedule;
  if (schedule.t_max == 0) schedule.t_max = std::max<std::size_t>(hyper.steps, 1);

  TrainResult result;
  InterpreterParams params = build(config, seed);
  result.params = params;
  const std::vector<Tensor<double>*> plist = parameter_list(params);
  AdamState adam = AdamState::like(plist);
  const bool validating = val && val->size() > 0;

  const Rng shuffle_root = Rng(seed).fork(0x5348554646ULL);
  std::vector<std::size_t> order;
  std::size_t epoch = 0, cursor = 0;
  auto next_record = [&]() {
    if (cursor == order.size()) {
      order.resize(train.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng = shuffle_root.fork(epoch++);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  const std::size_t threads = default_threads();
  for (std::size_t step = 1; step <= hyper.steps; ++step) {
    std::vector<std::size_t> batch(hyper.batch);
    for (std::size_t& b : batch) b = next_record();
    std::vector<RecordGrad> parts(batch.size());
    const double lr = cosine_lr(step - 1, schedule);
    try {
      parallel_for(batch.size(), threads, [&](std::size_t i) {
        parts[i] = record_gradient(params, config, train.inputs[batch[i]], train.targets[batch[i]]);
      });
    } catch (const NumericError& e) {
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + ": " + e.what();
      break;
    }

    // Ordered reduction keeps the result independent of the worker count.
    double loss = 0.0;
    std::vector<Tensor<double>> grads = std::move(parts.front().grads);
    loss += parts.front().loss;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      loss += parts[i].loss;
      for (std::size_t p = 0; p < grads.size(); ++p)
        for (std::size_t j = 0; j < grads[p].size(); ++j) grads[p][j] += parts[i].grads[p][j];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    loss *= inv;
    double norm2 = 0.0;
    for (Tensor<double>& g : grads)
      for (double& v : g.data()) {
        v *= inv;
        norm2 += v * v;
      }
    if (!std::isfinite(loss) || !std::isfinite(norm2)) {
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + ": non-finite loss or gradient";
      break;
    }
    if (hyper.clip_norm > 0.0 && std::sqrt(norm2) > hyper.clip_norm) {
      const double s = hyper.clip_norm / std::sqrt(norm2);
      for (Tensor<double>& g : grads)
        for (double& v : g.data()) v *= s;
    }
    const InterpreterParams before = params;
    try {
      adam_step(plist, grads, adam, lr);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    bool finite = true;
    for (const Tensor<double>* p : plist) finite = finite && all_finite(*p);
    if (!finite) {
      params = before;
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + ": parameters became non-finite";
      break;
    }

    LogRow row{step, lr, loss, std::nullopt};
    if (validating && (step % hyper.eval_every == 0 || step == hyper.steps)) {
      row.val_overall = evaluate(params, config, *val).overall;
      if (row.val_overall && (!result.best_val || *row.val_overall > *result.best_val)) {
        result.best_val = row.val_overall;
        result.best_step = step;
        result.params = params;
      }
    }
    result.log.push_back(row);
  }
  if (!result.best_val) {
    result.params = params;
    result.best_step = result.log.size();
  }
  return result;
}

std::string log_to_csv(const std::vector<LogRow>& log) {
  std::ostringstream out;
  out << "step,lr,train_loss,val_overall_pearson\n";
  for (const LogRow& r : log)
    out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.train_loss) << ','
        << format_optional(r.val_overall) << '\n';
  return out.str();
}

}  // namespace gi
