// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// gi: dataset synthesis, training, evaluation, prediction, attention export
// and complexity benchmarking.
//
// Exit codes: 0 success, 2 usage or configuration, 3 I/O or file format,
// 4 numerical failure (divergence, madd mismatch).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gi/atlas.hpp"
#include "gi/data.hpp"
#include "gi/train.hpp"

namespace fs = std::filesystem;
using namespace gi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

// Provenance echo: the effective configuration plus the command line.
std::string echo_text(const ConfigTree& tree, const std::vector<std::string>& argv) {
  std::string cmd = "; gi";
  for (const std::string& a : argv) cmd += " " + a;
  return cmd + "\n" + config_to_text(tree);
}

ConfigTree load_tree(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigTree tree = path.empty() ? ConfigTree() : read_config_file(path);
  apply_overrides(tree, overrides);
  return tree;
}

TrainHyper hyper_from_tree(const ConfigTree& tree) {
  TrainHyper h;
  h.batch = get_size(tree, "train.batch", h.batch);
  h.steps = get_size(tree, "train.steps", h.steps);
  h.schedule.base_lr = get_double(tree, "train.lr", h.schedule.base_lr);
  h.schedule.eta_min = get_double(tree, "train.eta_min", h.schedule.eta_min);
  h.schedule.t_max = get_size(tree, "train.t_max", 0);
  h.clip_norm = get_double(tree, "train.clip_norm", h.clip_norm);
  h.eval_every = get_size(tree, "train.eval_every", h.eval_every);
  h.validate();
  return h;
}

std::string metrics_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "track,group,pearson,records\n";
  for (std::size_t t = 0; t < r.per_track.size(); ++t)
    out << t << ',' << r.track_groups[t] << ',' << (r.per_track[t] ? format_double(*r.per_track[t]) : "") << ','
        << r.records << '\n';
  return out.str();
}

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

struct Args {
  std::vector<std::string> argv;
  std::vector<std::string> overrides;
};

int cmd_synth(const std::string& spec_path, std::size_t count, std::uint64_t seed, const std::string& out,
              const Args& args) {
  ConfigTree tree = load_tree(spec_path, args.overrides);
  const SyntheticTaskSpec spec = spec_path.empty() && args.overrides.empty() ? default_task() : task_from_tree(tree);
  ConfigTree echo;
  task_to_tree(spec, echo);
  echo.put("synth.count", count);
  echo.put("synth.seed", seed);
  const AssayDataset ds = generate_synthetic(spec, count, seed);
  save_dataset(out, ds);
  write_text(out + ".spec.ini", echo_text(echo, args.argv));
  std::cout << "wrote " << ds.size() << " records (n=" << ds.n << ", m=" << ds.m << ", T=" << ds.tracks << ") to "
            << out << "\n";
  return 0;
}

int cmd_split(const std::string& data, const std::vector<double>& fractions, std::uint64_t seed,
              const std::string& prefix, const Args& args) {
  if (fractions.size() != 3) throw ConfigError("--fractions needs three values (train, val, test)");
  const AssayDataset ds = load_dataset(data);
  const DatasetSplit split = split_dataset(ds, {fractions[0], fractions[1], fractions[2]}, seed);
  save_dataset(prefix + ".train.gids", split.train);
  save_dataset(prefix + ".val.gids", split.val);
  save_dataset(prefix + ".test.gids", split.test);
  ConfigTree echo;
  echo.put("split.data", data);
  echo.put("split.fractions", join(fractions));
  echo.put("split.seed", seed);
  write_text(prefix + ".split.ini", echo_text(echo, args.argv));
  std::cout << "train " << split.train.size() << ", val " << split.val.size() << ", test " << split.test.size()
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& val_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed_flag, const Args& args) {
  ConfigTree tree = load_tree(config_path, args.overrides);
  const InterpreterConfig config = model_config_from_tree(tree);
  const TrainHyper hyper = hyper_from_tree(tree);
  const std::uint64_t seed = seed_flag ? *seed_flag : get_u64(tree, "train.seed", 0);
  tree.put("train.seed", seed);

  const AssayDataset train = load_dataset(data);
  check_compatible(config, train);
  std::optional<AssayDataset> val;
  if (!val_path.empty()) {
    val = load_dataset(val_path);
    check_compatible(config, *val);
  }
  const fs::path dir(out_dir);
  make_dir(dir);
  ConfigTree echo = tree;
  model_config_to_tree(config, echo);
  write_text(dir / "config.ini", echo_text(echo, args.argv));

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train_loop(config, train, val ? &*val : nullptr, hyper, seed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint((dir / "checkpoint.bin").string(), config, result.params);
  write_text(dir / "train_log.csv", log_to_csv(result.log));
  nlohmann::json metrics;
  metrics["steps_completed"] = result.log.size();
  metrics["checkpoint_step"] = result.best_step;
  metrics["diverged"] = result.diverged;
  if (result.diverged) metrics["diagnostic"] = result.diagnostic;
  if (!result.log.empty()) metrics["final_train_loss"] = result.log.back().train_loss;
  if (train.size() > 0) metrics["train"] = evaluate(result.params, config, train).to_json();
  if (val && val->size() > 0) metrics["val"] = evaluate(result.params, config, *val).to_json();
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");

  std::cerr << "trained " << result.log.size() << " steps in " << format_double(std::round(seconds * 10) / 10)
            << " s; checkpoint from step " << result.best_step << "\n";
  if (metrics.contains("train"))
    std::cout << "train overall pearson: " << metrics["train"]["overall_pearson"].dump() << "\n";
  if (metrics.contains("val")) std::cout << "val overall pearson: " << metrics["val"]["overall_pearson"].dump() << "\n";
  if (result.diverged) {
    std::cerr << "error: training diverged (" << result.diagnostic << "); last good parameters saved\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out, const Args& args) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const AssayDataset ds = load_dataset(data);
  check_compatible(ck.config, ds);
  const MetricsReport report = evaluate(ck.params, ck.config, ds);
  nlohmann::json j = report.to_json();
  j["checkpoint"] = checkpoint;
  j["data"] = data;
  write_text(out, j.dump(2) + "\n");
  fs::path csv(out);
  csv.replace_extension(".csv");
  write_text(csv, metrics_csv(report));
  ConfigTree echo;
  model_config_to_tree(ck.config, echo);
  echo.put("eval.checkpoint", checkpoint);
  echo.put("eval.data", data);
  write_text(out + ".config.ini", echo_text(echo, args.argv));
  std::cout << "overall pearson: " << optional_text(report.overall) << "\n";
  for (const auto& [group, mean] : report.group_means) std::cout << "  " << group << ": " << optional_text(mean) << "\n";
  if (!report.undefined.empty()) std::cout << "undefined tracks: " << report.undefined.size() << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& data, const std::string& out, const Args& args) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const AssayDataset ds = load_dataset(data);
  check_compatible(ck.config, ds);
  std::ostringstream csv;
  csv << "record_id,bin,track,prediction,target\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const Tensor<double> y = predict<double>(ck.params, ck.config, ds.inputs[r]);
    for (std::size_t j = 0; j < ds.m; ++j)
      for (std::size_t t = 0; t < ds.tracks; ++t)
        csv << ds.ids[r] << ',' << j << ',' << t << ',' << format_double(y(j, t)) << ','
            << format_double(ds.targets[r](j, t)) << '\n';
  }
  write_text(out, csv.str());
  ConfigTree echo;
  model_config_to_tree(ck.config, echo);
  echo.put("predict.checkpoint", checkpoint);
  echo.put("predict.data", data);
  write_text(out + ".config.ini", echo_text(echo, args.argv));
  return 0;
}

// One n×4 record: a dataset container (record chosen by index) or "id<TAB>sequence" text.
std::pair<std::string, Tensor<double>> read_record(const std::string& path, std::size_t index) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError(path, "cannot open input record");
  char head[4] = {};
  probe.read(head, 4);
  if (probe.gcount() == 4 && std::string(head, 4) == "GIDS") {
    const AssayDataset ds = load_dataset(path);
    if (index >= ds.size())
      throw ConfigError("--index " + std::to_string(index) + " out of range for " + std::to_string(ds.size()) +
                        " records");
    return {ds.ids[index], ds.inputs[index]};
  }
  const auto records = read_sequences(path);
  if (index >= records.size())
    throw ConfigError("--index " + std::to_string(index) + " out of range for " + std::to_string(records.size()) +
                      " records");
  return {records[index].first, one_hot_encode(records[index].second)};
}

int cmd_attn(const std::string& checkpoint, const std::string& input, std::size_t index, const std::string& out_dir,
             bool render, std::size_t layer, const std::string& norm, const Args& args) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto [id, x] = read_record(input, index);
  if (x.rows() != ck.config.n)
    throw ConfigError("record " + id + " has " + std::to_string(x.rows()) + " bp, model expects " +
                      std::to_string(ck.config.n));
  const std::size_t depth = ck.config.depth();
  if (layer == 0) layer = depth;
  if (layer > depth)
    throw ConfigError("--layer " + std::to_string(layer) + " exceeds model depth " + std::to_string(depth));
  HeatmapStyle style;
  style.norm = parse_norm(norm);

  Tape<double> tape(false);
  const InterpreterWeights<Var<double>> w = bind<double>(tape, ck.params, false);
  const ModelOutput<double> out = forward(w, tape.constant(x), ck.config, true);
  const AttentionAtlas& atlas = *out.atlas;

  const fs::path dir(out_dir);
  make_dir(dir);
  export_atlas(atlas, out_dir);

  std::ostringstream csv;
  csv << "layer,slot,window,head,length,diagonality\n";
  std::vector<double> layer_sum(depth + 1, 0.0);
  std::vector<std::size_t> layer_count(depth + 1, 0);
  for (const AttentionRecord& r : atlas.records)
    for (std::size_t h = 0; h < r.heads.size(); ++h) {
      const double di = diagonality_index(r.heads[h]);
      csv << r.layer << ',' << r.slot << ',' << r.window << ',' << h << ',' << r.heads[h].rows() << ','
          << format_double(di) << '\n';
      layer_sum[r.layer] += di;
      ++layer_count[r.layer];
    }
  write_text(dir / "diagonality.csv", csv.str());

  if (render) {
    const fs::path rdir = dir / "render";
    make_dir(rdir);
    for (const AtlasLayer& l : atlas.layers)
      render_layer_grid(atlas, l.layer, style, (rdir / ("layer_" + std::to_string(l.layer) + ".svg")).string());
    render_head_panel(atlas, layer, style, (rdir / ("layer_" + std::to_string(layer) + "_heads.svg")).string());
  }
  ConfigTree echo;
  model_config_to_tree(ck.config, echo);
  echo.put("attn.checkpoint", checkpoint);
  echo.put("attn.input", input);
  echo.put("attn.record", id);
  echo.put("attn.layer", layer);
  echo.put("attn.normalization", norm_name(style.norm));
  write_text(dir / "config.ini", echo_text(echo, args.argv));

  std::cout << "exported " << atlas.records.size() << " attention records for " << id << "\n";
  std::cout << "mean diagonality by layer:";
  for (std::size_t l = 1; l <= depth; ++l)
    std::cout << ' ' << format_double(std::round(layer_sum[l] / std::max<std::size_t>(1, layer_count[l]) * 1e4) / 1e4);
  std::cout << "\n";
  return 0;
}

// The same model with every window covering its whole layer (no shift).
InterpreterConfig dense_variant(InterpreterConfig c) {
  const std::vector<std::size_t> counts = c.token_counts();
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    c.layers[i].window = counts[i];
    c.layers[i].shift = 0;
  }
  return c;
}

double growth_exponent(const std::vector<double>& n, const std::vector<double>& y) {
  // Least-squares slope of log y against log n.
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    mx += std::log(n[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n.size());
  my /= static_cast<double>(n.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    sxy += (std::log(n[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(n[i]) - mx) * (std::log(n[i]) - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::size_t>& lengths, const std::string& out,
              std::size_t repeats, const Args& args) {
  if (lengths.empty()) throw ConfigError("--lengths is empty");
  if (repeats < 5) throw ConfigError("--repeats must be at least 5");
  const ConfigTree base = load_tree(config_path, args.overrides);
  std::ostringstream csv;
  csv << "mode,n,k,analytic_madds,measured_madds,analytic_score,measured_score,median_seconds\n";
  bool mismatch = false;
  for (const char* mode : {"windowed", "dense"}) {
    std::vector<double> ns, scores;
    for (std::size_t n : lengths) {
      ConfigTree tree = base;
      tree.put("model.n", n);
      InterpreterConfig c = model_config_from_tree(tree);
      if (std::string(mode) == "dense") c = dense_variant(c);
      c.validate();
      const MaddReport analytic = count_madds(c);
      const InterpreterParams params = build(c, 1);
      Rng rng(n);
      Tensor<double> x({n, c.d_in});
      for (std::size_t i = 0; i < n; ++i) x(i, rng.below(c.d_in)) = 1.0;

      std::vector<double> times;
      std::uint64_t measured = 0, measured_score = 0;
      for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        Tape<float> tape(false);
        const InterpreterWeights<Var<float>> w = bind<float>(tape, params, false);
        forward(w, tape.constant(x.cast<float>()), c);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        measured = tape.madds();
        measured_score = tape.madds(MaddKind::Score);
      }
      std::sort(times.begin(), times.end());
      const double median = times[times.size() / 2];
      mismatch = mismatch || measured != analytic.total() || measured_score != analytic.score();
      csv << mode << ',' << n << ',' << c.layers.front().window << ',' << analytic.total() << ',' << measured << ','
          << analytic.score() << ',' << measured_score << ',' << format_double(median) << '\n';
      ns.push_back(static_cast<double>(n));
      scores.push_back(static_cast<double>(analytic.swin_score()));
      std::cout << mode << " n=" << n << " madds=" << measured << " (analytic " << analytic.total() << ") median "
                << format_double(median) << " s\n";
    }
    if (ns.size() >= 2)
      std::cout << mode << " 1D-Swin attention-score growth exponent: "
                << format_double(std::round(growth_exponent(ns, scores) * 1000) / 1000) << "\n";
  }
  write_text(out, csv.str());
  ConfigTree echo = base;
  echo.put("bench.lengths", join(lengths));
  echo.put("bench.repeats", repeats);
  write_text(out + ".config.ini", echo_text(echo, args.argv));
  if (mismatch) {
    std::cerr << "error: measured multiply-adds differ from the analytic count\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_ingest(const std::string& sequences, const std::string& targets, std::size_t m, std::size_t bin_width,
               const std::vector<std::string>& groups, const std::string& out, const Args& args) {
  const AssayDataset ds = dataset_from_text(sequences, targets, m, bin_width, groups);
  save_dataset(out, ds);
  ConfigTree echo;
  echo.put("ingest.sequences", sequences);
  echo.put("ingest.targets", targets);
  echo.put("ingest.m", m);
  echo.put("ingest.bin_width", bin_width);
  echo.put("ingest.groups", join(groups));
  write_text(out + ".spec.ini", echo_text(echo, args.argv));
  std::cout << "wrote " << ds.size() << " records to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Genomic Interpreter: hierarchical 1D-Swin models for binned genomic assays"};
  app.require_subcommand(1);
  Args args;
  for (int i = 1; i < argc; ++i) args.argv.emplace_back(argv[i]);
  app.add_option("--set", args.overrides, "Config override section.key=value (repeatable, wins over files)");

  std::string spec, out, config, data, val, checkpoint, input, norm = "per-row", sequences, targets;
  std::size_t count = 0, layer = 0, index = 0, repeats = 5, m = 8, bin_width = 64;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> steps;
  std::vector<double> fractions;
  std::vector<std::size_t> lengths;
  std::vector<std::string> groups;
  bool render = false;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", spec, "Task spec file ([task], [motif_<i>], [pair_<i>]); default task if omitted");
  synth->add_option("--count", count, "Number of records")->required();
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--out", out, "Dataset container path")->required();

  CLI::App* split = app.add_subcommand("split", "Split a dataset into train/val/test by shuffled 16-record blocks");
  split->add_option("--data", data, "Dataset container")->required();
  split->add_option("--fractions", fractions, "Train, val, test fractions")->delimiter(',')->required();
  split->add_option("--seed", seed, "Shuffle seed");
  split->add_option("--out", out, "Output prefix")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config, "Config file ([model], [train])")->required();
  train->add_option("--data", data, "Training dataset")->required();
  train->add_option("--val", val, "Validation dataset (best checkpoint selection)");
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--seed", train_seed, "Seed (overrides train.seed)");
  train->add_option("--steps", steps, "Training steps (overrides train.steps)");

  CLI::App* eval = app.add_subcommand("eval", "Per-track Pearson evaluation");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "Dataset")->required();
  eval->add_option("--out", out, "Report JSON path (a .csv is written alongside)")->required();

  CLI::App* pred = app.add_subcommand("predict", "Write predictions as CSV");
  pred->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  pred->add_option("--data", data, "Dataset")->required();
  pred->add_option("--out", out, "CSV path")->required();

  CLI::App* attn = app.add_subcommand("attn", "Export (and render) the attention atlas of one record");
  attn->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  attn->add_option("--input", input, "Dataset container or id<TAB>sequence text")->required();
  attn->add_option("--index", index, "Record index within the input");
  attn->add_option("--out", out, "Output directory")->required();
  attn->add_flag("--render", render, "Write SVG heatmaps");
  attn->add_option("--layer", layer, "Layer for the per-head panel (default: last)");
  attn->add_option("--norm", norm, "Heatmap normalisation: per-row or global-max");

  CLI::App* bench = app.add_subcommand("bench", "Multiply-add and wall-clock benchmark");
  bench->add_option("--config", config, "Config file ([model]; model.K fixes the depth)")->required();
  bench->add_option("--lengths", lengths, "Sequence lengths")->delimiter(',')->required();
  bench->add_option("--out", out, "CSV path")->required();
  bench->add_option("--repeats", repeats, "Timing repeats (median reported, at least 5)");

  CLI::App* ingest = app.add_subcommand("ingest", "Build a dataset from sequence text and a targets CSV");
  ingest->add_option("--sequences", sequences, "id<TAB>sequence file")->required();
  ingest->add_option("--targets", targets, "record_id,track,bin,value CSV")->required();
  ingest->add_option("--m", m, "Bins per record");
  ingest->add_option("--bin-width", bin_width, "Base pairs per bin");
  ingest->add_option("--groups", groups, "Group label per track")->delimiter(',')->required();
  ingest->add_option("--out", out, "Dataset container path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(spec, count, seed, out, args);
    if (*split) return cmd_split(data, fractions, seed, out, args);
    if (*train) {
      if (steps) args.overrides.push_back("train.steps=" + std::to_string(*steps));
      return cmd_train(config, data, val, out, train_seed, args);
    }
    if (*eval) return cmd_eval(checkpoint, data, out, args);
    if (*pred) return cmd_predict(checkpoint, data, out, args);
    if (*attn) return cmd_attn(checkpoint, input, index, out, render, layer, norm, args);
    if (*bench) return cmd_bench(config, lengths, out, repeats, args);
    if (*ingest) return cmd_ingest(sequences, targets, m, bin_width, groups, out, args);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
