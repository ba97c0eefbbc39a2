/* Copyright 2026 The Sliceformer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cli/dispatch.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "cli/csv.hpp"
#include "cli/gradcheck_suite.hpp"
#include "sliceformer/analysis.hpp"
#include "sliceformer/errors.hpp"
#include "sliceformer/training.hpp"

namespace sf::cli {
namespace {

// Independent streams derived from the run seed.
enum Stream : std::uint64_t { kTrainData = 1, kTestData = 2, kInit = 3, kShuffle = 4 };

std::uint64_t stream_seed(const RunConfig& config, Stream s) {
  return Rng(config.seed).split(s).next_u64();
}

TrainOptions train_options(const RunConfig& config) {
  TrainOptions o;
  o.epochs = config.epochs;
  o.batch_size = config.batch_size;
  o.seed = stream_seed(config, kShuffle);
  o.adam = config.adam;
  o.clip_norm = config.clip_norm;
  o.target_test_accuracy = config.target_accuracy;
  return o;
}

EncoderParams init_params(const RunConfig& config, const EncoderConfig& encoder) {
  Rng rng(stream_seed(config, kInit));
  return EncoderParams::init(encoder, rng);
}

std::filesystem::path output_path(const RunConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.out_dir);
  return config.out_dir / name;
}

int run_train(const RunConfig& config, std::ostream& out) {
  TaskData task = load_task(config);
  EncoderParams params = init_params(config, task.encoder);
  out << "task=" << to_string(config.task) << " attention=" << to_string(task.encoder.attention)
      << " strategy=" << to_string(task.encoder.strategy) << " params=" << count_params(params)
      << " train=" << task.train.size() << " test=" << task.test.size() << "\n";
  const TrainLog log = train_loop(task.encoder, params, task.train,
                                  task.test.empty() ? nullptr : &task.test, train_options(config));
  CsvTable csv{"epoch", "loss", "train_acc", "test_acc", "seconds"};
  for (const EpochRecord& r : log) {
    csv.cell(r.epoch).cell(r.loss).cell(r.train_acc).cell(r.test_acc).cell(r.seconds).end_row();
    out << "epoch " << r.epoch << " loss " << format_number(r.loss) << " train_acc "
        << format_number(r.train_acc) << " test_acc " << format_number(r.test_acc) << "\n";
  }
  const auto path = output_path(config, "training_log.csv");
  write_atomic(path, csv.text());
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int run_bench(const RunConfig& config, std::ostream& out) {
  BenchOptions opts;
  opts.sizes = config.bench_sizes;
  opts.input_dim = config.bench_input_dim;
  opts.heads = config.bench_heads;
  opts.head_dim = config.bench_head_dim;
  opts.repeats = config.bench_repeats;
  opts.seed = config.seed;
  opts.output_projection = config.encoder.use_output_projection;
  const std::vector<BenchRecord> records = bench_attention(opts);
  CsvTable csv{"mechanism", "N", "fwd_s", "fwdbwd_s", "peak_bytes"};
  for (const BenchRecord& r : records) {
    csv.cell(to_string(r.mechanism)).cell(r.n).cell(r.fwd_s).cell(r.fwdbwd_s).cell(r.peak_bytes).end_row();
    out << std::left << std::setw(10) << to_string(r.mechanism) << " N=" << std::setw(6) << r.n
        << " fwd " << format_number(r.fwd_s) << " s, fwd+bwd " << format_number(r.fwdbwd_s)
        << " s, peak " << r.peak_bytes << " B, largest buffer " << r.largest_allocation << " B\n";
  }
  if (config.bench_sizes.size() >= 2) {
    for (AttentionKind kind : {AttentionKind::kSoftmaxMha, AttentionKind::kSliceSort}) {
      std::vector<double> n, fwd, both;
      for (const BenchRecord& r : records) {
        if (r.mechanism != kind) continue;
        n.push_back(static_cast<double>(r.n));
        fwd.push_back(r.fwd_s);
        both.push_back(r.fwdbwd_s);
      }
      out << to_string(kind) << " log-log slope: fwd " << format_number(loglog_slope(n, fwd))
          << ", fwd+bwd " << format_number(loglog_slope(n, both)) << "\n";
    }
  }
  const auto path = output_path(config, "bench.csv");
  write_atomic(path, csv.text());
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int run_smoothing(const RunConfig& config, std::ostream& out) {
  const auto curve = softmax_std_curve(config.smoothing_sizes, config.smoothing_trials, config.seed);
  CsvTable csv{"N", "mean_std"};
  for (const SmoothingPoint& p : curve) {
    csv.cell(p.n).cell(p.mean_std).end_row();
    out << "N=" << p.n << " mean_std=" << format_number(p.mean_std) << "\n";
  }
  const auto path = output_path(config, "smoothing.csv");
  write_atomic(path, csv.text());
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int run_spectrum(const RunConfig& config, std::ostream& out) {
  TaskData task = load_task(config);
  EncoderConfig softmax_cfg = task.encoder, slice_cfg = task.encoder;
  softmax_cfg.attention = AttentionKind::kSoftmaxMha;
  slice_cfg.attention = AttentionKind::kSliceSort;
  EncoderParams softmax_params = init_params(config, softmax_cfg);
  EncoderParams slice_params = init_params(config, slice_cfg);
  const Dataset* test = task.test.empty() ? nullptr : &task.test;
  for (auto [cfg, params] : {std::pair{&softmax_cfg, &softmax_params}, std::pair{&slice_cfg, &slice_params}}) {
    const TrainLog log = train_loop(*cfg, *params, task.train, test, train_options(config));
    out << to_string(cfg->attention) << ": trained " << log.size() << " epochs";
    if (!log.empty()) out << ", final test_acc " << format_number(log.back().test_acc);
    out << "\n";
  }
  const Dataset& source = task.test.empty() ? task.train : task.test;
  const Dataset probe(source.begin(),
                      source.begin() + static_cast<std::ptrdiff_t>(std::min(config.probe_samples, source.size())));
  const SpectrumComparison cmp = spectrum_experiment(softmax_params, softmax_cfg, slice_params, slice_cfg, probe);
  for (const auto* reports : {&cmp.softmax, &cmp.slicesort}) {
    for (const SpectrumReport& r : *reports) {
      CsvTable csv{"index", "sigma"};
      for (std::size_t i = 0; i < r.singular_values.size(); ++i) csv.cell(i + 1).cell(r.singular_values[i]).end_row();
      const auto path =
          output_path(config, "spectrum_" + to_string(r.mechanism) + "_" + std::to_string(r.layer) + ".csv");
      write_atomic(path, csv.text());
      out << "wrote " << path.string() << " (area " << format_number(spectrum_area(r.singular_values)) << ")\n";
    }
  }
  out << "final-layer spectrum area: softmax " << format_number(cmp.softmax_final_area) << ", slicesort "
      << format_number(cmp.slicesort_final_area) << " -> slicesort decays "
      << (cmp.slicesort_decays_slower ? "slower" : "faster") << " (reported, not asserted)\n";
  return kExitOk;
}

int run_gradcheck(const RunConfig& config, std::ostream& out) {
  const auto results = run_gradcheck_suite(config.gradcheck_seeds, config.seed);
  bool ok = true;
  out << std::left << std::setw(28) << "op" << std::setw(24) << "max_rel_error" << std::setw(12)
      << "tolerance" << "status\n";
  for (const OpGradResult& r : results) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << r.max_error;
    out << std::left << std::setw(28) << r.op << std::setw(24) << err.str() << std::setw(12)
        << format_number(r.tolerance) << (r.passed() ? "ok" : "FAIL") << "\n";
    ok = ok && r.passed();
  }
  out << results.size() << " checks over " << config.gradcheck_seeds << " seeds: " << (ok ? "all passed" : "FAILED")
      << "\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

TaskData load_task(const RunConfig& config) {
  config.encoder.validate();
  TaskData t;
  t.encoder = config.encoder;
  const std::uint64_t train_seed = stream_seed(config, kTrainData);
  const std::uint64_t test_seed = stream_seed(config, kTestData);
  switch (config.task) {
    case Task::kMajority: {
      const std::size_t len = t.encoder.seq_len - 1;
      t.train = gen_multiset_majority(train_seed, config.train_samples, len, t.encoder.vocab, t.encoder.n_classes);
      t.test = gen_multiset_majority(test_seed, config.test_samples, len, t.encoder.vocab, t.encoder.n_classes);
      break;
    }
    case Task::kListops: {
      const std::size_t len = t.encoder.seq_len - 1;
      t.encoder.vocab = listops::kVocab;
      t.encoder.n_classes = listops::kClasses;
      t.train = gen_listops_lite(train_seed, config.train_samples, config.listops_depth, len);
      t.test = gen_listops_lite(test_seed, config.test_samples, config.listops_depth, len);
      break;
    }
    case Task::kIdx: {
      t.train = load_idx(config.idx_train_images, config.idx_train_labels, config.idx_limit);
      if (!config.idx_test_images.empty()) {
        t.test = load_idx(config.idx_test_images, config.idx_test_labels, config.idx_limit);
      }
      if (t.train.empty()) throw FormatError("idx: training set is empty");
      t.encoder.vocab = 256;
      t.encoder.seq_len = t.train.front().tokens.size() + 1;
      for (const Dataset* d : {&t.train, &t.test}) {
        for (const LabeledSequence& s : *d) {
          if (s.label >= t.encoder.n_classes) {
            throw FormatError("idx: label " + std::to_string(s.label) + " does not fit n_classes=" +
                              std::to_string(t.encoder.n_classes));
          }
          if (s.tokens.size() + 1 != t.encoder.seq_len) throw FormatError("idx: images differ in size");
        }
      }
      break;
    }
  }
  t.encoder.validate();
  return t;
}

int dispatch(const RunConfig& config, std::ostream& out) {
  switch (config.command) {
    case Command::kTrain:
      return run_train(config, out);
    case Command::kBench:
      return run_bench(config, out);
    case Command::kSmoothing:
      return run_smoothing(config, out);
    case Command::kSpectrum:
      return run_spectrum(config, out);
    case Command::kGradcheck:
      return run_gradcheck(config, out);
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.size() == 1 && (args[0] == "--help" || args[0] == "-h" || args[0] == "help")) {
    out << usage_text();
    return kExitOk;
  }
  RunConfig config;
  try {
    config = parse_config(args);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n\n" << usage_text();
    return kExitUsage;
  }
  try {
    return dispatch(config, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sf::cli
