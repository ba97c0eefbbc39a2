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

#include "sliceformer/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "sliceformer/attention.hpp"
#include "sliceformer/errors.hpp"
#include "sliceformer/ops.hpp"
#include "sliceformer/rng.hpp"

namespace sf {

double sample_std(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ContractError("sample_std: need at least two values");
  // Shifted by the first value so a constant input has exactly zero spread.
  double shift = 0.0;
  for (double v : values) shift += v - values[0];
  const double mean = values[0] + shift / static_cast<double>(n);
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(n - 1));
}

double softmax_sample_std(std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  softmax_inplace(y);
  return sample_std(y);
}

std::vector<SmoothingPoint> softmax_std_curve(std::span<const std::size_t> sizes,
                                              std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ContractError("softmax_std_curve: trials must be at least 1");
  for (std::size_t n : sizes) {
    if (n < 2) throw ContractError("softmax_std_curve: N must be at least 2, got " + std::to_string(n));
  }
  const Rng root(seed);
  std::vector<SmoothingPoint> out;
  std::vector<double> x;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const std::size_t n = sizes[k];
    Rng rng = root.split(k);
    x.resize(n);
    double total = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      for (double& v : x) v = rng.normal();
      softmax_inplace(x);
      total += sample_std(x);
    }
    out.push_back({n, total / static_cast<double>(trials)});
  }
  return out;
}

std::vector<double> singular_spectrum(const Tensor& matrix, double tolerance,
                                      std::size_t max_sweeps) {
  if (matrix.rank() != 2) {
    throw DimensionError("singular_spectrum: expected a matrix, got " +
                         shape_to_string(matrix.shape()));
  }
  for (double v : matrix.data()) {
    if (!std::isfinite(v)) throw NumericError("singular_spectrum: non-finite entry");
  }
  // Work on the orientation with at least as many rows as columns; columns
  // are stored contiguously.
  const bool flip = matrix.rows() < matrix.cols();
  const std::size_t rows = flip ? matrix.cols() : matrix.rows();
  const std::size_t cols = flip ? matrix.rows() : matrix.cols();
  std::vector<std::vector<double>> a(cols, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) a[j][i] = flip ? matrix.at(j, i) : matrix.at(i, j);

  bool converged = cols < 2;
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += a[p][i] * a[p][i];
          beta += a[q][i] * a[q][i];
          gamma += a[p][i] * a[q][i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double ap = a[p][i], aq = a[q][i];
          a[p][i] = c * ap - s * aq;
          a[q][i] = s * ap + c * aq;
        }
      }
    }
  }
  if (!converged) {
    throw NumericError("singular_spectrum: no convergence after " + std::to_string(max_sweeps) +
                       " sweeps");
  }
  std::vector<double> sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double sq = 0.0;
    for (double v : a[j]) sq += v * v;
    sigma[j] = std::sqrt(sq);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

StructureReport structure_check(const Tensor& p, double tol) {
  if (p.rank() != 2 || p.rows() != p.cols()) {
    throw DimensionError("structure_check: expected a square matrix, got " +
                         shape_to_string(p.shape()));
  }
  const std::size_t n = p.rows();
  StructureReport r{true, true, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += p.at(i, j);
      col += p.at(j, i);
      if (std::abs(p.at(i, j)) > tol) ++r.nnz;
    }
    if (std::abs(row - 1.0) > tol) r.row_stochastic = false;
    if (std::abs(col - 1.0) > tol) r.col_stochastic = false;
  }
  const std::vector<double> sigma = singular_spectrum(p);
  if (!sigma.empty() && sigma.front() > 0.0) {
    const double cutoff = tol * sigma.front();
    r.rank = static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [cutoff](double s) { return s > cutoff; }));
  }
  return r;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo > 0.0 ? *hi / *lo : INFINITY;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Median per-iteration time of `run` over `repeats`, plus max/min spread.
std::pair<double, double> time_repeats(const std::function<void()>& run, std::size_t repeats,
                                       double min_seconds) {
  const auto probe = std::chrono::steady_clock::now();
  run();  // warmup, also sizes the inner loop
  const double once = std::max(seconds_since(probe), 1e-9);
  const std::size_t iters =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_seconds / once)));
  std::vector<double> samples;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < iters; ++i) run();
    samples.push_back(seconds_since(start) / static_cast<double>(iters));
  }
  return {median(samples), spread(samples)};
}

}  // namespace

std::vector<BenchRecord> bench_attention(const BenchOptions& options) {
  if (options.repeats < 3) throw ContractError("bench_attention: repeats must be at least 3");
  const Rng root(options.seed);
  Rng prng = root.split(0);
  MhaParams mha = MhaParams::random(options.input_dim, options.heads, options.head_dim, prng);
  SliceSortParams ss = SliceSortParams::random(options.input_dim, options.heads, options.head_dim,
                                               options.output_projection, prng);
  const SortStrategy ascending = SortStrategy::ascending();

  std::vector<BenchRecord> out;
  for (std::size_t k = 0; k < options.sizes.size(); ++k) {
    const std::size_t n = options.sizes[k];
    Rng xrng = root.split(k + 1);
    const Tensor x = random_normal({n, options.input_dim}, xrng);

    for (AttentionKind kind : {AttentionKind::kSoftmaxMha, AttentionKind::kSliceSort}) {
      auto forward = [&](Graph& g) {
        Var in = g.constant(x.detached());
        return kind == AttentionKind::kSoftmaxMha ? mha_forward(in, mha)
                                                  : slice_sort_forward(in, ss, ascending).output;
      };
      auto fwd = [&] {
        Graph g(GradMode::kDisabled);
        forward(g);
      };
      auto fwdbwd = [&] {
        Graph g;
        backward(sum(forward(g)));
      };

      BenchRecord rec;
      rec.mechanism = kind;
      rec.n = n;
      {
        AllocationScope scope;
        fwdbwd();
        rec.peak_bytes = scope.peak_bytes();
        rec.largest_allocation = scope.largest_allocation();
      }
      std::tie(rec.fwd_s, rec.fwd_spread) =
          time_repeats(fwd, options.repeats, options.min_repeat_seconds);
      std::tie(rec.fwdbwd_s, rec.fwdbwd_spread) =
          time_repeats(fwdbwd, options.repeats, options.min_repeat_seconds);
      out.push_back(rec);
    }
  }
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ContractError("loglog_slope: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<SpectrumReport> layer_spectra(EncoderParams& params, const EncoderConfig& config,
                                          const Dataset& probe) {
  if (probe.empty()) throw ContractError("layer_spectra: empty probe batch");
  const std::size_t n = config.seq_len, d = config.d_model;
  std::vector<Tensor> stacked(params.layers.size(), Tensor({probe.size() * n, d}));
  for (std::size_t b = 0; b < probe.size(); ++b) {
    Graph g(GradMode::kDisabled);
    ForwardTrace trace;
    model_forward(g, probe[b].tokens, params, config, &trace);
    for (std::size_t l = 0; l < trace.attention_outputs.size(); ++l) {
      const Tensor& out = trace.attention_outputs[l].value();
      std::copy(out.data().begin(), out.data().end(), stacked[l].data().begin() + b * n * d);
    }
  }
  std::vector<SpectrumReport> reports;
  for (std::size_t l = 0; l < stacked.size(); ++l) {
    SpectrumReport r;
    r.layer = l + 1;
    r.mechanism = config.attention;
    r.singular_values = singular_spectrum(stacked[l]);
    const double top = r.singular_values.empty() ? 0.0 : r.singular_values.front();
    if (top > 0.0) {
      for (double& s : r.singular_values) s /= top;
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

double spectrum_area(std::span<const double> normalized) {
  if (normalized.empty()) return 0.0;
  double total = 0.0;
  for (double v : normalized) total += v;
  return total / static_cast<double>(normalized.size());
}

SpectrumComparison spectrum_experiment(EncoderParams& softmax_params,
                                       const EncoderConfig& softmax_config,
                                       EncoderParams& slicesort_params,
                                       const EncoderConfig& slicesort_config,
                                       const Dataset& probe) {
  SpectrumComparison c;
  c.softmax = layer_spectra(softmax_params, softmax_config, probe);
  c.slicesort = layer_spectra(slicesort_params, slicesort_config, probe);
  if (!c.softmax.empty()) c.softmax_final_area = spectrum_area(c.softmax.back().singular_values);
  if (!c.slicesort.empty()) {
    c.slicesort_final_area = spectrum_area(c.slicesort.back().singular_values);
  }
  c.slicesort_decays_slower = c.slicesort_final_area >= c.softmax_final_area;
  return c;
}

}  // namespace sf
