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

#ifndef SLICEFORMER_ANALYSIS_HPP_
#define SLICEFORMER_ANALYSIS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sliceformer/data.hpp"
#include "sliceformer/encoder.hpp"
#include "sliceformer/tensor.hpp"

namespace sf {

// ---- Softmax over-smoothing -------------------------------------------------

// Sample standard deviation: sqrt(sum (y - mean)^2 / (n - 1)).
double sample_std(std::span<const double> values);

// sample_std(softmax(x)).
double softmax_sample_std(std::span<const double> x);

struct SmoothingPoint {
  std::size_t n = 0;
  double mean_std = 0.0;
};

// For each n, the sample std of softmax(x) with x ~ N(0, I_n), averaged over
// `trials` draws. Throws ContractError for n < 2 or trials == 0.
std::vector<SmoothingPoint> softmax_std_curve(std::span<const std::size_t> sizes,
                                              std::size_t trials, std::uint64_t seed);

// ---- Spectra and structure -------------------------------------------------

// Singular values of a rank-2 tensor, nonincreasing, min(rows, cols) of
// them. One-sided Jacobi: column pairs are rotated until every pair is
// orthogonal to within `tolerance` (relative). Throws NumericError if
// `max_sweeps` is exhausted.
std::vector<double> singular_spectrum(const Tensor& matrix, double tolerance = 1e-12,
                                      std::size_t max_sweeps = 100);

struct StructureReport {
  bool row_stochastic = false;
  bool col_stochastic = false;
  std::size_t nnz = 0;
  std::size_t rank = 0;

  bool operator==(const StructureReport&) const = default;
};

// Row and column sums compared to 1 within tol; nnz counts |p| > tol; rank
// counts singular values > tol * sigma_max.
StructureReport structure_check(const Tensor& p, double tol);

// ---- Runtime and memory scaling -------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> sizes = {256, 512, 1024, 2048, 4096, 8192};
  std::size_t input_dim = 16;
  std::size_t heads = 1;
  std::size_t head_dim = 16;
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  // Each repeat runs enough iterations to last at least this long and
  // reports the per-iteration time.
  double min_repeat_seconds = 0.005;
  bool output_projection = true;
};

struct BenchRecord {
  AttentionKind mechanism = AttentionKind::kSoftmaxMha;
  std::size_t n = 0;
  double fwd_s = 0.0;     // median over repeats
  double fwdbwd_s = 0.0;  // median over repeats
  std::int64_t peak_bytes = 0;         // net tracked growth during one fwd+bwd
  std::size_t largest_allocation = 0;  // single largest tracked buffer, bytes
  double fwd_spread = 0.0;     // max / min over repeats
  double fwdbwd_spread = 0.0;  // max / min over repeats
};

// Times both attention mechanisms at every size. Runs on the calling thread;
// one warmup pass per size is excluded from timing.
std::vector<BenchRecord> bench_attention(const BenchOptions& options);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct SpectrumReport {
  std::size_t layer = 0;  // 1-based
  AttentionKind mechanism = AttentionKind::kSoftmaxMha;
  std::vector<double> singular_values;  // normalized by the largest
};

// Spectrum of each layer's attention-sublayer output, with the outputs of all
// probe sequences stacked row-wise into one (B*N) x d_model matrix.
std::vector<SpectrumReport> layer_spectra(EncoderParams& params, const EncoderConfig& config,
                                          const Dataset& probe);

// Mean of a normalized spectrum; larger means slower decay.
double spectrum_area(std::span<const double> normalized);

struct SpectrumComparison {
  std::vector<SpectrumReport> softmax;
  std::vector<SpectrumReport> slicesort;
  double softmax_final_area = 0.0;
  double slicesort_final_area = 0.0;
  // Reported only: whether slice-sort's final-layer spectrum decays slower.
  bool slicesort_decays_slower = false;
};

SpectrumComparison spectrum_experiment(EncoderParams& softmax_params,
                                       const EncoderConfig& softmax_config,
                                       EncoderParams& slicesort_params,
                                       const EncoderConfig& slicesort_config,
                                       const Dataset& probe);

}  // namespace sf

#endif  // SLICEFORMER_ANALYSIS_HPP_
