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

#include "sliceformer/data.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>

#include "sliceformer/errors.hpp"

namespace sf {
namespace {

std::string hex32(std::uint32_t v) {
  std::array<char, 11> buf{};
  std::snprintf(buf.data(), buf.size(), "0x%08X", v);
  return buf.data();
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset gen_multiset_majority(std::uint64_t seed, std::size_t n_samples, std::size_t seq_len,
                              std::size_t vocab, std::size_t n_classes) {
  if (vocab < 2 || n_classes == 0 || n_classes > vocab - 1 || seq_len == 0) {
    throw ContractError("gen_multiset_majority: need seq_len >= 1 and 1 <= n_classes <= vocab - 1 "
                        "(id 0 is reserved), got vocab=" + std::to_string(vocab) +
                        " n_classes=" + std::to_string(n_classes) +
                        " seq_len=" + std::to_string(seq_len));
  }
  const std::size_t usable = vocab - 1;
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t t = 1; t < vocab; ++t) by_class[t % n_classes].push_back(t);

  Rng rng(seed);
  Dataset out;
  out.reserve(n_samples);
  std::vector<std::size_t> counts(vocab);
  const std::size_t lo = (seq_len + 2) / 3, hi = (seq_len + 1) / 2;
  while (out.size() < n_samples) {
    const std::size_t cls = rng.below(n_classes);
    const std::size_t planted = by_class[cls][rng.below(by_class[cls].size())];
    const std::size_t k = std::max<std::size_t>(1, lo + rng.below(hi - lo + 1));

    LabeledSequence s;
    s.tokens.assign(seq_len, planted);
    for (std::size_t i = k; i < seq_len && usable > 1; ++i) {
      std::size_t t = 1 + rng.below(usable - 1);
      if (t >= planted) ++t;
      s.tokens[i] = t;
    }
    rng.shuffle(std::span<std::size_t>(s.tokens));

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t t : s.tokens) ++counts[t];
    bool strict = true;
    for (std::size_t t = 1; t < vocab; ++t) {
      if (t != planted && counts[t] >= counts[planted]) strict = false;
    }
    if (!strict) continue;
    s.label = planted % n_classes;
    out.push_back(std::move(s));
  }
  return out;
}

namespace listops {

std::vector<std::size_t> tokenize(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n') {
      ++i;
    } else if (c == '[') {
      out.push_back(kOpen);
      ++i;
    } else if (c == ']') {
      out.push_back(kClose);
      ++i;
    } else if (c >= '0' && c <= '9') {
      out.push_back(kDigit0 + static_cast<std::size_t>(c - '0'));
      ++i;
    } else if (text.substr(i, 3) == "MAX") {
      out.push_back(kMax);
      i += 3;
    } else if (text.substr(i, 3) == "MIN") {
      out.push_back(kMin);
      i += 3;
    } else if (text.substr(i, 3) == "MED") {
      out.push_back(kMed);
      i += 3;
    } else {
      throw FormatError("listops: unexpected character '" + std::string(1, c) + "'");
    }
  }
  return out;
}

std::string detokenize(std::span<const std::size_t> tokens) {
  std::string out;
  for (std::size_t t : tokens) {
    if (t == kPad) continue;
    if (!out.empty() && out.back() != '[' && t != kClose) out += ' ';
    if (t >= kDigit0 && t < kDigit0 + 10) {
      out += static_cast<char>('0' + (t - kDigit0));
    } else if (t == kMax) {
      out += "MAX";
    } else if (t == kMin) {
      out += "MIN";
    } else if (t == kMed) {
      out += "MED";
    } else if (t == kOpen) {
      out += '[';
    } else if (t == kClose) {
      out += ']';
    } else {
      out += '?';
    }
  }
  return out;
}

namespace {

std::size_t eval_at(std::span<const std::size_t> tokens, std::size_t& pos) {
  if (pos >= tokens.size()) throw FormatError("listops: unexpected end of expression");
  const std::size_t t = tokens[pos++];
  if (t >= kDigit0 && t < kDigit0 + 10) return t - kDigit0;
  if (t != kOpen) throw FormatError("listops: expected digit or '['");
  if (pos >= tokens.size()) throw FormatError("listops: missing operator");
  const std::size_t op = tokens[pos++];
  if (op != kMax && op != kMin && op != kMed) throw FormatError("listops: unknown operator");
  std::vector<std::size_t> args;
  while (pos < tokens.size() && tokens[pos] != kClose) args.push_back(eval_at(tokens, pos));
  if (pos >= tokens.size()) throw FormatError("listops: missing ']'");
  ++pos;
  if (args.empty()) throw FormatError("listops: operator without arguments");
  std::sort(args.begin(), args.end());
  if (op == kMax) return args.back();
  if (op == kMin) return args.front();
  return args[args.size() / 2];
}

void emit(Rng& rng, std::size_t depth, std::vector<std::size_t>& out) {
  if (depth == 0 || rng.uniform() < 0.3) {
    out.push_back(kDigit0 + rng.below(10));
    return;
  }
  out.push_back(kOpen);
  out.push_back(kMax + rng.below(3));
  const std::size_t n_args = 2 + rng.below(3);
  for (std::size_t a = 0; a < n_args; ++a) emit(rng, depth - 1, out);
  out.push_back(kClose);
}

}  // namespace

std::size_t evaluate(std::span<const std::size_t> tokens) {
  std::size_t pos = 0;
  while (pos < tokens.size() && tokens[pos] == kPad) ++pos;
  const std::size_t value = eval_at(tokens, pos);
  if (pos != tokens.size()) throw FormatError("listops: trailing tokens after expression");
  return value;
}

}  // namespace listops

Dataset gen_listops_lite(std::uint64_t seed, std::size_t n_samples, std::size_t max_depth,
                         std::size_t max_len) {
  if (max_depth > 3 || max_len > 64 || max_len == 0) {
    throw ContractError("gen_listops_lite: need max_depth <= 3 and 1 <= max_len <= 64");
  }
  Rng rng(seed);
  Dataset out;
  out.reserve(n_samples);
  std::vector<std::size_t> expr;
  while (out.size() < n_samples) {
    expr.clear();
    listops::emit(rng, max_depth, expr);
    if (expr.size() > max_len) continue;
    LabeledSequence s;
    s.tokens.assign(max_len - expr.size(), listops::kPad);
    s.tokens.insert(s.tokens.end(), expr.begin(), expr.end());
    s.label = listops::evaluate(s.tokens);
    out.push_back(std::move(s));
  }
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw FormatError("idx: " + path.string() + " is shorter than the magic");
  const std::uint32_t magic = read_be32(bytes, 0);
  const std::uint32_t ndims = magic & 0xFFu;
  if ((magic & 0xFFFFFF00u) != 0x00000800u || ndims == 0) {
    throw FormatError("idx: unsupported magic " + hex32(magic) + " in " + path.string());
  }
  const std::size_t header = 4 + 4 * std::size_t{ndims};
  if (bytes.size() < header) throw FormatError("idx: truncated header in " + path.string());
  IdxArray out;
  std::size_t payload = 1;
  for (std::uint32_t d = 0; d < ndims; ++d) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * d));
    payload *= out.dims.back();
  }
  if (bytes.size() - header < payload) {
    throw FormatError("idx: truncated payload in " + path.string() + " (expected " +
                      std::to_string(payload) + " bytes, found " +
                      std::to_string(bytes.size() - header) + ")");
  }
  out.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                    bytes.begin() + static_cast<std::ptrdiff_t>(header + payload));
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t limit) {
  const IdxArray images = read_idx(images_path);
  const IdxArray labels = read_idx(labels_path);
  if (images.dims.size() != 3) {
    throw FormatError("idx: image file magic " + hex32(0x800u | std::uint32_t(images.dims.size())) +
                      ", expected 0x00000803");
  }
  if (labels.dims.size() != 1) {
    throw FormatError("idx: label file magic " + hex32(0x800u | std::uint32_t(labels.dims.size())) +
                      ", expected 0x00000801");
  }
  if (images.dims[0] != labels.dims[0]) {
    throw FormatError("idx: " + std::to_string(images.dims[0]) + " images but " +
                      std::to_string(labels.dims[0]) + " labels");
  }
  std::size_t count = images.dims[0];
  if (limit > 0) count = std::min(count, limit);
  const std::size_t pixels = std::size_t{images.dims[1]} * images.dims[2];
  Dataset out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].tokens.assign(images.values.begin() + static_cast<std::ptrdiff_t>(i * pixels),
                         images.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * pixels));
    out[i].label = labels.values[i];
  }
  return out;
}

BatchIterator::BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), seed_(seed) {
  if (data.empty()) throw ContractError("BatchIterator: empty dataset");
  if (batch_size == 0) throw ContractError("BatchIterator: batch_size must be at least 1");
  start_epoch(0);
}

void BatchIterator::start_epoch(std::size_t epoch) {
  order_.resize(data_->size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng = Rng(seed_).split(epoch);
  rng.shuffle(std::span<std::size_t>(order_));
  cursor_ = 0;
}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  Batch b;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  for (; cursor_ < end; ++cursor_) b.samples.push_back(&(*data_)[order_[cursor_]]);
  return b;
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

}  // namespace sf
