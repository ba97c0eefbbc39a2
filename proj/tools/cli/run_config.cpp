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

#include "cli/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace sf::cli {
namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                    "': expected " + std::string(expected));
}

std::size_t parse_size(std::string_view key, std::string_view text) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    bad_value(key, text, "a non-negative integer");
  }
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    bad_value(key, text, "a number");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  bad_value(key, text, "true or false");
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  while (!text.empty()) {
    const std::size_t comma = text.find(',');
    out.push_back(parse_size(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, text, "a comma-separated list of integers");
  return out;
}

template <typename Enum>
Enum parse_enum(std::string_view key, std::string_view text,
                std::initializer_list<std::pair<std::string_view, Enum>> choices) {
  std::string expected;
  for (const auto& [name, value] : choices) {
    if (name == text) return value;
    expected += (expected.empty() ? "" : " | ") + std::string(name);
  }
  bad_value(key, text, "one of " + expected);
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto enc_size = [&t](const char* key, std::size_t EncoderConfig::*field) {
      t[key] = [key, field](RunConfig& c, std::string_view v) { c.encoder.*field = parse_size(key, v); };
    };
    auto run_size = [&t](const char* key, std::size_t RunConfig::*field) {
      t[key] = [key, field](RunConfig& c, std::string_view v) { c.*field = parse_size(key, v); };
    };
    auto run_path = [&t](const char* key, std::filesystem::path RunConfig::*field) {
      t[key] = [key, field](RunConfig& c, std::string_view v) {
        if (v.empty()) bad_value(key, v, "a path");
        c.*field = std::filesystem::path(v);
      };
    };
    t["task"] = [](RunConfig& c, std::string_view v) {
      c.task = parse_enum<Task>("task", v, {{"majority", Task::kMajority}, {"listops", Task::kListops},
                                           {"idx", Task::kIdx}});
    };
    t["attention"] = [](RunConfig& c, std::string_view v) {
      c.encoder.attention = parse_enum<AttentionKind>(
          "attention", v, {{"softmax", AttentionKind::kSoftmaxMha}, {"slicesort", AttentionKind::kSliceSort}});
    };
    t["strategy"] = [](RunConfig& c, std::string_view v) {
      c.encoder.strategy = parse_enum<SortVariant>("strategy", v,
                                                   {{"ascending", SortVariant::kAscending},
                                                    {"interleave", SortVariant::kOrderInterleave},
                                                    {"maxexchange", SortVariant::kMaxExchange}});
    };
    enc_size("layers", &EncoderConfig::layers);
    enc_size("d_model", &EncoderConfig::d_model);
    enc_size("heads", &EncoderConfig::heads);
    enc_size("head_dim", &EncoderConfig::head_dim);
    enc_size("ffn_mult", &EncoderConfig::ffn_mult);
    enc_size("vocab", &EncoderConfig::vocab);
    enc_size("seq_len", &EncoderConfig::seq_len);
    enc_size("n_classes", &EncoderConfig::n_classes);
    t["output_projection"] = [](RunConfig& c, std::string_view v) {
      c.encoder.use_output_projection = parse_bool("output_projection", v);
    };
    t["positional_encoding"] = [](RunConfig& c, std::string_view v) {
      c.encoder.positional_encoding = parse_bool("positional_encoding", v);
    };
    t["lr"] = [](RunConfig& c, std::string_view v) { c.adam.lr = parse_double("lr", v); };
    t["beta1"] = [](RunConfig& c, std::string_view v) { c.adam.beta1 = parse_double("beta1", v); };
    t["beta2"] = [](RunConfig& c, std::string_view v) { c.adam.beta2 = parse_double("beta2", v); };
    t["eps"] = [](RunConfig& c, std::string_view v) { c.adam.eps = parse_double("eps", v); };
    t["clip_norm"] = [](RunConfig& c, std::string_view v) { c.clip_norm = parse_double("clip_norm", v); };
    t["target_accuracy"] = [](RunConfig& c, std::string_view v) {
      c.target_accuracy = parse_double("target_accuracy", v);
    };
    t["seed"] = [](RunConfig& c, std::string_view v) { c.seed = parse_size("seed", v); };
    run_size("epochs", &RunConfig::epochs);
    run_size("batch_size", &RunConfig::batch_size);
    run_size("train_samples", &RunConfig::train_samples);
    run_size("test_samples", &RunConfig::test_samples);
    run_size("listops_depth", &RunConfig::listops_depth);
    run_size("idx_limit", &RunConfig::idx_limit);
    run_size("bench_input_dim", &RunConfig::bench_input_dim);
    run_size("bench_heads", &RunConfig::bench_heads);
    run_size("bench_head_dim", &RunConfig::bench_head_dim);
    run_size("bench_repeats", &RunConfig::bench_repeats);
    run_size("smoothing_trials", &RunConfig::smoothing_trials);
    run_size("probe_samples", &RunConfig::probe_samples);
    run_size("gradcheck_seeds", &RunConfig::gradcheck_seeds);
    run_path("idx_train_images", &RunConfig::idx_train_images);
    run_path("idx_train_labels", &RunConfig::idx_train_labels);
    run_path("idx_test_images", &RunConfig::idx_test_images);
    run_path("idx_test_labels", &RunConfig::idx_test_labels);
    run_path("out_dir", &RunConfig::out_dir);
    t["bench_sizes"] = [](RunConfig& c, std::string_view v) { c.bench_sizes = parse_sizes("bench_sizes", v); };
    t["smoothing_sizes"] = [](RunConfig& c, std::string_view v) {
      c.smoothing_sizes = parse_sizes("smoothing_sizes", v);
    };
    return t;
  }();
  return table;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Command parse_command(std::string_view name) {
  if (name == "train") return Command::kTrain;
  if (name == "bench") return Command::kBench;
  if (name == "smoothing") return Command::kSmoothing;
  if (name == "spectrum") return Command::kSpectrum;
  if (name == "gradcheck") return Command::kGradcheck;
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

}  // namespace

std::string to_string(Command command) {
  switch (command) {
    case Command::kTrain:
      return "train";
    case Command::kBench:
      return "bench";
    case Command::kSmoothing:
      return "smoothing";
    case Command::kSpectrum:
      return "spectrum";
    case Command::kGradcheck:
      return "gradcheck";
  }
  return "?";
}

std::string to_string(Task task) {
  switch (task) {
    case Task::kMajority:
      return "majority";
    case Task::kListops:
      return "listops";
    case Task::kIdx:
      return "idx";
  }
  return "?";
}

const std::vector<std::string>& valid_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_key(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) {
    std::string closest;
    std::size_t best = static_cast<std::size_t>(-1);
    for (const std::string& k : valid_keys()) {
      const std::size_t d = edit_distance(key, k);
      if (d < best) {
        best = d;
        closest = k;
      }
    }
    std::string msg = "unknown key '" + std::string(key) + "'";
    if (best <= std::max<std::size_t>(2, key.size() / 3)) msg += " (did you mean '" + closest + "'?)";
    msg += "; valid keys:";
    for (const std::string& k : valid_keys()) msg += " " + k;
    throw ConfigError(msg);
  }
  it->second(config, value);
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    // Entries are `key=value` separated by whitespace, with optional spaces
    // around '='.
    std::vector<std::string_view> words;
    for (std::size_t i = 0; i < line.size();) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) words.push_back(line.substr(i, j - i));
      i = j;
    }
    std::string joined;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const bool glue = w > 0 && (words[w].front() == '=' || words[w - 1].back() == '=');
      if (w > 0 && !glue) joined += ' ';
      joined += words[w];
    }
    std::string_view rest(joined);
    while (!rest.empty()) {
      const std::size_t sp = rest.find(' ');
      const std::string_view entry = rest.substr(0, sp);
      rest.remove_prefix(sp == std::string_view::npos ? rest.size() : sp + 1);
      const std::size_t eq = entry.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                          std::string(entry) + "'");
      }
      set_key(config, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
    }
  }
}

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig config;
  std::optional<std::string> command;
  std::optional<std::filesystem::path> file;
  std::vector<std::pair<std::string, std::string>> flags;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string_view a = args[i];
    if (a.rfind("--", 0) != 0) {
      if (command) throw ConfigError("unexpected argument '" + std::string(a) + "'");
      command = std::string(a);
      continue;
    }
    a.remove_prefix(2);
    std::string key, value;
    if (const std::size_t eq = a.find('='); eq != std::string_view::npos) {
      key = a.substr(0, eq);
      value = a.substr(eq + 1);
    } else {
      key = a;
      if (i + 1 >= args.size()) throw ConfigError("flag --" + key + " needs a value");
      value = args[++i];
    }
    if (key == "config") {
      file = value;
    } else {
      flags.emplace_back(std::move(key), std::move(value));
    }
  }
  if (!command) throw ConfigError("missing required command");
  config.command = parse_command(*command);
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file " + file->string());
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(config, text.str());
  }
  for (const auto& [key, value] : flags) set_key(config, key, value);
  check_required(config);
  return config;
}

void check_required(const RunConfig& config) {
  const bool trains = config.command == Command::kTrain;
  if (trains && config.task == Task::kIdx) {
    const std::pair<const char*, const std::filesystem::path*> needed[] = {
        {"idx_train_images", &config.idx_train_images},
        {"idx_train_labels", &config.idx_train_labels},
    };
    for (const auto& [key, path] : needed) {
      if (path->empty()) throw ConfigError(std::string("missing required key '") + key + "' for task=idx");
    }
    if (config.idx_test_images.empty() != config.idx_test_labels.empty()) {
      throw ConfigError("idx_test_images and idx_test_labels must be given together");
    }
  }
}

std::string usage_text() {
  std::string s =
      "usage: sliceformer <command> [--config FILE] [--key=value ...]\n"
      "\n"
      "commands:\n"
      "  train      train one encoder, write training_log.csv\n"
      "  bench      time both attention mechanisms, write bench.csv\n"
      "  smoothing  softmax spread versus length, write smoothing.csv\n"
      "  spectrum   train both mechanisms, write spectrum_<mechanism>_<layer>.csv\n"
      "  gradcheck  finite-difference check of every op, print a table\n"
      "\n"
      "keys:";
  for (const std::string& k : valid_keys()) s += " " + k;
  s += "\n";
  return s;
}

}  // namespace sf::cli
