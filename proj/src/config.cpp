#include "owas/config.hpp"

#include <cstdio>
#include <functional>
#include <map>

#include "owas/errors.hpp"

namespace owas {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ArgumentError(key + ": expected a number, got '" + v + "'");
  return x;
}

long long integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ArgumentError(key + ": expected an integer, got '" + v + "'");
  return x;
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ArgumentError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = static_cast<int>(integer(k, v)); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v) { c.train.epochs = static_cast<int>(integer(k, v)); }},
      {"lr0", [](RunConfig& c, auto& k, auto& v) { c.train.lr0 = real(k, v); }},
      {"lr_decay", [](RunConfig& c, auto& k, auto& v) { c.train.lr_decay = real(k, v); }},
      {"momentum", [](RunConfig& c, auto& k, auto& v) { c.train.momentum = real(k, v); }},
      {"weight_decay", [](RunConfig& c, auto& k, auto& v) { c.train.weight_decay = real(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = static_cast<std::uint64_t>(integer(k, v)); }},
      {"mixup_enabled", [](RunConfig& c, auto& k, auto& v) { c.train.mixup_enabled = boolean(k, v); }},
      {"tc_loss_enabled", [](RunConfig& c, auto& k, auto& v) { c.train.tc_loss_enabled = boolean(k, v); }},
      {"mixup_prob", [](RunConfig& c, auto& k, auto& v) { c.train.mixup_prob = real(k, v); }},
      {"grad_clip", [](RunConfig& c, auto& k, auto& v) { c.train.grad_clip = real(k, v); }},
      {"beta", [](RunConfig& c, auto& k, auto& v) { c.train.loss.beta = real(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.train.loss.gamma = real(k, v); }},
      {"delta", [](RunConfig& c, auto& k, auto& v) { c.train.loss.delta = real(k, v); }},
      {"mixup_alpha", [](RunConfig& c, auto& k, auto& v) { c.train.loss.mixup_alpha = real(k, v); }},
      {"channels",
       [](RunConfig& c, auto& k, const std::string& v) {
         std::array<int, 3> ch{};
         std::size_t start = 0;
         for (int i = 0; i < 3; ++i) {
           const auto comma = v.find(',', start);
           if ((i < 2) != (comma != std::string::npos)) throw ArgumentError(k + ": expected three widths");
           ch[i] = static_cast<int>(integer(k, trim(v.substr(start, comma - start))));
           if (ch[i] < 1) throw ArgumentError(k + ": widths must be positive");
           start = comma + 1;
         }
         c.model.channels = ch;
       }},
      {"temporal_kernel",
       [](RunConfig& c, auto& k, auto& v) { c.model.temporal_kernel = static_cast<int>(integer(k, v)); }},
      {"hidden", [](RunConfig& c, auto& k, auto& v) { c.model.hidden = static_cast<int>(integer(k, v)); }},
      {"embedding", [](RunConfig& c, auto& k, auto& v) { c.model.embedding = static_cast<int>(integer(k, v)); }},
      {"decoder", [](RunConfig& c, auto&, auto& v) { c.model.decoder = decoder_kind_from_string(v); }},
      {"batch_norm", [](RunConfig& c, auto& k, auto& v) { c.model.batch_norm = boolean(k, v); }},
      {"init_seed",
       [](RunConfig& c, auto& k, auto& v) { c.model.init_seed = static_cast<std::uint64_t>(integer(k, v)); }},
      {"train_ratio", [](RunConfig& c, auto& k, auto& v) { c.train_ratio = real(k, v); }},
      {"val_ratio", [](RunConfig& c, auto& k, auto& v) { c.val_ratio = real(k, v); }},
      {"percentile", [](RunConfig& c, auto& k, auto& v) { c.percentile = real(k, v); }},
      {"score",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "softmax")
           c.score = ConfidenceScore::MaxSoftmax;
         else if (v == "logit")
           c.score = ConfidenceScore::MaxLogit;
         else
           throw ArgumentError(k + ": expected softmax or logit, got '" + v + "'");
       }},
      {"clusters", [](RunConfig& c, auto& k, auto& v) { c.clusters = static_cast<int>(integer(k, v)); }},
  };
  return s;
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ArgumentError("unknown config key '" + key + "'");
  it->second(config, key, trim(value));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ArgumentError("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(base, trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
    } catch (const ArgumentError& e) {
      throw ArgumentError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

std::string format_config(const RunConfig& c) {
  const auto b = [](bool v) { return v ? "true" : "false"; };
  std::string s;
  s += "batch_size = " + std::to_string(c.train.batch_size) + "\n";
  s += "epochs = " + std::to_string(c.train.epochs) + "\n";
  s += "lr0 = " + fmt(c.train.lr0) + "\n";
  s += "lr_decay = " + fmt(c.train.lr_decay) + "\n";
  s += "momentum = " + fmt(c.train.momentum) + "\n";
  s += "weight_decay = " + fmt(c.train.weight_decay) + "\n";
  s += "seed = " + std::to_string(c.train.seed) + "\n";
  s += std::string("mixup_enabled = ") + b(c.train.mixup_enabled) + "\n";
  s += std::string("tc_loss_enabled = ") + b(c.train.tc_loss_enabled) + "\n";
  s += "mixup_prob = " + fmt(c.train.mixup_prob) + "\n";
  s += "grad_clip = " + fmt(c.train.grad_clip) + "\n";
  s += "beta = " + fmt(c.train.loss.beta) + "\n";
  s += "gamma = " + fmt(c.train.loss.gamma) + "\n";
  s += "delta = " + fmt(c.train.loss.delta) + "\n";
  s += "mixup_alpha = " + fmt(c.train.loss.mixup_alpha) + "\n";
  s += "channels = " + std::to_string(c.model.channels[0]) + "," + std::to_string(c.model.channels[1]) + "," +
       std::to_string(c.model.channels[2]) + "\n";
  s += "temporal_kernel = " + std::to_string(c.model.temporal_kernel) + "\n";
  s += "hidden = " + std::to_string(c.model.hidden) + "\n";
  s += "embedding = " + std::to_string(c.model.embedding) + "\n";
  s += std::string("decoder = ") + to_string(c.model.decoder) + "\n";
  s += std::string("batch_norm = ") + b(c.model.batch_norm) + "\n";
  s += "init_seed = " + std::to_string(c.model.init_seed) + "\n";
  s += "train_ratio = " + fmt(c.train_ratio) + "\n";
  s += "val_ratio = " + fmt(c.val_ratio) + "\n";
  s += "percentile = " + fmt(c.percentile) + "\n";
  s += std::string("score = ") + (c.score == ConfidenceScore::MaxSoftmax ? "softmax" : "logit") + "\n";
  s += "clusters = " + std::to_string(c.clusters) + "\n";
  return s;
}

}  // namespace owas
