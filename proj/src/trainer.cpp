#include "owas/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "binary_io.hpp"
#include "owas/errors.hpp"

namespace owas {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (!(lr0 >= 0.0)) throw ArgumentError("lr0 must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ArgumentError("lr_decay must be in (0, 1]");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
  if (!(mixup_prob >= 0.0 && mixup_prob <= 1.0)) throw ArgumentError("mixup_prob must be in [0, 1]");
  if (!(grad_clip >= 0.0)) throw ArgumentError("grad_clip must be >= 0");
  loss.validate();
}

double learning_rate(const TrainConfig& config, int epoch) {
  return config.lr0 * std::pow(config.lr_decay, static_cast<double>(epoch));
}

double clip_gradients(TensorMap& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ArgumentError("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double x : g.values()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads)
      for (double& x : g.values()) x *= factor;
  }
  return norm;
}

void sgd_step(TensorMap& params, const TensorMap& grads, TensorMap& velocity, double lr, double momentum,
              double weight_decay) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ArgumentError("gradient for unknown parameter " + name);
    if (!g.same_shape(it->second)) throw ArgumentError("gradient shape mismatch for " + name);
    if (!g.all_finite()) throw NumericError("non-finite gradient for " + name);
  }
  for (auto& [name, theta] : params) {
    Tensor& v = velocity.try_emplace(name, Tensor(theta.shape(), 0.0)).first->second;
    if (!v.same_shape(theta)) throw ArgumentError("velocity shape mismatch for " + name);
    auto g = grads.find(name);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double step = (g == grads.end() ? 0.0 : g->second[k]) + weight_decay * theta[k];
      v[k] = momentum * v[k] - lr * step;
      theta[k] += momentum * v[k] - lr * step;
    }
  }
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string model_text(const ModelConfig& m) {
  return "joints=" + std::to_string(m.joints) + ";classes=" + std::to_string(m.num_classes) + ";channels=" +
         join({m.channels[0], m.channels[1], m.channels[2]}) + ";kernel=" + std::to_string(m.temporal_kernel) +
         ";hidden=" + std::to_string(m.hidden) + ";embedding=" + std::to_string(m.embedding) +
         ";decoder=" + to_string(m.decoder) + ";batch_norm=" + (m.batch_norm ? "1" : "0") +
         ";init_seed=" + std::to_string(m.init_seed);
}

ModelConfig parse_model_text(const std::string& text, std::uint64_t at) {
  std::map<std::string, std::string> kv;
  for (const std::string& item : io::split(text, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("bad model field '" + item + "'", at);
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("model config lacks ") + key, at);
    return it->second;
  };
  auto num = [&](const char* key) { return io::parse_int(need(key), at); };
  ModelConfig m;
  m.joints = static_cast<int>(num("joints"));
  m.num_classes = static_cast<int>(num("classes"));
  const auto ch = io::split(need("channels"), ',');
  if (ch.size() != 3) throw FormatError("model config needs three channel widths", at);
  for (int i = 0; i < 3; ++i) m.channels[i] = static_cast<int>(io::parse_int(ch[i], at));
  m.temporal_kernel = static_cast<int>(num("kernel"));
  m.hidden = static_cast<int>(num("hidden"));
  m.embedding = static_cast<int>(num("embedding"));
  try {
    m.decoder = decoder_kind_from_string(need("decoder"));
  } catch (const ArgumentError& e) {
    throw FormatError(e.what(), at);
  }
  m.batch_norm = num("batch_norm") != 0;
  m.init_seed = static_cast<std::uint64_t>(num("init_seed"));
  return m;
}

double parse_real(const std::string& s, std::uint64_t at) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw FormatError("not a number: '" + s + "'", at);
  return v;
}

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  io::put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  io::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) io::put_u32(out, static_cast<std::uint32_t>(d));
  for (double x : t.values()) io::put_f32(out, static_cast<float>(x));
}

constexpr const char* kMeanSuffix = "#mean";
constexpr const char* kVarSuffix = "#var";
constexpr const char* kProtoPrefix = "proto#";

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  std::vector<int> init;
  for (const ClassPrototype& p : c.prototypes) init.push_back(p.initialized ? 1 : 0);
  std::vector<int> proto_ids;
  for (const ClassPrototype& p : c.prototypes) proto_ids.push_back(p.class_id);
  const std::size_t count = c.params.tensors.size() + 2 * c.params.norms.size() + c.prototypes.size();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.config_hash));
  std::string out = "OWAS1\nkind:checkpoint\nmodel:" + model_text(c.model) + "\nknown:" + join(c.known_classes) +
                    "\nepoch:" + std::to_string(c.epoch) + "\nval_acc:" + fmt(c.val_acc) +
                    "\nval_loss:" + fmt(c.val_loss) + "\nconfig_hash:" + hash + "\nseed:" + std::to_string(c.seed) + "\nprototypes:" + join(proto_ids) +
                    "\nprototype_init:" + join(init) + "\ntensors:" + std::to_string(count) + "\nend\n";
  for (const auto& [name, t] : c.params.tensors) put_tensor(out, name, t);
  for (const auto& [name, s] : c.params.norms) {
    put_tensor(out, name + kMeanSuffix, s.mean);
    put_tensor(out, name + kVarSuffix, s.var);
  }
  for (const ClassPrototype& p : c.prototypes)
    put_tensor(out, kProtoPrefix + std::to_string(p.class_id),
               Tensor({static_cast<int>(p.mean.size())}, p.mean));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  io::Cursor cur(bytes);
  if (cur.line("magic") != "OWAS1") throw FormatError("bad magic, expected OWAS1", 0);
  auto field = [&](const char* key) {
    const std::uint64_t at = cur.offset();
    return std::make_pair(io::expect_key(cur.line(key), key, at), at);
  };
  Checkpoint c;
  {
    auto [kind, at] = field("kind");
    if (kind != "checkpoint") throw FormatError("not a checkpoint file (kind '" + kind + "')", at);
  }
  {
    auto [text, at] = field("model");
    c.model = parse_model_text(text, at);
  }
  auto int_list = [&](const char* key) {
    auto [text, at] = field(key);
    std::vector<int> out;
    if (!text.empty())
      for (const std::string& s : io::split(text, ',')) out.push_back(static_cast<int>(io::parse_int(s, at)));
    return out;
  };
  c.known_classes = int_list("known");
  {
    auto [text, at] = field("epoch");
    c.epoch = static_cast<int>(io::parse_int(text, at));
  }
  {
    auto [text, at] = field("val_acc");
    c.val_acc = parse_real(text, at);
  }
  {
    auto [text, at] = field("val_loss");
    c.val_loss = parse_real(text, at);
  }
  {
    auto [text, at] = field("config_hash");
    std::size_t used = 0;
    try {
      c.config_hash = std::stoull(text, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) throw FormatError("bad config hash", at);
  }
  {
    auto [text, at] = field("seed");
    c.seed = static_cast<std::uint64_t>(io::parse_int(text, at));
  }
  const std::vector<int> proto_ids = int_list("prototypes");
  const std::uint64_t init_at = cur.offset();
  const std::vector<int> proto_init = int_list("prototype_init");
  if (proto_init.size() != proto_ids.size()) throw FormatError("prototype lists differ in length", init_at);
  std::uint64_t count_at = 0;
  long long count = 0;
  {
    auto [text, at] = field("tensors");
    count = io::parse_int(text, at);
    count_at = at;
  }
  if (cur.line("end") != "end") throw FormatError("missing header terminator", cur.offset());
  if (count < 0) throw FormatError("negative tensor count", count_at);

  std::map<std::string, Tensor> records;
  for (long long i = 0; i < count; ++i) {
    const std::uint64_t at = cur.offset();
    const std::uint32_t len = cur.u32("tensor name length");
    std::string name(cur.bytes(len, "tensor name"));
    const std::uint32_t rank = cur.u32("tensor rank");
    if (rank > 8) throw FormatError("tensor " + name + " has implausible rank", at);
    std::vector<int> shape;
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = cur.u32("tensor dim");
      if (dim > (1u << 24)) throw FormatError("tensor " + name + " has implausible size", at);
      shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    if (n > (std::uint64_t{1} << 28)) throw FormatError("tensor " + name + " has implausible size", at);
    Tensor t(shape);
    for (std::uint64_t k = 0; k < n; ++k) t[k] = cur.f32("tensor data");
    if (!records.emplace(name, std::move(t)).second) throw FormatError("duplicate tensor " + name, at);
  }
  if (!cur.at_end()) throw FormatError("trailing bytes after the last tensor", cur.offset());

  for (auto& [name, t] : records) {
    auto ends_with = [&](const std::string& suffix) {
      return name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (name.rfind(kProtoPrefix, 0) == 0) {
      continue;
    } else if (ends_with(kMeanSuffix)) {
      c.params.norms[name.substr(0, name.size() - std::string(kMeanSuffix).size())].mean = t;
    } else if (ends_with(kVarSuffix)) {
      c.params.norms[name.substr(0, name.size() - std::string(kVarSuffix).size())].var = t;
    } else {
      c.params.tensors[name] = t;
    }
  }
  for (std::size_t i = 0; i < proto_ids.size(); ++i) {
    auto it = records.find(kProtoPrefix + std::to_string(proto_ids[i]));
    if (it == records.end()) throw FormatError("missing prototype of class " + std::to_string(proto_ids[i]), init_at);
    c.prototypes.push_back({proto_ids[i], it->second.values(), proto_init[i] != 0});
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_file(path)); }

Model checkpoint_model(const Checkpoint& checkpoint) {
  if (static_cast<int>(checkpoint.known_classes.size()) != checkpoint.model.num_classes)
    throw ArgumentError("checkpoint class list does not match its model");
  return Model(checkpoint.model, SkeletonGraph::chain_with_branches(checkpoint.model.joints), checkpoint.params);
}

std::string epoch_log_header() { return "epoch,lr,loss,ce,intra,inter,val_acc,val_loss"; }

std::string epoch_log_row(const EpochLog& r) {
  return std::to_string(r.epoch) + "," + fmt(r.lr) + "," + fmt(r.loss) + "," + fmt(r.ce) + "," + fmt(r.intra) +
         "," + fmt(r.inter) + "," + fmt(r.val_acc) + "," + fmt(r.val_loss);
}

std::uint64_t config_hash(const ModelConfig& model, const TrainConfig& t) {
  const std::string text = model_text(model) + "|batch_size=" + std::to_string(t.batch_size) +
                           ";epochs=" + std::to_string(t.epochs) + ";lr0=" + fmt(t.lr0) + ";lr_decay=" +
                           fmt(t.lr_decay) + ";momentum=" + fmt(t.momentum) + ";weight_decay=" +
                           fmt(t.weight_decay) + ";seed=" + std::to_string(t.seed) + ";beta=" + fmt(t.loss.beta) +
                           ";gamma=" + fmt(t.loss.gamma) + ";delta=" + fmt(t.loss.delta) + ";mixup_alpha=" +
                           fmt(t.loss.mixup_alpha) + ";mixup_enabled=" + (t.mixup_enabled ? "1" : "0") +
                           ";tc_loss_enabled=" + (t.tc_loss_enabled ? "1" : "0") + ";mixup_prob=" + fmt(t.mixup_prob) +
                           ";grad_clip=" + fmt(t.grad_clip);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

int class_index(const std::vector<int>& known, int label) {
  const auto it = std::find(known.begin(), known.end(), label);
  if (it == known.end()) throw ArgumentError("label " + std::to_string(label) + " is not a known class");
  return static_cast<int>(it - known.begin());
}

void round_params(Params& p) {
  for (auto& [name, t] : p.tensors) round_to_float(t);
  for (auto& [name, s] : p.norms) {
    round_to_float(s.mean);
    round_to_float(s.var);
  }
}

void round_prototypes(std::vector<ClassPrototype>& ps) {
  for (ClassPrototype& p : ps)
    for (double& x : p.mean) x = static_cast<double>(static_cast<float>(x));
}

// Sample n of a (N, ...) tensor as its own tensor with a leading 1.
Tensor slice(const Tensor& t, int n) {
  std::vector<int> shape = t.shape();
  const std::size_t per = t.size() / static_cast<std::size_t>(shape[0]);
  shape[0] = 1;
  return Tensor(shape, std::vector<double>(t.values().begin() + static_cast<std::ptrdiff_t>(per * n),
                                           t.values().begin() + static_cast<std::ptrdiff_t>(per * (n + 1))));
}

void put_slice(Tensor& t, int n, const Tensor& s) {
  std::copy(s.values().begin(), s.values().end(), t.data() + s.size() * static_cast<std::size_t>(n));
}

}  // namespace

ValidationScore validate_model(Model& model, const std::vector<int>& known,
                               const std::vector<SkeletonSequence>& sequences) {
  long long frames = 0, hits = 0;
  double loss = 0.0;
  for (const SkeletonSequence& s : sequences) {
    const Tensor logits = infer(model, s).logits;
    const int K = logits.dim(0);
    for (int t = 0; t < s.frames; ++t) {
      const int target = class_index(known, s.labels[static_cast<std::size_t>(t)]);
      int best = 0;
      double mx = logits[static_cast<std::size_t>(t)];
      for (int k = 1; k < K; ++k) {
        const double v = logits[static_cast<std::size_t>(k) * s.frames + t];
        if (v > mx) {
          mx = v;
          best = k;
        }
      }
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += std::exp(logits[static_cast<std::size_t>(k) * s.frames + t] - mx);
      loss += std::log(z) - (logits[static_cast<std::size_t>(target) * s.frames + t] - mx);
      hits += best == target ? 1 : 0;
      ++frames;
    }
  }
  if (frames == 0) throw ArgumentError("validation set has no frames");
  return {static_cast<double>(hits) / static_cast<double>(frames), loss / static_cast<double>(frames)};
}

TrainResult train(const OpenWorldSplit& split, ModelConfig model_config, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (split.train.empty()) throw ArgumentError("training set is empty");
  if (split.val.empty()) throw ArgumentError("validation set is empty");
  const std::vector<int>& known = split.known_classes;
  for (const SkeletonSequence& s : split.train)
    for (int l : s.labels) class_index(known, l);
  model_config.num_classes = static_cast<int>(known.size());

  Model model(model_config, SkeletonGraph::chain_with_branches(model_config.joints));
  std::vector<ClassPrototype> prototypes = make_prototypes(known, model_config.embedding);
  TensorMap velocity;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int K = model_config.num_classes;
  const std::uint64_t hash = config_hash(model_config, config);

  TrainResult result;
  bool have_best = false;
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const SkeletonSequence*> seqs;
      for (std::size_t i = start; i < end; ++i) seqs.push_back(&split.train[order[i]]);
      Batch batch = make_batch(seqs);
      const int N = static_cast<int>(seqs.size()), T = batch.frames;

      Tensor targets({N, K, T}, 0.0);
      std::vector<int> frame_class(static_cast<std::size_t>(N) * T, -1);
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < batch.lengths[n]; ++t) {
          const int label = seqs[n]->labels[static_cast<std::size_t>(t)];
          const int pos = batch.offsets[n] + t;
          targets.at(n, class_index(known, label), pos) = 1.0;
          frame_class[static_cast<std::size_t>(n) * T + pos] = label;
        }

      if (config.mixup_enabled && N >= 2) {
        std::vector<int> partner(static_cast<std::size_t>(N));
        std::iota(partner.begin(), partner.end(), 0);
        std::shuffle(partner.begin(), partner.end(), rng);
        const Tensor x0 = batch.input, y0 = targets, m0 = batch.mask;
        for (int n = 0; n < N; ++n) {
          const bool pick = unit(rng) < config.mixup_prob;
          const double lambda = sample_mixup_lambda(rng, config.loss.mixup_alpha);
          const int j = partner[n];
          if (!pick || j == n) continue;
          const Mixed mixed = mixup_pair(slice(x0, n), slice(y0, n), slice(x0, j), slice(y0, j), lambda);
          put_slice(batch.input, n, mixed.x);
          put_slice(targets, n, mixed.y);
          for (int t = 0; t < T; ++t) {
            const std::size_t a = static_cast<std::size_t>(n) * T + t, b = static_cast<std::size_t>(j) * T + t;
            batch.mask[a] = std::max(m0[a], m0[b]);
            frame_class[a] = -1;  // mixed frames have no single class
          }
        }
      }

      const auto where = [&] { return " at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps); };
      ad::Tape tape;
      Binding binding(tape, model.params(), /*trainable=*/true, /*training=*/true);
      Model::Output out;
      try {
        out = model.forward(binding, tape.constant(batch.input));
      } catch (const NumericError& e) {
        throw TrainingError(std::string(e.what()) + where());
      }
      const LossBreakdown loss = total_loss(tape, out.decoder.logits, out.decoder.embedding_f, targets, batch.mask,
                                            frame_class, prototypes, config.loss, config.tc_loss_enabled);
      if (!std::isfinite(loss.total_value))
        throw TrainingError("non-finite loss" + where());
      const Tensor embedding = tape.value(out.decoder.embedding_f);
      tape.backward(loss.total);
      TensorMap grads;
      for (const auto& [name, var] : binding.bound()) grads.emplace(name, tape.grad(var));
      if (config.grad_clip > 0.0) clip_gradients(grads, config.grad_clip);
      try {
        sgd_step(model.params().tensors, grads, velocity, lr, config.momentum, config.weight_decay);
      } catch (const NumericError& e) {
        throw TrainingError(std::string(e.what()) + where());
      }
      round_params(model.params());
      update_class_means(prototypes, gather_class_frames(embedding, frame_class), config.loss.gamma);
      round_prototypes(prototypes);

      row.loss += loss.total_value;
      row.ce += loss.ce;
      row.intra += loss.intra;
      row.inter += loss.inter;
      ++steps;
    }
    row.loss /= steps;
    row.ce /= steps;
    row.intra /= steps;
    row.inter /= steps;
    const ValidationScore val = validate_model(model, known, split.val);
    row.val_acc = val.accuracy;
    row.val_loss = val.loss;
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    Checkpoint snap{model_config, known, model.params(), prototypes, epoch, val.accuracy, val.loss, hash, config.seed};
    const bool better = !have_best || val.accuracy > result.best.val_acc ||
                        (val.accuracy == result.best.val_acc && val.loss < result.best.val_loss);
    if (better) {
      result.best = snap;
      have_best = true;
    }
    if (epoch + 1 == config.epochs) result.last = std::move(snap);
  }
  return result;
}

}  // namespace owas
