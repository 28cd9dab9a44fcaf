#include "owas/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "owas/config.hpp"
#include "owas/errors.hpp"
#include "owas/evaluation.hpp"
#include "owas/metrics.hpp"
#include "owas/pipeline.hpp"
#include "owas/skeleton.hpp"
#include "owas/trainer.hpp"

namespace owas {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": '" + item + "' is not an integer");
    }
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Split manifest written next to a dataset by `synth`.
struct Manifest {
  std::uint64_t seed = 0;
  std::vector<int> known;
  std::vector<int> novel;
  double train_ratio = 0.6;
  double val_ratio = 0.2;
};

fs::path manifest_path(const fs::path& data) { return fs::path(data.string() + ".split"); }

void write_manifest(const fs::path& path, const Manifest& m) {
  char ratios[96];
  std::snprintf(ratios, sizeof ratios, "train_ratio: %.17g\nval_ratio: %.17g\n", m.train_ratio, m.val_ratio);
  io::write_file(path, "seed: " + std::to_string(m.seed) + "\nknown: " + join(m.known) + "\nnovel: " + join(m.novel) +
                           "\n" + ratios);
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("split manifest " + path.string() + " not found");
  std::map<std::string, std::string> kv;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    kv[line.substr(0, colon)] = value;
  }
  for (const char* key : {"seed", "known", "novel", "train_ratio", "val_ratio"})
    if (!kv.contains(key)) throw FormatError(path.string() + ": manifest lacks '" + key + "'", 0);
  Manifest m;
  m.seed = std::stoull(kv["seed"]);
  m.known = parse_int_list(kv["known"], "known");
  m.novel = parse_int_list(kv["novel"], "novel");
  m.train_ratio = std::stod(kv["train_ratio"]);
  m.val_ratio = std::stod(kv["val_ratio"]);
  return m;
}

OpenWorldSplit load_split(const fs::path& data) {
  if (!fs::exists(data)) throw std::runtime_error("dataset " + data.string() + " not found");
  const Manifest m = read_manifest(manifest_path(data));
  OpenWorldSplit split = make_split(load_dataset(data), std::set<int>(m.novel.begin(), m.novel.end()), m.train_ratio,
                                    m.val_ratio);
  if (split.known_classes != m.known)
    throw FormatError("known classes of " + data.string() + " differ from its manifest", 0);
  return split;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& sets) {
  RunConfig c;
  if (!path.empty()) {
    if (!fs::exists(path)) throw UsageError("config file " + path + " not found");
    try {
      c = parse_config(io::read_file(path));
    } catch (const ArgumentError& e) {
      throw UsageError(path + ": " + e.what());
    }
  }
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    try {
      apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path, text);
}

std::string outcomes_text(const std::vector<FrameOutcome>& frames, std::uint64_t seed) {
  std::ostringstream s;
  s << "# seed: " << seed << '\n';
  write_outcomes(s, frames);
  return s.str();
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  int classes = 6;
  std::string novel = "4,5";
  int sequences = 200;
  int frames = 16;
  int joints = 8;
  double noise = 0.05;
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.classes < 2) throw UsageError("--classes must be >= 2");
  if (a.sequences < 1 || a.frames < 1 || a.joints < 2) throw UsageError("--sequences, --frames and --joints must be positive (joints >= 2)");
  if (!(a.noise >= 0.0)) throw UsageError("--noise must be >= 0");
  const std::vector<int> novel = parse_int_list(a.novel, "--novel");
  std::set<int> novel_set;
  for (int c : novel) {
    if (c < 0 || c >= a.classes)
      throw UsageError("--novel: class " + std::to_string(c) + " is outside 0.." + std::to_string(a.classes - 1));
    if (!novel_set.insert(c).second) throw UsageError("--novel: class " + std::to_string(c) + " listed twice");
  }
  if (static_cast<int>(novel_set.size()) >= a.classes) throw UsageError("--novel leaves no known class");
  const RunConfig rc = load_run_config(a.config, {});

  SynthOptions o;
  o.seed = a.seed;
  o.num_classes = a.classes;
  o.num_sequences = a.sequences;
  o.frames_per_segment = a.frames;
  o.joints = a.joints;
  o.noise_std = a.noise;
  const std::vector<SkeletonSequence> seqs = generate_synthetic(o);
  const OpenWorldSplit split = make_split(seqs, novel_set, rc.train_ratio, rc.val_ratio);
  save_dataset(a.out, seqs);
  write_manifest(manifest_path(a.out), {a.seed, split.known_classes, split.novel_classes, rc.train_ratio, rc.val_ratio});
  out << "wrote " << seqs.size() << " sequences to " << a.out << " (train " << split.train.size() << ", val "
      << split.val.size() << ", test_closed " << split.test_closed.size() << ", test_open " << split.test_open.size()
      << ", test_ood_only " << split.test_ood_only.size() << ")\n";
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::vector<std::string> sets;
  bool no_mixup = false;
  bool no_tc_loss = false;
  std::string decoder;
  int epochs = 0;
  long long seed = -1;
  std::string out;
  std::string log;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config, a.sets);
  if (a.no_mixup) rc.train.mixup_enabled = false;
  if (a.no_tc_loss) rc.train.tc_loss_enabled = false;
  if (!a.decoder.empty()) {
    try {
      rc.model.decoder = decoder_kind_from_string(a.decoder);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
  }
  if (a.epochs > 0) rc.train.epochs = a.epochs;
  if (a.seed >= 0) rc.train.seed = static_cast<std::uint64_t>(a.seed);
  try {
    rc.train.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }

  const OpenWorldSplit split = load_split(a.data);
  if (split.train.empty() || split.val.empty()) throw std::runtime_error("dataset has no training or validation sequences");
  rc.model.joints = split.train.front().joints;
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.csv") : fs::path(a.log);
  std::string log = epoch_log_header() + ",seed\n";
  const TrainResult result = train(split, rc.model, rc.train, [&](const EpochLog& row) {
    log += epoch_log_row(row) + "," + std::to_string(rc.train.seed) + "\n";
  });
  save_checkpoint(a.out, result.best);
  write_text(log_path, log);
  out << "best epoch " << result.best.epoch << ": val_acc " << result.best.val_acc << ", val_loss "
      << result.best.val_loss << "; checkpoint " << a.out << ", log " << log_path.string() << '\n';
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out_dir;
  std::string config;
  std::vector<std::string> sets;
  double percentile = -1.0;
  int clusters = -1;
  std::uint64_t seed = 1;
  std::string name;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config, a.sets);
  if (a.percentile > 0.0) rc.percentile = a.percentile;
  if (a.clusters >= 0) rc.clusters = a.clusters;
  if (!(rc.percentile > 0.0 && rc.percentile <= 50.0)) throw UsageError("--percentile must be in (0, 50]");

  const Checkpoint ck = load_checkpoint(a.checkpoint);
  Model model = checkpoint_model(ck);
  const OpenWorldSplit split = load_split(a.data);
  if (split.known_classes != ck.known_classes)
    throw std::runtime_error("checkpoint was trained on classes " + join(ck.known_classes) + " but the dataset knows " +
                             join(split.known_classes));
  EvalOptions eo;
  eo.percentile = rc.percentile;
  eo.score = rc.score;
  eo.clusters = rc.clusters;
  eo.seed = a.seed;
  eo.name = a.name.empty() ? fs::path(a.checkpoint).stem().string() : a.name;
  const Evaluation ev = evaluate(model, split, eo);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  char alpha[128];
  std::snprintf(alpha, sizeof alpha, "alpha: %.17g\npercentile: %.17g\ncalibration_frames: %zu\nseed: %llu\n",
                ev.detector.alpha, ev.detector.percentile, ev.detector.calibration_size,
                static_cast<unsigned long long>(a.seed));
  write_text(dir / "detector.txt", alpha);
  std::string csv = csv_header() + "\n";
  const std::pair<const char*, const ScenarioResult*> scenarios[] = {
      {"closed", &ev.closed}, {"open", &ev.open}, {"ood", &ev.ood_only}};
  for (const auto& [tag, res] : scenarios) {
    if (res->report.scenario.empty()) continue;
    res->report.validate();
    write_text(dir / (std::string(tag) + ".report"), format_report(res->report));
    write_text(dir / (std::string("outcomes_") + tag + ".txt"), outcomes_text(res->frames, a.seed));
    csv += csv_row(res->report) + "\n";
    out << tag << ": " << csv_row(res->report) << '\n';
  }
  write_text(dir / "metrics.csv", csv);
  return kExitOk;
}

// ---- detect ---------------------------------------------------------------

struct DetectArgs {
  std::string data;
  std::string checkpoint;
  std::string input;
  std::string out;
  double alpha = -1.0;
  double percentile = 5.0;
  int clusters = 0;
  std::uint64_t seed = 1;
};

int cmd_detect(const DetectArgs& a, std::ostream& out) {
  if (!(a.percentile > 0.0 && a.percentile <= 50.0)) throw UsageError("--percentile must be in (0, 50]");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  Model model = checkpoint_model(ck);
  const OpenWorldSplit split = load_split(a.data);
  NoveltyDetector detector;
  if (a.alpha >= 0.0) {
    detector.alpha = a.alpha;
  } else {
    detector = calibrate_on(model, split.val, a.percentile, ConfidenceScore::MaxSoftmax);
  }
  const std::vector<SkeletonSequence> input = a.input.empty() ? split.test_open : load_dataset(a.input);
  if (input.empty()) throw std::runtime_error("no sequences to label");
  PipelineOptions po;
  po.clusters = a.clusters > 0 ? a.clusters : std::max<int>(1, static_cast<int>(split.novel_classes.size()));
  po.seed = a.seed;
  const PipelineResult r = run_pipeline(model, ck.known_classes, detector, input, po);
  write_text(a.out, outcomes_text(r.frames, a.seed));
  const auto novel = std::count_if(r.frames.begin(), r.frames.end(), [](const FrameOutcome& f) { return !f.is_known; });
  out << "alpha " << detector.alpha << ": " << novel << " of " << r.frames.size() << " frames flagged novel; wrote "
      << a.out << '\n';
  return kExitOk;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string csv;
  std::string scenario;
};

std::vector<MetricReport> read_reports(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("report " + path + " not found");
  const std::string text = io::read_file(path);
  try {
    if (text.rfind("name,", 0) == 0) {
      std::vector<MetricReport> out;
      std::istringstream in(text);
      std::string line;
      std::getline(in, line);
      if (line != csv_header()) throw FormatError("unexpected CSV header", 0);
      while (std::getline(in, line))
        if (!line.empty()) out.push_back(parse_csv_row(line));
      return out;
    }
    return {parse_report(text)};
  } catch (const std::exception& e) {
    throw std::runtime_error("report " + path + ": " + e.what());
  }
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<MetricReport> reports;
  for (const std::string& p : a.inputs)
    for (MetricReport& r : read_reports(p))
      if (a.scenario.empty() || r.scenario == a.scenario) reports.push_back(std::move(r));
  if (reports.empty()) throw std::runtime_error("no reports matched");
  const std::string table = render_table(reports);
  if (a.out.empty())
    out << table;
  else
    write_text(a.out, table);
  if (!a.csv.empty()) {
    std::string csv = csv_header() + "\n";
    for (const MetricReport& r : reports) csv += csv_row(r) + "\n";
    write_text(a.csv, csv);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-world skeleton action segmentation", "owas"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic skeleton dataset and its split manifest");
  synth->add_option("--classes", sa.classes, "Number of action classes")->capture_default_str();
  synth->add_option("--novel", sa.novel, "Comma-separated novel class ids")->capture_default_str();
  synth->add_option("--sequences", sa.sequences, "Number of sequences")->capture_default_str();
  synth->add_option("--frames", sa.frames, "Frames per action segment")->capture_default_str();
  synth->add_option("--joints", sa.joints, "Joints per skeleton")->capture_default_str();
  synth->add_option("--noise", sa.noise, "Gaussian coordinate noise")->capture_default_str();
  synth->add_option("--seed", sa.seed, "Generator seed")->capture_default_str();
  synth->add_option("--config", sa.config, "Run config (train_ratio, val_ratio)");
  synth->add_option("--out", sa.out, "Output dataset path")->required();

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model and write the best checkpoint");
  trn->add_option("--data", ta.data, "Dataset written by synth")->required();
  trn->add_option("--config", ta.config, "Run config file");
  trn->add_option("--set", ta.sets, "Config override key=value (repeatable)");
  trn->add_flag("--no-mixup", ta.no_mixup, "Disable Mixup");
  trn->add_flag("--no-tc-loss", ta.no_tc_loss, "Disable the temporal clustering loss");
  trn->add_option("--decoder", ta.decoder, "teu or tpp");
  trn->add_option("--epochs", ta.epochs, "Override the epoch count");
  trn->add_option("--seed", ta.seed, "Override the training seed");
  trn->add_option("--out", ta.out, "Checkpoint path")->required();
  trn->add_option("--log", ta.log, "CSV training log (default <out>.log.csv)");

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Run the closed-set, open-set and OOD-only scenarios");
  evl->add_option("--data", ea.data, "Dataset written by synth")->required();
  evl->add_option("--checkpoint", ea.checkpoint, "Checkpoint written by train")->required();
  evl->add_option("--out-dir", ea.out_dir, "Directory for reports and outcomes")->required();
  evl->add_option("--config", ea.config, "Run config file (percentile, score, clusters)");
  evl->add_option("--set", ea.sets, "Config override key=value (repeatable)");
  evl->add_option("--percentile", ea.percentile, "Lower percentile of validation confidences used as alpha");
  evl->add_option("--clusters", ea.clusters, "Number of pseudo-classes M (default: novel class count)");
  evl->add_option("--seed", ea.seed, "Clustering seed")->capture_default_str();
  evl->add_option("--name", ea.name, "Configuration label (default: checkpoint stem)");

  DetectArgs da;
  auto* det = app.add_subcommand("detect", "Label sequences with known classes or novel pseudo-classes");
  det->add_option("--data", da.data, "Dataset whose validation split calibrates alpha")->required();
  det->add_option("--checkpoint", da.checkpoint, "Checkpoint written by train")->required();
  det->add_option("--input", da.input, "Sequences to label (default: the open-set test split)");
  det->add_option("--out", da.out, "Outcome file")->required();
  det->add_option("--alpha", da.alpha, "Fixed threshold instead of calibration");
  det->add_option("--percentile", da.percentile, "Calibration percentile")->capture_default_str();
  det->add_option("--clusters", da.clusters, "Number of pseudo-classes M");
  det->add_option("--seed", da.seed, "Clustering seed")->capture_default_str();

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Render metric reports as a comparison table");
  rep->add_option("reports", ra.inputs, "Report files (.report or metrics.csv)")->required();
  rep->add_option("--out", ra.out, "Text table path (default: stdout)");
  rep->add_option("--csv", ra.csv, "CSV output path");
  rep->add_option("--scenario", ra.scenario, "Keep only this scenario (closed, open, ood)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const char* command = synth->parsed() ? "synth"
                        : trn->parsed() ? "train"
                        : evl->parsed() ? "eval"
                        : det->parsed() ? "detect"
                                        : "report";
  try {
    if (synth->parsed()) return cmd_synth(sa, out);
    if (trn->parsed()) return cmd_train(ta, out);
    if (evl->parsed()) return cmd_eval(ea, out);
    if (det->parsed()) return cmd_detect(da, out);
    return cmd_report(ra, out);
  } catch (const UsageError& e) {
    err << command << ": " << e.what() << "\n\n" << app.get_subcommand(command)->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << command << ": " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace owas
