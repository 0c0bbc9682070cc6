// xview command-line entry point.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numeric failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "xview/config.hpp"
#include "xview/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(xview::ErrorCode code) {
  using xview::ErrorCode;
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
      return kExitConfig;
    case ErrorCode::kIo:
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kNonFinite:
    case ErrorCode::kShapeMismatch:
      return kExitData;
    case ErrorCode::kNumeric:
    case ErrorCode::kDegenerate:
      return kExitNumeric;
  }
  return kExitConfig;
}

std::string dashed(std::string name) {
  for (char& c : name)
    if (c == '_') c = '-';
  return name;
}

struct SettingFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
};

// One `--key-name` option per setting; `synthetic_only` limits the set to
// corpus keys.
void add_setting_options(CLI::App* cmd, SettingFlags& flags, bool synthetic_only) {
  cmd->add_option("--config", flags.config_path, "key = value settings file")->check(CLI::ExistingFile);
  for (const auto& key : xview::settings_keys()) {
    if (synthetic_only && !key.synthetic) continue;
    const std::string name = key.name;
    cmd->add_option_function<std::string>(
        "--" + dashed(name), [&flags, name](const std::string& v) { flags.values[name] = v; },
        key.help);
  }
}

struct Resolved {
  xview::RunSettings settings;
  std::vector<xview::ResolvedSetting> table;
};

Resolved resolve(const SettingFlags& flags) {
  Resolved r;
  std::map<std::string, std::string> file;
  if (!flags.config_path.empty()) file = xview::parse_settings_file(flags.config_path);
  r.table = xview::resolve_settings(r.settings, file, flags.values);
  return r;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) xview::fail(xview::ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) xview::fail(xview::ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) xview::fail(xview::ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) xview::fail(xview::ErrorCode::kIo, "missing run artifact: " + path.string());
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
  SettingFlags flags;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_generate(GenerateArgs& args) {
  if (args.seed && !args.flags.values.count("data_seed"))
    args.flags.values["data_seed"] = std::to_string(*args.seed);
  const Resolved r = resolve(args.flags);
  const fs::path dir(args.out);
  make_dir(dir);
  const xview::Corpus corpus = xview::generate(r.settings.synthetic);
  xview::save_corpus(corpus, (dir / "drone.dmfv").string(), (dir / "satellite.dmfv").string());
  write_json(dir / "manifest.json",
             xview::manifest_json("generate", r.table, {"synthetic", "", ""}, dir.string(),
                                  r.settings.synthetic.seed));
  std::cout << "wrote " << corpus.views().drone.rows() << " drone and "
            << corpus.views().satellite.rows() << " satellite rows to " << dir.string() << '\n';
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  SettingFlags flags;
  std::string out;
  std::string drone;
  std::string satellite;
};

// Writes the corpus into the run directory and reads it back, so training
// sees exactly the float32 data a later eval will load.
xview::Corpus stage_corpus(const TrainArgs& args, const xview::RunSettings& settings,
                           const fs::path& dir) {
  const xview::Corpus source = args.drone.empty()
                                   ? xview::generate(settings.synthetic)
                                   : xview::load_features(args.drone, args.satellite);
  const std::string d = (dir / "drone.dmfv").string();
  const std::string s = (dir / "satellite.dmfv").string();
  xview::save_corpus(source, d, s);
  return xview::load_features(d, s);
}

int cmd_train(const TrainArgs& args) {
  if (args.drone.empty() != args.satellite.empty())
    xview::fail(xview::ErrorCode::kConfig, "--drone and --satellite must be given together");
  const Resolved r = resolve(args.flags);
  xview::validate(r.settings.train);

  const fs::path dir(args.out);
  make_dir(dir);
  const xview::CorpusSource source =
      args.drone.empty() ? xview::CorpusSource{"synthetic", "", ""}
                         : xview::CorpusSource{"files", args.drone, args.satellite};
  write_json(dir / "manifest.json",
             xview::manifest_json("train", r.table, source, dir.string(), r.settings.train.seed));

  const xview::Corpus corpus = stage_corpus(args, r.settings, dir);
  std::ofstream metrics = open_out(dir / "metrics.jsonl");
  std::ofstream timing = open_out(dir / "timing.jsonl");
  const xview::Ablation ablation = r.settings.train.ablation;

  const xview::TrainingRun run =
      xview::train(corpus, r.settings.train, [&](const xview::EpochRecord& rec) {
        metrics << xview::epoch_json(rec, ablation).dump() << '\n' << std::flush;
        timing << xview::timing_json(rec).dump() << '\n' << std::flush;
        std::cerr << "epoch " << rec.epoch << "  loss " << rec.loss.total << "  clusters "
                  << rec.clusters.drone << "/" << rec.clusters.satellite;
        if (rec.scores) std::cerr << "  R@1 " << rec.scores->drone_to_satellite.r1;
        std::cerr << "  (" << rec.wall_seconds << " s)\n";
      });

  xview::save_checkpoint(run.params, (dir / "checkpoint.dmpw").string());
  const json summary = xview::summary_json(run, ablation);
  if (!run.epochs.empty()) metrics << summary.dump() << '\n';
  write_json(dir / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string run;
  std::string checkpoint;
  std::string drone;
  std::string satellite;
  std::string out;
};

int cmd_eval(EvalArgs args) {
  if (!args.run.empty()) {
    const fs::path dir(args.run);
    if (args.checkpoint.empty()) args.checkpoint = (dir / "checkpoint.dmpw").string();
    if (args.drone.empty()) args.drone = (dir / "drone.dmfv").string();
    if (args.satellite.empty()) args.satellite = (dir / "satellite.dmfv").string();
    if (args.out.empty()) args.out = (dir / "eval.json").string();
  }
  if (args.checkpoint.empty() || args.drone.empty() || args.satellite.empty())
    xview::fail(xview::ErrorCode::kConfig, "eval needs --run or --checkpoint, --drone and --satellite");

  const xview::EncoderParams params = xview::load_checkpoint(args.checkpoint);
  const xview::Corpus corpus = xview::load_features(args.drone, args.satellite);
  if (params.dims().input != corpus.views().drone.cols())
    xview::fail(xview::ErrorCode::kShapeMismatch,
                "checkpoint input width " + std::to_string(params.dims().input) +
                    " does not match corpus width " + std::to_string(corpus.views().drone.cols()));
  if (!corpus.has_ground_truth()) {
    std::cerr << "error: evaluation needs label blocks in both feature files\n";
    return kExitData;
  }
  const json scores = xview::view_scores_json(xview::Evaluator(corpus).evaluate(params));
  std::cout << scores.dump(2) << '\n';
  if (!args.out.empty()) write_json(args.out, scores);
  return 0;
}

// ---- diag -----------------------------------------------------------------

struct DiagArgs {
  std::string run;
  int bins = 40;
};

int cmd_diag(const DiagArgs& args) {
  const fs::path dir(args.run);
  for (const char* name : {"metrics.jsonl", "checkpoint.dmpw", "drone.dmfv", "satellite.dmfv"})
    require_file(dir / name);

  std::ifstream metrics(dir / "metrics.jsonl");
  std::ofstream clusters = open_out(dir / "clusters.csv");
  clusters << "epoch,drone,satellite\n";
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(metrics, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      xview::fail(xview::ErrorCode::kIo, std::string("unreadable metrics line: ") + e.what());
    }
    if (rec.value("type", "") != "epoch") continue;
    clusters << rec["epoch"].get<int>() << ',' << rec["clusters"]["drone"].get<int>() << ','
             << rec["clusters"]["satellite"].get<int>() << '\n';
    ++epochs;
  }

  const xview::EncoderParams params = xview::load_checkpoint((dir / "checkpoint.dmpw").string());
  const xview::Corpus corpus =
      xview::load_features((dir / "drone.dmfv").string(), (dir / "satellite.dmfv").string());
  if (!corpus.has_ground_truth()) {
    std::cerr << "error: similarity histograms need label blocks in both feature files\n";
    return kExitData;
  }
  const auto pairs = xview::Evaluator(corpus).cross_view_similarities(params);
  const auto pos = xview::histogram(pairs.positive, args.bins, -1.0, 1.0);
  const auto neg = xview::histogram(pairs.negative, args.bins, -1.0, 1.0);
  std::ofstream hist = open_out(dir / "similarity_hist.csv");
  hist << "bin_lo,bin_hi,positive,negative\n";
  const double width = 2.0 / args.bins;
  for (int b = 0; b < args.bins; ++b)
    hist << xview::format_double(-1.0 + b * width) << ','
         << xview::format_double(-1.0 + (b + 1) * width) << ',' << pos[static_cast<std::size_t>(b)]
         << ',' << neg[static_cast<std::size_t>(b)] << '\n';

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  std::cout << "cluster trace: " << epochs << " epochs -> " << (dir / "clusters.csv").string() << '\n'
            << "similarity pairs: " << pairs.positive.size() << " positive (mean "
            << mean(pairs.positive) << "), " << pairs.negative.size() << " negative (mean "
            << mean(pairs.negative) << ") -> " << (dir / "similarity_hist.csv").string() << '\n';
  return 0;
}

// ---- ablate ---------------------------------------------------------------

struct AblateArgs {
  SettingFlags flags;
  std::string out;
};

int cmd_ablate(const AblateArgs& args) {
  const Resolved r = resolve(args.flags);
  xview::validate(r.settings.train);
  const fs::path dir(args.out);
  make_dir(dir);
  write_json(dir / "manifest.json", xview::manifest_json("ablate", r.table, {"synthetic", "", ""},
                                                         dir.string(), r.settings.train.seed));
  const xview::Corpus corpus = xview::generate(r.settings.synthetic);
  std::vector<std::pair<xview::Ablation, xview::TrainingRun>> runs;
  std::ofstream summaries = open_out(dir / "ablation.jsonl");
  for (auto a : {xview::Ablation::kBaseline, xview::Ablation::kDhml, xview::Ablation::kIcel,
                 xview::Ablation::kFull}) {
    xview::TrainConfig cfg = r.settings.train;
    cfg.ablation = a;
    std::cerr << "running " << xview::to_string(a) << '\n';
    runs.emplace_back(a, xview::train(corpus, cfg));
    summaries << xview::summary_json(runs.back().second, a).dump() << '\n';
  }
  const std::string table = xview::ablation_table(runs);
  std::ofstream(dir / "ablation.txt") << table;
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xview: self-supervised drone/satellite retrieval training"};
  app.set_version_flag("--version", XVIEW_VERSION);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic two-view corpus");
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_option("--seed", gen.seed, "corpus seed (alias of --data-seed)");
  add_setting_options(generate, gen.flags, true);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train the encoder and write a run directory");
  train->add_option("--out", tr.out, "run directory")->required();
  train->add_option("--drone", tr.drone, "drone feature file (default: synthetic corpus)");
  train->add_option("--satellite", tr.satellite, "satellite feature file");
  add_setting_options(train, tr.flags, false);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labelled corpus");
  eval->add_option("--run", ev.run, "run directory");
  eval->add_option("--checkpoint", ev.checkpoint, "checkpoint file");
  eval->add_option("--drone", ev.drone, "drone feature file");
  eval->add_option("--satellite", ev.satellite, "satellite feature file");
  eval->add_option("--out", ev.out, "write scores as JSON");

  DiagArgs dg;
  auto* diag = app.add_subcommand("diag", "dump cluster trace and similarity histograms");
  diag->add_option("--run", dg.run, "run directory")->required();
  diag->add_option("--bins", dg.bins, "histogram bins over [-1, 1]")->check(CLI::PositiveNumber);

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "train all four component sets on one corpus");
  ablate->add_option("--out", ab.out, "output directory")->required();
  add_setting_options(ablate, ab.flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*train) return cmd_train(tr);
    if (*eval) return cmd_eval(ev);
    if (*diag) return cmd_diag(dg);
    if (*ablate) return cmd_ablate(ab);
  } catch (const xview::Error& e) {
    std::cerr << "error [" << xview::to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}
