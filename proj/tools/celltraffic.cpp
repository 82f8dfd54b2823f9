// celltraffic: batch front end for ingest, synthesis, analysis, training,
// prediction, evaluation and lag-spec grid search.
//
// Exit codes: 0 success, 1 usage error, 2 data/format/model error,
// 3 numeric failure. Results reach stdout only after a command succeeds.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "celltraffic/celltraffic.hpp"

namespace ct = celltraffic;
namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Bad flag values detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
};

Grid parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_h = 0, used_w = 0;
    const auto h = std::stoul(text.substr(0, x), &used_h);
    const auto w = std::stoul(text.substr(x + 1), &used_w);
    if (used_h != x || used_w != text.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--grid expects HxW with positive integers, got '" + text + "'");
  }
}

/// Inclusive "a..b" or a single value.
std::pair<std::size_t, std::size_t> parse_range(const std::string& text, const char* flag) {
  try {
    const auto dots = text.find("..");
    std::size_t used = 0;
    const auto lo = std::stoul(text.substr(0, dots), &used);
    if (used != (dots == std::string::npos ? text.size() : dots)) throw std::invalid_argument(text);
    if (dots == std::string::npos) return {lo, lo};
    const auto tail = text.substr(dots + 2);
    const auto hi = std::stoul(tail, &used);
    if (used != tail.size() || hi < lo) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError(std::string(flag) + " expects a..b with a <= b, got '" + text + "'");
  }
}

ct::Cell parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_r = 0, used_c = 0;
    const auto r = std::stoul(text.substr(0, comma), &used_r);
    const auto c = std::stoul(text.substr(comma + 1), &used_c);
    if (used_r != comma || used_c != text.size() - comma - 1) throw std::invalid_argument(text);
    return {r, c};
  } catch (const std::logic_error&) {
    throw UsageError("--pearson expects ROW,COL, got '" + text + "'");
  }
}

/// "row,col,peak[,phase]"
ct::Hotspot parse_hotspot(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string p; std::getline(in, p, ',');) parts.push_back(p);
  if (parts.size() != 3 && parts.size() != 4) throw UsageError("--hotspot expects row,col,peak[,phase], got '" + text + "'");
  try {
    ct::Hotspot h;
    h.row = std::stoul(parts[0]);
    h.col = std::stoul(parts[1]);
    h.peak = ct::io::parse_double(parts[2]);
    if (parts.size() == 4) h.phase_hours = ct::io::parse_double(parts[3]);
    return h;
  } catch (const std::exception&) {
    throw UsageError("--hotspot expects row,col,peak[,phase], got '" + text + "'");
  }
}

ct::ServiceKind parse_service(const std::string& name) {
  auto kind = ct::service_from_string(name);
  if (!kind) throw UsageError("unknown service '" + name + "'");
  return *kind;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in))
        if (entry.is_regular_file()) found.push_back(entry.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  if (files.empty()) throw ct::InputError("no input files found");
  return files;
}

/// Raw CDR fields summed for a service; combined kinds fold pairs together.
std::vector<ct::ServiceKind> raw_fields(ct::ServiceKind kind) {
  using S = ct::ServiceKind;
  switch (kind) {
    case S::sms_combined: return {S::sms_in, S::sms_out};
    case S::call_combined: return {S::call_in, S::call_out};
    case S::total: return {S::sms_in, S::sms_out, S::call_in, S::call_out, S::internet};
    default: return {kind};
  }
}

// Options shared by train and gridsearch.
struct ModelFlags {
  std::size_t layers = 4;
  std::size_t growth = 8;
  std::size_t weeks = 7;
  std::size_t train_weeks = 6;
  std::size_t epochs = 50;
  double lr = 0.10;
  double momentum = 0.9;
  double decay = 0.8;
  std::size_t decay_every = 10;
  std::size_t batch = 128;
  std::uint64_t seed = 42;
  std::uint64_t shuffle_seed = 7;

  void attach(CLI::App* cmd) {
    cmd->add_option("--layers", layers, "Dense layers (full scale: 58)")->capture_default_str();
    cmd->add_option("--growth", growth, "Feature maps added per layer (full scale: 32)")->capture_default_str();
    cmd->add_option("--weeks", weeks, "Weeks used from the start of the cube")->capture_default_str();
    cmd->add_option("--train-weeks", train_weeks, "Leading weeks used for training")->capture_default_str();
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    cmd->add_option("--momentum", momentum, "SGD momentum")->capture_default_str();
    cmd->add_option("--lr-decay", decay, "Learning-rate multiplier per decay step")->capture_default_str();
    cmd->add_option("--decay-every", decay_every, "Epochs between learning-rate cuts")->capture_default_str();
    cmd->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    cmd->add_option("--seed", seed, "Model initialization seed")->capture_default_str();
    cmd->add_option("--shuffle-seed", shuffle_seed, "Mini-batch shuffle seed")->capture_default_str();
  }

  ct::PipelineSetup setup() const {
    ct::PipelineSetup s;
    s.num_layers = layers;
    s.growth = growth;
    s.total_weeks = weeks;
    s.train_weeks = train_weeks;
    s.model_seed = seed;
    s.train.initial_lr = lr;
    s.train.momentum = momentum;
    s.train.lr_decay = decay;
    s.train.decay_every = decay_every;
    s.train.batch_size = batch;
    s.train.epochs = epochs;
    s.train.shuffle_seed = shuffle_seed;
    try {
      s.train.validate();
      auto probe = ct::nn::ModelConfig::desk(1, 5, 5);
      probe.num_layers = layers;
      probe.growth = growth;
      probe.validate();
    } catch (const ct::Error& e) {
      throw UsageError(e.what());
    }
    if (train_weeks < 1 || train_weeks >= weeks) throw UsageError("--train-weeks must lie in [1, --weeks)");
    return s;
  }
};

ct::LagSpec checked_spec(std::size_t h, std::size_t d, std::size_t w) {
  const ct::LagSpec spec{h, d, w};
  ct::lag_set(spec);  // DegenerateSpecError names the offending lag.
  return spec;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string service;
  std::string grid;
  std::string out;
  std::int64_t slot_seconds = 600;
  bool hourly = false;
};

int run_ingest(const IngestArgs& a) {
  const auto service = parse_service(a.service);
  const auto grid = parse_grid(a.grid);
  if (a.slot_seconds <= 0) throw UsageError("--slot-seconds must be positive");
  std::vector<ct::CdrRecord> records;
  for (const auto& file : expand_inputs(a.inputs)) {
    auto part = ct::read_cdr_file(file);
    records.insert(records.end(), part.begin(), part.end());
  }
  std::optional<ct::TrafficCube> cube;
  for (auto field : raw_fields(service)) {
    auto part = ct::assemble_cube(records, grid.height, grid.width, field, a.slot_seconds);
    cube = cube ? ct::combine_services(*cube, part) : std::move(part);
  }
  cube->set_service(service);
  if (a.hourly) cube = ct::aggregate_hourly(*cube);
  ct::save_cube(*cube, a.out);
  std::cout << "wrote " << a.out << ": " << cube->height() << "x" << cube->width() << "x" << cube->length() << " "
            << ct::to_string(service) << " from " << records.size() << " records\n";
  return kOk;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t weeks = 8;
  std::string grid = "20x20";
  std::uint64_t seed = 1;
  std::string out;
  std::vector<std::string> hotspots;
  double noise = 0.05;
  double weekend = 0.6;
  double amplitude = 0.5;
  double base = 1.0;
  double sigma = 3.0;
};

int run_synth(const SynthArgs& a) {
  const auto grid = parse_grid(a.grid);
  ct::SynthConfig c;
  c.height = grid.height;
  c.width = grid.width;
  c.weeks = a.weeks;
  c.seed = a.seed;
  c.noise_std = a.noise;
  c.weekly_weekend_factor = a.weekend;
  c.daily_amplitude = a.amplitude;
  c.base_level = a.base;
  c.spatial_sigma = a.sigma;
  for (const auto& h : a.hotspots) c.hotspots.push_back(parse_hotspot(h));
  if (c.hotspots.empty())
    c.hotspots = {{grid.height / 4, grid.width / 4, 2.0, 0.0}, {3 * grid.height / 4, 3 * grid.width / 4, 1.5, 6.0}};
  ct::TrafficCube cube;
  try {
    cube = ct::generate_synthetic(c);
  } catch (const ct::ConfigError& e) {
    throw UsageError(e.what());
  }
  ct::save_cube(cube, a.out);
  std::cout << "wrote " << a.out << ": " << cube.height() << "x" << cube.width() << "x" << cube.length() << "\n";
  return kOk;
}

// --------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string cube;
  std::size_t atvr = 0;
  std::string pearson;
  std::size_t radius = 4;
  bool hotspots = false;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  const int modes = (a.atvr > 0) + !a.pearson.empty() + a.hotspots;
  if (modes != 1) throw UsageError("choose exactly one of --atvr, --pearson, --hotspots");
  std::optional<ct::Cell> center;
  if (!a.pearson.empty()) center = parse_cell(a.pearson);
  const auto cube = ct::load_cube(a.cube);
  std::string path;
  if (a.atvr > 0) {
    path = a.out + "_atvr.csv";
    ct::io::write_text_file(path, ct::atvr_csv(ct::atvr_profile(cube, a.atvr)));
  } else if (center) {
    path = a.out + "_pearson.csv";
    ct::io::write_text_file(path, ct::correlation_map_csv(ct::correlation_map(cube, *center, a.radius)));
  } else {
    path = a.out + "_hotspots.csv";
    ct::io::write_text_file(path, ct::hotspot_track_csv(ct::hotspot_trajectory(cube)));
  }
  std::cout << "wrote " << path << "\n";
  return kOk;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string cube;
  std::size_t h = 3, d = 3, w = 1;
  ModelFlags model;
  std::string out;
  std::string history;
  bool no_timing = false;
};

int run_train(const TrainArgs& a) {
  const auto spec = checked_spec(a.h, a.d, a.w);
  const auto setup = a.model.setup();
  const auto raw = ct::load_cube(a.cube);
  auto run = ct::run_pipeline(raw, spec, setup);
  ct::save_checkpoint(run.checkpoint, a.out);
  if (!a.history.empty()) ct::io::write_text_file(a.history, ct::history_csv(run.history, !a.no_timing));
  const auto& first = run.history.epochs.front();
  const auto& last = run.history.epochs.back();
  std::cout << "spec " << ct::to_string(spec) << " channels " << spec.channel_count() << "\n"
            << "train_loss " << ct::io::format_double(first.train_loss) << " -> "
            << ct::io::format_double(last.train_loss) << "\n"
            << "test_avg_rmse " << ct::io::format_double(run.report.average_rmse) << "\n"
            << "wrote " << a.out << "\n";
  return kOk;
}

// --------------------------------------------------- predict / evaluate

/// Normalized cube, checkpoint and held-out range tied together.
struct LoadedModel {
  ct::Checkpoint ck;
  ct::TrafficCube raw;
  std::shared_ptr<const ct::TrafficCube> normalized;
  ct::SlotRange test;
};

LoadedModel load_model_and_cube(const std::string& cube_path, const std::string& model_path) {
  LoadedModel m;
  m.ck = ct::load_checkpoint(model_path);
  m.raw = ct::load_cube(cube_path);
  if (m.raw.normalized()) throw ct::StateError(cube_path + ": expected a cube in original units");
  ct::check_model_matches(m.ck.model, m.raw, m.ck.meta.lag);
  m.test = ct::split_weeks(m.raw, m.ck.meta.total_weeks, m.ck.meta.train_weeks).test;
  m.normalized = std::make_shared<const ct::TrafficCube>(ct::normalize_with(m.raw, m.ck.meta.stats));
  return m;
}

struct PredictArgs {
  std::string cube;
  std::string model;
  std::string out;
};

int run_predict(const PredictArgs& a) {
  auto m = load_model_and_cube(a.cube, a.model);
  auto frames = ct::predict_range(ct::model_predictor(m.ck.model), m.normalized, m.ck.meta.stats, m.ck.meta.lag, m.test);
  auto cube = ct::TrafficCube::zeros(m.raw.height(), m.raw.width(), frames.size(),
                                     m.raw.start_time() + static_cast<std::int64_t>(m.test.begin) * m.raw.slot_duration(),
                                     m.raw.slot_duration(), m.raw.service());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    cube.frame(i) = std::move(frames[i]);
    cube.frame(i).set_slot(static_cast<std::int64_t>(i));
  }
  ct::save_cube(cube, a.out);
  std::cout << "wrote " << a.out << ": slots " << m.test.begin << ".." << m.test.end << " of " << a.cube << "\n";
  return kOk;
}

struct EvaluateArgs {
  std::string cube;
  std::string model;
  std::string out;
  std::string baseline;
  std::string baseline_out;
  std::size_t weeks = 7;
  std::size_t train_weeks = 6;
  std::string hotspot_track;
  std::string maps;
  std::vector<std::size_t> map_slots;
  std::string map_format = "pgm";
};

ct::EvalReport run_baseline(const std::string& name, const ct::TrafficCube& raw, ct::SlotRange test) {
  if (name == "persistence") return ct::baseline_persistence(raw, test);
  if (name.rfind("seasonal:", 0) == 0) {
    const auto period = parse_range(name.substr(9), "--baseline").first;
    return ct::baseline_seasonal(raw, period, test);
  }
  throw UsageError("--baseline expects persistence or seasonal:PERIOD, got '" + name + "'");
}

int run_evaluate(const EvaluateArgs& a) {
  if (a.model.empty() && a.baseline.empty()) throw UsageError("evaluate needs --model, --baseline or both");
  if (a.model.empty() && (!a.hotspot_track.empty() || !a.maps.empty()))
    throw UsageError("--hotspot-track and --maps need --model");
  if (a.map_format != "pgm" && a.map_format != "csv") throw UsageError("--map-format expects pgm or csv");
  if (!a.baseline.empty() && a.baseline != "persistence" && a.baseline.rfind("seasonal:", 0) != 0)
    throw UsageError("--baseline expects persistence or seasonal:PERIOD, got '" + a.baseline + "'");

  std::ostringstream summary;
  if (a.model.empty()) {
    const auto raw = ct::load_cube(a.cube);
    const auto test = ct::split_weeks(raw, a.weeks, a.train_weeks).test;
    const auto base = run_baseline(a.baseline, raw, test);
    ct::io::write_text_file(a.out, ct::report_csv(base));
    summary << base.model_id << "_avg_rmse " << ct::io::format_double(base.average_rmse) << "\n";
    std::cout << summary.str();
    return kOk;
  }

  auto m = load_model_and_cube(a.cube, a.model);
  const auto& meta = m.ck.meta;
  auto frames = ct::predict_range(ct::model_predictor(m.ck.model), m.normalized, meta.stats, meta.lag, m.test);
  const auto report = ct::score_frames(frames, m.raw, m.test, "dense" + ct::to_string(meta.lag));
  std::optional<ct::EvalReport> base;
  if (!a.baseline.empty()) base = run_baseline(a.baseline, m.raw, m.test);
  std::optional<ct::HotspotComparison> track;
  if (!a.hotspot_track.empty()) track = ct::compare_hotspot_tracks(frames, m.raw, m.test);
  std::vector<std::size_t> map_slots = a.map_slots;
  if (!a.maps.empty() && map_slots.empty()) map_slots.push_back(m.test.begin);
  for (auto t : map_slots)
    if (t < m.test.begin || t >= m.test.end)
      throw ct::RangeError("--map-slot " + std::to_string(t) + " outside the held-out slots " +
                           std::to_string(m.test.begin) + ".." + std::to_string(m.test.end));

  ct::io::write_text_file(a.out, ct::report_csv(report));
  summary << report.model_id << "_avg_rmse " << ct::io::format_double(report.average_rmse) << "\n";
  if (base) {
    const auto path = a.baseline_out.empty()
                          ? (fs::path(a.out).replace_extension("").string() + "_baseline.csv")
                          : a.baseline_out;
    ct::io::write_text_file(path, ct::report_csv(*base));
    summary << base->model_id << "_avg_rmse " << ct::io::format_double(base->average_rmse) << "\n";
  }
  if (track) {
    ct::io::write_text_file(a.hotspot_track, ct::hotspot_csv(*track));
    summary << "hotspot_hit_rate " << ct::io::format_double(track->hit_rate) << "\n";
  }
  const auto format = a.map_format == "csv" ? ct::MapFormat::csv : ct::MapFormat::pgm;
  for (auto t : map_slots) {
    const auto tag = a.maps + "_t" + std::to_string(t);
    ct::export_intensity_map(frames[t - m.test.begin], tag + "_pred." + a.map_format, format);
    ct::export_intensity_map(m.raw.frame(t), tag + "_truth." + a.map_format, format);
  }
  std::cout << summary.str();
  return kOk;
}

// ------------------------------------------------------------ gridsearch

struct GridArgs {
  std::string cube;
  std::string h_range = "2..7";
  std::string d_range = "2..7";
  std::string w_range = "0..3";
  ModelFlags model;
  std::string out;
  bool no_timing = false;
};

int run_gridsearch(const GridArgs& a) {
  const auto [h0, h1] = parse_range(a.h_range, "--h-range");
  const auto [d0, d1] = parse_range(a.d_range, "--d-range");
  const auto [w0, w1] = parse_range(a.w_range, "--w-range");
  const auto setup = a.model.setup();
  std::vector<ct::LagSpec> specs;
  for (auto h = h0; h <= h1; ++h)
    for (auto d = d0; d <= d1; ++d)
      for (auto w = w0; w <= w1; ++w) specs.push_back({h, d, w});
  const auto raw = ct::load_cube(a.cube);
  const auto result = ct::grid_search(raw, specs, setup);
  ct::io::write_text_file(a.out, ct::grid_csv(result, !a.no_timing));
  std::size_t failed = 0;
  for (const auto& e : result.entries) failed += e.ok ? 0 : 1;
  std::cout << "specs " << specs.size() << " failed " << failed << "\n";
  if (const auto* best = result.best_entry())
    std::cout << "best " << ct::to_string(best->spec) << " avg_rmse " << ct::io::format_double(best->average_rmse)
              << "\n";
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-based cellular traffic forecasting"};
  app.require_subcommand(1);
  // -h would collide with the --h lag flag.
  app.set_help_flag("--help", "Print this help message and exit");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a CGF1 cube from tab-separated CDR files");
  c_ingest->add_option("--input", ingest.inputs, "CDR files or directories")->required();
  c_ingest->add_option("--service", ingest.service,
                       "sms_in, sms_out, call_in, call_out, internet, sms_combined, call_combined or total")
      ->required();
  c_ingest->add_option("--grid", ingest.grid, "Grid extent HxW; square ids are row-major from 1")->required();
  c_ingest->add_option("--out", ingest.out, "Output cube")->required();
  c_ingest->add_option("--slot-seconds", ingest.slot_seconds, "Record interval")->capture_default_str();
  c_ingest->add_flag("--hourly", ingest.hourly, "Sum slots into hours");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a seeded synthetic hourly cube");
  c_synth->add_option("--weeks", synth.weeks, "Length in weeks")->capture_default_str();
  c_synth->add_option("--grid", synth.grid, "Grid extent HxW")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output cube")->required();
  c_synth->add_option("--hotspot", synth.hotspots, "row,col,peak[,phase_hours]; repeatable");
  c_synth->add_option("--noise", synth.noise, "Gaussian noise std")->capture_default_str();
  c_synth->add_option("--weekend-factor", synth.weekend, "Weekend multiplier in (0,1]")->capture_default_str();
  c_synth->add_option("--daily-amplitude", synth.amplitude, "Daily sinusoid amplitude")->capture_default_str();
  c_synth->add_option("--base-level", synth.base, "Daily cycle offset")->capture_default_str();
  c_synth->add_option("--sigma", synth.sigma, "Hotspot spatial spread in cells")->capture_default_str();

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "ATVR profile, Pearson map or hotspot track as CSV");
  c_analyze->add_option("--cube", analyze.cube, "Input cube")->required();
  c_analyze->add_option("--atvr", analyze.atvr, "ATVR for tau = 1..N");
  c_analyze->add_option("--pearson", analyze.pearson, "Center cell ROW,COL of the correlation map");
  c_analyze->add_option("--radius", analyze.radius, "Correlation map radius")->capture_default_str();
  c_analyze->add_flag("--hotspots", analyze.hotspots, "Per-slot hotspot track");
  c_analyze->add_option("--out", analyze.out, "Output prefix")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train on the leading weeks, score the held-out weeks");
  c_train->add_option("--cube", train.cube, "Raw input cube")->required();
  c_train->add_option("--h", train.h, "Recent hours")->capture_default_str();
  c_train->add_option("--d", train.d, "Previous days")->capture_default_str();
  c_train->add_option("--w", train.w, "Previous weeks")->capture_default_str();
  train.model.attach(c_train);
  c_train->add_option("--out", train.out, "Output checkpoint")->required();
  c_train->add_option("--history", train.history, "Per-epoch CSV");
  c_train->add_flag("--no-timing", train.no_timing, "Write 0 in timing columns for byte-stable output");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Write held-out forecasts as a CGF1 cube");
  c_predict->add_option("--cube", predict.cube, "Raw input cube")->required();
  c_predict->add_option("--model", predict.model, "Checkpoint")->required();
  c_predict->add_option("--out", predict.out, "Output cube of forecasts")->required();

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Per-slot RMSE on the held-out weeks");
  c_eval->add_option("--cube", evaluate.cube, "Raw input cube")->required();
  c_eval->add_option("--model", evaluate.model, "Checkpoint");
  c_eval->add_option("--out", evaluate.out, "Report CSV")->required();
  c_eval->add_option("--baseline", evaluate.baseline, "persistence or seasonal:PERIOD");
  c_eval->add_option("--baseline-out", evaluate.baseline_out, "Baseline CSV when scoring a model too (default <out stem>_baseline.csv)");
  c_eval->add_option("--weeks", evaluate.weeks, "Split without a model: weeks used")->capture_default_str();
  c_eval->add_option("--train-weeks", evaluate.train_weeks, "Split without a model: training weeks")
      ->capture_default_str();
  c_eval->add_option("--hotspot-track", evaluate.hotspot_track, "Hotspot comparison CSV");
  c_eval->add_option("--maps", evaluate.maps, "Prefix for prediction/truth intensity maps");
  c_eval->add_option("--map-slot", evaluate.map_slots, "Slot to map; repeatable");
  c_eval->add_option("--map-format", evaluate.map_format, "pgm or csv")->capture_default_str();

  GridArgs grid;
  auto* c_grid = app.add_subcommand(
      "gridsearch", "Train and score every (h, d, w) in the given ranges; full-scale ranges are h 2..7, d 2..7, w 0..3");
  c_grid->add_option("--cube", grid.cube, "Raw input cube")->required();
  c_grid->add_option("--h-range", grid.h_range, "Recent hours a..b")->capture_default_str();
  c_grid->add_option("--d-range", grid.d_range, "Previous days a..b")->capture_default_str();
  c_grid->add_option("--w-range", grid.w_range, "Previous weeks a..b")->capture_default_str();
  grid.model.attach(c_grid);
  c_grid->add_option("--out", grid.out, "Result CSV")->required();
  c_grid->add_flag("--no-timing", grid.no_timing, "Write 0 in timing columns for byte-stable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kUsage;
  }

  try {
    if (*c_ingest) return run_ingest(ingest);
    if (*c_synth) return run_synth(synth);
    if (*c_analyze) return run_analyze(analyze);
    if (*c_train) return run_train(train);
    if (*c_predict) return run_predict(predict);
    if (*c_eval) return run_evaluate(evaluate);
    if (*c_grid) return run_gridsearch(grid);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ct::DegenerateSpecError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ct::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ct::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
