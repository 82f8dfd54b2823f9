// Acceptance gate: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are fixed here and must not be loosened to make a run pass.
//
//   acceptance          run every criterion
//   acceptance 3 6      run only the listed criteria

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "support/gradcheck.hpp"

using namespace celltraffic;
using namespace celltraffic::nn;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

Verdict gradient_correctness() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  double layer_max = 0.0;
  std::size_t checked = 0;
  auto take = [&](const gradcheck::Result& r) {
    layer_max = std::max(layer_max, r.max_rel);
    checked += r.checked;
  };
  for (std::uint64_t k = 0; k < 6; ++k) {
    const Shape4 s{dim(rng) + 1, dim(rng), dim(rng) + 1, dim(rng) + 1};
    take(gradcheck::conv(100 + k, s, dim(rng)));
    take(gradcheck::batchnorm(200 + k, s));
    take(gradcheck::relu(300 + k, s));
    take(gradcheck::linear(400 + k, s.batch, dim(rng) + 2, dim(rng)));
  }
  take(gradcheck::pool(500, {2, 2, 10, 5}, PoolSpec{}));
  take(gradcheck::pool(501, {3, 1, 15, 10}, PoolSpec{}));
  take(gradcheck::pool(502, {1, 3, 6, 6}, PoolSpec{2, 3, 2, 3}));

  const auto model = gradcheck::model(7, 20);
  const bool pass = layer_max < 1e-4 && model.max_rel < 1e-3 && model.checked == 20;
  return {pass, "layers max rel " + fmt(layer_max) + " over " + std::to_string(checked) + " coords (< 1e-4); model " +
                    fmt(model.max_rel) + " over " + std::to_string(model.checked) + " params (< 1e-3)"};
}

// ---------------------------------------------------------------- 2

Verdict lag_set_fidelity() {
  const std::vector<std::size_t> want = {1, 2, 24, 25, 48, 49, 120, 121, 144, 145, 168, 169};
  if (lag_set({2, 2, 1}) != want) return {false, "lag_set(2,2,1) differs from the 12-lag example"};
  std::size_t clean = 0, degenerate = 0;
  for (std::size_t h = 1; h <= 5; ++h)
    for (std::size_t d = 0; d <= 5; ++d)
      for (std::size_t w = 0; w <= 2; ++w) {
        const LagSpec spec{h, d, w};
        if (!oracle::family_is_clean(h, d, w)) {
          bool threw = false;
          try {
            lag_set(spec);
          } catch (const DegenerateSpecError&) {
            threw = true;
          }
          if (!threw) return {false, to_string(spec) + " is degenerate but was accepted"};
          ++degenerate;
          continue;
        }
        const auto lags = lag_set(spec);
        if (lags.size() != h * (d + 1) * (w + 1) || lags != oracle::lag_family(h, d, w))
          return {false, to_string(spec) + " has " + std::to_string(lags.size()) + " lags"};
        ++clean;
      }
  return {true, "exact 12-lag set; |lags| = h(d+1)(w+1) on " + std::to_string(clean) + " specs, " +
                    std::to_string(degenerate) + " degenerate specs rejected"};
}

// ---------------------------------------------------------------- 3

Verdict metric_oracles() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  double worst[4] = {0, 0, 0, 0};
  for (int k = 0; k < 100; ++k) {
    const std::size_t h = dim(rng), w = dim(rng);
    const auto p = oracle::random_frame(h, w, rng);
    const auto y = oracle::random_frame(h, w, rng);
    worst[0] = std::max(worst[0], oracle::rel_error(rmse_slot(p, y), oracle::rmse(p, y)));

    const auto cube = oracle::random_cube(h, w, 30, 1000 + static_cast<std::uint64_t>(k));
    const std::size_t tau = 1 + static_cast<std::size_t>(k) % 29;
    worst[1] = std::max(worst[1], oracle::rel_error(atvr(cube, tau), oracle::atvr(cube, tau)));

    std::vector<double> a(3 + dim(rng) * 5), b(a.size());
    std::normal_distribution<double> n;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = n(rng);
      b[i] = 0.5 * a[i] + n(rng);
    }
    worst[2] = std::max(worst[2], oracle::rel_error(pearson(std::span<const double>(a), std::span<const double>(b)),
                                                    oracle::pearson(a, b)));

    const auto tp = oracle::random_tensor({dim(rng), 1, h, w}, rng);
    const auto ty = oracle::random_tensor(tp.shape(), rng);
    worst[3] = std::max(worst[3], oracle::rel_error(mse_loss(tp, ty).loss, oracle::mse(tp, ty)));
  }
  const bool pass = *std::max_element(worst, worst + 4) < 1e-12;
  return {pass, "max rel error rmse " + fmt(worst[0]) + ", atvr " + fmt(worst[1]) + ", pearson " + fmt(worst[2]) +
                    ", mse " + fmt(worst[3]) + " over 100 instances each (< 1e-12)"};
}

// ---------------------------------------------------------------- 4

Verdict ideal_atvr() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> level(0.5, 50.0);
  auto cube = TrafficCube::zeros(6, 7, 2 * 168, 0, 3600, ServiceKind::internet);
  std::vector<double> frame(42);
  for (double& v : frame) v = level(rng);
  for (std::size_t t = 0; t < cube.length(); ++t) std::copy(frame.begin(), frame.end(), cube.frame(t).values().begin());
  const auto profile = atvr_profile(cube, 168);
  double worst = 0.0;
  for (double v : profile.values) worst = std::max(worst, std::abs(v - 1.0));
  return {worst < 1e-12 && profile.values.size() == 168,
          "max |rho(tau) - 1| = " + fmt(worst) + " for tau 1..168 (< 1e-12)"};
}

// ---------------------------------------------------------------- 5

Verdict normalization_round_trip() {
  double worst_rt = 0.0, worst_mean = 0.0, worst_var = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cube = oracle::random_cube(4 + seed % 5, 3 + seed % 7, 40 + seed, 500 + seed, 0.0, 1000.0);
    const auto [norm, stats] = normalize(cube);
    const auto back = denormalize(norm, stats);
    long double sum = 0.0L, sq = 0.0L;
    std::size_t n = 0;
    for (std::size_t t = 0; t < cube.length(); ++t)
      for (std::size_t i = 0; i < cube.cells(); ++i) {
        worst_rt = std::max(worst_rt, oracle::rel_error(back.frame(t).values()[i], cube.frame(t).values()[i]));
        const long double z = norm.frame(t).values()[i];
        sum += z;
        sq += z * z;
        ++n;
      }
    const long double mean = sum / n;
    worst_mean = std::max(worst_mean, static_cast<double>(std::abs(mean)));
    worst_var = std::max(worst_var, static_cast<double>(std::abs(sq / n - mean * mean - 1.0L)));
  }
  return {worst_rt < 1e-9 && worst_mean < 1e-9 && worst_var < 1e-9,
          "20 cubes: round trip " + fmt(worst_rt) + ", |mean| " + fmt(worst_mean) + ", |var - 1| " + fmt(worst_var) +
              " (each < 1e-9)"};
}

// ---------------------------------------------------------------- 6

Verdict synthetic_forecast() {
  SynthConfig s;
  s.height = 20;
  s.width = 20;
  s.weeks = 8;
  s.seed = 2013;
  s.hotspots = {{5, 5, 2.0, 0.0}, {14, 12, 1.5, 7.0}, {8, 16, 1.0, 15.0}};
  s.noise_std = 0.05;
  s.spatial_sigma = 3.0;
  s.daily_amplitude = 0.5;
  s.weekly_weekend_factor = 0.6;
  const auto raw = generate_synthetic(s);

  PipelineSetup setup;
  setup.num_layers = 4;
  setup.growth = 8;
  setup.total_weeks = 8;
  setup.train_weeks = 7;
  setup.train.epochs = 30;
  setup.train.batch_size = 32;
  const LagSpec spec{2, 2, 1};
  const auto run = run_pipeline(raw, spec, setup);

  const auto test = split_weeks(raw, 8, 7).test;
  const auto persistence = baseline_persistence(raw, test);
  const double first = run.history.epochs.front().train_loss;
  const double last = run.history.epochs.back().train_loss;
  const double ratio = run.report.average_rmse / persistence.average_rmse;
  const bool pass = last < first && run.report.average_rmse <= 0.9 * persistence.average_rmse;
  return {pass, "loss " + fmt(first) + " -> " + fmt(last) + "; held-out RMSE " + fmt(run.report.average_rmse) +
                    " vs persistence " + fmt(persistence.average_rmse) + " (ratio " + fmt(ratio) + ", need <= 0.9)"};
}

// ---------------------------------------------------------------- 7

Verdict hotspot_tracking() {
  // Two centers in antiphase; half-hour phases keep exact ties off the hourly grid.
  SynthConfig s;
  s.height = 12;
  s.width = 12;
  s.weeks = 1;
  s.hotspots = {{2, 3, 1.0, 0.5}, {9, 8, 1.0, 12.5}};
  s.daily_amplitude = 0.8;
  s.spatial_sigma = 1.5;
  const auto raw = generate_synthetic(s);
  const Cell a{2, 3}, b{9, 8};

  const auto [norm, stats] = normalize(raw);
  const auto cube = std::make_shared<const TrafficCube>(norm);
  auto oracle_predictor = [&](const Tensor4& inputs, std::span<const std::size_t> slots) {
    Tensor4 out(inputs.batch(), 1, s.height, s.width);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      auto src = cube->frame(slots[i]).values();
      std::copy(src.begin(), src.end(), out.item(i).begin());
    }
    return out;
  };
  const SlotRange range{1, raw.length()};
  const auto frames = predict_range(oracle_predictor, cube, stats, {1, 0, 0}, range);
  const auto cmp = compare_hotspot_tracks(frames, raw, range);
  std::size_t at_a = 0, at_b = 0;
  for (const auto& m : cmp.matches) {
    at_a += m.actual == a;
    at_b += m.actual == b;
  }
  const bool alternates = at_a + at_b == cmp.matches.size() && at_a > 0 && at_b > 0;

  // Swap fixture: each prediction places the peak at the other center.
  auto truth = TrafficCube::zeros(12, 12, 2, 0, 3600, ServiceKind::internet);
  std::vector<TrafficFrame> swapped;
  for (std::size_t t = 0; t < 2; ++t) {
    for (double& v : truth.frame(t).values()) v = 1.0;
    truth.frame(t).at(t == 0 ? a.row : b.row, t == 0 ? a.col : b.col) = 5.0;
    TrafficFrame p(12, 12, std::vector<double>(144, 1.0));
    p.at(t == 0 ? b.row : a.row, t == 0 ? b.col : a.col) = 5.0;
    swapped.push_back(p);
  }
  const auto swap = compare_hotspot_tracks(swapped, truth, {0, 2});
  const std::size_t expected = chebyshev(a, b);  // max(7, 5)
  const bool swap_ok = swap.hit_rate == 0.0 && expected == 7 && swap.matches[0].distance == expected &&
                       swap.matches[1].distance == expected;
  return {cmp.hit_rate == 1.0 && alternates && swap_ok,
          "oracle hit rate " + fmt(cmp.hit_rate) + " over " + std::to_string(cmp.matches.size()) + " slots (" +
              std::to_string(at_a) + " at A, " + std::to_string(at_b) + " at B); swap distances " +
              std::to_string(swap.matches[0].distance) + "," + std::to_string(swap.matches[1].distance) +
              " (want 7,7)"};
}

// ---------------------------------------------------------------- 8

int run_cli(const oracle::TempDir& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.path().string() + "' && '" + CELLTRAFFIC_CLI + "' " + args + " > '" +
                          dir.file("out.txt") + "' 2> '" + dir.file("err.txt") + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism_and_formats() {
  oracle::TempDir dir;
  const std::string train =
      "train --cube c.cgf --h 2 --d 1 --w 0 --weeks 2 --train-weeks 1 --epochs 2 --batch 16 --layers 2 --growth 4 "
      "--no-timing";
  std::vector<std::string> failures;
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    const std::string cube = "c" + t + ".cgf";
    const int codes[] = {
        run_cli(dir, "synth --weeks 2 --grid 10x10 --seed 11 --noise 0.05 --out " + cube),
        run_cli(dir, "synth --weeks 2 --grid 10x10 --seed 11 --noise 0.05 --out c.cgf"),
        run_cli(dir, train + " --out m" + t + ".cgm --history h" + t + ".csv"),
        run_cli(dir, "evaluate --cube c.cgf --model m" + t + ".cgm --out r" + t +
                         ".csv --baseline persistence --hotspot-track k" + t + ".csv"),
        run_cli(dir, "analyze --cube c.cgf --atvr 48 --out a" + t),
        run_cli(dir, "gridsearch --cube c.cgf --h-range 1..2 --d-range 0..0 --w-range 0..1 --weeks 2 --train-weeks 1 "
                     "--epochs 1 --batch 32 --layers 1 --growth 2 --no-timing --out g" + t + ".csv"),
    };
    for (int c : codes)
      if (c != 0) failures.push_back("a pipeline command exited " + std::to_string(c));
  }
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"ca.cgf", "cb.cgf"}, {"ma.cgm", "mb.cgm"}, {"ha.csv", "hb.csv"}, {"ra.csv", "rb.csv"},
      {"ra_baseline.csv", "rb_baseline.csv"}, {"ka.csv", "kb.csv"}, {"aa_atvr.csv", "ab_atvr.csv"}, {"ga.csv", "gb.csv"}};
  std::size_t identical = 0;
  for (const auto& [x, y] : pairs) {
    const auto bx = oracle::read_file(dir.file(x));
    if (bx.empty() || bx != oracle::read_file(dir.file(y)))
      failures.push_back(x + " vs " + y + " differ");
    else
      ++identical;
  }

  const auto cube = oracle::read_file(dir.file("c.cgf"));
  const auto model = oracle::read_file(dir.file("ma.cgm"));
  auto put = [&](const std::string& name, const std::string& bytes) {
    std::ofstream(dir.file(name), std::ios::binary) << bytes;
  };
  std::string bad_magic = cube;
  bad_magic[0] = 'Z';
  put("bad_magic.cgf", bad_magic);
  put("short_header.cgf", cube.substr(0, 30));
  put("short_payload.cgf", cube.substr(0, cube.size() - 8));
  std::string bad_model = model;
  bad_model[2] = '?';
  put("bad_magic.cgm", bad_model);
  put("short.cgm", model.substr(0, model.size() / 2));
  std::size_t exit_two = 0;
  for (const char* f : {"bad_magic.cgf", "short_header.cgf", "short_payload.cgf"}) {
    const int c = run_cli(dir, std::string("analyze --cube ") + f + " --hotspots --out x");
    if (c == 2 && oracle::read_file(dir.file("out.txt")).empty())
      ++exit_two;
    else
      failures.push_back(std::string(f) + " exited " + std::to_string(c));
  }
  for (const char* f : {"bad_magic.cgm", "short.cgm"}) {
    const int c = run_cli(dir, std::string("evaluate --cube c.cgf --model ") + f + " --out x.csv");
    if (c == 2 && oracle::read_file(dir.file("out.txt")).empty())
      ++exit_two;
    else
      failures.push_back(std::string(f) + " exited " + std::to_string(c));
  }
  std::string detail = std::to_string(identical) + "/" + std::to_string(pairs.size()) +
                       " artifact pairs byte-identical; " + std::to_string(exit_two) +
                       "/5 corrupt or truncated inputs exit 2";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------- 9

Verdict learning_rate_schedule() {
  const TrainConfig c;
  const double steps[5] = {0.10, 0.08, 0.064, 0.0512, 0.04096};
  for (std::size_t e = 1; e <= 50; ++e)
    if (lr_at_epoch(c, e) != steps[(e - 1) / 10])
      return {false, "epoch " + std::to_string(e) + " gives " + io::format_double(lr_at_epoch(c, e))};
  return {true, "50 epochs match 0.1, 0.08, 0.064, 0.0512, 0.04096 (x10 each) exactly"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "lag-set fidelity", 1, lag_set_fidelity},
      {3, "metric oracles", 10, metric_oracles},
      {4, "ideal ATVR line", 5, ideal_atvr},
      {5, "normalization round trip", 5, normalization_round_trip},
      {6, "end-to-end synthetic forecast", 900, synthetic_forecast},
      {7, "hotspot tracking", 10, hotspot_tracking},
      {8, "determinism and formats", 30, determinism_and_formats},
      {9, "learning-rate schedule", 1, learning_rate_schedule},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.budget_seconds) {
      v.pass = false;
      v.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << " (" << fmt(secs)
              << " s)" << std::endl;
    failed += v.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
