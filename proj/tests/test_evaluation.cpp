#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"

using namespace celltraffic;
using namespace celltraffic::nn;

namespace {

SynthConfig periodic(std::size_t weeks, double weekend = 0.6) {
  SynthConfig s;
  s.height = 5;
  s.width = 5;
  s.weeks = weeks;
  s.hotspots = {{1, 2, 2.0, 0.0}, {4, 0, 1.0, 9.0}};
  s.spatial_sigma = 1.5;
  s.weekly_weekend_factor = weekend;
  return s;
}

PipelineSetup tiny_setup() {
  PipelineSetup p;
  p.num_layers = 1;
  p.growth = 2;
  p.train.epochs = 1;
  p.train.batch_size = 32;
  p.total_weeks = 2;
  p.train_weeks = 1;
  return p;
}

TrafficFrame frame_with_peak(std::size_t h, std::size_t w, Cell at, double peak, std::int64_t slot = 0) {
  TrafficFrame f(h, w, slot);
  for (double& v : f.values()) v = 1.0;
  f.at(at.row, at.col) = peak;
  return f;
}

}  // namespace

TEST(Rmse, WorkedExamples) {
  TrafficFrame a(1, 2, {1.0, 3.0}), b(1, 2, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(rmse_slot(a, b), std::sqrt(2.0));
  EXPECT_EQ(rmse_slot(a, a), 0.0);
  TrafficFrame c(2, 2, {1, 2, 3, 4}), d(2, 2, {2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(rmse_slot(c, d), 1.0);
  EXPECT_THROW(rmse_slot(a, c), ShapeError);
}

TEST(Rmse, MatchesOracleAndIsSymmetric) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    auto p = oracle::random_frame(4, 6, rng);
    auto y = oracle::random_frame(4, 6, rng);
    EXPECT_LT(oracle::rel_error(rmse_slot(p, y), oracle::rmse(p, y)), 1e-12);
    EXPECT_EQ(rmse_slot(p, y), rmse_slot(y, p));
  }
}

TEST(ScoreFrames, AverageIsMeanOfPerSlotValues) {
  auto truth = oracle::random_cube(3, 3, 10, 2);
  std::mt19937_64 rng(3);
  std::vector<TrafficFrame> preds;
  for (int i = 0; i < 4; ++i) preds.push_back(oracle::random_frame(3, 3, rng, 0.0, 10.0));
  auto report = score_frames(preds, truth, {5, 9}, "x");
  ASSERT_EQ(report.per_slot.size(), 4u);
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(report.per_slot[i].slot, 5 + i);
    EXPECT_EQ(report.per_slot[i].rmse, rmse_slot(preds[i], truth.frame(5 + i)));
    sum += report.per_slot[i].rmse;
  }
  EXPECT_DOUBLE_EQ(report.average_rmse, sum / 4.0);
  EXPECT_EQ(report_csv(report).substr(0, 7), "t,rmse\n");
  EXPECT_THROW(score_frames(preds, truth, {5, 8}, "x"), ShapeError);
}

TEST(EvaluatePredictor, OracleStubScoresZero) {
  auto raw = oracle::random_cube(4, 4, 60, 4);
  auto [norm, stats] = normalize(raw);
  auto cube = std::make_shared<const TrafficCube>(norm);
  auto oracle_stub = [&](const Tensor4& inputs, std::span<const std::size_t> slots) {
    Tensor4 out(inputs.batch(), 1, 4, 4);
    for (std::size_t b = 0; b < slots.size(); ++b) {
      auto src = cube->frame(slots[b]).values();
      std::copy(src.begin(), src.end(), out.item(b).begin());
    }
    return out;
  };
  auto report = evaluate_predictor(oracle_stub, cube, stats, {2, 1, 0}, {30, 60}, "oracle");
  EXPECT_EQ(report.per_slot.size(), 30u);
  EXPECT_EQ(report.average_rmse, 0.0);
}

TEST(EvaluatePredictor, LagOneStubMatchesPersistence) {
  auto raw = oracle::random_cube(4, 5, 80, 5);
  auto [norm, stats] = normalize(raw);
  auto cube = std::make_shared<const TrafficCube>(norm);
  auto lag_one = [](const Tensor4& inputs, std::span<const std::size_t>) { return slice_channels(inputs, 0, 1); };
  const SlotRange range{40, 80};
  auto stub = evaluate_predictor(lag_one, cube, stats, {1, 0, 0}, range, "lag1");
  auto base = baseline_persistence(raw, range);
  ASSERT_EQ(stub.per_slot.size(), base.per_slot.size());
  // Equal up to the rounding of the normalize/denormalize round trip.
  for (std::size_t i = 0; i < stub.per_slot.size(); ++i)
    EXPECT_LT(oracle::rel_error(stub.per_slot[i].rmse, base.per_slot[i].rmse), 1e-9);
  EXPECT_LT(oracle::rel_error(stub.average_rmse, base.average_rmse), 1e-9);

  auto again = evaluate_predictor(lag_one, cube, stats, {1, 0, 0}, range, "lag1");
  EXPECT_EQ(report_csv(stub), report_csv(again));
}

TEST(EvaluatePredictor, RejectsRawCubeAndMismatchedModels) {
  auto raw = oracle::random_cube(5, 5, 60, 6);
  auto [norm, stats] = normalize(raw);
  auto id = [](const Tensor4& x, std::span<const std::size_t>) { return slice_channels(x, 0, 1); };
  EXPECT_THROW(evaluate_predictor(id, std::make_shared<const TrafficCube>(raw), stats, {1, 0, 0}, {1, 10}, "x"),
               StateError);
  auto cube = std::make_shared<const TrafficCube>(norm);
  Model m = init_model(ModelConfig::desk(2, 5, 5), 1);
  EXPECT_THROW(evaluate_model(m, cube, stats, {1, 0, 0}, {1, 10}), ConfigError);
  EXPECT_NO_THROW(evaluate_model(m, cube, stats, {2, 0, 0}, {2, 10}));
}

TEST(Baselines, PersistenceWorkedExample) {
  auto cube = TrafficCube::zeros(1, 1, 4, 0, 3600, ServiceKind::internet);
  for (std::size_t t = 0; t < 4; ++t) cube.at(t, 0, 0) = static_cast<double>(t * t);
  auto r = baseline_persistence(cube, {1, 4});
  ASSERT_EQ(r.per_slot.size(), 3u);
  EXPECT_EQ(r.per_slot[0].rmse, 1.0);
  EXPECT_EQ(r.per_slot[1].rmse, 3.0);
  EXPECT_EQ(r.per_slot[2].rmse, 5.0);
  EXPECT_EQ(r.average_rmse, 3.0);
  EXPECT_EQ(r.model_id, "persistence");
  EXPECT_THROW(baseline_persistence(cube, {0, 4}), RangeError);
}

TEST(Baselines, WeeklySeasonalIsExactOnNoiselessData) {
  auto cube = generate_synthetic(periodic(3));
  auto r = baseline_seasonal(cube, 168, {168, 504});
  EXPECT_EQ(r.average_rmse, 0.0);
  EXPECT_EQ(r.model_id, "seasonal:168");
  EXPECT_THROW(baseline_seasonal(cube, 168, {100, 200}), RangeError);
  EXPECT_THROW(baseline_seasonal(cube, 0, {168, 200}), RangeError);
  EXPECT_THROW(baseline_seasonal(normalize(cube).first, 24, {168, 200}), StateError);
}

TEST(Baselines, DailySeasonalMissesTheWeekendDip) {
  auto cube = generate_synthetic(periodic(2));
  auto r = baseline_seasonal(cube, 24, {168, 336});
  double midweek = 0.0, weekend = 0.0;
  for (const auto& s : r.per_slot) {
    const std::size_t day = (s.slot / 24) % 7;
    if (day >= 1 && day <= 4) midweek += s.rmse;
    if (day == 5) weekend += s.rmse;
  }
  EXPECT_EQ(midweek, 0.0);
  EXPECT_GT(weekend, 0.0);
}

TEST(Pipeline, StatsComeFromTrainingWeeksOnly) {
  auto raw = generate_synthetic(periodic(2));
  // Inflate the held-out week; training statistics must not see it.
  for (std::size_t t = 168; t < 336; ++t)
    for (double& v : raw.frame(t).values()) v *= 10.0;
  auto data = prepare_data(raw, {1, 0, 0}, 2, 1);
  EXPECT_EQ(data.stats, compute_norm_stats(raw, {0, 168}));
  EXPECT_EQ(data.split.test, (SlotRange{168, 336}));
  EXPECT_EQ(data.train_samples.size(), 167u);
  for (auto t : data.train_samples.target_slots()) EXPECT_LT(t, 168u);
  EXPECT_THROW(prepare_data(raw, {1, 0, 1}, 2, 1), HistoryUnderflowError);
}

TEST(GridSearch, SingletonGrid) {
  auto raw = generate_synthetic(periodic(2));
  auto result = grid_search(raw, {{1, 0, 0}}, tiny_setup());
  ASSERT_EQ(result.entries.size(), 1u);
  EXPECT_TRUE(result.entries[0].ok);
  ASSERT_TRUE(result.best);
  EXPECT_EQ(*result.best, 0u);
  EXPECT_EQ(result.best_entry()->spec, (LagSpec{1, 0, 0}));
}

TEST(GridSearch, FailedSpecsAreRecordedAndSkipped) {
  auto raw = generate_synthetic(periodic(2));
  auto result = grid_search(raw, {{2, 0, 0}, {1, 7, 1}, {1, 0, 1}, {1, 1, 0}}, tiny_setup());
  ASSERT_EQ(result.entries.size(), 4u);
  EXPECT_TRUE(result.entries[0].ok);
  EXPECT_FALSE(result.entries[1].ok);
  EXPECT_FALSE(result.entries[2].ok);
  EXPECT_TRUE(result.entries[3].ok);
  EXPECT_FALSE(result.entries[1].error.empty());
  ASSERT_TRUE(result.best);
  EXPECT_TRUE(*result.best == 0u || *result.best == 3u);

  const auto csv = grid_csv(result, false);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "h,d,w,avg_rmse,train_s,status,best");
  EXPECT_NE(csv.find("\n1,0,1,,,failed,0\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\n1,7,1,,,failed,0\n"), std::string::npos) << csv;
  // Rows are sorted by (h, d, w).
  EXPECT_LT(csv.find("\n1,0,1,"), csv.find("\n1,1,0,"));
  EXPECT_LT(csv.find("\n1,7,1,"), csv.find("\n2,0,0,"));
  EXPECT_EQ(grid_csv(result, false), csv);
}

TEST(GridSearch, PickBestTieBreaks) {
  auto entry = [](LagSpec s, bool ok, double rmse) {
    GridEntry e;
    e.spec = s;
    e.ok = ok;
    e.average_rmse = rmse;
    return e;
  };
  EXPECT_FALSE(pick_best({entry({1, 0, 0}, false, 0.0)}));
  EXPECT_EQ(*pick_best({entry({1, 0, 0}, true, 2.0), entry({2, 0, 0}, true, 1.0)}), 1u);
  // Equal scores: fewer channels first.
  EXPECT_EQ(*pick_best({entry({2, 1, 0}, true, 1.0), entry({3, 0, 0}, true, 1.0)}), 1u);
  // Equal scores and channels: lexicographically smaller spec.
  EXPECT_EQ(*pick_best({entry({2, 0, 0}, true, 1.0), entry({1, 1, 0}, true, 1.0)}), 1u);
  EXPECT_EQ(*pick_best({entry({1, 0, 0}, false, 0.1), entry({2, 0, 0}, true, 5.0)}), 1u);
}

TEST(HotspotComparison, IdentityHitsEverySlot) {
  auto cube = generate_synthetic(periodic(1));
  auto cmp = compare_hotspot_tracks(cube, cube, {0, 168});
  EXPECT_EQ(cmp.hit_rate, 1.0);
  for (const auto& m : cmp.matches) {
    EXPECT_EQ(m.distance, 0u);
    EXPECT_EQ(m.value_error, 0.0);
  }
}

TEST(HotspotComparison, SwappedPeaksFixture) {
  auto truth = TrafficCube::zeros(6, 6, 2, 0, 3600, ServiceKind::internet);
  truth.frame(0) = frame_with_peak(6, 6, {0, 0}, 9.0, 0);
  truth.frame(1) = frame_with_peak(6, 6, {4, 2}, 7.0, 1);
  std::vector<TrafficFrame> preds{frame_with_peak(6, 6, {4, 2}, 8.0), frame_with_peak(6, 6, {0, 0}, 7.5)};
  auto cmp = compare_hotspot_tracks(preds, truth, {0, 2});
  EXPECT_EQ(cmp.hit_rate, 0.0);
  EXPECT_EQ(cmp.matches[0].distance, 4u);
  EXPECT_EQ(cmp.matches[1].distance, 4u);
  EXPECT_EQ(cmp.matches[0].predicted, (Cell{4, 2}));
  EXPECT_EQ(cmp.matches[0].actual, (Cell{0, 0}));
  EXPECT_DOUBLE_EQ(cmp.matches[0].value_error, 1.0);
  EXPECT_DOUBLE_EQ(cmp.matches[1].value_error, 0.5);
  EXPECT_EQ(hotspot_csv(cmp),
            "t,pred_row,pred_col,true_row,true_col,distance,value_error\n0,4,2,0,0,4,1\n1,0,0,4,2,4,0.5\n");
}

TEST(HotspotComparison, ConstantPredictionsHitOnlyWhereTruthIsTopLeft) {
  auto truth = TrafficCube::zeros(3, 3, 3, 0, 3600, ServiceKind::internet);
  truth.frame(0) = frame_with_peak(3, 3, {0, 0}, 5.0, 0);
  truth.frame(1) = frame_with_peak(3, 3, {2, 2}, 5.0, 1);
  truth.frame(2) = frame_with_peak(3, 3, {1, 0}, 5.0, 2);
  std::vector<TrafficFrame> preds(3, TrafficFrame(3, 3, std::vector<double>(9, 2.0)));
  auto cmp = compare_hotspot_tracks(preds, truth, {0, 3});
  EXPECT_DOUBLE_EQ(cmp.hit_rate, 1.0 / 3.0);
  EXPECT_EQ(cmp.matches[1].distance, 2u);
  EXPECT_EQ(cmp.matches[2].distance, 1u);
  EXPECT_THROW(compare_hotspot_tracks(std::vector<TrafficFrame>(2, preds[0]), truth, {0, 3}), ShapeError);
}

TEST(IntensityMap, PgmLevels) {
  TrafficFrame f(2, 2, {0.0, 1.0, 2.0, 3.0});
  EXPECT_EQ(intensity_levels(f), (std::vector<unsigned char>{0, 85, 170, 255}));
  const auto pgm = intensity_map_bytes(f, MapFormat::pgm);
  EXPECT_EQ(pgm.substr(0, 11), "P5\n2 2\n255\n");
  EXPECT_EQ(pgm.size(), 15u);
  EXPECT_EQ(static_cast<unsigned char>(pgm[12]), 85);
}

TEST(IntensityMap, ConstantFrameIsMidGray) {
  TrafficFrame f(3, 2, std::vector<double>(6, 4.0));
  for (auto v : intensity_levels(f)) EXPECT_EQ(v, 128);
  TrafficFrame bad(1, 2, {1.0, std::nan("")});
  EXPECT_THROW(intensity_levels(bad), InputError);
}

TEST(IntensityMap, CsvRoundTripsValues) {
  std::mt19937_64 rng(7);
  auto f = oracle::random_frame(3, 4, rng);
  const auto csv = intensity_map_bytes(f, MapFormat::csv);
  std::vector<double> parsed;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const auto end = csv.find_first_of(",\n", pos);
    parsed.push_back(std::stod(csv.substr(pos, end - pos)));
    pos = end + 1;
  }
  ASSERT_EQ(parsed.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(parsed[i], f.values()[i]);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  oracle::TempDir dir;
  export_intensity_map(f, dir.file("m.csv"), MapFormat::csv);
  EXPECT_EQ(oracle::read_file(dir.file("m.csv")), csv);
}
