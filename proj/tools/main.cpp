// Command-line front end for the synthetic MPMB forest-height pipeline:
// simulate, features, train, predict, evaluate, report. Stages hand data
// over through on-disk artifacts so each one is independently testable.

#include "tomoboost/eval.hpp"
#include "tomoboost/io.hpp"
#include "tomoboost/parallel.hpp"
#include "tomoboost/simulate.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tomoboost;

namespace {

struct CommonOpts {
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", opts.threads, "Worker threads (0 = all hardware threads)")
      ->capture_default_str();
  cmd->add_option("--out", opts.out, "Output directory")->capture_default_str();
  cmd->set_config("--config", "", "Key=value file supplying option defaults");
}

struct HpOpts {
  int trees = 500;
  int depth = 6;
  double learning_rate = 0.1;
  int bins = 255;
  int min_leaf = 20;
  int early_stopping = 50;
};

void add_hyperparams(CLI::App* cmd, HpOpts& hp) {
  cmd->add_option("--trees", hp.trees, "Boosting iterations")->capture_default_str();
  cmd->add_option("--depth", hp.depth, "Tree depth (levels)")->capture_default_str();
  cmd->add_option("--learning-rate", hp.learning_rate, "Shrinkage")->capture_default_str();
  cmd->add_option("--bins", hp.bins, "Histogram bins (<= 256)")->capture_default_str();
  cmd->add_option("--min-leaf", hp.min_leaf, "Minimum samples per split side")
      ->capture_default_str();
  cmd->add_option("--early-stopping", hp.early_stopping,
                  "Stop after this many rounds without validation improvement (0 = off)")
      ->capture_default_str();
}

GbdtHyperparams to_hyperparams(const HpOpts& hp, Paradigm paradigm) {
  GbdtHyperparams out;
  out.num_trees = hp.trees;
  out.depth = hp.depth;
  out.learning_rate = hp.learning_rate;
  out.histogram_bins = hp.bins;
  out.min_samples_leaf = hp.min_leaf;
  out.early_stopping_rounds = hp.early_stopping;
  out.loss = paradigm == Paradigm::Classification ? LossKind::WeightedMultiClass
                                                  : LossKind::WeightedRmse;
  return out;
}

PixelRect parse_patch(const std::string& text) {
  PixelRect rect;
  char comma;
  std::istringstream in(text);
  in >> rect.row0 >> comma >> rect.col0 >> comma >> rect.rows >> comma >> rect.cols;
  if (in.fail() || rect.rows <= 0 || rect.cols <= 0)
    throw std::invalid_argument("bad patch '" + text + "', expected row0,col0,rows,cols");
  return rect;
}

Paradigm parse_paradigm(const std::string& name) {
  if (name == "regression") return Paradigm::Regression;
  if (name == "classification") return Paradigm::Classification;
  throw std::invalid_argument("unknown paradigm '" + name + "'");
}

TimingReport read_timing(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  TimingReport report;
  std::string key;
  while (in >> key) {
    double value;
    if (!(in >> value)) break;
    if (key == "train_seconds:") report.train_seconds = value;
    else if (key == "test_seconds:") report.test_seconds = value;
    else if (key == "n_train:") report.n_train = std::int64_t(value);
    else if (key == "n_test:") report.n_test = std::int64_t(value);
    else if (key == "model_leaf_count:") report.model_leaf_count = std::int64_t(value);
  }
  return report;
}

HeightRaster patch_subraster(const HeightRaster& raster, const PixelRect& rect) {
  HeightRaster sub;
  sub.rows = rect.rows;
  sub.cols = rect.cols;
  sub.kind = raster.kind;
  sub.valid_offset = 0;
  sub.values = raster.values.block(rect.row0, rect.col0, rect.rows, rect.cols);
  return sub;
}

// ------------------------------ simulate -------------------------------

struct SimulateOpts {
  CommonOpts common;
  SceneSpec scene;
  double incidence_deg = 35.061;
  AcquisitionGeometry geometry;
};

int cmd_simulate(SimulateOpts& opt) {
  opt.scene.seed = opt.common.seed;
  opt.geometry.incidence_angle = opt.incidence_deg * std::numbers::pi / 180.0;
  set_default_thread_count(opt.common.threads);

  const SimulatedScene scene = simulate_stack(opt.scene, opt.geometry, opt.common.threads);
  const fs::path out(opt.common.out);
  fs::create_directories(out);
  write_stack(scene.stack, out / "stack");
  write_raster(scene.dtm, out / "dtm");
  write_raster(scene.chm, out / "chm");

  std::printf("simulated %dx%d scene, Nb=%d, seed=%llu, phase screens %s\n", opt.scene.rows,
              opt.scene.cols, opt.geometry.num_baselines(),
              static_cast<unsigned long long>(opt.scene.seed),
              opt.scene.phase_screen_sigma > 0.0 ? "on (NC)" : "off (C)");
  std::printf("wrote %s, %s, %s\n", (out / "stack").c_str(), (out / "dtm").c_str(),
              (out / "chm").c_str());
  return 0;
}

// ------------------------------ features -------------------------------

struct FeaturesOpts {
  CommonOpts common;
  std::string stack_dir;
  std::string chm_base, dtm_base;
  int window = 49;
  bool csv = false;
};

int cmd_features(FeaturesOpts& opt) {
  set_default_thread_count(opt.common.threads);
  const SlcStack stack = read_stack(opt.stack_dir);
  const FeatureGrid grid = build_feature_grid(stack, opt.window, opt.common.threads);

  const fs::path out(opt.common.out);
  fs::create_directories(out);
  write_feature_grid(grid, out / "features");
  if (opt.csv) write_feature_grid_csv(grid, out / "features.csv");

  for (const auto& [base, name] : {std::pair{opt.chm_base, "chm_avg"},
                                   std::pair{opt.dtm_base, "dtm_avg"}}) {
    if (base.empty()) continue;
    const HeightRaster avg = average_raster(read_raster(base), opt.window);
    require(avg.rows == grid.rows && avg.cols == grid.cols &&
                avg.valid_offset == grid.valid_offset,
            "averaged raster does not align with the feature grid");
    write_raster(avg, out / name);
  }

  std::printf("feature grid %dx%d, M=%d, window=%d, valid_offset=%d\n", grid.rows, grid.cols,
              grid.dim, grid.window, grid.valid_offset);
  return 0;
}

// -------------------------------- train --------------------------------

struct TrainOpts {
  CommonOpts common;
  std::string features_base;
  std::string target_base;
  std::string paradigm = "regression";
  double bin_width = 1.0;
  std::string patch = "116,116,280,280";
  double val_fraction = 0.2;
  HpOpts hp;
};

int cmd_train(TrainOpts& opt) {
  set_default_thread_count(opt.common.threads);
  PreparedData data;
  data.grid = read_feature_grid(opt.features_base);
  data.target = read_raster(opt.target_base);

  RunSpec spec;
  spec.window = data.grid.window;
  spec.paradigm = parse_paradigm(opt.paradigm);
  spec.bin_width = opt.bin_width;
  spec.patch_full = parse_patch(opt.patch);
  spec.validation_fraction = opt.val_fraction;
  spec.seed = opt.common.seed;
  spec.hp = to_hyperparams(opt.hp, spec.paradigm);
  spec.threads = opt.common.threads;

  const FitOutcome outcome = fit_and_evaluate(data, spec);

  const fs::path out(opt.common.out);
  fs::create_directories(out);
  save_model(outcome.model, out / "model.json");
  write_timing_report(outcome.timing, out / "timing_train.txt");

  std::ofstream log(out / "training_log.csv", std::ios::trunc);
  log << "iteration,train_loss,valid_loss\n";
  log.precision(9);
  for (std::size_t i = 0; i < outcome.train_loss.size(); ++i) {
    log << i << ',' << outcome.train_loss[i] << ',';
    if (i < outcome.valid_loss.size()) log << outcome.valid_loss[i];
    log << '\n';
  }

  std::printf("trained %zu trees (%s), test-patch RMSE %.4f m, %.2f s\n",
              outcome.model.trees.size(), paradigm_name(spec.paradigm), outcome.test_rmse,
              outcome.timing.train_seconds);
  return 0;
}

// ------------------------------- predict -------------------------------

struct PredictOpts {
  CommonOpts common;
  std::string features_base;
  std::string model_path;
  std::string kind = "chm";
};

int cmd_predict(PredictOpts& opt) {
  set_default_thread_count(opt.common.threads);
  const FeatureGrid grid = read_feature_grid(opt.features_base);
  const GbdtModel model = load_model(opt.model_path);

  HeightRaster prediction;
  prediction.rows = grid.rows;
  prediction.cols = grid.cols;
  prediction.kind = raster_kind_from_name(opt.kind == "dtm" || opt.kind == "DTM" ? "DTM" : "CHM");
  prediction.valid_offset = grid.valid_offset;

  TimingReport timing;
  Eigen::VectorXd heights;
  timing.test_seconds =
      time_run([&] { heights = predict(model, grid.values, opt.common.threads); });
  timing.n_test = grid.pixel_count();
  timing.model_leaf_count = model.leaf_count();

  prediction.values =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          heights.data(), grid.rows, grid.cols);
  if (prediction.kind == RasterKind::Chm)
    prediction.values = prediction.values.cwiseMax(0.0);
  snap_to_float32(prediction);

  const fs::path out(opt.common.out);
  fs::create_directories(out);
  write_raster(prediction, out / "prediction");
  write_timing_report(timing, out / "timing_predict.txt");

  std::printf("predicted %dx%d raster (%s) in %.3f s\n", prediction.rows, prediction.cols,
              raster_kind_name(prediction.kind), timing.test_seconds);
  return 0;
}

// ------------------------------- evaluate ------------------------------

struct EvaluateOpts {
  CommonOpts common;
  std::string prediction_base;
  std::string reference_base;
  std::string patch = "116,116,280,280";
  std::vector<int> rows = {0, 159, 279};
  int bins = 100;
  double hist_min = 0.0, hist_max = 0.0;  // equal -> automatic range
  std::string timing_train, timing_predict;
};

int cmd_evaluate(EvaluateOpts& opt) {
  const HeightRaster prediction = read_raster(opt.prediction_base);
  const HeightRaster reference = read_raster(opt.reference_base);
  require(prediction.rows == reference.rows && prediction.cols == reference.cols,
          "prediction and reference dimensions differ");
  require(prediction.valid_offset == reference.valid_offset,
          "prediction and reference valid offsets differ");

  PixelRect rect = parse_patch(opt.patch);
  rect.row0 -= prediction.valid_offset;
  rect.col0 -= prediction.valid_offset;
  require(rect.inside(prediction.rows, prediction.cols),
          "patch does not fit inside the valid grid");

  const Eigen::VectorXd pred = patch_values(prediction, rect);
  const Eigen::VectorXd ref = patch_values(reference, rect);
  const double err = rmse(pred, ref);
  const std::int64_t distinct = distinct_value_count(pred);

  double lo = opt.hist_min, hi = opt.hist_max;
  if (hi <= lo) std::tie(lo, hi) = default_histogram_range(reference, rect);
  const JointHistogram jh = joint_histogram(pred, ref, opt.bins, lo, hi);

  const fs::path out(opt.common.out);
  fs::create_directories(out);
  write_joint_histogram_csv(jh, out / "joint.csv");
  write_joint_histogram_svg(jh, out / "joint.svg");

  const HeightRaster sub_pred = patch_subraster(prediction, rect);
  const HeightRaster sub_ref = patch_subraster(reference, rect);
  for (int row : opt.rows) {
    write_traceline_csv(traceline(sub_ref, row), traceline(sub_pred, row),
                        out / ("traceline_row" + std::to_string(row) + ".csv"));
  }

  TimingReport timing;
  if (!opt.timing_train.empty()) {
    const TimingReport t = read_timing(opt.timing_train);
    timing.train_seconds = t.train_seconds;
    timing.n_train = t.n_train;
    timing.model_leaf_count = t.model_leaf_count;
  }
  if (!opt.timing_predict.empty()) {
    const TimingReport t = read_timing(opt.timing_predict);
    timing.test_seconds = t.test_seconds;
    timing.n_test = t.n_test;
    if (timing.model_leaf_count == 0) timing.model_leaf_count = t.model_leaf_count;
  }
  write_timing_report(timing, out / "timing.txt");

  json metrics{{"rmse_m", err},
               {"n_pixels", std::int64_t(pred.size())},
               {"distinct_values", distinct},
               {"histogram", {{"bins", opt.bins}, {"min", lo}, {"max", hi}}},
               {"patch", {{"row0", rect.row0 + prediction.valid_offset},
                          {"col0", rect.col0 + prediction.valid_offset},
                          {"rows", rect.rows},
                          {"cols", rect.cols}}}};
  std::ofstream mout(out / "metrics.json", std::ios::trunc);
  mout << metrics.dump(2) << '\n';

  std::printf("RMSE %.4f m over %lld pixels, %lld distinct predicted values\n", err,
              static_cast<long long>(pred.size()), static_cast<long long>(distinct));
  return 0;
}

// -------------------------------- report -------------------------------

struct ReportOpts {
  CommonOpts common;
  std::string stack_nc, stack_c;
  std::string chm_base, dtm_base;
  std::vector<int> windows = {27, 31, 37, 41, 45, 49};
  std::vector<std::string> paradigms = {"classification", "regression"};
  std::string patch = "116,116,280,280";
  double val_fraction = 0.2;
  double bin_width = 1.0;
  bool figures = false;
  HpOpts hp;
};

int cmd_report(ReportOpts& opt) {
  set_default_thread_count(opt.common.threads);
  require(!opt.stack_nc.empty() || !opt.stack_c.empty(), "report: no stack given");
  require(!opt.chm_base.empty() || !opt.dtm_base.empty(), "report: no target raster given");

  std::optional<SlcStack> nc, c;
  if (!opt.stack_nc.empty()) nc = read_stack(opt.stack_nc);
  if (!opt.stack_c.empty()) c = read_stack(opt.stack_c);

  SweepRequest request;
  request.windows = opt.windows;
  for (const auto& name : opt.paradigms) request.paradigms.push_back(parse_paradigm(name));
  if (nc) request.calibrations.push_back(Calibration::NonCalibrated);
  if (c) request.calibrations.push_back(Calibration::Calibrated);
  request.base.patch_full = parse_patch(opt.patch);
  request.base.validation_fraction = opt.val_fraction;
  request.base.bin_width = opt.bin_width;
  request.base.seed = opt.common.seed;
  request.base.threads = opt.common.threads;
  request.base.hp = to_hyperparams(opt.hp, Paradigm::Regression);

  const fs::path out(opt.common.out);
  fs::create_directories(out);
  if (opt.figures) request.artifact_dir = out;

  for (const auto& [base, name] : {std::pair{opt.chm_base, "chm"},
                                   std::pair{opt.dtm_base, "dtm"}}) {
    if (base.empty()) continue;
    const HeightRaster target = read_raster(base);
    const SweepTable table = window_sweep(nc ? &*nc : nullptr, c ? &*c : nullptr, target, request);
    write_sweep_csv(table, out / ("sweep_" + std::string(name) + ".csv"));

    std::printf("%s sweep (RMSE, m):\n", name);
    for (const auto& row : table.rows) {
      std::printf("  %s-%s:", paradigm_name(row.paradigm), calibration_name(row.calibration));
      for (double v : row.rmse) std::printf(" %.3f", v);
      std::printf("\n");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic MPMB SAR forest-height estimation with boosted oblivious trees"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scene (stack + CHM/DTM)");
  add_common(sim_cmd, sim.common);
  sim_cmd->add_option("--rows", sim.scene.rows)->capture_default_str();
  sim_cmd->add_option("--cols", sim.scene.cols)->capture_default_str();
  sim_cmd->add_option("--dtm-min", sim.scene.dtm_min)->capture_default_str();
  sim_cmd->add_option("--dtm-max", sim.scene.dtm_max)->capture_default_str();
  sim_cmd->add_option("--canopy-min", sim.scene.canopy_min)->capture_default_str();
  sim_cmd->add_option("--canopy-max", sim.scene.canopy_max)->capture_default_str();
  sim_cmd->add_option("--terrain-corr", sim.scene.terrain_correlation, "px")->capture_default_str();
  sim_cmd->add_option("--canopy-corr", sim.scene.canopy_correlation, "px")->capture_default_str();
  sim_cmd->add_option("--ground-hh", sim.scene.ground_pol_powers[0])->capture_default_str();
  sim_cmd->add_option("--ground-hv", sim.scene.ground_pol_powers[1])->capture_default_str();
  sim_cmd->add_option("--ground-vv", sim.scene.ground_pol_powers[2])->capture_default_str();
  sim_cmd->add_option("--volume-hh", sim.scene.volume_pol_powers[0])->capture_default_str();
  sim_cmd->add_option("--volume-hv", sim.scene.volume_pol_powers[1])->capture_default_str();
  sim_cmd->add_option("--volume-vv", sim.scene.volume_pol_powers[2])->capture_default_str();
  sim_cmd->add_option("--ground-to-volume", sim.scene.ground_to_volume_ratio)
      ->capture_default_str();
  sim_cmd->add_option("--extinction", sim.scene.extinction, "Np/m")->capture_default_str();
  sim_cmd->add_option("--phase-sigma", sim.scene.phase_screen_sigma, "rad, 0 = calibrated")
      ->capture_default_str();
  sim_cmd->add_option("--phase-corr", sim.scene.phase_screen_correlation, "px")
      ->capture_default_str();
  sim_cmd->add_option("--wavelength", sim.geometry.wavelength, "m")->capture_default_str();
  sim_cmd->add_option("--flight-height", sim.geometry.flight_height, "m")->capture_default_str();
  sim_cmd->add_option("--incidence-deg", sim.incidence_deg, "deg")->capture_default_str();
  sim_cmd->add_option("--baselines", sim.geometry.baselines, "m")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--range-res", sim.geometry.range_resolution, "m")->capture_default_str();
  sim_cmd->add_option("--azimuth-res", sim.geometry.azimuth_resolution, "m")
      ->capture_default_str();

  FeaturesOpts feat;
  auto* feat_cmd =
      app.add_subcommand("features", "Covariance features + matched averaged rasters");
  add_common(feat_cmd, feat.common);
  feat_cmd->add_option("--stack", feat.stack_dir, "Stack directory")->required();
  feat_cmd->add_option("--chm", feat.chm_base, "CHM raster base path");
  feat_cmd->add_option("--dtm", feat.dtm_base, "DTM raster base path");
  feat_cmd->add_option("--window", feat.window, "Odd boxcar side W")->capture_default_str();
  feat_cmd->add_flag("--csv", feat.csv, "Also export features.csv");

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "Train a boosted oblivious-tree model");
  add_common(train_cmd, tr.common);
  train_cmd->add_option("--features", tr.features_base, "Feature grid base path")->required();
  train_cmd->add_option("--target", tr.target_base, "Averaged target raster base path")
      ->required();
  train_cmd->add_option("--paradigm", tr.paradigm, "regression | classification")
      ->capture_default_str();
  train_cmd->add_option("--bin-width", tr.bin_width, "Quantization bin width, m (classification)")
      ->capture_default_str();
  train_cmd->add_option("--patch", tr.patch, "Test patch row0,col0,rows,cols (full-grid coords)")
      ->capture_default_str();
  train_cmd->add_option("--val-fraction", tr.val_fraction)->capture_default_str();
  add_hyperparams(train_cmd, tr.hp);

  PredictOpts pr;
  auto* predict_cmd = app.add_subcommand("predict", "Predict a height raster from features");
  add_common(predict_cmd, pr.common);
  predict_cmd->add_option("--features", pr.features_base, "Feature grid base path")->required();
  predict_cmd->add_option("--model", pr.model_path, "Model file")->required();
  predict_cmd->add_option("--kind", pr.kind, "chm | dtm")->capture_default_str();

  EvaluateOpts ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a prediction against a reference");
  add_common(eval_cmd, ev.common);
  eval_cmd->add_option("--prediction", ev.prediction_base)->required();
  eval_cmd->add_option("--reference", ev.reference_base)->required();
  eval_cmd->add_option("--patch", ev.patch, "row0,col0,rows,cols (full-grid coords)")
      ->capture_default_str();
  eval_cmd->add_option("--rows", ev.rows, "Traceline rows, patch-relative, 0-based")
      ->delimiter(',')
      ->capture_default_str();
  eval_cmd->add_option("--bins", ev.bins, "Joint histogram bins per axis")->capture_default_str();
  eval_cmd->add_option("--hist-min", ev.hist_min)->capture_default_str();
  eval_cmd->add_option("--hist-max", ev.hist_max)->capture_default_str();
  eval_cmd->add_option("--timing-train", ev.timing_train, "timing_train.txt to merge");
  eval_cmd->add_option("--timing-predict", ev.timing_predict, "timing_predict.txt to merge");

  ReportOpts rep;
  auto* report_cmd =
      app.add_subcommand("report", "Window sweep tables (and joint figures) per target");
  add_common(report_cmd, rep.common);
  report_cmd->add_option("--stack-nc", rep.stack_nc, "Non-calibrated stack directory");
  report_cmd->add_option("--stack-c", rep.stack_c, "Calibrated stack directory");
  report_cmd->add_option("--chm", rep.chm_base, "CHM raster base path (unaveraged)");
  report_cmd->add_option("--dtm", rep.dtm_base, "DTM raster base path (unaveraged)");
  report_cmd->add_option("--windows", rep.windows)->delimiter(',')->capture_default_str();
  report_cmd->add_option("--paradigms", rep.paradigms)->delimiter(',')->capture_default_str();
  report_cmd->add_option("--patch", rep.patch, "row0,col0,rows,cols (full-grid coords)")
      ->capture_default_str();
  report_cmd->add_option("--val-fraction", rep.val_fraction)->capture_default_str();
  report_cmd->add_option("--bin-width", rep.bin_width)->capture_default_str();
  report_cmd->add_flag("--figures", rep.figures, "Emit per-cell joint histograms");
  add_hyperparams(report_cmd, rep.hp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim);
    if (feat_cmd->parsed()) return cmd_features(feat);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (predict_cmd->parsed()) return cmd_predict(pr);
    if (eval_cmd->parsed()) return cmd_evaluate(ev);
    if (report_cmd->parsed()) return cmd_report(rep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
