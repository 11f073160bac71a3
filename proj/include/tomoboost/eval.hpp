#pragma once

#include "tomoboost/features.hpp"
#include "tomoboost/gbdt.hpp"
#include "tomoboost/raster.hpp"
#include "tomoboost/stack.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace tomoboost {

enum class Paradigm { Regression, Classification };
enum class Calibration { NonCalibrated, Calibrated };

const char* paradigm_name(Paradigm p);
const char* calibration_name(Calibration c);

/// Dataset split protocol: a rectangular test patch (valid-grid coordinates)
/// plus a seeded random train/validation split of the remaining pixels.
struct SplitSpec {
  PixelRect test_patch;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct DatasetSplits {
  TrainingSet train;
  TrainingSet validation;
  TrainingSet test;
};

/// Exact partition: every valid pixel lands in exactly one of the three
/// sets; train gets floor((1-f) * n_rest) of the shuffled remainder.
DatasetSplits split_dataset(const FeatureGrid& grid, const HeightRaster& targets,
                            const SplitSpec& spec);

/// Unweighted root mean squared difference, meters.
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

/// 2-D histogram of (reference, prediction); out-of-range values clamp to
/// the edge bins. axis 0 = reference, axis 1 = prediction.
struct JointHistogram {
  int bins = 100;
  double min_value = 0.0;
  double max_value = 80.0;
  Eigen::MatrixXi counts;  // bins x bins

  std::int64_t total() const { return counts.cast<std::int64_t>().sum(); }
};

JointHistogram joint_histogram(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref,
                               int bins, double min_value, double max_value);

/// One raster row as a 1-D profile (0-based row index).
Eigen::VectorXd traceline(const HeightRaster& raster, int row);

/// Raster values inside a rectangle (raster-local coordinates), row-major.
Eigen::VectorXd patch_values(const HeightRaster& raster, const PixelRect& rect);

/// Joint-histogram axis range: [0, 80] m for CHM, the (floored/ceiled)
/// reference value range for DTM.
std::pair<double, double> default_histogram_range(const HeightRaster& reference,
                                                  const PixelRect& rect);

std::int64_t distinct_value_count(const Eigen::VectorXd& pred);

struct TimingReport {
  double train_seconds = 0.0;
  double test_seconds = 0.0;
  std::int64_t n_train = 0;
  std::int64_t n_test = 0;
  std::int64_t model_leaf_count = 0;
};

/// Wall-clock seconds of one pipeline stage (monotonic clock).
double time_run(const std::function<void()>& stage);

/// One end-to-end configuration: window, paradigm, quantization bin width,
/// test patch in FULL-grid coordinates (converted per window), and
/// training hyperparameters.
struct RunSpec {
  int window = 49;
  Paradigm paradigm = Paradigm::Regression;
  double bin_width = 1.0;
  PixelRect patch_full;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  GbdtHyperparams hp;
  int threads = 0;
};

struct PreparedData {
  FeatureGrid grid;
  HeightRaster target;  // window-averaged, aligned with grid
};

PreparedData prepare_features(const SlcStack& stack, const HeightRaster& target, int window,
                              int threads = 0);

struct FitOutcome {
  GbdtModel model;
  HeightRaster prediction;  // full valid grid, same alignment as the input
  double test_rmse = 0.0;
  TimingReport timing;
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
};

/// Split, train, predict the full grid, and score the test patch.
FitOutcome fit_and_evaluate(const PreparedData& data, const RunSpec& spec);

FitOutcome run_height_estimation(const SlcStack& stack, const HeightRaster& target,
                                 const RunSpec& spec);

/// Window sweep across paradigms and calibrations for one target raster.
/// Pass the stacks that exist; each configuration rebuilds features and
/// averaged targets, resplits with the same full-grid patch, trains, and
/// scores the test patch.
struct SweepRequest {
  std::vector<int> windows;
  std::vector<Paradigm> paradigms;
  std::vector<Calibration> calibrations;
  RunSpec base;  // base.window ignored; patch/hp/seed shared by every cell
  // When set, per-cell joint histograms (CSV + SVG) land here.
  std::filesystem::path artifact_dir;
};

struct SweepRow {
  Paradigm paradigm = Paradigm::Regression;
  Calibration calibration = Calibration::NonCalibrated;
  std::vector<double> rmse;  // one entry per window
};

struct SweepTable {
  std::vector<int> windows;
  std::vector<SweepRow> rows;
};

SweepTable window_sweep(const SlcStack* non_calibrated, const SlcStack* calibrated,
                        const HeightRaster& target, const SweepRequest& request);

// Report writers.
void write_sweep_csv(const SweepTable& table, const std::filesystem::path& file);
void write_joint_histogram_csv(const JointHistogram& jh, const std::filesystem::path& file);
/// Heatmap with the bisector overlaid.
void write_joint_histogram_svg(const JointHistogram& jh, const std::filesystem::path& file);
void write_traceline_csv(const Eigen::VectorXd& reference, const Eigen::VectorXd& prediction,
                         const std::filesystem::path& file);
void write_timing_report(const TimingReport& report, const std::filesystem::path& file);

}  // namespace tomoboost
