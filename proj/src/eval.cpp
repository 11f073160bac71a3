#include "tomoboost/eval.hpp"

#include "tomoboost/parallel.hpp"
#include "tomoboost/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

namespace tomoboost {

const char* paradigm_name(Paradigm p) {
  return p == Paradigm::Regression ? "regression" : "classification";
}

const char* calibration_name(Calibration c) {
  return c == Calibration::NonCalibrated ? "NC" : "C";
}

namespace {

TrainingSet gather(const FeatureGrid& grid, const HeightRaster& targets,
                   const std::vector<std::int64_t>& indices) {
  TrainingSet set;
  set.features.resize(Eigen::Index(indices.size()), grid.dim);
  set.targets.resize(Eigen::Index(indices.size()));
  set.weights = Eigen::VectorXd::Ones(Eigen::Index(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    set.features.row(Eigen::Index(k)) = grid.values.row(indices[k]);
    set.targets[Eigen::Index(k)] =
        targets.values(int(indices[k] / grid.cols), int(indices[k] % grid.cols));
  }
  return set;
}

}  // namespace

DatasetSplits split_dataset(const FeatureGrid& grid, const HeightRaster& targets,
                            const SplitSpec& spec) {
  grid.validate();
  targets.validate();
  require(grid.rows == targets.rows && grid.cols == targets.cols,
          "split_dataset: grid and targets have different dimensions");
  require(grid.valid_offset == targets.valid_offset,
          "split_dataset: grid and targets have different valid offsets");
  require(spec.test_patch.inside(grid.rows, grid.cols), "split_dataset: patch out of bounds");
  require(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0,
          "split_dataset: validation fraction must lie in (0, 1)");

  const PixelRect& patch = spec.test_patch;
  std::vector<std::int64_t> test_idx;
  test_idx.reserve(std::size_t(patch.count()));
  for (int r = patch.row0; r < patch.row0 + patch.rows; ++r)
    for (int c = patch.col0; c < patch.col0 + patch.cols; ++c)
      test_idx.push_back(grid.index(r, c));

  std::vector<std::int64_t> rest;
  rest.reserve(std::size_t(grid.pixel_count() - patch.count()));
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const bool in_patch = r >= patch.row0 && r < patch.row0 + patch.rows &&
                            c >= patch.col0 && c < patch.col0 + patch.cols;
      if (!in_patch) rest.push_back(grid.index(r, c));
    }

  // Fisher-Yates with the artifact RNG keeps the split reproducible across
  // platforms and thread counts.
  Rng rng(spec.seed, streams::kSplitShuffle, 0, 0);
  for (std::size_t i = rest.size(); i > 1; --i)
    std::swap(rest[i - 1], rest[std::size_t(rng.uniform_index(i))]);

  const auto train_count =
      std::size_t(std::floor((1.0 - spec.validation_fraction) * double(rest.size())));
  std::vector<std::int64_t> train_idx(rest.begin(), rest.begin() + std::ptrdiff_t(train_count));
  std::vector<std::int64_t> valid_idx(rest.begin() + std::ptrdiff_t(train_count), rest.end());

  DatasetSplits splits;
  splits.train = gather(grid, targets, train_idx);
  splits.validation = gather(grid, targets, valid_idx);
  splits.test = gather(grid, targets, test_idx);
  return splits;
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  require(pred.size() == ref.size(), "rmse: size mismatch");
  require(pred.size() >= 1, "rmse: empty input");
  return std::sqrt((pred - ref).squaredNorm() / double(pred.size()));
}

JointHistogram joint_histogram(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref,
                               int bins, double min_value, double max_value) {
  require(pred.size() == ref.size(), "joint_histogram: size mismatch");
  require(pred.size() >= 1, "joint_histogram: empty input");
  require(bins >= 1, "joint_histogram: need at least one bin");
  require(max_value > min_value, "joint_histogram: degenerate range");

  JointHistogram jh;
  jh.bins = bins;
  jh.min_value = min_value;
  jh.max_value = max_value;
  jh.counts = Eigen::MatrixXi::Zero(bins, bins);
  const double scale = bins / (max_value - min_value);
  auto bin_of = [&](double v) {
    return std::clamp(int(std::floor((v - min_value) * scale)), 0, bins - 1);
  };
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    ++jh.counts(bin_of(ref[i]), bin_of(pred[i]));
  return jh;
}

Eigen::VectorXd traceline(const HeightRaster& raster, int row) {
  require(row >= 0 && row < raster.rows, "traceline: row out of bounds");
  return raster.values.row(row).transpose();
}

std::int64_t distinct_value_count(const Eigen::VectorXd& pred) {
  require(pred.size() >= 1, "distinct_value_count: empty input");
  std::vector<double> sorted(pred.data(), pred.data() + pred.size());
  std::sort(sorted.begin(), sorted.end());
  return std::unique(sorted.begin(), sorted.end()) - sorted.begin();
}

Eigen::VectorXd patch_values(const HeightRaster& raster, const PixelRect& rect) {
  require(rect.inside(raster.rows, raster.cols), "patch_values: rectangle out of bounds");
  Eigen::VectorXd out(rect.count());
  std::int64_t k = 0;
  for (int r = rect.row0; r < rect.row0 + rect.rows; ++r)
    for (int c = rect.col0; c < rect.col0 + rect.cols; ++c) out[k++] = raster.values(r, c);
  return out;
}

std::pair<double, double> default_histogram_range(const HeightRaster& reference,
                                                  const PixelRect& rect) {
  if (reference.kind == RasterKind::Chm) return {0.0, 80.0};
  const Eigen::VectorXd v = patch_values(reference, rect);
  double lo = std::floor(v.minCoeff()), hi = std::ceil(v.maxCoeff());
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

double time_run(const std::function<void()>& stage) {
  const auto start = std::chrono::steady_clock::now();
  stage();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

PreparedData prepare_features(const SlcStack& stack, const HeightRaster& target, int window,
                              int threads) {
  PreparedData data;
  data.grid = build_feature_grid(stack, window, threads);
  data.target = average_raster(target, window);
  return data;
}

FitOutcome fit_and_evaluate(const PreparedData& data, const RunSpec& spec) {
  SplitSpec split_spec;
  split_spec.test_patch = {spec.patch_full.row0 - data.grid.valid_offset,
                           spec.patch_full.col0 - data.grid.valid_offset,
                           spec.patch_full.rows, spec.patch_full.cols};
  split_spec.validation_fraction = spec.validation_fraction;
  split_spec.seed = spec.seed;

  DatasetSplits splits = split_dataset(data.grid, data.target, split_spec);

  GbdtHyperparams hp = spec.hp;
  std::optional<QuantizationMap> quantization;
  if (spec.paradigm == Paradigm::Classification) {
    hp.loss = LossKind::WeightedMultiClass;
    auto [labels, map] = quantize_labels(splits.train.targets, spec.bin_width);
    quantization = map;

    // Inverse-frequency weights from the training distribution; validation
    // samples of a class unseen in training carry no weight.
    std::vector<std::int64_t> counts(std::size_t(map.num_classes), 0);
    for (int label : labels) ++counts[std::size_t(label)];
    const double n_train = double(labels.size());
    auto weight_of = [&](int cls) {
      return counts[std::size_t(cls)] == 0
                 ? 0.0
                 : n_train / (double(map.num_classes) * double(counts[std::size_t(cls)]));
    };

    splits.train.labels = std::move(labels);
    splits.train.num_classes = map.num_classes;
    splits.train.weights = class_weights(splits.train.labels, map.num_classes);
    splits.validation.num_classes = map.num_classes;
    splits.validation.labels.resize(std::size_t(splits.validation.size()));
    for (std::int64_t i = 0; i < splits.validation.size(); ++i) {
      const int cls = map.quantize(splits.validation.targets[i]);
      splits.validation.labels[std::size_t(i)] = cls;
      splits.validation.weights[i] = weight_of(cls);
    }
    if (splits.validation.weights.sum() <= 0.0)
      splits.validation.weights.setOnes();  // degenerate validation set
  } else {
    hp.loss = LossKind::WeightedRmse;
  }

  FitOutcome outcome;
  TrainResult trained;
  outcome.timing.train_seconds = time_run([&] {
    trained = train(splits.train, splits.validation.size() > 0 ? &splits.validation : nullptr,
                    hp, spec.threads);
  });
  outcome.model = std::move(trained.model);
  outcome.model.quantization = quantization;
  outcome.train_loss = std::move(trained.train_loss);
  outcome.valid_loss = std::move(trained.valid_loss);
  outcome.timing.n_train = splits.train.size();
  outcome.timing.model_leaf_count = outcome.model.leaf_count();

  Eigen::VectorXd test_pred;
  outcome.timing.test_seconds =
      time_run([&] { test_pred = predict(outcome.model, splits.test.features, spec.threads); });
  outcome.timing.n_test = splits.test.size();
  outcome.test_rmse = rmse(test_pred, splits.test.targets);

  outcome.prediction.rows = data.grid.rows;
  outcome.prediction.cols = data.grid.cols;
  outcome.prediction.kind = data.target.kind;
  outcome.prediction.valid_offset = data.grid.valid_offset;
  Eigen::VectorXd full = predict(outcome.model, data.grid.values, spec.threads);
  outcome.prediction.values =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          full.data(), data.grid.rows, data.grid.cols);
  if (outcome.prediction.kind == RasterKind::Chm)
    outcome.prediction.values = outcome.prediction.values.cwiseMax(0.0);
  snap_to_float32(outcome.prediction);
  return outcome;
}

FitOutcome run_height_estimation(const SlcStack& stack, const HeightRaster& target,
                                 const RunSpec& spec) {
  return fit_and_evaluate(prepare_features(stack, target, spec.window, spec.threads), spec);
}

SweepTable window_sweep(const SlcStack* non_calibrated, const SlcStack* calibrated,
                        const HeightRaster& target, const SweepRequest& request) {
  require(!request.windows.empty(), "window_sweep: no windows given");
  require(!request.paradigms.empty(), "window_sweep: no paradigms given");
  require(!request.calibrations.empty(), "window_sweep: no calibrations given");
  for (int w : request.windows) require(w >= 1 && w % 2 == 1, "window_sweep: windows must be odd");

  auto stack_for = [&](Calibration c) -> const SlcStack* {
    return c == Calibration::NonCalibrated ? non_calibrated : calibrated;
  };
  for (Calibration c : request.calibrations)
    require(stack_for(c) != nullptr, "window_sweep: stack missing for requested calibration");

  SweepTable table;
  table.windows = request.windows;
  for (Paradigm p : request.paradigms)
    for (Calibration c : request.calibrations)
      table.rows.push_back({p, c, std::vector<double>(request.windows.size(), 0.0)});

  for (Calibration calibration : request.calibrations) {
    for (std::size_t wi = 0; wi < request.windows.size(); ++wi) {
      PreparedData prepared = prepare_features(*stack_for(calibration), target,
                                               request.windows[wi], request.base.threads);
      for (Paradigm paradigm : request.paradigms) {
        RunSpec spec = request.base;
        spec.window = request.windows[wi];
        spec.paradigm = paradigm;
        const FitOutcome outcome = fit_and_evaluate(prepared, spec);
        for (auto& row : table.rows)
          if (row.paradigm == paradigm && row.calibration == calibration)
            row.rmse[wi] = outcome.test_rmse;

        if (!request.artifact_dir.empty()) {
          const PixelRect rect{spec.patch_full.row0 - prepared.grid.valid_offset,
                               spec.patch_full.col0 - prepared.grid.valid_offset,
                               spec.patch_full.rows, spec.patch_full.cols};
          const auto [lo, hi] = default_histogram_range(prepared.target, rect);
          const JointHistogram jh = joint_histogram(patch_values(outcome.prediction, rect),
                                                    patch_values(prepared.target, rect),
                                                    100, lo, hi);
          std::string stem = std::string("joint_") +
                             (target.kind == RasterKind::Chm ? "chm" : "dtm") + "_" +
                             paradigm_name(paradigm) + "_" + calibration_name(calibration) +
                             "_w" + std::to_string(spec.window);
          std::filesystem::create_directories(request.artifact_dir);
          write_joint_histogram_csv(jh, request.artifact_dir / (stem + ".csv"));
          write_joint_histogram_svg(jh, request.artifact_dir / (stem + ".svg"));
        }
      }
    }
  }
  return table;
}

// ------------------------------- writers -------------------------------

namespace {

std::ofstream open_text(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail("cannot write " + file.string());
  return out;
}

std::string row_label(Paradigm p, Calibration c) {
  std::string label = p == Paradigm::Regression ? "Regression" : "Classification";
  return label + "-" + calibration_name(c);
}

}  // namespace

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& file) {
  auto out = open_text(file);
  out << "config";
  for (int w : table.windows) out << ',' << w << 'x' << w;
  out << '\n';
  out.precision(6);
  for (const auto& row : table.rows) {
    out << row_label(row.paradigm, row.calibration);
    for (double v : row.rmse) out << ',' << v;
    out << '\n';
  }
  if (!out) fail("write failed: " + file.string());
}

void write_joint_histogram_csv(const JointHistogram& jh, const std::filesystem::path& file) {
  auto out = open_text(file);
  out << "bins,min_value,max_value\n";
  out << jh.bins << ',' << jh.min_value << ',' << jh.max_value << '\n';
  for (int r = 0; r < jh.bins; ++r) {
    for (int c = 0; c < jh.bins; ++c) out << (c ? "," : "") << jh.counts(r, c);
    out << '\n';
  }
  if (!out) fail("write failed: " + file.string());
}

void write_joint_histogram_svg(const JointHistogram& jh, const std::filesystem::path& file) {
  const int plot = 480, margin = 50, size = plot + 2 * margin;
  const double cell = double(plot) / jh.bins;
  const int max_count = std::max(1, jh.counts.maxCoeff());

  auto out = open_text(file);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot
      << "\" height=\"" << plot << "\" fill=\"white\" stroke=\"black\"/>\n";
  out.precision(5);
  for (int r = 0; r < jh.bins; ++r) {
    for (int c = 0; c < jh.bins; ++c) {
      const int count = jh.counts(r, c);
      if (count == 0) continue;
      // sqrt scaling keeps low-density cells visible
      const double t = std::sqrt(double(count) / max_count);
      const int shade = int(235.0 * (1.0 - t));
      const double x = margin + r * cell;
      const double y = margin + plot - (c + 1) * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell + 0.5
          << "\" height=\"" << cell + 0.5 << "\" fill=\"rgb(" << shade << ',' << shade
          << ",235)\"/>\n";
    }
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << margin + plot << "\" x2=\"" << margin + plot
      << "\" y2=\"" << margin << "\" stroke=\"red\" stroke-width=\"1.5\"/>\n";
  out << "<text x=\"" << margin + plot / 2 << "\" y=\"" << size - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">reference [m]</text>\n";
  out << "<text x=\"14\" y=\"" << margin + plot / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 14 "
      << margin + plot / 2 << ")\">prediction [m]</text>\n";
  out << "<text x=\"" << margin << "\" y=\"" << margin + plot + 16
      << "\" font-size=\"12\">" << jh.min_value << "</text>\n";
  out << "<text x=\"" << margin + plot << "\" y=\"" << margin + plot + 16
      << "\" text-anchor=\"end\" font-size=\"12\">" << jh.max_value << "</text>\n";
  out << "</svg>\n";
  if (!out) fail("write failed: " + file.string());
}

void write_traceline_csv(const Eigen::VectorXd& reference, const Eigen::VectorXd& prediction,
                         const std::filesystem::path& file) {
  require(reference.size() == prediction.size(), "traceline csv: size mismatch");
  auto out = open_text(file);
  out << "column,reference,prediction\n";
  out.precision(9);
  for (Eigen::Index i = 0; i < reference.size(); ++i)
    out << i << ',' << reference[i] << ',' << prediction[i] << '\n';
  if (!out) fail("write failed: " + file.string());
}

void write_timing_report(const TimingReport& report, const std::filesystem::path& file) {
  auto out = open_text(file);
  out.precision(6);
  out << "train_seconds: " << report.train_seconds << '\n'
      << "test_seconds: " << report.test_seconds << '\n'
      << "n_train: " << report.n_train << '\n'
      << "n_test: " << report.n_test << '\n'
      << "model_leaf_count: " << report.model_leaf_count << '\n';
  if (!out) fail("write failed: " + file.string());
}

}  // namespace tomoboost
