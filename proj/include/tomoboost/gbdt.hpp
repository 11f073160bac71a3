#pragma once

#include "tomoboost/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace tomoboost {

enum class LossKind { WeightedRmse, WeightedMultiClass };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

/// Ridge applied to Newton denominators for multiclass leaves and split
/// gains. Regression leaves are plain weighted mean residuals.
constexpr double kMultiClassRidge = 1e-3;

struct GbdtHyperparams {
  int num_trees = 500;
  int depth = 6;
  double learning_rate = 0.1;
  int histogram_bins = 255;
  int min_samples_leaf = 20;
  LossKind loss = LossKind::WeightedRmse;
  int early_stopping_rounds = 50;  // 0 disables, needs a validation set
  std::uint64_t seed = 0;          // reserved; training is deterministic

  void validate() const;
};

/// Feature rows with either real-valued targets (regression) or class ids
/// (classification) and per-sample weights.
struct TrainingSet {
  MatrixXfRM features;       // N x M
  Eigen::VectorXd targets;   // regression targets, meters
  std::vector<int> labels;   // class ids in [0, T)
  Eigen::VectorXd weights;   // >= 0, not all zero
  int num_classes = 0;       // 0 for regression

  std::int64_t size() const { return features.rows(); }
  int dim() const { return static_cast<int>(features.cols()); }
};

/// Height <-> class correspondence for quantized targets. Class c covers
/// [origin + c*bin_width, origin + (c+1)*bin_width) and dequantizes to the
/// bin center.
struct QuantizationMap {
  double origin = 0.0;
  double bin_width = 1.0;
  int num_classes = 0;

  int quantize(double height) const;
  double dequantize(int cls) const { return origin + (cls + 0.5) * bin_width; }
};

/// Quantize heights on a bin_width grid anchored at floor(min/bin_width).
/// Fails when fewer than two classes would result.
std::pair<std::vector<int>, QuantizationMap> quantize_labels(const Eigen::VectorXd& heights,
                                                             double bin_width);

/// Inverse-frequency sample weights: w_i = N / (T * count(label_i)).
Eigen::VectorXd class_weights(const std::vector<int>& labels, int num_classes);

/// sqrt( sum w_i (pred_i - target_i)^2 / sum w_i )
double loss_weighted_rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets,
                          const Eigen::VectorXd& weights);

/// Weighted negative log likelihood of the true class under softmax(logits),
/// log-sum-exp stabilized.
double loss_weighted_multiclass(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                const Eigen::VectorXd& weights);

/// Pointwise derivatives, unit weights; weights are folded in by the
/// histogram stage. Regression: grad = pred - target, hess = 1.
void regression_gradients(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets,
                          Eigen::VectorXd& grad, Eigen::VectorXd& hess);

/// Per-class: grad = softmax(logits) - onehot(label), hess = p (1 - p).
void multiclass_gradients(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                          Eigen::MatrixXd& grad, Eigen::MatrixXd& hess);

struct ObliviousSplit {
  int feature = 0;
  double threshold = 0.0;  // x <= threshold goes left (bit 0)
};

/// Symmetric decision tree: one split predicate per level, applied to every
/// node of that level. A leaf index is the bit-code of the level tests,
/// level 0 in the least significant bit.
struct ObliviousTree {
  std::vector<ObliviousSplit> splits;
  std::vector<double> leaf_values;  // (1 << depth()) * value_dim, leaf-major

  int depth() const { return static_cast<int>(splits.size()); }
  int num_leaves() const { return 1 << depth(); }

  int leaf_index(const float* x) const {
    int idx = 0;
    for (size_t level = 0; level < splits.size(); ++level)
      idx |= int(double(x[splits[level].feature]) > splits[level].threshold) << level;
    return idx;
  }
};

struct GbdtModel {
  LossKind loss = LossKind::WeightedRmse;
  int num_features = 0;
  double learning_rate = 0.1;
  Eigen::VectorXd base_score;  // [1] regression, [T] zeros classification
  std::optional<QuantizationMap> quantization;
  std::vector<ObliviousTree> trees;

  int value_dim() const { return static_cast<int>(base_score.size()); }
  std::int64_t leaf_count() const;
};

struct ClassProbabilities {
  Eigen::VectorXd logits;
  Eigen::VectorXd probabilities;  // softmax(logits), sums to 1
  int argmax() const;
};

/// Equal-frequency feature quantizer: at most max_bins bins per feature,
/// edges taken from sample values so any strictly increasing transform of a
/// column yields identical bin assignments.
class FeatureBinner {
 public:
  static FeatureBinner fit(const MatrixXfRM& features, int max_bins);

  int num_features() const { return static_cast<int>(edges_.size()); }
  int num_bins(int feature) const { return static_cast<int>(edges_[feature].size()) + 1; }
  int max_bins() const;

  /// Upper edge of bin b; samples with x <= threshold(f, b) land in bins <= b.
  double threshold(int feature, int bin) const { return edges_[feature][bin]; }

  int bin_of(int feature, float value) const;

  /// Feature-major codes: codes[f * n + i] is the bin of sample i.
  std::vector<std::uint8_t> transform(const MatrixXfRM& features, int threads = 0) const;

 private:
  std::vector<std::vector<float>> edges_;
};

struct SplitCandidate {
  int feature = -1;
  int bin = -1;          // boundary: left is code <= bin
  double threshold = 0.0;
  double gain = 0.0;

  bool valid() const { return feature >= 0; }
};

/// Inputs of one level-wise split search over pre-binned features.
/// grad/hess are weight-folded, sample-major with value_dim entries per
/// sample. leaf holds each sample's current leaf in [0, num_leaves).
struct SplitSearchData {
  const FeatureBinner* binner = nullptr;
  const std::uint8_t* codes = nullptr;  // feature-major
  std::int64_t n = 0;
  const double* grad = nullptr;
  const double* hess = nullptr;
  int value_dim = 1;
  const std::uint16_t* leaf = nullptr;
  int num_leaves = 1;
};

/// Best (feature, bin boundary) over all leaves of the level by total gain:
/// weighted-variance reduction for regression, Newton gain G^2/(H+ridge)
/// for classification. Ties break to the lowest feature then lowest
/// threshold. Invalid candidate when no split has positive gain.
SplitCandidate find_best_oblivious_split(const SplitSearchData& data,
                                         const GbdtHyperparams& hp, int threads = 0);

struct TrainResult {
  GbdtModel model;
  std::vector<double> train_loss;  // per kept iteration, spec loss
  std::vector<double> valid_loss;  // empty without validation
  int best_iteration = -1;         // index into kept trees, -1 when unused
};

/// Gradient boosting with oblivious trees. Base score is the weighted target
/// mean (regression) or zero logits (classification); each round fits one
/// tree to the current negative gradients and applies shrinkage. With a
/// validation set and early_stopping_rounds > 0, keeps the best prefix.
/// Bit-deterministic for any thread count.
TrainResult train(const TrainingSet& data, const TrainingSet* validation,
                  const GbdtHyperparams& hp, int threads = 0);

/// Raw ensemble outputs: N x value_dim (regression value or logits).
Eigen::MatrixXd predict_raw(const GbdtModel& model, const MatrixXfRM& features,
                            int threads = 0);

ClassProbabilities predict_probabilities(const GbdtModel& model, const float* x);

/// Heights in meters: the ensemble value for regression, the dequantized
/// argmax class for classification (requires a quantization map).
Eigen::VectorXd predict(const GbdtModel& model, const MatrixXfRM& features, int threads = 0);

/// Versioned JSON model files; reload reproduces predictions bit-exactly.
void save_model(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_model(const std::filesystem::path& path);

}  // namespace tomoboost
