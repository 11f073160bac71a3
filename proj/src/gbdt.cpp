#include "tomoboost/gbdt.hpp"

#include "tomoboost/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace tomoboost {

using nlohmann::json;

const char* loss_kind_name(LossKind kind) {
  return kind == LossKind::WeightedRmse ? "weighted_rmse" : "weighted_multiclass";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "weighted_rmse") return LossKind::WeightedRmse;
  if (name == "weighted_multiclass") return LossKind::WeightedMultiClass;
  fail("unknown loss kind '" + name + "'");
}

void GbdtHyperparams::validate() const {
  require(num_trees >= 1, "hyperparams: num_trees must be >= 1");
  require(depth >= 1 && depth <= 16, "hyperparams: depth must lie in [1, 16]");
  require(learning_rate > 0.0 && learning_rate <= 1.0,
          "hyperparams: learning_rate must lie in (0, 1]");
  require(histogram_bins >= 2 && histogram_bins <= 256,
          "hyperparams: histogram_bins must lie in [2, 256]");
  require(min_samples_leaf >= 0, "hyperparams: min_samples_leaf must be >= 0");
  require(early_stopping_rounds >= 0, "hyperparams: early_stopping_rounds must be >= 0");
}

int QuantizationMap::quantize(double height) const {
  int cls = static_cast<int>(std::floor((height - origin) / bin_width));
  return std::clamp(cls, 0, num_classes - 1);
}

std::pair<std::vector<int>, QuantizationMap> quantize_labels(const Eigen::VectorXd& heights,
                                                             double bin_width) {
  require(bin_width > 0.0, "quantize_labels: bin_width must be positive");
  require(heights.size() > 0, "quantize_labels: empty input");
  require(heights.allFinite(), "quantize_labels: non-finite height");

  QuantizationMap map;
  map.bin_width = bin_width;
  map.origin = std::floor(heights.minCoeff() / bin_width) * bin_width;
  map.num_classes = static_cast<int>(std::floor((heights.maxCoeff() - map.origin) / bin_width)) + 1;
  require(map.num_classes >= 2,
          "quantize_labels: bin width covers the whole height range (needs >= 2 classes)");

  std::vector<int> labels(heights.size());
  for (Eigen::Index i = 0; i < heights.size(); ++i) labels[i] = map.quantize(heights[i]);
  return {std::move(labels), map};
}

Eigen::VectorXd class_weights(const std::vector<int>& labels, int num_classes) {
  require(num_classes >= 1, "class_weights: need at least one class");
  require(!labels.empty(), "class_weights: empty input");
  std::vector<std::int64_t> counts(num_classes, 0);
  for (int label : labels) {
    require(label >= 0 && label < num_classes, "class_weights: label out of range");
    ++counts[label];
  }
  const double n = double(labels.size());
  Eigen::VectorXd weights(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    weights[Eigen::Index(i)] = n / (double(num_classes) * double(counts[labels[i]]));
  return weights;
}

double loss_weighted_rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets,
                          const Eigen::VectorXd& weights) {
  require(pred.size() == targets.size() && pred.size() == weights.size(),
          "loss_weighted_rmse: size mismatch");
  const double wsum = weights.sum();
  require(wsum > 0.0, "loss_weighted_rmse: weights sum to zero");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - targets[i];
    acc += e * e * weights[i];
  }
  return std::sqrt(acc / wsum);
}

namespace {

// log(sum exp(row)) with the max factored out.
double log_sum_exp(const double* logits, int dim) {
  double m = logits[0];
  for (int c = 1; c < dim; ++c) m = std::max(m, logits[c]);
  double s = 0.0;
  for (int c = 0; c < dim; ++c) s += std::exp(logits[c] - m);
  return m + std::log(s);
}

}  // namespace

double loss_weighted_multiclass(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                const Eigen::VectorXd& weights) {
  const Eigen::Index n = logits.rows();
  const int dim = int(logits.cols());
  require(Eigen::Index(labels.size()) == n && weights.size() == n,
          "loss_weighted_multiclass: size mismatch");
  const double wsum = weights.sum();
  require(wsum > 0.0, "loss_weighted_multiclass: weights sum to zero");

  std::vector<double> row(dim);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights[i] == 0.0) continue;
    require(labels[i] >= 0 && labels[i] < dim, "loss_weighted_multiclass: label out of range");
    for (int c = 0; c < dim; ++c) row[c] = logits(i, c);
    acc += weights[i] * (log_sum_exp(row.data(), dim) - row[labels[i]]);
  }
  return acc / wsum;
}

void regression_gradients(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets,
                          Eigen::VectorXd& grad, Eigen::VectorXd& hess) {
  require(pred.size() == targets.size(), "regression_gradients: size mismatch");
  grad = pred - targets;
  hess = Eigen::VectorXd::Ones(pred.size());
}

void multiclass_gradients(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                          Eigen::MatrixXd& grad, Eigen::MatrixXd& hess) {
  const Eigen::Index n = logits.rows();
  const int dim = int(logits.cols());
  require(Eigen::Index(labels.size()) == n, "multiclass_gradients: size mismatch");
  grad.resize(n, dim);
  hess.resize(n, dim);
  std::vector<double> row(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < dim; ++c) row[c] = logits(i, c);
    const double lse = log_sum_exp(row.data(), dim);
    for (int c = 0; c < dim; ++c) {
      const double p = std::exp(row[c] - lse);
      grad(i, c) = p - (labels[i] == c ? 1.0 : 0.0);
      hess(i, c) = p * (1.0 - p);
    }
  }
}

std::int64_t GbdtModel::leaf_count() const {
  std::int64_t count = 0;
  for (const auto& tree : trees) count += tree.num_leaves();
  return count;
}

int ClassProbabilities::argmax() const {
  Eigen::Index best = 0;
  probabilities.maxCoeff(&best);
  return int(best);
}

// --------------------------- feature binning ---------------------------

FeatureBinner FeatureBinner::fit(const MatrixXfRM& features, int max_bins) {
  require(max_bins >= 2 && max_bins <= 256, "binner: max_bins must lie in [2, 256]");
  const std::int64_t n = features.rows();
  const int m = int(features.cols());
  require(n >= 1 && m >= 1, "binner: empty feature matrix");

  FeatureBinner binner;
  binner.edges_.resize(m);
  parallel_for(m, 0, [&](std::int64_t f) {
    std::vector<float> sorted(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) sorted[std::size_t(i)] = features(i, f);
    std::sort(sorted.begin(), sorted.end());

    std::vector<float>& edges = binner.edges_[f];
    const float last = sorted.back();
    for (int k = 1; k < max_bins; ++k) {
      const std::int64_t idx = std::int64_t(double(k) * double(n) / double(max_bins));
      if (idx <= 0 || idx >= n) continue;
      const float e = sorted[std::size_t(idx) - 1];
      if (e < last && (edges.empty() || e > edges.back())) edges.push_back(e);
    }
  });
  return binner;
}

int FeatureBinner::max_bins() const {
  int b = 1;
  for (const auto& e : edges_) b = std::max(b, int(e.size()) + 1);
  return b;
}

int FeatureBinner::bin_of(int feature, float value) const {
  const auto& edges = edges_[feature];
  return int(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

std::vector<std::uint8_t> FeatureBinner::transform(const MatrixXfRM& features,
                                                   int threads) const {
  const std::int64_t n = features.rows();
  require(int(features.cols()) == num_features(), "binner: feature count mismatch");
  std::vector<std::uint8_t> codes(std::size_t(n) * num_features());
  parallel_for(num_features(), threads, [&](std::int64_t f) {
    std::uint8_t* out = codes.data() + std::size_t(f) * n;
    for (std::int64_t i = 0; i < n; ++i)
      out[i] = std::uint8_t(bin_of(int(f), features(i, f)));
  });
  return codes;
}

// ---------------------------- split search -----------------------------

namespace {

// G^2 / (H + ridge), the Newton objective decrease of a single leaf.
inline double leaf_score(const double* g, const double* h, int dim, double ridge) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double denom = h[c] + ridge;
    if (denom > 0.0) s += g[c] * g[c] / denom;
  }
  return s;
}

// Total order used for candidates: higher gain wins, ties break to the
// lower feature, then the lower threshold bin. Makes the choice independent
// of how features were partitioned across workers.
inline bool better_candidate(const SplitCandidate& a, const SplitCandidate& b) {
  if (a.gain != b.gain) return a.gain > b.gain;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.bin < b.bin;
}

}  // namespace

SplitCandidate find_best_oblivious_split(const SplitSearchData& data, const GbdtHyperparams& hp,
                                         int threads) {
  const std::int64_t n = data.n;
  const int dim = data.value_dim;
  const int leaves = data.num_leaves;
  const int m = data.binner->num_features();
  const double ridge = hp.loss == LossKind::WeightedMultiClass ? kMultiClassRidge : 0.0;
  const int min_leaf = std::max(1, hp.min_samples_leaf);

  // Per-leaf totals, accumulated in sample order.
  std::vector<double> total_g(std::size_t(leaves) * dim, 0.0);
  std::vector<double> total_h(std::size_t(leaves) * dim, 0.0);
  std::vector<std::int64_t> total_n(leaves, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const int leaf = data.leaf[i];
    ++total_n[leaf];
    double* g = total_g.data() + std::size_t(leaf) * dim;
    double* h = total_h.data() + std::size_t(leaf) * dim;
    const double* gi = data.grad + std::size_t(i) * dim;
    const double* hi = data.hess + std::size_t(i) * dim;
    for (int c = 0; c < dim; ++c) {
      g[c] += gi[c];
      h[c] += hi[c];
    }
  }
  std::vector<double> parent_score(leaves);
  for (int leaf = 0; leaf < leaves; ++leaf)
    parent_score[leaf] = leaf_score(total_g.data() + std::size_t(leaf) * dim,
                                    total_h.data() + std::size_t(leaf) * dim, dim, ridge);

  const int max_bins = data.binner->max_bins();
  const int workers = int(std::max<std::int64_t>(1, std::min<std::int64_t>(resolve_threads(threads), m)));
  std::vector<SplitCandidate> best_per_worker(workers);

  parallel_blocks(m, workers, [&](std::int64_t f_begin, std::int64_t f_end, int worker) {
    std::vector<double> hist_g(std::size_t(leaves) * max_bins * dim);
    std::vector<double> hist_h(std::size_t(leaves) * max_bins * dim);
    std::vector<std::int64_t> hist_n(std::size_t(leaves) * max_bins);
    std::vector<double> gains(std::size_t(std::max(1, max_bins - 1)));
    std::vector<double> left_g(dim), left_h(dim);
    SplitCandidate best;

    for (std::int64_t f = f_begin; f < f_end; ++f) {
      const int bins = data.binner->num_bins(int(f));
      if (bins < 2) continue;

      std::fill(hist_g.begin(), hist_g.begin() + std::size_t(leaves) * bins * dim, 0.0);
      std::fill(hist_h.begin(), hist_h.begin() + std::size_t(leaves) * bins * dim, 0.0);
      std::fill(hist_n.begin(), hist_n.begin() + std::size_t(leaves) * bins, 0);

      const std::uint8_t* codes = data.codes + std::size_t(f) * n;
      for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t slot = std::size_t(data.leaf[i]) * bins + codes[i];
        ++hist_n[slot];
        double* g = hist_g.data() + slot * dim;
        double* h = hist_h.data() + slot * dim;
        const double* gi = data.grad + std::size_t(i) * dim;
        const double* hi = data.hess + std::size_t(i) * dim;
        for (int c = 0; c < dim; ++c) {
          g[c] += gi[c];
          h[c] += hi[c];
        }
      }

      std::fill(gains.begin(), gains.begin() + (bins - 1), 0.0);
      for (int leaf = 0; leaf < leaves; ++leaf) {
        if (total_n[leaf] == 0) continue;
        std::fill(left_g.begin(), left_g.end(), 0.0);
        std::fill(left_h.begin(), left_h.end(), 0.0);
        std::int64_t left_n = 0;
        const double* tg = total_g.data() + std::size_t(leaf) * dim;
        const double* th = total_h.data() + std::size_t(leaf) * dim;
        for (int b = 0; b + 1 < bins; ++b) {
          const std::size_t slot = std::size_t(leaf) * bins + b;
          left_n += hist_n[slot];
          const double* g = hist_g.data() + slot * dim;
          const double* h = hist_h.data() + slot * dim;
          double right_score = 0.0;
          for (int c = 0; c < dim; ++c) {
            left_g[c] += g[c];
            left_h[c] += h[c];
            const double rg = tg[c] - left_g[c];
            const double rh = th[c] - left_h[c];
            const double denom = rh + ridge;
            if (denom > 0.0) right_score += rg * rg / denom;
          }
          const std::int64_t right_n = total_n[leaf] - left_n;
          if ((left_n > 0 && left_n < min_leaf) || (right_n > 0 && right_n < min_leaf))
            continue;  // children below the leaf-size floor add no gain
          gains[b] += leaf_score(left_g.data(), left_h.data(), dim, ridge) + right_score -
                      parent_score[leaf];
        }
      }

      for (int b = 0; b + 1 < bins; ++b) {
        if (gains[b] <= 0.0) continue;
        SplitCandidate cand{int(f), b, data.binner->threshold(int(f), b), gains[b]};
        if (!best.valid() || better_candidate(cand, best)) best = cand;
      }
    }
    best_per_worker[worker] = best;
  });

  SplitCandidate best;
  for (const auto& cand : best_per_worker)
    if (cand.valid() && (!best.valid() || better_candidate(cand, best))) best = cand;
  return best;
}

// ------------------------------ training -------------------------------

namespace {

using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Weight-folded derivatives of the running scores.
void fill_derivatives(const TrainingSet& data, const RowMajorXd& scores, bool classification,
                      std::vector<double>& grad, std::vector<double>& hess, int threads) {
  const std::int64_t n = data.size();
  const int dim = int(scores.cols());
  parallel_for(n, threads, [&](std::int64_t i) {
    const double w = data.weights[i];
    if (classification) {
      const double* row = scores.data() + std::size_t(i) * dim;
      const double lse = log_sum_exp(row, dim);
      double* g = grad.data() + std::size_t(i) * dim;
      double* h = hess.data() + std::size_t(i) * dim;
      for (int c = 0; c < dim; ++c) {
        const double p = std::exp(row[c] - lse);
        g[c] = w * (p - (data.labels[std::size_t(i)] == c ? 1.0 : 0.0));
        h[c] = w * p * (1.0 - p);
      }
    } else {
      grad[std::size_t(i)] = w * (scores(i, 0) - data.targets[i]);
      hess[std::size_t(i)] = w;
    }
  });
}

double dataset_loss(const TrainingSet& data, const RowMajorXd& scores, bool classification) {
  if (classification)
    return loss_weighted_multiclass(scores, data.labels, data.weights);
  return loss_weighted_rmse(scores.col(0), data.targets, data.weights);
}

void add_tree_to_scores(const ObliviousTree& tree, double learning_rate,
                        const MatrixXfRM& features, RowMajorXd& scores, int threads) {
  const int dim = int(scores.cols());
  parallel_for(scores.rows(), threads, [&](std::int64_t i) {
    const int leaf = tree.leaf_index(features.data() + std::size_t(i) * features.cols());
    const double* v = tree.leaf_values.data() + std::size_t(leaf) * dim;
    double* row = scores.data() + std::size_t(i) * dim;
    for (int c = 0; c < dim; ++c) row[c] += learning_rate * v[c];
  });
}

void check_training_set(const TrainingSet& data, bool classification, const char* who) {
  const std::int64_t n = data.size();
  require(n >= 1, std::string(who) + ": empty data");
  require(data.weights.size() == n, std::string(who) + ": weights size mismatch");
  require(data.weights.allFinite() && data.weights.minCoeff() >= 0.0,
          std::string(who) + ": weights must be finite and non-negative");
  require(data.weights.sum() > 0.0, std::string(who) + ": all-zero weights");
  require(data.features.allFinite(), std::string(who) + ": non-finite feature");
  if (classification) {
    require(data.num_classes >= 2, std::string(who) + ": need at least two classes");
    require(std::int64_t(data.labels.size()) == n, std::string(who) + ": labels size mismatch");
    for (int label : data.labels)
      require(label >= 0 && label < data.num_classes,
              std::string(who) + ": label out of range");
  } else {
    require(data.targets.size() == n, std::string(who) + ": targets size mismatch");
    require(data.targets.allFinite(), std::string(who) + ": non-finite target");
  }
}

}  // namespace

TrainResult train(const TrainingSet& data, const TrainingSet* validation,
                  const GbdtHyperparams& hp, int threads) {
  hp.validate();
  const bool classification = hp.loss == LossKind::WeightedMultiClass;
  check_training_set(data, classification, "train");
  require(data.size() >= 2, "train: need at least two samples");
  require(data.dim() >= 1, "train: need at least one feature");
  if (validation) {
    check_training_set(*validation, classification, "train(validation)");
    require(validation->dim() == data.dim(), "train: validation feature dim mismatch");
    if (classification)
      require(validation->num_classes == data.num_classes,
              "train: validation class count mismatch");
  }

  const std::int64_t n = data.size();
  const int dim = classification ? data.num_classes : 1;

  TrainResult result;
  GbdtModel& model = result.model;
  model.loss = hp.loss;
  model.num_features = data.dim();
  model.learning_rate = hp.learning_rate;
  if (classification) {
    model.base_score = Eigen::VectorXd::Zero(dim);
  } else {
    model.base_score.resize(1);
    model.base_score[0] = data.targets.cwiseProduct(data.weights).sum() / data.weights.sum();
  }

  const FeatureBinner binner = FeatureBinner::fit(data.features, hp.histogram_bins);
  const std::vector<std::uint8_t> codes = binner.transform(data.features, threads);

  RowMajorXd scores = model.base_score.transpose().replicate(n, 1);
  RowMajorXd valid_scores;
  if (validation) valid_scores = model.base_score.transpose().replicate(validation->size(), 1);

  std::vector<double> grad(std::size_t(n) * dim), hess(std::size_t(n) * dim);
  std::vector<std::uint16_t> leaf(static_cast<std::size_t>(n));

  const bool early_stop = validation != nullptr && hp.early_stopping_rounds > 0;
  double best_valid = std::numeric_limits<double>::infinity();
  int best_iteration = -1;
  int rounds_since_best = 0;

  for (int z = 0; z < hp.num_trees; ++z) {
    fill_derivatives(data, scores, classification, grad, hess, threads);

    ObliviousTree tree;
    std::fill(leaf.begin(), leaf.end(), std::uint16_t(0));
    for (int level = 0; level < hp.depth; ++level) {
      SplitSearchData search{&binner, codes.data(), n,       grad.data(),
                             hess.data(), dim,          leaf.data(), 1 << level};
      const SplitCandidate best = find_best_oblivious_split(search, hp, threads);
      if (!best.valid()) break;  // leaf-only level: nothing left to separate
      tree.splits.push_back({best.feature, best.threshold});
      const std::uint8_t* fcodes = codes.data() + std::size_t(best.feature) * n;
      parallel_for(n, threads, [&](std::int64_t i) {
        leaf[std::size_t(i)] |= std::uint16_t(int(fcodes[i] > best.bin) << level);
      });
    }

    // Newton leaf values; plain weighted mean residuals for regression.
    const int leaves = tree.num_leaves();
    const double ridge = classification ? kMultiClassRidge : 0.0;
    std::vector<double> leaf_g(std::size_t(leaves) * dim, 0.0);
    std::vector<double> leaf_h(std::size_t(leaves) * dim, 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      double* g = leaf_g.data() + std::size_t(leaf[std::size_t(i)]) * dim;
      double* h = leaf_h.data() + std::size_t(leaf[std::size_t(i)]) * dim;
      const double* gi = grad.data() + std::size_t(i) * dim;
      const double* hi = hess.data() + std::size_t(i) * dim;
      for (int c = 0; c < dim; ++c) {
        g[c] += gi[c];
        h[c] += hi[c];
      }
    }
    tree.leaf_values.assign(std::size_t(leaves) * dim, 0.0);
    double max_step = 0.0;
    for (std::size_t k = 0; k < tree.leaf_values.size(); ++k) {
      const double denom = leaf_h[k] + ridge;
      if (denom > 0.0) tree.leaf_values[k] = -leaf_g[k] / denom;
      max_step = std::max(max_step, std::abs(tree.leaf_values[k]));
    }

    if (tree.splits.empty() && max_step == 0.0) break;  // no progress possible

    add_tree_to_scores(tree, hp.learning_rate, data.features, scores, threads);
    model.trees.push_back(std::move(tree));
    result.train_loss.push_back(dataset_loss(data, scores, classification));

    if (validation) {
      add_tree_to_scores(model.trees.back(), hp.learning_rate, validation->features,
                         valid_scores, threads);
      const double vloss = dataset_loss(*validation, valid_scores, classification);
      result.valid_loss.push_back(vloss);
      if (early_stop) {
        if (vloss < best_valid) {
          best_valid = vloss;
          best_iteration = int(model.trees.size()) - 1;
          rounds_since_best = 0;
        } else if (++rounds_since_best >= hp.early_stopping_rounds) {
          break;
        }
      }
    }
  }

  if (early_stop && best_iteration >= 0 &&
      best_iteration + 1 < int(model.trees.size())) {
    model.trees.resize(std::size_t(best_iteration) + 1);
    result.train_loss.resize(std::size_t(best_iteration) + 1);
    result.valid_loss.resize(std::size_t(best_iteration) + 1);
  }
  result.best_iteration = early_stop ? best_iteration : -1;
  return result;
}

// ----------------------------- prediction ------------------------------

Eigen::MatrixXd predict_raw(const GbdtModel& model, const MatrixXfRM& features, int threads) {
  require(int(features.cols()) == model.num_features, "predict: feature dimension mismatch");
  const std::int64_t n = features.rows();
  const int dim = model.value_dim();
  RowMajorXd out = model.base_score.transpose().replicate(n, 1);
  parallel_for(n, threads, [&](std::int64_t i) {
    const float* x = features.data() + std::size_t(i) * features.cols();
    double* row = out.data() + std::size_t(i) * dim;
    for (const auto& tree : model.trees) {
      const double* v = tree.leaf_values.data() + std::size_t(tree.leaf_index(x)) * dim;
      for (int c = 0; c < dim; ++c) row[c] += model.learning_rate * v[c];
    }
  });
  return out;
}

ClassProbabilities predict_probabilities(const GbdtModel& model, const float* x) {
  require(model.loss == LossKind::WeightedMultiClass,
          "predict_probabilities: not a classification model");
  const int dim = model.value_dim();
  ClassProbabilities out;
  out.logits = model.base_score;
  for (const auto& tree : model.trees) {
    const double* v = tree.leaf_values.data() + std::size_t(tree.leaf_index(x)) * dim;
    for (int c = 0; c < dim; ++c) out.logits[c] += model.learning_rate * v[c];
  }
  const double lse = log_sum_exp(out.logits.data(), dim);
  out.probabilities = (out.logits.array() - lse).exp();
  return out;
}

Eigen::VectorXd predict(const GbdtModel& model, const MatrixXfRM& features, int threads) {
  const Eigen::MatrixXd raw = predict_raw(model, features, threads);
  if (model.loss == LossKind::WeightedRmse) return raw.col(0);
  require(model.quantization.has_value(), "predict: classification model lacks a quantization map");
  Eigen::VectorXd heights(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    Eigen::Index cls = 0;
    raw.row(i).maxCoeff(&cls);
    heights[i] = model.quantization->dequantize(int(cls));
  }
  return heights;
}

// ------------------------------ model file -----------------------------

void save_model(const GbdtModel& model, const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = 1;
  doc["loss"] = loss_kind_name(model.loss);
  doc["num_features"] = model.num_features;
  doc["learning_rate"] = model.learning_rate;
  if (model.loss == LossKind::WeightedRmse) {
    doc["base_score"] = model.base_score[0];
  } else {
    doc["base_score"] = std::vector<double>(model.base_score.data(),
                                            model.base_score.data() + model.base_score.size());
  }
  if (model.quantization) {
    doc["quantization"] = {{"origin", model.quantization->origin},
                           {"bin_width", model.quantization->bin_width},
                           {"num_classes", model.quantization->num_classes}};
  }
  doc["trees"] = json::array();
  for (const auto& tree : model.trees) {
    json splits = json::array();
    for (const auto& s : tree.splits) splits.push_back({s.feature, s.threshold});
    doc["trees"].push_back({{"splits", std::move(splits)}, {"leaves", tree.leaf_values}});
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("cannot write " + path.string());
  out << doc.dump(1, '\t') << '\n';
  if (!out) fail("write failed: " + path.string());
}

GbdtModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    fail("malformed model file " + path.string() + ": " + e.what());
  }

  GbdtModel model;
  try {
    require(doc.at("format_version").get<int>() == 1, "unsupported model format version");
    model.loss = loss_kind_from_name(doc.at("loss").get<std::string>());
    model.num_features = doc.at("num_features").get<int>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    if (doc.at("base_score").is_array()) {
      auto base = doc["base_score"].get<std::vector<double>>();
      model.base_score = Eigen::Map<Eigen::VectorXd>(base.data(), Eigen::Index(base.size()));
    } else {
      model.base_score.resize(1);
      model.base_score[0] = doc["base_score"].get<double>();
    }
    if (doc.contains("quantization")) {
      QuantizationMap q;
      q.origin = doc["quantization"].at("origin").get<double>();
      q.bin_width = doc["quantization"].at("bin_width").get<double>();
      q.num_classes = doc["quantization"].at("num_classes").get<int>();
      model.quantization = q;
    }
    const int dim = model.value_dim();
    for (const auto& jtree : doc.at("trees")) {
      ObliviousTree tree;
      for (const auto& jsplit : jtree.at("splits")) {
        ObliviousSplit s{jsplit.at(0).get<int>(), jsplit.at(1).get<double>()};
        require(s.feature >= 0 && s.feature < model.num_features,
                "model file: split feature out of range");
        tree.splits.push_back(s);
      }
      tree.leaf_values = jtree.at("leaves").get<std::vector<double>>();
      require(std::int64_t(tree.leaf_values.size()) == std::int64_t(tree.num_leaves()) * dim,
              "model file: leaf count mismatch");
      model.trees.push_back(std::move(tree));
    }
  } catch (const json::exception& e) {
    fail("bad model file " + path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace tomoboost
