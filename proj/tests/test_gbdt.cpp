#include "tomoboost/gbdt.hpp"

#include "oracles.hpp"
#include "tomoboost/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace tomoboost;

namespace {

TrainingSet regression_set(const MatrixXfRM& x, const Eigen::VectorXd& y) {
  TrainingSet set;
  set.features = x;
  set.targets = y;
  set.weights = Eigen::VectorXd::Ones(x.rows());
  return set;
}

GbdtHyperparams small_hp(int trees, int depth, double lr = 1.0) {
  GbdtHyperparams hp;
  hp.num_trees = trees;
  hp.depth = depth;
  hp.learning_rate = lr;
  hp.histogram_bins = 256;
  hp.min_samples_leaf = 1;
  hp.early_stopping_rounds = 0;
  return hp;
}

TrainingSet random_regression(std::int64_t n, int m, std::uint64_t seed) {
  MatrixXfRM x(n, m);
  Eigen::VectorXd y(n);
  Rng rng(seed, 7, 7, 7);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int f = 0; f < m; ++f) x(i, f) = float(rng.normal());
    y[i] = std::sin(2.0 * x(i, 0)) + 0.3 * x(i, m - 1) + 0.1 * rng.normal();
  }
  return regression_set(x, y);
}

}  // namespace

TEST_CASE("label quantization") {
  Eigen::VectorXd heights(3);
  heights << 0.0, 60.0, 12.7;
  auto [labels, map] = quantize_labels(heights, 1.0);
  CHECK(map.num_classes == 61);
  CHECK(map.origin == 0.0);
  CHECK(labels[2] == 12);
  CHECK(map.dequantize(12) == 12.5);

  // quantize -> dequantize never moves a height by more than half a bin
  Rng rng(1, 2, 3, 4);
  Eigen::VectorXd random(200);
  for (int i = 0; i < 200; ++i) random[i] = -20.0 + 90.0 * rng.uniform();
  auto [rl, rmap] = quantize_labels(random, 2.5);
  for (int i = 0; i < 200; ++i)
    CHECK(std::abs(rmap.dequantize(rl[std::size_t(i)]) - random[i]) <= 1.25 + 1e-12);

  Eigen::VectorXd narrow(2);
  narrow << 10.0, 10.4;
  CHECK_THROWS_AS(quantize_labels(narrow, 100.0), std::invalid_argument);
}

TEST_CASE("inverse-frequency class weights") {
  CHECK(class_weights({0, 0, 0, 1}, 2).isApprox(Eigen::Vector4d{2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0},
                                                1e-12));
  const Eigen::VectorXd balanced = class_weights({0, 1, 2, 0, 1, 2}, 3);
  for (int i = 0; i < 6; ++i) CHECK(balanced[i] == 1.0);
  const Eigen::VectorXd single = class_weights({0, 0, 0, 0}, 2);
  for (int i = 0; i < 4; ++i) CHECK(single[i] == 0.5);
}

TEST_CASE("weighted RMSE loss") {
  Eigen::VectorXd pred(2), target(2), w(2);
  pred << 0.0, 3.0;
  target << 0.0, 0.0;
  w << 1.0, 3.0;
  CHECK(loss_weighted_rmse(pred, target, w) == doctest::Approx(std::sqrt(27.0 / 4.0)).epsilon(1e-12));
  CHECK(loss_weighted_rmse(target, target, w) == 0.0);

  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(2, 0.7);
  const double unweighted = std::sqrt((pred - target).squaredNorm() / 2.0);
  CHECK(loss_weighted_rmse(pred, target, uniform) == doctest::Approx(unweighted).epsilon(1e-12));

  CHECK_THROWS_AS(loss_weighted_rmse(pred, target, Eigen::VectorXd::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("weighted multiclass loss") {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(1, 2);
  CHECK(loss_weighted_multiclass(logits, {0}, Eigen::VectorXd::Ones(1)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Eigen::MatrixXd confident(1, 3);
  confident << 60.0, 0.0, 0.0;
  CHECK(loss_weighted_multiclass(confident, {0}, Eigen::VectorXd::Ones(1)) < 1e-12);

  Eigen::MatrixXd two = Eigen::MatrixXd::Zero(2, 2);
  two(1, 0) = 9.0;
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  CHECK(loss_weighted_multiclass(two, {0, 1}, w) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gradients") {
  SUBCASE("regression residuals at a zero model") {
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(2), target(2), g, h;
    target << 1.0, -1.0;
    regression_gradients(pred, target, g, h);
    CHECK(g[0] == -1.0);  // negative gradient is the +1 residual
    CHECK(g[1] == 1.0);
    CHECK(h[0] == 1.0);
  }

  SUBCASE("softmax minus one-hot") {
    Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(1, 3), g, h;
    multiclass_gradients(logits, {0}, g, h);
    CHECK(g(0, 0) == doctest::Approx(-2.0 / 3).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(g(0, 2) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(h(0, 0) == doctest::Approx(2.0 / 9).epsilon(1e-12));
  }

  SUBCASE("finite differences on random logits") {
    Rng rng(13, 0, 0, 0);
    Eigen::MatrixXd logits(4, 5);
    std::vector<int> labels(4);
    Eigen::VectorXd w(4);
    for (int i = 0; i < 4; ++i) {
      labels[std::size_t(i)] = int(rng.uniform_index(5));
      w[i] = 0.5 + rng.uniform();
      for (int c = 0; c < 5; ++c) logits(i, c) = 2.0 * rng.normal();
    }
    Eigen::MatrixXd g, h;
    multiclass_gradients(logits, labels, g, h);
    const double wsum = w.sum();
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 5; ++c) {
        const double fd = oracle::central_difference(
            [&] { return loss_weighted_multiclass(logits, labels, w) * wsum; }, logits(i, c),
            1e-4);
        CHECK(std::abs(fd - w[i] * g(i, c)) < 1e-6);
      }
  }
}

TEST_CASE("split search on the four-point line") {
  MatrixXfRM x(4, 1);
  x << 0.f, 1.f, 2.f, 3.f;
  Eigen::VectorXd g(4);  // weight-folded gradients = F - y
  g << 0.5, 0.5, -0.5, -0.5;
  Eigen::VectorXd h = Eigen::VectorXd::Ones(4);

  const FeatureBinner binner = FeatureBinner::fit(x, 256);
  const auto codes = binner.transform(x);
  std::vector<std::uint16_t> leaf(4, 0);
  SplitSearchData data{&binner, codes.data(), 4, g.data(), h.data(), 1, leaf.data(), 1};

  const SplitCandidate best = find_best_oblivious_split(data, small_hp(1, 1), 1);
  REQUIRE(best.valid());
  CHECK(best.feature == 0);
  CHECK(best.threshold == 1.0);
  CHECK(best.gain == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant features are never selected; ties go to the lowest feature") {
  MatrixXfRM x(4, 3);
  for (int i = 0; i < 4; ++i) {
    x(i, 0) = 7.0f;        // constant
    x(i, 1) = float(i);    // informative
    x(i, 2) = float(i);    // identical twin, must lose the tie
  }
  Eigen::VectorXd g(4);
  g << 1.0, 1.0, -1.0, -1.0;
  Eigen::VectorXd h = Eigen::VectorXd::Ones(4);
  const FeatureBinner binner = FeatureBinner::fit(x, 256);
  const auto codes = binner.transform(x);
  std::vector<std::uint16_t> leaf(4, 0);
  SplitSearchData data{&binner, codes.data(), 4, g.data(), h.data(), 1, leaf.data(), 1};
  const SplitCandidate best = find_best_oblivious_split(data, small_hp(1, 1), 2);
  CHECK(best.feature == 1);

  // all-constant data: no valid split at all
  MatrixXfRM flat = MatrixXfRM::Constant(4, 2, 1.0f);
  const FeatureBinner fb = FeatureBinner::fit(flat, 256);
  const auto fcodes = fb.transform(flat);
  SplitSearchData fdata{&fb, fcodes.data(), 4, g.data(), h.data(), 1, leaf.data(), 1};
  CHECK_FALSE(find_best_oblivious_split(fdata, small_hp(1, 1)).valid());
}

TEST_CASE("depth-1 split matches the brute-force oracle on random data") {
  for (std::uint64_t trial = 0; trial < 25; ++trial) {
    Rng rng(trial, 5, 5, 5);
    const std::int64_t n = 8 + std::int64_t(rng.uniform_index(56));
    const int m = 1 + int(rng.uniform_index(4));
    const bool discrete = trial % 2 == 0;

    MatrixXfRM x(n, m);
    Eigen::VectorXd g(n), w(n);
    for (std::int64_t i = 0; i < n; ++i) {
      for (int f = 0; f < m; ++f)
        x(i, f) = discrete ? float(rng.uniform_index(5)) : float(rng.normal());
      g[i] = discrete ? 0.25 * double(rng.uniform_index(9)) - 1.0 : rng.normal();
      w[i] = discrete ? 1.0 : 0.5 + rng.uniform();
    }

    Eigen::VectorXd gw = g.cwiseProduct(w);
    const FeatureBinner binner = FeatureBinner::fit(x, 256);
    const auto codes = binner.transform(x);
    std::vector<std::uint16_t> leaf(std::size_t(n), 0);
    SplitSearchData data{&binner, codes.data(), n, gw.data(), w.data(), 1, leaf.data(), 1};
    const SplitCandidate ours = find_best_oblivious_split(data, small_hp(1, 1), 2);
    const oracle::BruteSplit brute = oracle::best_split_brute_force(x, g, w);

    REQUIRE(ours.valid() == brute.valid());
    if (ours.valid()) {
      CHECK(ours.feature == brute.feature);
      CHECK(ours.threshold == brute.threshold);
      CHECK(ours.gain == doctest::Approx(brute.gain).epsilon(1e-9));
    }
  }
}

TEST_CASE("training on constant targets reproduces the constant") {
  MatrixXfRM x(5, 2);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = float(i);
    x(i, 1) = float(i * i);
  }
  TrainingSet data = regression_set(x, Eigen::VectorXd::Constant(5, 4.25));
  const TrainResult result = train(data, nullptr, small_hp(3, 2), 1);
  CHECK(result.model.base_score[0] == 4.25);
  const Eigen::VectorXd pred = predict(result.model, x);
  for (int i = 0; i < 5; ++i) CHECK(pred[i] == 4.25);
  CHECK(result.train_loss.empty());  // no useful tree was ever added
}

TEST_CASE("hand-traced single boosting step fits the four-point dataset") {
  MatrixXfRM x(4, 1);
  x << 0.f, 1.f, 2.f, 3.f;
  Eigen::VectorXd y(4);
  y << 0.0, 0.0, 1.0, 1.0;
  TrainingSet data = regression_set(x, y);

  const TrainResult result = train(data, nullptr, small_hp(1, 1, 1.0), 1);
  REQUIRE(result.model.trees.size() == 1);
  const Eigen::VectorXd pred = predict(result.model, x);
  for (int i = 0; i < 4; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-15));
  CHECK(loss_weighted_rmse(pred, y, data.weights) < 1e-15);
  CHECK(result.train_loss.back() < 1e-15);
}

TEST_CASE("a model with zero trees predicts the base score") {
  GbdtModel model;
  model.loss = LossKind::WeightedRmse;
  model.num_features = 3;
  model.base_score = Eigen::VectorXd::Constant(1, 2.5);
  MatrixXfRM x = MatrixXfRM::Random(4, 3);
  const Eigen::VectorXd pred = predict(model, x);
  for (int i = 0; i < 4; ++i) CHECK(pred[i] == 2.5);
}

TEST_CASE("scaling leaves by c and the rate by 1/c leaves predictions unchanged") {
  TrainingSet data = random_regression(300, 4, 41);
  GbdtHyperparams hp = small_hp(20, 3, 0.2);
  hp.min_samples_leaf = 5;
  const TrainResult result = train(data, nullptr, hp, 2);
  const Eigen::VectorXd before = predict(result.model, data.features);

  GbdtModel scaled = result.model;
  const double c = 8.0;
  scaled.learning_rate /= c;
  for (auto& tree : scaled.trees)
    for (auto& v : tree.leaf_values) v *= c;
  const Eigen::VectorXd after = predict(scaled, data.features);
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("strictly increasing feature transforms leave the model unchanged") {
  TrainingSet data = random_regression(400, 3, 43);
  TrainingSet warped = data;
  for (std::int64_t i = 0; i < warped.size(); ++i)
    for (int f = 0; f < warped.dim(); ++f)
      warped.features(i, f) = std::atan(warped.features(i, f));

  GbdtHyperparams hp = small_hp(15, 4, 0.3);
  hp.histogram_bins = 32;
  const TrainResult a = train(data, nullptr, hp, 2);
  const TrainResult b = train(warped, nullptr, hp, 2);

  REQUIRE(a.model.trees.size() == b.model.trees.size());
  for (std::size_t t = 0; t < a.model.trees.size(); ++t) {
    REQUIRE(a.model.trees[t].splits.size() == b.model.trees[t].splits.size());
    for (std::size_t level = 0; level < a.model.trees[t].splits.size(); ++level)
      CHECK(a.model.trees[t].splits[level].feature == b.model.trees[t].splits[level].feature);
    for (std::size_t leaf = 0; leaf < a.model.trees[t].leaf_values.size(); ++leaf)
      CHECK(a.model.trees[t].leaf_values[leaf] == b.model.trees[t].leaf_values[leaf]);
  }
  const Eigen::VectorXd pa = predict(a.model, data.features);
  const Eigen::VectorXd pb = predict(b.model, warped.features);
  CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training is bit-deterministic across thread counts") {
  TrainingSet data = random_regression(500, 6, 47);
  GbdtHyperparams hp = small_hp(12, 4, 0.25);
  const TrainResult a = train(data, nullptr, hp, 1);
  const TrainResult b = train(data, nullptr, hp, 3);
  REQUIRE(a.model.trees.size() == b.model.trees.size());
  for (std::size_t t = 0; t < a.model.trees.size(); ++t) {
    CHECK(a.model.trees[t].leaf_values == b.model.trees[t].leaf_values);
    for (std::size_t level = 0; level < a.model.trees[t].splits.size(); ++level) {
      CHECK(a.model.trees[t].splits[level].feature == b.model.trees[t].splits[level].feature);
      CHECK(a.model.trees[t].splits[level].threshold == b.model.trees[t].splits[level].threshold);
    }
  }
}

TEST_CASE("training loss is monotone for regression") {
  TrainingSet data = random_regression(800, 5, 53);
  GbdtHyperparams hp = small_hp(60, 4, 0.3);
  hp.min_samples_leaf = 10;
  const TrainResult result = train(data, nullptr, hp, 2);
  for (std::size_t z = 1; z < result.train_loss.size(); ++z) {
    const double mse_prev = result.train_loss[z - 1] * result.train_loss[z - 1];
    const double mse = result.train_loss[z] * result.train_loss[z];
    CHECK(mse <= mse_prev + 1e-9);
  }
}

TEST_CASE("early stopping keeps the best prefix") {
  TrainingSet data = random_regression(400, 4, 59);
  // validation from a different seed: same signal, fresh noise
  TrainingSet validation = random_regression(200, 4, 61);

  GbdtHyperparams hp = small_hp(300, 4, 0.5);
  hp.early_stopping_rounds = 10;
  const TrainResult result = train(data, &validation, hp, 2);
  REQUIRE(!result.valid_loss.empty());
  CHECK(int(result.model.trees.size()) == result.best_iteration + 1);
  const double best = *std::min_element(result.valid_loss.begin(), result.valid_loss.end());
  CHECK(result.valid_loss.back() == best);
  CHECK(result.model.trees.size() < 300);
}

TEST_CASE("classifier trains, normalizes probabilities, and dequantizes") {
  // separable two-class problem on one feature
  const std::int64_t n = 200;
  MatrixXfRM x(n, 2);
  Eigen::VectorXd heights(n);
  Rng rng(67, 0, 0, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const bool tall = i % 2 == 0;
    heights[i] = tall ? 30.0 + rng.uniform() : 5.0 + rng.uniform();
    x(i, 0) = float(heights[i] + 0.01 * rng.normal());
    x(i, 1) = float(rng.normal());
  }
  auto [labels, map] = quantize_labels(heights, 20.0);
  TrainingSet data;
  data.features = x;
  data.labels = labels;
  data.num_classes = map.num_classes;
  data.weights = class_weights(labels, map.num_classes);

  GbdtHyperparams hp = small_hp(25, 3, 0.3);
  hp.loss = LossKind::WeightedMultiClass;
  TrainResult result = train(data, nullptr, hp, 2);
  result.model.quantization = map;

  int correct = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const ClassProbabilities probs =
        predict_probabilities(result.model, x.data() + std::size_t(i) * 2);
    CHECK(std::abs(probs.probabilities.sum() - 1.0) < 1e-9);
    CHECK(probs.probabilities.minCoeff() >= 0.0);
    CHECK(probs.probabilities.maxCoeff() <= 1.0);
    if (probs.argmax() == labels[std::size_t(i)]) ++correct;
  }
  CHECK(correct > int(0.95 * double(n)));

  // predicted heights are bin centers
  const Eigen::VectorXd pred = predict(result.model, x);
  for (std::int64_t i = 0; i < n; ++i) {
    const double center = std::fmod(pred[i] - map.origin, map.bin_width);
    CHECK(center == doctest::Approx(map.bin_width / 2).epsilon(1e-9));
  }
}

TEST_CASE("model files reload to bit-identical predictions") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "tomoboost_model_roundtrip.json";

  TrainingSet data = random_regression(300, 4, 71);
  GbdtHyperparams hp = small_hp(18, 4, 0.17);
  const TrainResult result = train(data, nullptr, hp, 2);
  save_model(result.model, path);
  const GbdtModel loaded = load_model(path);

  CHECK(loaded.learning_rate == result.model.learning_rate);
  CHECK(loaded.base_score[0] == result.model.base_score[0]);
  const Eigen::VectorXd a = predict(result.model, data.features);
  const Eigen::VectorXd b = predict(loaded, data.features);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(path);

  GbdtModel with_quant = result.model;
  with_quant.quantization = QuantizationMap{-2.0, 0.5, 40};
  save_model(with_quant, path);
  const GbdtModel q = load_model(path);
  REQUIRE(q.quantization.has_value());
  CHECK(q.quantization->origin == -2.0);
  CHECK(q.quantization->num_classes == 40);
  fs::remove(path);
}

TEST_CASE("training contract violations") {
  TrainingSet empty;
  empty.features.resize(0, 3);
  empty.targets.resize(0);
  empty.weights.resize(0);
  CHECK_THROWS_AS(train(empty, nullptr, small_hp(1, 1)), std::invalid_argument);

  TrainingSet zero_w = random_regression(10, 2, 73);
  zero_w.weights.setZero();
  CHECK_THROWS_AS(train(zero_w, nullptr, small_hp(1, 1)), std::invalid_argument);

  TrainingSet ok = random_regression(10, 2, 73);
  const TrainResult result = train(ok, nullptr, small_hp(1, 1));
  MatrixXfRM wrong_dim = MatrixXfRM::Zero(3, 5);
  CHECK_THROWS_AS(predict(result.model, wrong_dim), std::invalid_argument);

  GbdtHyperparams bad = small_hp(1, 1);
  bad.learning_rate = 1.5;
  CHECK_THROWS_AS(train(ok, nullptr, bad), std::invalid_argument);
}
