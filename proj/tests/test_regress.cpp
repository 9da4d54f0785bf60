#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pfqi/regress.hpp"
#include "pfqi/rng.hpp"

using namespace pfqi;

namespace {

FeatureMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix x(rows.size(), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), x.row_mut(i));
  }
  return x;
}

}  // namespace

TEST_CASE("parameter validation") {
  ExtraTreesParams p;
  p.n_estimators = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.min_samples_split = 1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.min_samples_leaf = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("constant targets predict the constant everywhere") {
  auto g = rng::engine(81);
  FeatureMatrix x(50, 3);
  for (double& v : x.data) v = rng::range(g, -1.0, 1.0);
  std::vector<double> y(50, 2.5);
  ExtraTreesParams p;
  p.n_estimators = 10;
  p.seed = 3;
  ExtraTreesRegressor model(p);
  model.fit(x, y);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> probe{rng::range(g, -2.0, 2.0), rng::range(g, -2.0, 2.0),
                                    rng::range(g, -2.0, 2.0)};
    CHECK(model.predict(probe) == doctest::Approx(2.5));
  }
}

TEST_CASE("single training sample predicts its target") {
  ExtraTreesParams p;
  p.n_estimators = 5;
  ExtraTreesRegressor model(p);
  model.fit(matrix_from({{0.3, -0.7}}), {1.25});
  CHECK(model.predict(std::vector<double>{9.0, 9.0}) == doctest::Approx(1.25));
}

TEST_CASE("empty input rejected") {
  ExtraTreesParams p;
  ExtraTreesRegressor model(p);
  FeatureMatrix x(0, 2);
  CHECK_THROWS_AS(model.fit(x, {}), std::invalid_argument);
  TableRegressor table;
  CHECK_THROWS_AS(table.fit(x, {}), std::invalid_argument);
}

TEST_CASE("1-D step function is learned to MAE < 0.05") {
  auto g = rng::engine(82);
  FeatureMatrix x(1000, 1);
  std::vector<double> y(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    const double v = rng::unit(g);
    x.row_mut(i)[0] = v;
    y[i] = v > 0.5 ? 1.0 : 0.0;
  }
  ExtraTreesParams p;
  p.n_estimators = 100;
  p.min_samples_split = 5;
  p.min_samples_leaf = 2;
  p.seed = 17;
  ExtraTreesRegressor model(p);
  model.fit(x, y);
  double mae = 0.0;
  const int grid = 200;
  for (int i = 0; i < grid; ++i) {
    const double v = (i + 0.5) / grid;
    mae += std::abs(model.predict(std::vector<double>{v}) - (v > 0.5 ? 1.0 : 0.0));
  }
  mae /= grid;
  CHECK(mae < 0.05);
}

TEST_CASE("predictions stay within the training target range") {
  auto g = rng::engine(83);
  FeatureMatrix x(200, 2);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    x.row_mut(i)[0] = rng::range(g, -3.0, 3.0);
    x.row_mut(i)[1] = rng::range(g, -3.0, 3.0);
    y[i] = rng::range(g, -7.0, 4.0);
  }
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());
  ExtraTreesParams p;
  p.n_estimators = 30;
  p.seed = 4;
  ExtraTreesRegressor model(p);
  model.fit(x, y);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> probe{rng::range(g, -5.0, 5.0), rng::range(g, -5.0, 5.0)};
    const double out = model.predict(probe);
    CHECK(out >= lo - 1e-12);
    CHECK(out <= hi + 1e-12);
  }
}

TEST_CASE("same seed, params, and data give identical trees") {
  auto g = rng::engine(84);
  FeatureMatrix x(120, 2);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i) {
    x.row_mut(i)[0] = rng::range(g, 0.0, 1.0);
    x.row_mut(i)[1] = rng::range(g, 0.0, 1.0);
    y[i] = std::sin(6.0 * x.row(i)[0]) + x.row(i)[1];
  }
  ExtraTreesParams p;
  p.n_estimators = 20;
  p.seed = 123;
  ExtraTreesRegressor a(p), b(p);
  a.fit(x, y);
  b.fit(x, y);
  REQUIRE(a.trees().size() == b.trees().size());
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    REQUIRE(a.trees()[t].size() == b.trees()[t].size());
    for (std::size_t n = 0; n < a.trees()[t].size(); ++n) {
      CHECK(a.trees()[t][n].feature == b.trees()[t][n].feature);
      CHECK(a.trees()[t][n].threshold == b.trees()[t][n].threshold);
      CHECK(a.trees()[t][n].value == b.trees()[t][n].value);
    }
  }
  // Different seed changes at least one prediction on a probe set.
  p.seed = 124;
  ExtraTreesRegressor c(p);
  c.fit(x, y);
  bool differs = false;
  for (int i = 0; i < 50 && !differs; ++i) {
    const std::vector<double> probe{rng::range(g, 0.0, 1.0), rng::range(g, 0.0, 1.0)};
    differs = a.predict(probe) != c.predict(probe);
  }
  CHECK(differs);
}

TEST_CASE("every split reduces the summed within-node variance") {
  auto g = rng::engine(85);
  FeatureMatrix x(300, 3);
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    for (int c = 0; c < 3; ++c) x.row_mut(i)[c] = rng::range(g, -1.0, 1.0);
    y[i] = x.row(i)[0] * x.row(i)[1] + rng::range(g, -0.1, 0.1);
  }
  ExtraTreesParams p;
  p.n_estimators = 10;
  p.seed = 9;
  ExtraTreesRegressor model(p);
  model.fit(x, y);

  auto sse_of = [&](const std::vector<std::size_t>& idx) {
    double mean = 0.0;
    for (std::size_t i : idx) mean += y[i];
    mean /= static_cast<double>(idx.size());
    double acc = 0.0;
    for (std::size_t i : idx) acc += (y[i] - mean) * (y[i] - mean);
    return acc;
  };

  for (const auto& tree : model.trees()) {
    // Route all training samples through the tree and compare parent and
    // child squared errors at every internal node.
    std::function<void(std::int32_t, std::vector<std::size_t>)> walk =
        [&](std::int32_t node, std::vector<std::size_t> idx) {
          if (tree[static_cast<std::size_t>(node)].feature < 0 || idx.empty()) return;
          std::vector<std::size_t> left, right;
          for (std::size_t i : idx) {
            if (x.row(i)[tree[static_cast<std::size_t>(node)].feature] <
                tree[static_cast<std::size_t>(node)].threshold) {
              left.push_back(i);
            } else {
              right.push_back(i);
            }
          }
          REQUIRE(!left.empty());
          REQUIRE(!right.empty());
          CHECK(sse_of(left) + sse_of(right) <= sse_of(idx) + 1e-9);
          walk(tree[static_cast<std::size_t>(node)].left, std::move(left));
          walk(tree[static_cast<std::size_t>(node)].right, std::move(right));
        };
    std::vector<std::size_t> all(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) all[i] = i;
    walk(0, std::move(all));
  }
}

TEST_CASE("fully grown single tree memorizes distinct training points") {
  auto g = rng::engine(86);
  FeatureMatrix x(40, 2);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x.row_mut(i)[0] = static_cast<double>(i);  // well separated
    x.row_mut(i)[1] = rng::range(g, -1.0, 1.0);
    y[i] = rng::range(g, -2.0, 2.0);
  }
  ExtraTreesParams p;
  p.n_estimators = 1;
  p.min_samples_split = 2;
  p.min_samples_leaf = 1;
  p.seed = 31;
  ExtraTreesRegressor model(p);
  model.fit(x, y);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(model.predict(x.row(i)) == doctest::Approx(y[i]).epsilon(1e-12));
  }
}

TEST_CASE("table regressor averages duplicate keys, unseen keys are zero") {
  TableRegressor table;
  table.fit(matrix_from({{1.0}, {1.0}, {2.0}}), {4.0, 6.0, 1.0});
  CHECK(table.predict(std::vector<double>{1.0}) == doctest::Approx(5.0));
  CHECK(table.predict(std::vector<double>{2.0}) == doctest::Approx(1.0));
  CHECK(table.predict(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("knn regressor") {
  KnnRegressor knn(1);
  knn.fit(matrix_from({{0.0}, {1.0}, {2.0}}), {5.0, 7.0, 9.0});
  CHECK(knn.predict(std::vector<double>{0.1}) == doctest::Approx(5.0));
  CHECK(knn.predict(std::vector<double>{1.8}) == doctest::Approx(9.0));
  KnnRegressor knn2(2);
  knn2.fit(matrix_from({{0.0}, {1.0}, {2.0}}), {5.0, 7.0, 9.0});
  CHECK(knn2.predict(std::vector<double>{0.1}) == doctest::Approx(6.0));
  CHECK_THROWS_AS(KnnRegressor(0), std::invalid_argument);
}

TEST_CASE("FittedQ") {
  FittedQ q(3, 1);
  SUBCASE("zero-initialized ensembles evaluate to 0") {
    CHECK(q.value(std::vector<double>{0.5}, 0) == 0.0);
    CHECK(q.value(std::vector<double>{0.5}, 2) == 0.0);
  }
  SUBCASE("unknown action rejected") {
    CHECK_THROWS_AS(q.value(std::vector<double>{0.5}, 3), std::invalid_argument);
    CHECK_THROWS_AS(q.value(std::vector<double>{0.5}, -1), std::invalid_argument);
  }
  SUBCASE("JSON round trip preserves predictions") {
    auto g = rng::engine(87);
    FeatureMatrix x(60, 1);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      x.row_mut(i)[0] = rng::range(g, 0.0, 1.0);
      y[i] = std::cos(4.0 * x.row(i)[0]);
    }
    ExtraTreesParams p;
    p.n_estimators = 8;
    p.seed = 5;
    auto model = std::make_unique<ExtraTreesRegressor>(p);
    model->fit(x, y);
    q.set_model(1, std::move(model));
    const auto restored = FittedQ::from_json(q.to_json());
    for (int i = 0; i < 30; ++i) {
      const std::vector<double> probe{rng::range(g, 0.0, 1.0)};
      CHECK(restored->value(probe, 1) == q.value(probe, 1));
      CHECK(restored->value(probe, 0) == 0.0);
    }
  }
}
