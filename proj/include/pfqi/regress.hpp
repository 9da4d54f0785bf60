#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfqi/qfunction.hpp"

namespace pfqi {

// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  int cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, int c) : rows(r), cols(c), data(r * static_cast<std::size_t>(c)) {}

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(cols), static_cast<std::size_t>(cols)};
  }
  double* row_mut(std::size_t i) { return data.data() + i * static_cast<std::size_t>(cols); }
};

enum class MaxFeatures { kAll, kSqrt, kCount };

struct ExtraTreesParams {
  int n_estimators = 100;
  int min_samples_split = 5;
  int min_samples_leaf = 2;
  MaxFeatures max_features = MaxFeatures::kAll;
  int max_features_count = 0;  // used when max_features == kCount
  std::uint64_t seed = 0;

  void validate() const;
};

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void fit(const FeatureMatrix& x, const std::vector<double>& y) = 0;
  virtual double predict(std::span<const double> x) const = 0;
  // Bulk prediction; the default loops predict().
  virtual void predict_many(const FeatureMatrix& x, std::span<double> out) const {
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(x.row(i));
  }
  virtual std::unique_ptr<Regressor> clone() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// Extremely randomized regression trees: at each node one uniformly random
// cut point is drawn per candidate feature and the (feature, cut) pair with
// the largest variance reduction wins; ties break toward the lowest feature
// index, then the smallest cut. Leaves predict the target mean, the ensemble
// prediction is the mean over trees. Each tree draws from its own stream
// derived from (seed, tree index), so fits are reproducible and trees can be
// grown in any order.
class ExtraTreesRegressor final : public Regressor {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };

  explicit ExtraTreesRegressor(const ExtraTreesParams& params);

  void fit(const FeatureMatrix& x, const std::vector<double>& y) override;
  double predict(std::span<const double> x) const override;
  void predict_many(const FeatureMatrix& x, std::span<double> out) const override;
  std::unique_ptr<Regressor> clone() const override;

  nlohmann::json to_json() const override;
  static std::unique_ptr<ExtraTreesRegressor> from_json(const nlohmann::json& j);

  const std::vector<std::vector<Node>>& trees() const { return trees_; }
  const ExtraTreesParams& params() const { return params_; }

 private:
  ExtraTreesParams params_;
  std::vector<std::vector<Node>> trees_;
};

// Exact keyed lookup for finite state spaces: predictions are per-key target
// means, unseen keys return 0. Turns fitted Q-iteration into exact value
// iteration on fully covered tabular datasets.
class TableRegressor final : public Regressor {
 public:
  void fit(const FeatureMatrix& x, const std::vector<double>& y) override;
  double predict(std::span<const double> x) const override;
  std::unique_ptr<Regressor> clone() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<TableRegressor> from_json(const nlohmann::json& j);

 private:
  std::map<std::vector<double>, double> table_;
};

// k-nearest-neighbor mean with Euclidean distance; distance ties resolve by
// sample index.
class KnnRegressor final : public Regressor {
 public:
  explicit KnnRegressor(int k);
  void fit(const FeatureMatrix& x, const std::vector<double>& y) override;
  double predict(std::span<const double> x) const override;
  std::unique_ptr<Regressor> clone() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<KnnRegressor> from_json(const nlohmann::json& j);

 private:
  int k_;
  FeatureMatrix x_;
  std::vector<double> y_;
};

struct RegressorConfig {
  std::string kind = "extra_trees";  // extra_trees | table | knn
  ExtraTreesParams extra_trees;
  int knn_k = 5;
};

std::unique_ptr<Regressor> make_regressor(const RegressorConfig& cfg, std::uint64_t seed);
std::unique_ptr<Regressor> regressor_from_json(const nlohmann::json& j);

// How a Q-function is laid onto regressors:
//   kActionFeature - one regressor over (state ++ action vector). All
//       actions share tree structure, so near-ties collapse to the same
//       leaves instead of independent per-ensemble noise; this is the
//       classic tree-based fitted Q-iteration layout.
//   kPerAction     - one regressor per action index; the max over actions
//       evaluates |A| separate ensembles.
enum class QRepresentation { kActionFeature, kPerAction };

// Q-function backed by fitted regressors. Unfitted models (including the
// zero-initialized Q^(0)) evaluate to 0.
class FittedQ final : public QFunction {
 public:
  // Per-action layout.
  FittedQ(int n_actions, int feature_dim);
  // Action-feature layout: queries append the action's vector to the state.
  FittedQ(std::vector<std::vector<double>> action_set, int feature_dim);

  int n_actions() const override;
  int feature_dim() const { return feature_dim_; }
  QRepresentation representation() const { return repr_; }
  const std::vector<std::vector<double>>& action_set() const { return action_set_; }
  double value(std::span<const double> state, int action) const override;
  void value_many(std::span<const double> states, int dim, int action,
                  std::span<double> out) const override;

  // Per-action layout: one model per action index.
  void set_model(int action, std::unique_ptr<Regressor> model);
  // Action-feature layout: the single shared model.
  void set_shared_model(std::unique_ptr<Regressor> model);
  std::unique_ptr<FittedQ> clone() const;
  const Regressor* model(int action) const { return models_[action].get(); }

  nlohmann::json to_json() const;
  static std::unique_ptr<FittedQ> from_json(const nlohmann::json& j);

 private:
  QRepresentation repr_;
  int feature_dim_;
  std::vector<std::vector<double>> action_set_;      // kActionFeature only
  std::vector<std::unique_ptr<Regressor>> models_;   // size |A|, or 1 shared
};

}  // namespace pfqi
