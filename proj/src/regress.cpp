#include "pfqi/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pfqi/rng.hpp"

namespace pfqi {

void ExtraTreesParams::validate() const {
  if (n_estimators < 1) throw std::invalid_argument("extra-trees: n_estimators must be >= 1");
  if (min_samples_split < 2) {
    throw std::invalid_argument("extra-trees: min_samples_split must be >= 2");
  }
  if (min_samples_leaf < 1) throw std::invalid_argument("extra-trees: min_samples_leaf must be >= 1");
  if (max_features == MaxFeatures::kCount && max_features_count < 1) {
    throw std::invalid_argument("extra-trees: max_features count must be >= 1");
  }
}

ExtraTreesRegressor::ExtraTreesRegressor(const ExtraTreesParams& params) : params_(params) {
  params_.validate();
}

namespace {

// Column-store tree builder: features and targets live in contiguous arrays
// that are partitioned in place, so every node pass is a unit-stride scan.
struct TreeBuilder {
  const ExtraTreesParams& params;
  std::mt19937_64 rng;
  int n_features = 0;
  std::vector<std::vector<double>> cols;  // one array per feature
  std::vector<double> ycol;
  std::vector<ExtraTreesRegressor::Node> nodes;

  int n_candidate_features() const {
    switch (params.max_features) {
      case MaxFeatures::kAll:
        return n_features;
      case MaxFeatures::kSqrt:
        return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n_features))));
      case MaxFeatures::kCount:
        return std::min(n_features, params.max_features_count);
    }
    return n_features;
  }

  std::int32_t build(std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::int32_t id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();

    double sum_y = 0.0, sq_y = 0.0;
    bool constant_y = true;
    for (std::size_t i = begin; i < end; ++i) {
      sum_y += ycol[i];
      sq_y += ycol[i] * ycol[i];
      constant_y = constant_y && ycol[i] == ycol[begin];
    }
    if (n < static_cast<std::size_t>(params.min_samples_split) ||
        n < 2 * static_cast<std::size_t>(params.min_samples_leaf) || constant_y) {
      nodes[id].value = sum_y / static_cast<double>(n);
      return id;
    }

    // Candidate features in ascending index order so that both the RNG
    // consumption and tie-breaking are deterministic.
    int feature_buf[64];
    std::vector<int> feature_vec;
    int* features = feature_buf;
    int n_cand = n_features;
    if (n_features > 64) {
      feature_vec.resize(static_cast<std::size_t>(n_features));
      features = feature_vec.data();
    }
    for (int f = 0; f < n_features; ++f) features[f] = f;
    const int want = n_candidate_features();
    if (want < n_features) {
      for (int i = 0; i < want; ++i) {
        const int j = i + rng::index(rng, n_features - i);
        std::swap(features[i], features[j]);
      }
      n_cand = want;
      std::sort(features, features + n_cand);
    }

    int best_feature = -1;
    double best_cut = 0.0;
    double best_score = -1.0;
    const double parent_sse = sq_y - sum_y * sum_y / static_cast<double>(n);

    for (int c = 0; c < n_cand; ++c) {
      const int f = features[c];
      const double* xf = cols[static_cast<std::size_t>(f)].data();
      double lo = xf[begin], hi = xf[begin];
      for (std::size_t i = begin + 1; i < end; ++i) {
        lo = std::min(lo, xf[i]);
        hi = std::max(hi, xf[i]);
      }
      if (!(hi > lo)) continue;  // constant feature, no draw
      const double cut = rng::range(rng, lo, hi);
      std::size_t n_left = 0;
      double sum_l = 0.0, sq_l = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        if (xf[i] < cut) {
          ++n_left;
          sum_l += ycol[i];
          sq_l += ycol[i] * ycol[i];
        }
      }
      const std::size_t n_right = n - n_left;
      if (n_left < static_cast<std::size_t>(params.min_samples_leaf) ||
          n_right < static_cast<std::size_t>(params.min_samples_leaf)) {
        continue;
      }
      const double sum_r = sum_y - sum_l;
      const double sq_r = sq_y - sq_l;
      const double child_sse = (sq_l - sum_l * sum_l / static_cast<double>(n_left)) +
                               (sq_r - sum_r * sum_r / static_cast<double>(n_right));
      const double score = parent_sse - child_sse;
      if (score > best_score) {
        best_score = score;
        best_feature = f;
        best_cut = cut;
      }
    }

    if (best_feature < 0) {
      nodes[id].value = sum_y / static_cast<double>(n);
      return id;
    }

    // Two-pointer partition applied to every column and the targets.
    const double* xb = cols[static_cast<std::size_t>(best_feature)].data();
    std::size_t left = begin, right = end;
    while (left < right) {
      if (xb[left] < best_cut) {
        ++left;
      } else {
        --right;
        for (auto& col : cols) std::swap(col[left], col[right]);
        std::swap(ycol[left], ycol[right]);
      }
    }

    nodes[id].feature = best_feature;
    nodes[id].threshold = best_cut;
    nodes[id].left = build(begin, left);
    nodes[id].right = build(left, end);
    return id;
  }
};

}  // namespace

void ExtraTreesRegressor::fit(const FeatureMatrix& x, const std::vector<double>& y) {
  if (x.rows == 0 || x.rows != y.size()) {
    throw std::invalid_argument("extra-trees: need a non-empty sample with |X| == |y|");
  }
  // Transpose once; each tree partitions its own working copy.
  std::vector<std::vector<double>> master(static_cast<std::size_t>(x.cols));
  for (int f = 0; f < x.cols; ++f) {
    auto& col = master[static_cast<std::size_t>(f)];
    col.resize(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) col[i] = x.row(i)[f];
  }
  trees_.assign(static_cast<std::size_t>(params_.n_estimators), {});
  for (int t = 0; t < params_.n_estimators; ++t) {
    TreeBuilder builder{params_, rng::engine(rng::derive(params_.seed, rng::kTree, t)),
                        x.cols, master, y, {}};
    builder.nodes.reserve(2 * x.rows);
    builder.build(0, x.rows);
    trees_[static_cast<std::size_t>(t)] = std::move(builder.nodes);
  }
}

double ExtraTreesRegressor::predict(std::span<const double> x) const {
  if (trees_.empty()) throw std::logic_error("extra-trees: predict before fit");
  double acc = 0.0;
  for (const auto& tree : trees_) {
    std::int32_t node = 0;
    while (tree[node].feature >= 0) {
      node = x[tree[node].feature] < tree[node].threshold ? tree[node].left : tree[node].right;
    }
    acc += tree[node].value;
  }
  return acc / static_cast<double>(trees_.size());
}

void ExtraTreesRegressor::predict_many(const FeatureMatrix& x, std::span<double> out) const {
  if (trees_.empty()) throw std::logic_error("extra-trees: predict before fit");
  std::fill(out.begin(), out.end(), 0.0);
  // Tree-major traversal keeps one node array hot across all rows.
  for (const auto& tree : trees_) {
    const Node* nodes = tree.data();
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double* row = x.data.data() + i * static_cast<std::size_t>(x.cols);
      std::int32_t node = 0;
      while (nodes[node].feature >= 0) {
        node = row[nodes[node].feature] < nodes[node].threshold ? nodes[node].left
                                                                : nodes[node].right;
      }
      out[i] += nodes[node].value;
    }
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (double& v : out) v *= inv;
}

std::unique_ptr<Regressor> ExtraTreesRegressor::clone() const {
  return std::make_unique<ExtraTreesRegressor>(*this);
}

nlohmann::json ExtraTreesRegressor::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json feature = nlohmann::json::array();
    nlohmann::json threshold = nlohmann::json::array();
    nlohmann::json left = nlohmann::json::array();
    nlohmann::json right = nlohmann::json::array();
    nlohmann::json value = nlohmann::json::array();
    for (const Node& n : tree) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", std::move(feature)},
                     {"threshold", std::move(threshold)},
                     {"left", std::move(left)},
                     {"right", std::move(right)},
                     {"value", std::move(value)}});
  }
  return {{"kind", "extra_trees"},
          {"n_estimators", params_.n_estimators},
          {"min_samples_split", params_.min_samples_split},
          {"min_samples_leaf", params_.min_samples_leaf},
          {"seed", params_.seed},
          {"trees", std::move(trees)}};
}

std::unique_ptr<ExtraTreesRegressor> ExtraTreesRegressor::from_json(const nlohmann::json& j) {
  ExtraTreesParams params;
  params.n_estimators = j.at("n_estimators").get<int>();
  params.min_samples_split = j.at("min_samples_split").get<int>();
  params.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  params.seed = j.at("seed").get<std::uint64_t>();
  auto out = std::make_unique<ExtraTreesRegressor>(params);
  for (const auto& tree : j.at("trees")) {
    std::vector<Node> nodes(tree.at("feature").size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      nodes[i].feature = tree.at("feature").at(i).get<int>();
      nodes[i].threshold = tree.at("threshold").at(i).get<double>();
      nodes[i].left = tree.at("left").at(i).get<std::int32_t>();
      nodes[i].right = tree.at("right").at(i).get<std::int32_t>();
      nodes[i].value = tree.at("value").at(i).get<double>();
    }
    out->trees_.push_back(std::move(nodes));
  }
  return out;
}

void TableRegressor::fit(const FeatureMatrix& x, const std::vector<double>& y) {
  if (x.rows == 0 || x.rows != y.size()) {
    throw std::invalid_argument("table regressor: need a non-empty sample with |X| == |y|");
  }
  std::map<std::vector<double>, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto key = std::vector<double>(x.row(i).begin(), x.row(i).end());
    auto& slot = acc[std::move(key)];
    slot.first += y[i];
    slot.second += 1;
  }
  table_.clear();
  for (auto& [key, slot] : acc) table_[key] = slot.first / static_cast<double>(slot.second);
}

double TableRegressor::predict(std::span<const double> x) const {
  auto it = table_.find(std::vector<double>(x.begin(), x.end()));
  return it == table_.end() ? 0.0 : it->second;
}

std::unique_ptr<Regressor> TableRegressor::clone() const {
  return std::make_unique<TableRegressor>(*this);
}

nlohmann::json TableRegressor::to_json() const {
  nlohmann::json keys = nlohmann::json::array();
  nlohmann::json values = nlohmann::json::array();
  for (const auto& [key, value] : table_) {
    keys.push_back(key);
    values.push_back(value);
  }
  return {{"kind", "table"}, {"keys", std::move(keys)}, {"values", std::move(values)}};
}

std::unique_ptr<TableRegressor> TableRegressor::from_json(const nlohmann::json& j) {
  auto out = std::make_unique<TableRegressor>();
  const auto& keys = j.at("keys");
  const auto& values = j.at("values");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out->table_[keys.at(i).get<std::vector<double>>()] = values.at(i).get<double>();
  }
  return out;
}

KnnRegressor::KnnRegressor(int k) : k_(k) {
  if (k < 1) throw std::invalid_argument("knn regressor: k must be >= 1");
}

void KnnRegressor::fit(const FeatureMatrix& x, const std::vector<double>& y) {
  if (x.rows == 0 || x.rows != y.size()) {
    throw std::invalid_argument("knn regressor: need a non-empty sample with |X| == |y|");
  }
  x_ = x;
  y_ = y;
}

double KnnRegressor::predict(std::span<const double> x) const {
  if (y_.empty()) throw std::logic_error("knn regressor: predict before fit");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), y_.size());
  std::vector<std::pair<double, std::size_t>> dist(y_.size());
  for (std::size_t i = 0; i < y_.size(); ++i) {
    double acc = 0.0;
    auto row = x_.row(i);
    for (int c = 0; c < x_.cols; ++c) {
      const double d = row[c] - x[c];
      acc += d * d;
    }
    dist[i] = {acc, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += y_[dist[i].second];
  return acc / static_cast<double>(k);
}

std::unique_ptr<Regressor> KnnRegressor::clone() const {
  return std::make_unique<KnnRegressor>(*this);
}

nlohmann::json KnnRegressor::to_json() const {
  return {{"kind", "knn"},
          {"k", k_},
          {"cols", x_.cols},
          {"x", x_.data},
          {"y", y_}};
}

std::unique_ptr<KnnRegressor> KnnRegressor::from_json(const nlohmann::json& j) {
  auto out = std::make_unique<KnnRegressor>(j.at("k").get<int>());
  out->y_ = j.at("y").get<std::vector<double>>();
  out->x_.cols = j.at("cols").get<int>();
  out->x_.data = j.at("x").get<std::vector<double>>();
  out->x_.rows = out->y_.size();
  return out;
}

std::unique_ptr<Regressor> make_regressor(const RegressorConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == "extra_trees") {
    ExtraTreesParams params = cfg.extra_trees;
    params.seed = seed;
    return std::make_unique<ExtraTreesRegressor>(params);
  }
  if (cfg.kind == "table") return std::make_unique<TableRegressor>();
  if (cfg.kind == "knn") return std::make_unique<KnnRegressor>(cfg.knn_k);
  throw std::invalid_argument("make_regressor: unknown kind '" + cfg.kind + "'");
}

std::unique_ptr<Regressor> regressor_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "extra_trees") return ExtraTreesRegressor::from_json(j);
  if (kind == "table") return TableRegressor::from_json(j);
  if (kind == "knn") return KnnRegressor::from_json(j);
  throw std::invalid_argument("regressor_from_json: unknown kind '" + kind + "'");
}

FittedQ::FittedQ(int n_actions, int feature_dim)
    : repr_(QRepresentation::kPerAction), feature_dim_(feature_dim) {
  if (n_actions < 1) throw std::invalid_argument("FittedQ: need at least one action");
  models_.resize(static_cast<std::size_t>(n_actions));
}

FittedQ::FittedQ(std::vector<std::vector<double>> action_set, int feature_dim)
    : repr_(QRepresentation::kActionFeature),
      feature_dim_(feature_dim),
      action_set_(std::move(action_set)) {
  if (action_set_.empty()) throw std::invalid_argument("FittedQ: need at least one action");
  models_.resize(1);
}

int FittedQ::n_actions() const {
  return repr_ == QRepresentation::kPerAction ? static_cast<int>(models_.size())
                                              : static_cast<int>(action_set_.size());
}

double FittedQ::value(std::span<const double> state, int action) const {
  if (action < 0 || action >= n_actions()) {
    throw std::invalid_argument("FittedQ: action index out of range");
  }
  if (repr_ == QRepresentation::kPerAction) {
    const Regressor* model = models_[static_cast<std::size_t>(action)].get();
    return model == nullptr ? 0.0 : model->predict(state);
  }
  const Regressor* model = models_[0].get();
  if (model == nullptr) return 0.0;
  thread_local std::vector<double> scratch;
  scratch.assign(state.begin(), state.end());
  const auto& av = action_set_[static_cast<std::size_t>(action)];
  scratch.insert(scratch.end(), av.begin(), av.end());
  return model->predict(scratch);
}

void FittedQ::value_many(std::span<const double> states, int dim, int action,
                         std::span<double> out) const {
  if (action < 0 || action >= n_actions()) {
    throw std::invalid_argument("FittedQ: action index out of range");
  }
  const std::size_t n = out.size();
  if (repr_ == QRepresentation::kPerAction) {
    const Regressor* model = models_[static_cast<std::size_t>(action)].get();
    if (model == nullptr) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    FeatureMatrix x(n, dim);
    std::copy(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(n * static_cast<std::size_t>(dim)), x.data.begin());
    model->predict_many(x, out);
    return;
  }
  const Regressor* model = models_[0].get();
  if (model == nullptr) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const auto& av = action_set_[static_cast<std::size_t>(action)];
  const int adim = static_cast<int>(av.size());
  FeatureMatrix x(n, dim + adim);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = x.row_mut(i);
    const double* src = states.data() + i * static_cast<std::size_t>(dim);
    std::copy(src, src + dim, dst);
    std::copy(av.begin(), av.end(), dst + dim);
  }
  model->predict_many(x, out);
}

void FittedQ::set_model(int action, std::unique_ptr<Regressor> model) {
  if (repr_ != QRepresentation::kPerAction) {
    throw std::logic_error("FittedQ: set_model requires the per-action layout");
  }
  models_.at(static_cast<std::size_t>(action)) = std::move(model);
}

void FittedQ::set_shared_model(std::unique_ptr<Regressor> model) {
  if (repr_ != QRepresentation::kActionFeature) {
    throw std::logic_error("FittedQ: set_shared_model requires the action-feature layout");
  }
  models_[0] = std::move(model);
}

std::unique_ptr<FittedQ> FittedQ::clone() const {
  auto out = repr_ == QRepresentation::kPerAction
                 ? std::make_unique<FittedQ>(n_actions(), feature_dim_)
                 : std::make_unique<FittedQ>(action_set_, feature_dim_);
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i] != nullptr) out->models_[i] = models_[i]->clone();
  }
  return out;
}

nlohmann::json FittedQ::to_json() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& model : models_) {
    models.push_back(model == nullptr ? nlohmann::json(nullptr) : model->to_json());
  }
  return {{"feature_dim", feature_dim_},
          {"n_actions", n_actions()},
          {"representation",
           repr_ == QRepresentation::kPerAction ? "per_action" : "action_feature"},
          {"action_set", action_set_},
          {"models", std::move(models)}};
}

std::unique_ptr<FittedQ> FittedQ::from_json(const nlohmann::json& j) {
  const std::string repr = j.value("representation", "per_action");
  std::unique_ptr<FittedQ> out;
  if (repr == "per_action") {
    out = std::make_unique<FittedQ>(j.at("n_actions").get<int>(), j.at("feature_dim").get<int>());
  } else {
    out = std::make_unique<FittedQ>(
        j.at("action_set").get<std::vector<std::vector<double>>>(),
        j.at("feature_dim").get<int>());
  }
  const auto& models = j.at("models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models.at(i).is_null()) out->models_[i] = regressor_from_json(models.at(i));
  }
  return out;
}

}  // namespace pfqi
