// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dsa/config.hpp"
#include "dsa/cost.hpp"
#include "dsa/error.hpp"
#include "dsa/metrics.hpp"
#include "dsa/oracle.hpp"
#include "dsa/trace.hpp"

namespace dsa {

inline constexpr double kDefaultConfidenceThreshold = 0.6;
inline constexpr int kDefaultDecisionWindow = 3;
inline constexpr double kRidgeLambda = 1e-6;

// One fixed configuration per category, with an optional wildcard entry
// covering every category (the category-oblivious policy).
struct StaticPolicy {
  std::string detector;
  std::map<int, ApproxConfig> per_category;
  std::optional<ApproxConfig> wildcard;

  // Runtime choice for a frame whose categories are known in advance: the
  // most conservative (lowest-FPS) mapped configuration among the categories
  // present; the wildcard, then the baseline, when nothing applies.
  ApproxConfig select(const FrameRecord& frame, const CostModel& cost,
                      const ConfigGrid& grid) const {
    std::optional<ApproxConfig> chosen;
    for (const auto& [category, config] : per_category) {
      if (!frame.has_category(category)) continue;
      if (!chosen || cost.fps(config) < cost.fps(*chosen)) chosen = config;
    }
    if (chosen) return *chosen;
    if (wildcard) return *wildcard;
    return grid.baseline();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["policy"] = "static";
    j["detector"] = detector;
    nlohmann::ordered_json mapping;
    if (wildcard)
      mapping["any"] = {wildcard->image_height, wildcard->proposal_count};
    for (const auto& [category, config] : per_category)
      mapping[std::to_string(category)] = {config.image_height,
                                           config.proposal_count};
    j["mapping"] = std::move(mapping);
    return j;
  }

  static StaticPolicy from_json(const nlohmann::json& j) {
    StaticPolicy policy;
    try {
      policy.detector = j.value("detector", std::string());
      for (const auto& [key, value] : j.at("mapping").items()) {
        ApproxConfig config{value.at(0).get<int>(), value.at(1).get<int>()};
        if (key == "any")
          policy.wildcard = config;
        else
          policy.per_category[std::stoi(key)] = config;
      }
    } catch (const std::exception& e) {
      throw ValidationError(std::string("malformed static policy: ") +
                            e.what());
    }
    return policy;
  }

  void save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write policy file: " + path);
    out << to_json().dump(2) << "\n";
  }

  static StaticPolicy load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open policy file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("policy file " + path + " is not valid JSON: " +
                            e.what());
    }
    return from_json(j);
  }
};

// FPS-maximizing configuration whose training mAP stays at or above the
// baseline's, for one category or pooled over all of them (nullopt scope).
inline ApproxConfig fit_static_config(const DetectionTrace& train,
                                      const CostModel& cost,
                                      std::optional<int> scope,
                                      double iou_threshold) {
  train.require_dense("fit_static");
  if (train.frame_count() == 0)
    throw ValidationError("fit_static: training trace has no frames");
  auto scope_map = [&](const ApproxConfig& c) {
    return scope ? category_map(train, c, *scope, iou_threshold)
                 : pooled_map(train, c, iou_threshold);
  };
  auto baseline_map = scope_map(train.grid.baseline());
  if (!baseline_map)
    throw ValidationError(
        scope ? "fit_static: category " + std::to_string(*scope) +
                    " does not occur in the training trace"
              : "fit_static: training trace has no ground truth");
  std::vector<ApproxConfig> feasible;
  for (const ApproxConfig& c : train.grid.configs()) {
    auto map = scope_map(c);
    if (map && *map >= *baseline_map) feasible.push_back(c);
  }
  if (feasible.empty()) return train.grid.baseline();
  return detail::fastest_config(feasible, cost);
}

inline StaticPolicy fit_static(const DetectionTrace& train,
                               const CostModel& cost, std::optional<int> scope,
                               double iou_threshold) {
  StaticPolicy policy;
  policy.detector = cost.detector();
  ApproxConfig config = fit_static_config(train, cost, scope, iou_threshold);
  if (scope)
    policy.per_category[*scope] = config;
  else
    policy.wildcard = config;
  return policy;
}

// Wildcard plus one entry per training category.
inline StaticPolicy fit_static_all(const DetectionTrace& train,
                                   const CostModel& cost,
                                   double iou_threshold) {
  StaticPolicy policy;
  policy.detector = cost.detector();
  policy.wildcard = fit_static_config(train, cost, std::nullopt, iou_threshold);
  for (int category : train.categories())
    policy.per_category[category] =
        fit_static_config(train, cost, category, iou_threshold);
  return policy;
}

// Shape summary of the trusted detections of one frame. All components are
// normalized into [0, 1]: box dimensions by the frame dimensions, the count
// by a cap of 50.
struct FeatureVector {
  double min_roi_height = 0;
  double min_roi_width = 0;
  double max_roi_height = 0;
  double max_roi_width = 0;
  double roi_count = 0;

  std::array<double, 5> as_array() const {
    return {min_roi_height, min_roi_width, max_roi_height, max_roi_width,
            roi_count};
  }
};

inline constexpr double kRoiCountCap = 50.0;

// Nullopt when no detection clears the confidence gate; the caller then
// falls back to the baseline configuration.
inline std::optional<FeatureVector> extract_features(
    const std::vector<Detection>& dets, double frame_width,
    double frame_height, double score_threshold) {
  FeatureVector f;
  std::size_t n = 0;
  for (const auto& d : dets) {
    if (d.score < score_threshold) continue;
    const double h = d.box.height() / frame_height;
    const double w = d.box.width() / frame_width;
    if (n == 0) {
      f.min_roi_height = f.max_roi_height = h;
      f.min_roi_width = f.max_roi_width = w;
    } else {
      f.min_roi_height = std::min(f.min_roi_height, h);
      f.max_roi_height = std::max(f.max_roi_height, h);
      f.min_roi_width = std::min(f.min_roi_width, w);
      f.max_roi_width = std::max(f.max_roi_width, w);
    }
    ++n;
  }
  if (n == 0) return std::nullopt;
  f.roi_count = std::min(static_cast<double>(n), kRoiCountCap) / kRoiCountCap;
  f.min_roi_height = std::clamp(f.min_roi_height, 0.0, 1.0);
  f.min_roi_width = std::clamp(f.min_roi_width, 0.0, 1.0);
  f.max_roi_height = std::clamp(f.max_roi_height, 0.0, 1.0);
  f.max_roi_width = std::clamp(f.max_roi_width, 0.0, 1.0);
  return f;
}

inline constexpr std::size_t kBasisSize = 21;

// [1, f1, f1^2, f1^3, f1^4, f2, ..., f5^4] in fixed order.
inline std::array<double, kBasisSize> polynomial_expand(
    const FeatureVector& f) {
  std::array<double, kBasisSize> basis;
  basis[0] = 1.0;
  std::size_t i = 1;
  for (double feature : f.as_array()) {
    double power = 1.0;
    for (int d = 1; d <= 4; ++d) {
      power *= feature;
      basis[i++] = power;
    }
  }
  return basis;
}

using RegressorWeights = std::array<double, kBasisSize>;

inline double predict(const RegressorWeights& weights,
                      const FeatureVector& f) {
  const auto basis = polynomial_expand(f);
  double sum = 0.0;
  for (std::size_t i = 0; i < kBasisSize; ++i) sum += weights[i] * basis[i];
  return sum;
}

// Least squares on the expanded basis. The ridge term conditions the normal
// equations; conjugate-gradient refinement preconditioned by the ridge
// factor then removes its bias, so targets inside the basis span are
// recovered to machine precision and rank-deficient sample sets stay
// bounded instead of crashing.
inline RegressorWeights fit_regressor(
    const std::vector<std::pair<FeatureVector, double>>& samples) {
  if (samples.empty())
    throw ValidationError("fit_regressor: no samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, kBasisSize);
  Eigen::VectorXd targets(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto basis = polynomial_expand(samples[r].first);
    for (std::size_t c = 0; c < kBasisSize; ++c)
      design(r, static_cast<Eigen::Index>(c)) = basis[c];
    targets(r) = samples[r].second;
  }

  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd rhs = design.transpose() * targets;
  Eigen::MatrixXd conditioned = gram;
  conditioned.diagonal().array() += kRidgeLambda;
  const Eigen::LLT<Eigen::MatrixXd> llt(conditioned);

  Eigen::VectorXd w = llt.solve(rhs);
  Eigen::VectorXd residual = rhs - gram * w;
  Eigen::VectorXd z = llt.solve(residual);
  Eigen::VectorXd direction = z;
  double rho = residual.dot(z);
  const double tolerance = 1e-13 * (1.0 + rhs.norm());
  for (int iter = 0; iter < 100 && residual.norm() > tolerance; ++iter) {
    const Eigen::VectorXd gram_dir = gram * direction;
    const double curvature = direction.dot(gram_dir);
    if (!(curvature > 0.0)) break;
    const double alpha = rho / curvature;
    w += alpha * direction;
    residual -= alpha * gram_dir;
    z = llt.solve(residual);
    const double rho_next = residual.dot(z);
    direction = z + (rho_next / rho) * direction;
    rho = rho_next;
  }

  RegressorWeights weights;
  for (std::size_t i = 0; i < kBasisSize; ++i)
    weights[i] = w(static_cast<Eigen::Index>(i));
  return weights;
}

// The trained dynamic controller: two regressors over the polynomial basis
// (image height and proposal count), the confidence gate, and the decision
// window length.
struct AutoFocusModel {
  RegressorWeights height_weights{};
  RegressorWeights proposal_weights{};
  double confidence_threshold = kDefaultConfidenceThreshold;
  int decision_window = kDefaultDecisionWindow;

  double predict_height(const FeatureVector& f) const {
    return predict(height_weights, f);
  }
  double predict_proposals(const FeatureVector& f) const {
    return predict(proposal_weights, f);
  }

  void save(std::ostream& out) const {
    out.precision(17);
    out << "dsa-autofocus v1\n";
    out << "basis per-feature-powers-1..4-plus-bias\n";
    out << "features 5\n";
    out << "threshold " << confidence_threshold << "\n";
    out << "window " << decision_window << "\n";
    out << "height_weights";
    for (double v : height_weights) out << " " << v;
    out << "\nproposal_weights";
    for (double v : proposal_weights) out << " " << v;
    out << "\n";
  }

  static AutoFocusModel load(std::istream& in) {
    AutoFocusModel model;
    std::string line;
    if (!std::getline(in, line) || line != "dsa-autofocus v1")
      throw ValidationError("model file: missing \"dsa-autofocus v1\" header");
    bool have_height = false, have_proposals = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string key;
      row >> key;
      if (key == "basis") {
        std::string basis;
        row >> basis;
        if (basis != "per-feature-powers-1..4-plus-bias")
          throw ValidationError("model file: unsupported basis \"" + basis +
                                "\"");
      } else if (key == "features") {
        int n = 0;
        row >> n;
        if (n != 5)
          throw ValidationError("model file: expected 5 features");
      } else if (key == "threshold") {
        row >> model.confidence_threshold;
      } else if (key == "window") {
        row >> model.decision_window;
      } else if (key == "height_weights" || key == "proposal_weights") {
        RegressorWeights& weights =
            key == "height_weights" ? model.height_weights
                                    : model.proposal_weights;
        for (double& v : weights)
          if (!(row >> v))
            throw ValidationError("model file: " + key + " needs " +
                                  std::to_string(kBasisSize) + " values");
        (key == "height_weights" ? have_height : have_proposals) = true;
      } else {
        throw ValidationError("model file: unknown key \"" + key + "\"");
      }
      if (row.fail() && key != "height_weights" && key != "proposal_weights")
        throw ValidationError("model file: malformed line \"" + line + "\"");
    }
    if (!have_height || !have_proposals)
      throw ValidationError("model file: missing weight vectors");
    for (double v : model.height_weights)
      if (!std::isfinite(v))
        throw ValidationError("model file: non-finite height weight");
    for (double v : model.proposal_weights)
      if (!std::isfinite(v))
        throw ValidationError("model file: non-finite proposal weight");
    if (model.decision_window < 1)
      throw ValidationError("model file: window must be >= 1");
    if (model.confidence_threshold < 0.0 || model.confidence_threshold > 1.0)
      throw ValidationError("model file: threshold must be in [0, 1]");
    return model;
  }

  void save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write model file: " + path);
    save(out);
  }

  static AutoFocusModel load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file: " + path);
    return load(in);
  }
};

struct AutoFocusTrainParams {
  double confidence_threshold = kDefaultConfidenceThreshold;
  int decision_window = kDefaultDecisionWindow;
  double iou_threshold = kDefaultIouThreshold;
};

// Supervision: per training frame with a defined feature vector (features
// from the baseline configuration's outputs, gated at the confidence
// threshold), the target is the frame's oracle-optimal configuration.
inline AutoFocusModel train_autofocus(const DetectionTrace& train,
                                      const CostModel& cost,
                                      const AutoFocusTrainParams& params) {
  train.require_dense("train_autofocus");
  std::vector<std::pair<FeatureVector, double>> height_samples;
  std::vector<std::pair<FeatureVector, double>> proposal_samples;
  train.for_each_frame([&](const FrameRecord& f) {
    auto features =
        extract_features(f.outputs_for(train.grid.baseline()), f.width,
                         f.height, params.confidence_threshold);
    if (!features) return;
    ApproxConfig label =
        frame_optimal_config(f, train.grid, cost, params.iou_threshold);
    height_samples.emplace_back(*features,
                                static_cast<double>(label.image_height));
    proposal_samples.emplace_back(*features,
                                  static_cast<double>(label.proposal_count));
  });
  if (height_samples.empty())
    throw ValidationError(
        "train_autofocus: no training frame has detections above the "
        "confidence threshold");
  AutoFocusModel model;
  model.confidence_threshold = params.confidence_threshold;
  model.decision_window = params.decision_window;
  model.height_weights = fit_regressor(height_samples);
  model.proposal_weights = fit_regressor(proposal_samples);
  return model;
}

// Per-stream controller state: the configuration currently held, how many
// frames of the decision window remain, and the most recent completed
// frame's observed outputs.
struct ControllerState {
  ApproxConfig current;
  int frames_remaining = 0;
  bool has_last_frame = false;
  std::vector<Detection> last_detections;
  double last_frame_width = 0;
  double last_frame_height = 0;
  std::size_t prediction_count = 0;

  static ControllerState initial(const ConfigGrid& grid) {
    ControllerState state;
    state.current = grid.baseline();
    return state;
  }

  void observe(const FrameRecord& frame,
               const std::vector<Detection>& observed) {
    has_last_frame = true;
    last_detections = observed;
    last_frame_width = frame.width;
    last_frame_height = frame.height;
  }
};

// Picks the configuration for the next frame. Within a decision window the
// held configuration is reused without re-prediction. Cold starts and
// frames whose detections all fail the confidence gate fall back to the
// baseline and re-decide on the next frame.
inline ApproxConfig autofocus_decide(ControllerState& state,
                                     const AutoFocusModel& model,
                                     const ConfigGrid& grid) {
  if (state.frames_remaining > 0) {
    --state.frames_remaining;
    return state.current;
  }
  std::optional<FeatureVector> features;
  if (state.has_last_frame)
    features =
        extract_features(state.last_detections, state.last_frame_width,
                         state.last_frame_height, model.confidence_threshold);
  if (!features) {
    state.current = grid.baseline();
    state.frames_remaining = 0;
    return state.current;
  }
  ++state.prediction_count;
  state.current = grid.nearest(model.predict_height(*features),
                               model.predict_proposals(*features));
  state.frames_remaining = model.decision_window - 1;
  return state.current;
}

}  // namespace dsa
