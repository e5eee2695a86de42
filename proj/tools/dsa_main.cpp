// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synthetic trace generation, grid evaluation,
// oracle limit studies, policy training, stream simulation, and comparison
// reports. Exit codes: 0 success, 2 input validation failure, 3 degenerate
// metric condition.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsa/dsa.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDegenerate = 3;

struct GlobalOpts {
  std::string cost_model = "faster-rcnn";
  double iou_threshold = dsa::kDefaultIouThreshold;
  std::uint64_t seed = 0;
  std::string out;
  double overhead_ms = dsa::kDefaultOverheadMs;

  dsa::CostModel cost() const {
    return dsa::CostModel::resolve(cost_model, overhead_ms);
  }
  const std::string& require_out() const {
    if (out.empty())
      throw dsa::ValidationError("--out is required for this command");
    return out;
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw dsa::ValidationError("cannot write output file: " + path);
  file << content;
}

struct GenOpts {
  std::string scenario;
  std::string split_override;
  double theta = 16.0;
  double clutter = 0.0;
  double jitter = 0.0;
};

int run_gen(const GlobalOpts& g, const GenOpts& o) {
  dsa::SceneSpec scene = dsa::SceneSpec::load_file(o.scenario);
  if (!o.split_override.empty()) scene.split = o.split_override;
  dsa::EmulatorParams params;
  params.detectability_threshold = o.theta;
  params.clutter_rate = o.clutter;
  params.jitter_coefficient = o.jitter;
  params.seed = g.seed;
  dsa::DetectionTrace trace = dsa::generate_synthetic(scene, params);
  dsa::save_trace_file(trace, g.require_out());
  std::cout << "wrote " << trace.frame_count() << " frames ("
            << trace.videos.size() << " videos, split " << trace.split
            << ") to " << g.out << "\n";
  return 0;
}

struct GridEvalOpts {
  std::string trace;
  std::optional<int> category;
};

int run_grid_eval(const GlobalOpts& g, const GridEvalOpts& o) {
  if (o.trace.empty()) {
    // Fig. 2-style throughput table.
    write_file(g.require_out(), g.cost().to_grid_csv());
    std::cout << "wrote FPS table for " << g.cost().detector() << " to "
              << g.out << "\n";
    return 0;
  }
  if (!o.category)
    throw dsa::ValidationError("--category is required with --trace");
  dsa::DetectionTrace trace = dsa::load_trace_file(o.trace);
  dsa::ApGridReport report =
      dsa::normalized_ap_grid(trace, *o.category, g.iou_threshold);
  write_file(g.require_out(), report.to_csv());
  if (report.degenerate) {
    std::cerr << "degenerate: baseline mAP for category " << *o.category
              << " is zero or undefined; cells are empty\n";
    return kExitDegenerate;
  }
  std::cout << "wrote normalized AP grid for category " << *o.category
            << " to " << g.out << "\n";
  return 0;
}

struct OracleOpts {
  std::string trace;
  std::string coverage_prefix;
};

int run_oracle(const GlobalOpts& g, const OracleOpts& o) {
  dsa::DetectionTrace trace = dsa::load_trace_file(o.trace);
  dsa::CostModel cost = g.cost();
  dsa::OracleReport report = dsa::limit_study(trace, cost, g.iou_threshold);
  std::cout << report.to_table();
  if (!g.out.empty()) write_file(g.out, report.to_csv());
  if (!o.coverage_prefix.empty()) {
    for (int category : trace.categories()) {
      std::vector<const dsa::FrameRecord*> frames;
      trace.for_each_frame([&](const dsa::FrameRecord& f) {
        if (f.has_category(category)) frames.push_back(&f);
      });
      auto curve = dsa::coverage_curve(frames, trace.grid, category, cost,
                                       g.iou_threshold);
      write_file(o.coverage_prefix + std::to_string(category) + ".csv",
                 curve.to_csv());
    }
  }
  if (report.any_degenerate()) {
    std::cerr << "degenerate: at least one category has zero or undefined "
                 "baseline mAP\n";
    return kExitDegenerate;
  }
  return 0;
}

struct TrainOpts {
  std::string trace;
  std::string static_out;
  std::string model_out;
  double threshold = dsa::kDefaultConfidenceThreshold;
  int window = dsa::kDefaultDecisionWindow;
};

int run_train(const GlobalOpts& g, const TrainOpts& o) {
  if (o.static_out.empty() && o.model_out.empty())
    throw dsa::ValidationError(
        "nothing to train: give --static-out and/or --model-out");
  dsa::DetectionTrace trace = dsa::load_trace_file(o.trace);
  dsa::CostModel cost = g.cost();
  if (!o.static_out.empty()) {
    dsa::StaticPolicy policy =
        dsa::fit_static_all(trace, cost, g.iou_threshold);
    policy.save_file(o.static_out);
    std::cout << "wrote static policy to " << o.static_out << "\n";
  }
  if (!o.model_out.empty()) {
    dsa::AutoFocusTrainParams params;
    params.confidence_threshold = o.threshold;
    params.decision_window = o.window;
    params.iou_threshold = g.iou_threshold;
    dsa::AutoFocusModel model = dsa::train_autofocus(trace, cost, params);
    model.save_file(o.model_out);
    std::cout << "wrote autofocus model to " << o.model_out << "\n";
  }
  return 0;
}

struct SimulateOpts {
  std::string trace;
  std::vector<int> constant;
  std::string static_path;
  std::string scope;  // "any" or a category id, used with --static
  std::string autofocus_path;
  std::string oracle_mode;  // "static" | "dynamic"
  std::optional<int> category;
  std::string frames_out;
};

int run_simulate(const GlobalOpts& g, const SimulateOpts& o) {
  dsa::DetectionTrace trace = dsa::load_trace_file(o.trace);
  dsa::CostModel cost = g.cost();

  int selected = (!o.constant.empty() ? 1 : 0) +
                 (!o.static_path.empty() ? 1 : 0) +
                 (!o.autofocus_path.empty() ? 1 : 0) +
                 (!o.oracle_mode.empty() ? 1 : 0);
  if (selected != 1)
    throw dsa::ValidationError(
        "choose exactly one policy: --config, --static, --autofocus, or "
        "--oracle");

  dsa::SimPolicy policy = dsa::ConstantPolicy{trace.grid.baseline()};
  std::string name;
  if (!o.constant.empty()) {
    policy = dsa::ConstantPolicy{{o.constant[0], o.constant[1]}};
    name = "constant" + dsa::to_string({o.constant[0], o.constant[1]});
  } else if (!o.static_path.empty()) {
    dsa::StaticPolicy loaded = dsa::StaticPolicy::load_file(o.static_path);
    if (o.scope.empty()) {
      policy = dsa::StaticRuntimePolicy{loaded};
      name = "static";
    } else if (o.scope == "any") {
      if (!loaded.wildcard)
        throw dsa::ValidationError("policy file has no \"any\" entry");
      policy = dsa::ConstantPolicy{*loaded.wildcard};
      name = "category-oblivious";
    } else {
      int category = 0;
      try {
        category = std::stoi(o.scope);
      } catch (const std::exception&) {
        throw dsa::ValidationError("--scope must be \"any\" or a category id");
      }
      auto it = loaded.per_category.find(category);
      if (it == loaded.per_category.end())
        throw dsa::ValidationError("policy file has no entry for category " +
                                   o.scope);
      policy = dsa::ConstantPolicy{it->second};
      name = "static:" + o.scope;
    }
  } else if (!o.autofocus_path.empty()) {
    policy = dsa::AutoFocusPolicy{dsa::AutoFocusModel::load_file(o.autofocus_path)};
    name = "autofocus";
  } else {
    if (!o.category)
      throw dsa::ValidationError("--oracle needs --category");
    auto row = dsa::limit_study_category(trace, cost, *o.category,
                                         g.iou_threshold);
    if (o.oracle_mode == "static") {
      policy = dsa::ConstantPolicy{row.static_config};
      name = "static-oracle";
    } else if (o.oracle_mode == "dynamic") {
      policy = dsa::SchedulePolicy{row.per_frame_optimal};
      name = "dynamic-oracle";
    } else {
      throw dsa::ValidationError("--oracle must be static or dynamic");
    }
  }

  dsa::StreamResult result =
      dsa::simulate_stream(trace, policy, cost, g.iou_threshold, name);
  std::cout << result.to_csv();
  if (!g.out.empty()) write_file(g.out, result.to_csv());
  if (!o.frames_out.empty()) {
    std::ostringstream frames;
    frames << "index,height,proposals\n";
    for (std::size_t i = 0; i < result.frame_configs.size(); ++i)
      frames << i << "," << result.frame_configs[i].image_height << ","
             << result.frame_configs[i].proposal_count << "\n";
    write_file(o.frames_out, frames.str());
  }
  return 0;
}

struct ReportOpts {
  std::string trace;
  std::string train_trace;
  std::string static_path;
  std::string model_path;
  double threshold = dsa::kDefaultConfidenceThreshold;
  int window = dsa::kDefaultDecisionWindow;
};

int run_report(const GlobalOpts& g, const ReportOpts& o) {
  dsa::DetectionTrace test = dsa::load_trace_file(o.trace);
  dsa::CostModel cost = g.cost();

  dsa::StaticPolicy static_policy;
  dsa::AutoFocusModel model;
  if (!o.train_trace.empty()) {
    dsa::DetectionTrace train = dsa::load_trace_file(o.train_trace);
    static_policy = dsa::fit_static_all(train, cost, g.iou_threshold);
    dsa::AutoFocusTrainParams params;
    params.confidence_threshold = o.threshold;
    params.decision_window = o.window;
    params.iou_threshold = g.iou_threshold;
    model = dsa::train_autofocus(train, cost, params);
  } else if (!o.static_path.empty() && !o.model_path.empty()) {
    static_policy = dsa::StaticPolicy::load_file(o.static_path);
    model = dsa::AutoFocusModel::load_file(o.model_path);
  } else {
    throw dsa::ValidationError(
        "give --train-trace, or both --static and --model");
  }
  if (!static_policy.wildcard)
    throw dsa::ValidationError("static policy has no \"any\" entry");

  const double iou = g.iou_threshold;
  auto baseline = dsa::simulate_stream(
      test, dsa::ConstantPolicy{test.grid.baseline()}, cost, iou, "baseline");
  auto oblivious = dsa::simulate_stream(
      test, dsa::ConstantPolicy{*static_policy.wildcard}, cost, iou,
      "category-oblivious");
  auto autofocus = dsa::simulate_stream(test, dsa::AutoFocusPolicy{model},
                                        cost, iou, "autofocus");

  std::vector<dsa::ComparisonEntry> entries;
  entries.push_back({"category-oblivious", std::nullopt, oblivious});
  entries.push_back({"autofocus", std::nullopt, autofocus});

  dsa::OracleReport oracle = dsa::limit_study(test, cost, iou);
  for (const auto& row : oracle.rows) {
    dsa::ApproxConfig static_config = test.grid.baseline();
    if (auto it = static_policy.per_category.find(row.category);
        it != static_policy.per_category.end())
      static_config = it->second;
    else
      static_config = *static_policy.wildcard;
    entries.push_back(
        {"static", row.category,
         dsa::simulate_stream(test, dsa::ConstantPolicy{static_config}, cost,
                              iou, "static")});
    entries.push_back(
        {"static-oracle", row.category,
         dsa::simulate_stream(test, dsa::ConstantPolicy{row.static_config},
                              cost, iou, "static-oracle")});
    entries.push_back(
        {"dynamic-oracle", row.category,
         dsa::simulate_stream(test, dsa::SchedulePolicy{row.per_frame_optimal},
                              cost, iou, "dynamic-oracle")});
  }

  dsa::ComparisonReport report =
      dsa::compare_report(baseline, entries, cost.detector());
  std::cout << report.to_table();
  if (!g.out.empty()) write_file(g.out, report.to_csv());
  if (oracle.any_degenerate()) {
    std::cerr << "degenerate: at least one category has zero or undefined "
                 "baseline mAP\n";
    return kExitDegenerate;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"category-aware domain-specific approximation toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--cost-model", g.cost_model,
                 "faster-rcnn, rfcn, or a path to a height,proposals,fps CSV")
      ->capture_default_str();
  app.add_option("--iou-threshold", g.iou_threshold,
                 "IoU threshold for detection matching")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "seed for synthetic generation")
      ->capture_default_str();
  app.add_option("--out", g.out, "output file path");
  app.add_option("--overhead-ms", g.overhead_ms,
                 "controller overhead per decision, milliseconds")
      ->capture_default_str();

  GenOpts gen;
  auto* gen_cmd =
      app.add_subcommand("gen", "generate a synthetic trace from a scenario");
  gen_cmd->fallthrough();
  gen_cmd->add_option("--scenario", gen.scenario, "scenario JSON file")
      ->required();
  gen_cmd->add_option("--theta", gen.theta, "detectability threshold, pixels")
      ->capture_default_str();
  gen_cmd->add_option("--clutter", gen.clutter,
                      "expected false positives per frame")
      ->capture_default_str();
  gen_cmd->add_option("--jitter", gen.jitter, "localization jitter coefficient")
      ->capture_default_str();
  gen_cmd->add_option("--split", gen.split_override,
                      "override the scenario's split tag");

  GridEvalOpts grid_eval;
  auto* grid_cmd = app.add_subcommand(
      "grid-eval", "emit an FPS table, or a normalized AP grid for a trace");
  grid_cmd->fallthrough();
  grid_cmd->add_option("--trace", grid_eval.trace, "trace file");
  int grid_category = -1;
  auto* grid_cat_opt =
      grid_cmd->add_option("--category", grid_category, "category id");

  OracleOpts oracle;
  auto* oracle_cmd = app.add_subcommand(
      "oracle", "limit study: static/dynamic oracle speedups and coverage");
  oracle_cmd->fallthrough();
  oracle_cmd->add_option("--trace", oracle.trace, "trace file")->required();
  oracle_cmd->add_option("--coverage-prefix", oracle.coverage_prefix,
                         "write per-category coverage CSVs with this prefix");

  TrainOpts train;
  auto* train_cmd = app.add_subcommand(
      "train", "fit static policies and the autofocus model");
  train_cmd->fallthrough();
  train_cmd->add_option("--trace", train.trace, "training trace")->required();
  train_cmd->add_option("--static-out", train.static_out,
                        "write the static policy JSON here");
  train_cmd->add_option("--model-out", train.model_out,
                        "write the autofocus model here");
  train_cmd->add_option("--threshold", train.threshold,
                        "confidence gate for trusted detections")
      ->capture_default_str();
  train_cmd->add_option("--window", train.window, "decision window, frames")
      ->capture_default_str();

  SimulateOpts simulate;
  auto* sim_cmd =
      app.add_subcommand("simulate", "replay a trace under one policy");
  sim_cmd->fallthrough();
  sim_cmd->add_option("--trace", simulate.trace, "test trace")->required();
  sim_cmd->add_option("--config", simulate.constant,
                      "constant configuration: HEIGHT PROPOSALS")
      ->expected(2);
  sim_cmd->add_option("--static", simulate.static_path,
                      "static policy JSON file");
  sim_cmd->add_option("--scope", simulate.scope,
                      "with --static: \"any\" or a category id");
  sim_cmd->add_option("--autofocus", simulate.autofocus_path,
                      "autofocus model file");
  sim_cmd->add_option("--oracle", simulate.oracle_mode,
                      "oracle schedule: static or dynamic");
  int sim_category = -1;
  auto* sim_cat_opt =
      sim_cmd->add_option("--category", sim_category, "category for --oracle");
  sim_cmd->add_option("--frames-out", simulate.frames_out,
                      "write per-frame chosen configurations here");

  ReportOpts report;
  auto* report_cmd = app.add_subcommand(
      "report", "Fig.-style comparison of policies on one test trace");
  report_cmd->fallthrough();
  report_cmd->add_option("--trace", report.trace, "test trace")->required();
  report_cmd->add_option("--train-trace", report.train_trace,
                         "training trace (trains policies on the fly)");
  report_cmd->add_option("--static", report.static_path,
                         "pre-trained static policy JSON");
  report_cmd->add_option("--model", report.model_path,
                         "pre-trained autofocus model");
  report_cmd->add_option("--threshold", report.threshold,
                         "confidence gate for trusted detections")
      ->capture_default_str();
  report_cmd->add_option("--window", report.window, "decision window, frames")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(g, gen);
    if (grid_cmd->parsed()) {
      if (*grid_cat_opt) grid_eval.category = grid_category;
      return run_grid_eval(g, grid_eval);
    }
    if (oracle_cmd->parsed()) return run_oracle(g, oracle);
    if (train_cmd->parsed()) return run_train(g, train);
    if (sim_cmd->parsed()) {
      if (*sim_cat_opt) simulate.category = sim_category;
      return run_simulate(g, simulate);
    }
    if (report_cmd->parsed()) return run_report(g, report);
  } catch (const dsa::DegenerateError& e) {
    std::cerr << "degenerate: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const dsa::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
