// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsa/config.hpp"
#include "dsa/error.hpp"
#include "dsa/geometry.hpp"
#include "dsa/trace.hpp"

namespace dsa {

// All randomness flows through std::mt19937_64 plus the explicit mappings
// below, so generated traces are bit-identical across platforms. Substream
// seeds come from one splitmix64 step over (seed, stream index).
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  return splitmix64(state);
}

// Top 53 bits of one generator draw, mapped to [0, 1).
inline double uniform_unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(g);
}

inline int uniform_index(std::mt19937_64& g, std::size_t n) {
  return static_cast<int>(uniform_unit(g) * static_cast<double>(n));
}

// Knuth's product-of-uniforms sampler; fine for the small rates used here.
inline int poisson(std::mt19937_64& g, double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform_unit(g);
  } while (p > limit);
  return k - 1;
}

}  // namespace rng

// Height every trace is normalized against: the baseline scales images to
// 480 pixels tall, and approximation levels are measured relative to that.
inline constexpr double kReferenceHeight = 480.0;

// Largest per-axis translation, as a fraction of the box extent, that still
// guarantees IoU(shifted, original) >= 0.5: (1-0.18)^2 / (2-(1-0.18)^2) > 0.5.
inline constexpr double kJitterAxisCap = 0.18;

struct EmulatorParams {
  double detectability_threshold = 16.0;  // pixels of effective height
  double clutter_rate = 0.0;              // expected false positives per frame
  double jitter_coefficient = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(detectability_threshold > 0.0))
      throw ValidationError("detectability threshold must be > 0");
    if (!(clutter_rate >= 0.0))
      throw ValidationError("clutter rate must be >= 0");
    if (!(jitter_coefficient >= 0.0))
      throw ValidationError("jitter coefficient must be >= 0");
  }
};

// Stand-in for a real detector on one object: the object is found iff its
// effective height after downsampling reaches the detectability threshold.
// The emitted box is the truth box shifted by seeded jitter that grows with
// the downsampling factor, capped so the emission always overlaps the truth
// at IoU >= 0.5.
inline std::optional<Detection> emulate_detection(const GroundTruth& gt,
                                                  const ApproxConfig& config,
                                                  const EmulatorParams& params,
                                                  std::mt19937_64& jitter_rng) {
  const double theta = params.detectability_threshold;
  const double effective_height =
      gt.box.height() * config.image_height / kReferenceHeight;
  if (effective_height < theta) return std::nullopt;
  const double score =
      std::min(1.0, 0.5 + effective_height / (2.0 * theta));

  const double ux = rng::uniform(jitter_rng, -1.0, 1.0);
  const double uy = rng::uniform(jitter_rng, -1.0, 1.0);
  const double magnitude = params.jitter_coefficient *
                           (kReferenceHeight / config.image_height - 1.0);
  const double fx = std::clamp(magnitude * ux, -kJitterAxisCap, kJitterAxisCap);
  const double fy = std::clamp(magnitude * uy, -kJitterAxisCap, kJitterAxisCap);
  const double dx = fx * gt.box.width();
  const double dy = fy * gt.box.height();

  Detection det;
  det.box = {gt.box.x_min + dx, gt.box.y_min + dy, gt.box.x_max + dx,
             gt.box.y_max + dy};
  det.score = score;
  det.category = gt.category;
  return det;
}

// A straight-line object track: center and height interpolate linearly from
// the first to the last frame of the video; width follows the aspect ratio.
struct ObjectTrack {
  int category = 0;
  double aspect = 1.0;  // width / height
  double start_cx = 0, start_cy = 0, start_height = 0;
  double end_cx = 0, end_cy = 0, end_height = 0;
};

struct VideoSpec {
  std::string name;
  int width = 0;
  int height = 0;
  int frames = 0;
  std::vector<ObjectTrack> objects;
};

struct SceneSpec {
  std::string name;
  std::string split = "train";
  std::optional<ConfigGrid> grid;  // overrides the canonical lattice
  std::vector<VideoSpec> videos;

  std::vector<int> categories() const {
    std::set<int> cats;
    for (const auto& v : videos)
      for (const auto& o : v.objects) cats.insert(o.category);
    return {cats.begin(), cats.end()};
  }

  static SceneSpec from_json(const nlohmann::json& j);
  static SceneSpec load_file(const std::string& path);
};

inline SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
  SceneSpec scene;
  try {
    scene.name = j.value("name", std::string("scenario"));
    scene.split = j.value("split", std::string("train"));
    if (j.contains("grid"))
      scene.grid =
          ConfigGrid(j.at("grid").at("heights").get<std::vector<int>>(),
                     j.at("grid").at("proposals").get<std::vector<int>>());
    for (const auto& jv : j.at("videos")) {
      VideoSpec v;
      v.name = jv.at("video").get<std::string>();
      v.width = jv.at("width").get<int>();
      v.height = jv.at("height").get<int>();
      v.frames = jv.at("frames").get<int>();
      if (v.width <= 0 || v.height <= 0)
        throw ValidationError("video \"" + v.name +
                              "\": dimensions must be positive");
      if (v.frames <= 0)
        throw ValidationError("video \"" + v.name +
                              "\": frame count must be positive");
      for (const auto& jo : jv.value("objects", nlohmann::json::array())) {
        ObjectTrack o;
        o.category = jo.at("category").get<int>();
        o.aspect = jo.value("aspect", 1.0);
        const auto& s = jo.at("start");
        const auto& e = jo.at("end");
        o.start_cx = s.at("cx").get<double>();
        o.start_cy = s.at("cy").get<double>();
        o.start_height = s.at("height").get<double>();
        o.end_cx = e.at("cx").get<double>();
        o.end_cy = e.at("cy").get<double>();
        o.end_height = e.at("height").get<double>();
        if (o.category < 0)
          throw ValidationError("video \"" + v.name +
                                "\": category ids must be >= 0");
        if (!(o.aspect > 0.0) || !(o.start_height > 0.0) ||
            !(o.end_height > 0.0))
          throw ValidationError("video \"" + v.name +
                                "\": object sizes must be positive");
        v.objects.push_back(o);
      }
      scene.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
  std::set<std::string> names;
  for (const auto& v : scene.videos)
    if (!names.insert(v.name).second)
      throw ValidationError("scenario repeats video name \"" + v.name + "\"");
  if (scene.split != "train" && scene.split != "test")
    throw ValidationError("scenario split must be \"train\" or \"test\"");
  return scene;
}

inline SceneSpec SceneSpec::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scenario file " + path + " is not valid JSON: " +
                          e.what());
  }
  return from_json(j);
}

namespace detail {

inline BBox clip_box(const BBox& b, double width, double height) {
  return {std::clamp(b.x_min, 0.0, width), std::clamp(b.y_min, 0.0, height),
          std::clamp(b.x_max, 0.0, width), std::clamp(b.y_max, 0.0, height)};
}

inline std::optional<BBox> track_box_at(const ObjectTrack& o, int frame,
                                        int frames, double width,
                                        double height) {
  const double alpha =
      frames > 1 ? static_cast<double>(frame) / (frames - 1) : 0.0;
  const double cx = o.start_cx + alpha * (o.end_cx - o.start_cx);
  const double cy = o.start_cy + alpha * (o.end_cy - o.start_cy);
  const double h = o.start_height + alpha * (o.end_height - o.start_height);
  const double w = h * o.aspect;
  BBox b = clip_box({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}, width,
                    height);
  if (b.width() <= 0.0 || b.height() <= 0.0) return std::nullopt;
  return b;
}

}  // namespace detail

// Generates a dense trace over the grid. Per configuration, the stored
// detections are the emulated true positives merged with the frame's seeded
// clutter, ranked by score (true positives of equal score rank taller-first)
// and truncated to the configuration's proposal count.
inline DetectionTrace generate_synthetic(const SceneSpec& scene,
                                         const EmulatorParams& params) {
  params.validate();
  if (scene.videos.empty()) throw ValidationError("empty scenario");

  const std::vector<int> categories = scene.categories();
  DetectionTrace trace;
  trace.detector = "emulator";
  trace.grid = scene.grid.value_or(enumerate_grid());
  trace.split = scene.split;

  constexpr std::uint64_t kClutterStream = 1u << 20;

  for (std::size_t vi = 0; vi < scene.videos.size(); ++vi) {
    const VideoSpec& video = scene.videos[vi];
    const std::uint64_t video_seed = rng::derive(params.seed, vi);
    std::vector<FrameRecord> frames;
    frames.reserve(video.frames);

    for (int t = 0; t < video.frames; ++t) {
      const std::uint64_t frame_seed = rng::derive(video_seed, t);
      FrameRecord f;
      f.video = video.name;
      f.frame = t;
      f.width = video.width;
      f.height = video.height;

      struct Visible {
        std::size_t object;
        GroundTruth gt;
      };
      std::vector<Visible> visible;
      for (std::size_t k = 0; k < video.objects.size(); ++k) {
        auto box = detail::track_box_at(video.objects[k], t, video.frames,
                                        video.width, video.height);
        if (!box) continue;
        GroundTruth gt{*box, video.objects[k].category};
        visible.push_back({k, gt});
        f.gts.push_back(gt);
      }
      // Detector rank among equal-score true positives: taller truth first,
      // then track order. The order is configuration-independent.
      std::stable_sort(visible.begin(), visible.end(),
                       [](const Visible& a, const Visible& b) {
                         return a.gt.box.height() > b.gt.box.height();
                       });

      std::mt19937_64 clutter_rng(rng::derive(frame_seed, kClutterStream));
      std::vector<Detection> clutter;
      const int n_clutter = rng::poisson(clutter_rng, params.clutter_rate);
      for (int i = 0; i < n_clutter; ++i) {
        const double cx = rng::uniform(clutter_rng, 0.0, video.width);
        const double cy = rng::uniform(clutter_rng, 0.0, video.height);
        const double h =
            rng::uniform(clutter_rng, 8.0, std::max(9.0, video.height / 2.0));
        const double aspect = rng::uniform(clutter_rng, 0.5, 2.0);
        const double score = rng::uniform(clutter_rng, 0.05, 0.95);
        const double w = h * aspect;
        BBox box = detail::clip_box({cx - w / 2, cy - h / 2, cx + w / 2,
                                     cy + h / 2},
                                    video.width, video.height);
        int category = categories.empty()
                           ? 0
                           : categories[rng::uniform_index(clutter_rng,
                                                           categories.size())];
        if (box.width() > 0.0 && box.height() > 0.0)
          clutter.push_back({box, score, category});
      }
      std::stable_sort(clutter.begin(), clutter.end(),
                       [](const Detection& a, const Detection& b) {
                         return a.score > b.score;
                       });

      for (const ApproxConfig& config : trace.grid.configs()) {
        std::vector<Detection> dets;
        for (const Visible& v : visible) {
          // Reseeding per (frame, object) keeps the jitter direction
          // identical across configurations.
          std::mt19937_64 jitter_rng(rng::derive(frame_seed, v.object));
          auto det = emulate_detection(v.gt, config, params, jitter_rng);
          if (!det) continue;
          det->box = detail::clip_box(det->box, video.width, video.height);
          dets.push_back(*det);
        }
        dets.insert(dets.end(), clutter.begin(), clutter.end());
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) {
                           return a.score > b.score;
                         });
        if (dets.size() > static_cast<std::size_t>(config.proposal_count))
          dets.resize(static_cast<std::size_t>(config.proposal_count));
        f.outputs.emplace(config, std::move(dets));
      }
      frames.push_back(std::move(f));
    }
    trace.videos.push_back(std::move(frames));
  }
  return trace;
}

}  // namespace dsa
