// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsa/config.hpp"
#include "dsa/error.hpp"
#include "dsa/geometry.hpp"

namespace dsa {

// One frame of one video: its ground truth plus the stored detector outputs
// for every configuration the trace covers.
struct FrameRecord {
  std::string video;
  int frame = 0;  // 0-based, contiguous within a video
  int width = 0;
  int height = 0;
  std::vector<GroundTruth> gts;
  std::map<ApproxConfig, std::vector<Detection>, GridOrder> outputs;

  bool covers(const ConfigGrid& grid) const {
    if (outputs.size() != grid.size()) return false;
    for (const auto& [config, dets] : outputs)
      if (!grid.contains(config)) return false;
    return true;
  }

  const std::vector<Detection>& outputs_for(const ApproxConfig& config) const {
    auto it = outputs.find(config);
    if (it == outputs.end())
      throw ValidationError("video \"" + video + "\" frame " +
                            std::to_string(frame) +
                            " has no stored outputs for config " +
                            to_string(config));
    return it->second;
  }

  bool has_category(int category) const {
    return std::any_of(gts.begin(), gts.end(), [&](const GroundTruth& gt) {
      return gt.category == category;
    });
  }
};

// A recorded detection run: per (video, frame) the detector outputs under
// every grid configuration, plus ground truth. Dense traces cover the whole
// grid on every frame; a trace that declares itself sparse may have gaps,
// and oracle-style operations on it fail fast.
struct DetectionTrace {
  std::string detector;
  ConfigGrid grid = enumerate_grid();
  std::string split = "train";  // "train" | "test"
  bool sparse = false;
  std::vector<std::vector<FrameRecord>> videos;

  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& v : videos) n += v.size();
    return n;
  }

  // Distinct ground-truth categories, ascending.
  std::vector<int> categories() const {
    std::set<int> cats;
    for (const auto& v : videos)
      for (const auto& f : v)
        for (const auto& gt : f.gts) cats.insert(gt.category);
    return {cats.begin(), cats.end()};
  }

  void for_each_frame(const std::function<void(const FrameRecord&)>& fn) const {
    for (const auto& v : videos)
      for (const auto& f : v) fn(f);
  }

  void require_dense(const std::string& operation) const {
    if (sparse)
      throw ValidationError(operation + " requires a dense trace, but \"" +
                            detector + "\" declares itself sparse");
  }

  // Cheap fingerprint used to reject cross-trace report mixing.
  std::string identity() const {
    return detector + "/" + split + "/" + std::to_string(videos.size()) + "/" +
           std::to_string(frame_count());
  }
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ValidationError trace_error(std::size_t line, const std::string& msg) {
  return ValidationError("trace line " + std::to_string(line) + ": " + msg);
}

inline ojson box_to_json(const BBox& b) {
  return ojson::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

inline BBox box_from_json(const ojson& j) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError("box must be a 4-element array");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
         j[3].get<double>()};
  if (!b.valid()) throw ValidationError("box has negative extent");
  return b;
}

inline void check_in_bounds(const BBox& b, int width, int height,
                            const std::string& what) {
  if (b.x_min < 0 || b.y_min < 0 || b.x_max > width || b.y_max > height)
    throw ValidationError(what + " box exceeds frame bounds " +
                          std::to_string(width) + "x" + std::to_string(height));
}

}  // namespace detail

// Canonical serialization: one JSON object per line, fields in a fixed
// order, outputs in grid enumeration order. save(load(t)) is the identity
// on this form.
inline void save_trace(const DetectionTrace& trace, std::ostream& out) {
  using detail::ojson;
  ojson header;
  header["detector"] = trace.detector;
  header["grid"] = {{"heights", trace.grid.heights()},
                    {"proposals", trace.grid.proposals()}};
  header["split"] = trace.split;
  if (trace.sparse) header["sparse"] = true;
  out << header.dump() << "\n";
  for (const auto& video : trace.videos) {
    for (const auto& f : video) {
      ojson rec;
      rec["video"] = f.video;
      rec["frame"] = f.frame;
      rec["width"] = f.width;
      rec["height"] = f.height;
      ojson gts = ojson::array();
      for (const auto& gt : f.gts)
        gts.push_back(
            {{"box", detail::box_to_json(gt.box)}, {"category", gt.category}});
      rec["gts"] = std::move(gts);
      ojson outputs = ojson::array();
      for (const auto& [config, dets] : f.outputs) {
        ojson entry;
        entry["config"] =
            ojson::array({config.image_height, config.proposal_count});
        ojson jdets = ojson::array();
        for (const auto& d : dets)
          jdets.push_back({{"box", detail::box_to_json(d.box)},
                           {"score", d.score},
                           {"category", d.category}});
        entry["dets"] = std::move(jdets);
        outputs.push_back(std::move(entry));
      }
      rec["outputs"] = std::move(outputs);
      out << rec.dump() << "\n";
    }
  }
}

inline DetectionTrace load_trace(std::istream& in) {
  using detail::ojson;
  using detail::trace_error;

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ValidationError("trace stream is empty");
  ++line_no;

  ojson header;
  try {
    header = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw trace_error(line_no, std::string("header is not valid JSON: ") +
                                   e.what());
  }

  DetectionTrace trace;
  try {
    trace.detector = header.at("detector").get<std::string>();
    trace.grid =
        ConfigGrid(header.at("grid").at("heights").get<std::vector<int>>(),
                   header.at("grid").at("proposals").get<std::vector<int>>());
    trace.split = header.at("split").get<std::string>();
    trace.sparse = header.value("sparse", false);
  } catch (const nlohmann::json::exception& e) {
    throw trace_error(line_no, std::string("malformed header: ") + e.what());
  }
  if (trace.split != "train" && trace.split != "test")
    throw trace_error(line_no, "split must be \"train\" or \"test\", got \"" +
                                   trace.split + "\"");

  std::set<std::string> finished_videos;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ojson rec;
    try {
      rec = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw trace_error(line_no,
                        std::string("record is not valid JSON: ") + e.what());
    }

    FrameRecord f;
    std::string where;
    try {
      f.video = rec.at("video").get<std::string>();
      f.frame = rec.at("frame").get<int>();
      where = "video \"" + f.video + "\" frame " + std::to_string(f.frame);
      f.width = rec.at("width").get<int>();
      f.height = rec.at("height").get<int>();
      if (f.width <= 0 || f.height <= 0)
        throw ValidationError("frame dimensions must be positive");
      for (const auto& jgt : rec.at("gts")) {
        GroundTruth gt{detail::box_from_json(jgt.at("box")),
                       jgt.at("category").get<int>()};
        detail::check_in_bounds(gt.box, f.width, f.height, "ground-truth");
        f.gts.push_back(gt);
      }
      for (const auto& jout : rec.at("outputs")) {
        const auto& jc = jout.at("config");
        if (!jc.is_array() || jc.size() != 2)
          throw ValidationError("config must be a [height, proposals] pair");
        ApproxConfig config{jc[0].get<int>(), jc[1].get<int>()};
        if (!trace.grid.contains(config))
          throw ValidationError("config " + to_string(config) +
                                " is not on the grid");
        if (f.outputs.count(config))
          throw ValidationError("duplicate outputs for config " +
                                to_string(config));
        std::vector<Detection> dets;
        for (const auto& jd : jout.at("dets")) {
          Detection d{detail::box_from_json(jd.at("box")),
                      jd.at("score").get<double>(),
                      jd.at("category").get<int>()};
          if (d.score < 0.0 || d.score > 1.0)
            throw ValidationError("detection score outside [0, 1]");
          detail::check_in_bounds(d.box, f.width, f.height, "detection");
          dets.push_back(d);
        }
        f.outputs.emplace(config, std::move(dets));
      }
    } catch (const nlohmann::json::exception& e) {
      throw trace_error(line_no, (where.empty() ? std::string() : where + ": ") +
                                     "malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw trace_error(line_no,
                        (where.empty() ? std::string() : where + ": ") +
                            e.what());
    }

    if (!trace.sparse && !f.covers(trace.grid))
      throw trace_error(
          line_no, where + ": record does not cover the full grid and the "
                           "trace does not declare itself sparse");

    if (!trace.videos.empty() && trace.videos.back().back().video == f.video) {
      int expected = trace.videos.back().back().frame + 1;
      if (f.frame != expected)
        throw trace_error(line_no, where + ": expected frame " +
                                       std::to_string(expected) +
                                       " (frames must be contiguous)");
      trace.videos.back().push_back(std::move(f));
    } else {
      if (finished_videos.count(f.video))
        throw trace_error(line_no, where + ": video records must be "
                                           "contiguous in the file");
      if (!trace.videos.empty())
        finished_videos.insert(trace.videos.back().back().video);
      if (f.frame != 0)
        throw trace_error(line_no, where + ": first frame of a video must "
                                           "have index 0");
      trace.videos.push_back({std::move(f)});
    }
  }
  return trace;
}

inline std::string trace_to_string(const DetectionTrace& trace) {
  std::ostringstream out;
  save_trace(trace, out);
  return out.str();
}

inline DetectionTrace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file: " + path);
  return load_trace(in);
}

inline void save_trace_file(const DetectionTrace& trace,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write trace file: " + path);
  save_trace(trace, out);
}

}  // namespace dsa
