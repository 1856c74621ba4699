#pragma once

#include <string>

#include "selfcal/likelihood.hpp"
#include "selfcal/model.hpp"
#include "selfcal/regions.hpp"
#include "selfcal/sampling.hpp"

namespace selfcal::io {

// Scenario configuration (JSON; schema documented in the README).
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& json_text);

// Count file: 24 whitespace-separated nonnegative integers in count-table
// order; '#' starts a comment.  Errors carry line/column positions.
CountRecord load_counts(const std::string& path);
CountRecord parse_counts(const std::string& text, const std::string& origin = "<string>");
void save_counts(const std::string& path, const CountRecord& d, const std::string& comment = "");

// Parameter point (JSON): state fields, per-side scale (optionally explicit
// ratios; otherwise the config's), nu when present.
JointPoint load_point(const std::string& path, const ScenarioConfig& cfg);
JointPoint parse_point(const std::string& json_text, const ScenarioConfig& cfg);
std::string point_to_json(const JointPoint& p, const ScenarioConfig& cfg);

// Columnar artifacts.
void write_samples(const std::string& path, const SampleSet& set, const ScenarioConfig& cfg,
                   const std::string& provenance);
void write_curve(const std::string& path, const LambdaCurve& curve, const std::string& provenance);
void write_slice(const std::string& path, const SliceContour& slice, const std::string& provenance);

// One-page report (also used for stdout).
std::string format_report(const RegionReport& report, const ScenarioConfig& cfg,
                          const std::vector<NamedPoint>& references);
void write_text(const std::string& path, const std::string& text);

// FNV-1a of a file's bytes (provenance headers).
std::string file_hash(const std::string& path);

}  // namespace selfcal::io
