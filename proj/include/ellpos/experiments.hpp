#pragma once

// Manifest-driven experiments. A manifest fully determines an output file:
// every default is resolved into it before the run, it is embedded verbatim
// as the first CSV line, and replaying it reproduces the file byte for byte.
// The worker count is deliberately not part of a manifest.

#include <string>
#include <vector>

#include <json.hpp>

#include "ellpos/bodies.hpp"
#include "ellpos/parallel.hpp"

namespace ellpos {

inline const std::vector<std::string> kExperimentNames{
    "moments",       "superconc-scan", "ell-solve",           "balance",      "deviation",
    "sections-scan", "john-counterexample", "dvoretzky-dim", "ellipse-check", "singular-values"};

struct ExperimentManifest {
  std::string experiment;
  /// A full body {family, dim, ...}, or for scans over n a template without dim; null when unused.
  nlohmann::ordered_json body;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::string output_path;
};

nlohmann::ordered_json to_json(const ExperimentManifest& manifest);

/// Throws std::invalid_argument for unknown experiments or a malformed layout.
ExperimentManifest manifest_from_json(const nlohmann::json& j);

/// Accepts a manifest JSON file or a CSV written by run_experiment.
ExperimentManifest load_manifest(const std::string& path);

/// Fills every missing parameter with its default; unknown keys are rejected.
ExperimentManifest resolve_defaults(ExperimentManifest manifest);

struct ExperimentOutput {
  ExperimentManifest manifest;  // as resolved
  std::string csv;              // starts with the manifest comment line
  nlohmann::ordered_json summary;
};

/// Invalid manifests raise std::invalid_argument (or a nlohmann::json exception
/// for type errors) before any sampling starts.
ExperimentOutput run_experiment(const ExperimentManifest& manifest, const parallel::Execution& exec = {});

/// Body of the requested dimension from a template. A CylinderJohn template
/// without m gets m = floor(Med max g_i^2) from `cylinder_trials` samples.
BodySpec body_for_dim(const nlohmann::ordered_json& body_template, std::size_t n, const SeedSpec& seed,
                      std::size_t cylinder_trials = 20000, const parallel::Execution& exec = {});

}  // namespace ellpos
