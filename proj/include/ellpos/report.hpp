#pragma once

#include <string>

#include <json.hpp>

#include "ellpos/bodies.hpp"
#include "ellpos/stats.hpp"

namespace ellpos {

/// "ellpos v<version>-g<git describe>", fixed at configure time.
std::string version_string();

/// Shortest round-trip decimal form of a double ("inf", "-inf", "nan" for non-finite values).
std::string format_double(double v);

/// First line of every CSV: "# manifest=<compact json> version=<version string>".
std::string manifest_comment(const nlohmann::ordered_json& manifest);

/// Inverse of manifest_comment; throws std::invalid_argument on a malformed line.
nlohmann::ordered_json parse_manifest_comment(const std::string& line);

std::string estimator_csv_header();

/// body hash, operation, parameters (compact JSON), value, std_error, n_samples, master seed.
std::string estimator_csv_row(const BodySpec& body, const std::string& op, const nlohmann::ordered_json& params,
                              const McEstimate& est);

}  // namespace ellpos
