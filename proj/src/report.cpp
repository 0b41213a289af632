#include "ellpos/report.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace ellpos {

std::string version_string() { return ELLPOS_VERSION_STRING; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string manifest_comment(const nlohmann::ordered_json& manifest) {
  return "# manifest=" + manifest.dump() + " version=" + version_string();
}

nlohmann::ordered_json parse_manifest_comment(const std::string& line) {
  const std::string prefix = "# manifest=";
  const std::string marker = " version=";
  const auto end = line.rfind(marker);
  if (line.rfind(prefix, 0) != 0 || end == std::string::npos || end < prefix.size()) {
    throw std::invalid_argument("not a manifest comment line");
  }
  try {
    return nlohmann::ordered_json::parse(line.substr(prefix.size(), end - prefix.size()));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("manifest comment: ") + e.what());
  }
}

std::string estimator_csv_header() { return "body_hash,op,params,value,std_error,n_samples,seed"; }

std::string estimator_csv_row(const BodySpec& body, const std::string& op, const nlohmann::ordered_json& params,
                              const McEstimate& est) {
  // params is JSON with commas; quote it CSV-style
  std::string p = params.dump();
  std::string quoted = "\"";
  for (char c : p) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return body_hash(body) + "," + op + "," + quoted + "," + format_double(est.value) + "," +
         format_double(est.std_error) + "," + std::to_string(est.n_samples) + "," + std::to_string(est.seed.master);
}

}  // namespace ellpos
