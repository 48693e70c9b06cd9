#pragma once

#include "json.hpp"

#include <string>
#include <vector>

namespace wavsym {

inline constexpr const char* version = "0.1.0";

struct Diagnostic {
  std::string rule;
  std::string message;
  nlohmann::json to_json() const { return {{"rule", rule}, {"message", message}}; }
};

// Commands: analyze classify kernel norm-study counterexample lemma6.
// Missing fields take their defaults; the result is what reports echo.
nlohmann::json normalize_config(const nlohmann::json& raw);
// Schema and feasibility checks without running; empty means runnable.
std::vector<Diagnostic> validate_config(const nlohmann::json& raw);
nlohmann::json load_config(const std::string& path); // io error if unreadable, config if not JSON
std::vector<Diagnostic> validate_file(const std::string& path);

struct OutputFile {
  std::string name;
  std::string contents;
};

struct Report {
  nlohmann::json body; // config, results, provenance
  std::vector<OutputFile> files;
  double wall_seconds = 0.0;
  std::string dump() const { return body.dump(2) + "\n"; }
};

Report run(const nlohmann::json& config);
// report.json and the side files; wall time and timestamp go to run_info.json.
void write_report(const Report& r, const std::string& dir);

} // namespace wavsym
