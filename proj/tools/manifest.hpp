#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace selfevo::cli {

/// manifest.json of a run directory: the run id plus one record per stage in
/// execution order. Holds no timestamps so reruns stay byte-identical.
class RunManifest {
 public:
  /// Loads `<dir>/manifest.json` or starts an empty manifest named after `dir`.
  explicit RunManifest(const std::filesystem::path& dir);

  /// Throws Errc::precondition when `stage` already completed with the same
  /// outputs and `force` is false.
  void check_rerun(const std::string& stage, const nlohmann::json& outputs, bool force) const;

  /// Records (or replaces) the stage and writes the manifest.
  void record(const std::string& stage, const nlohmann::json& inputs, const nlohmann::json& outputs,
              const nlohmann::json& config, const std::string& status = "completed");

  const nlohmann::json& document() const { return doc_; }

 private:
  std::filesystem::path path_;
  nlohmann::json doc_;
};

}  // namespace selfevo::cli
