#include "manifest.hpp"

#include <fstream>

#include "selfevo/error.hpp"

namespace selfevo::cli {

RunManifest::RunManifest(const std::filesystem::path& dir) : path_(dir / "manifest.json") {
  std::ifstream in(path_);
  if (in) {
    try {
      doc_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::schema, path_.string() + ": " + e.what());
    }
  } else {
    const auto abs = std::filesystem::absolute(dir).lexically_normal();
    std::string id = abs.filename().string();
    if (id.empty()) id = abs.parent_path().filename().string();
    doc_ = {{"run_id", id}, {"stages", nlohmann::json::array()}};
  }
}

void RunManifest::check_rerun(const std::string& stage, const nlohmann::json& outputs, bool force) const {
  if (force) return;
  for (const auto& s : doc_.at("stages")) {
    if (s.at("stage") == stage && s.at("outputs") == outputs && s.at("status") == "completed") {
      throw Error(Errc::precondition, "stage '" + stage + "' already completed in " + path_.parent_path().string() +
                                          "; pass --force to run it again");
    }
  }
}

void RunManifest::record(const std::string& stage, const nlohmann::json& inputs, const nlohmann::json& outputs,
                         const nlohmann::json& config, const std::string& status) {
  nlohmann::json entry = {
      {"stage", stage}, {"status", status}, {"inputs", inputs}, {"outputs", outputs}, {"config", config}};
  auto& stages = doc_["stages"];
  bool replaced = false;
  for (auto& s : stages) {
    if (s.at("stage") == stage && s.at("outputs") == outputs) {
      s = entry;
      replaced = true;
      break;
    }
  }
  if (!replaced) stages.push_back(std::move(entry));
  std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw Error(Errc::path, "cannot write " + path_.string());
  out << doc_.dump(2) << '\n';
}

}  // namespace selfevo::cli
