#pragma once

#include "polaron/crystal.hpp"
#include "polaron/defect.hpp"
#include "polaron/multipolaron.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace polaron {

inline constexpr const char* kVersion = "1.0.0";

// Exit codes of the batch front end.
enum ExitCode { kExitOk = 0, kExitParse = 2, kExitInvalid = 3, kExitNotConverged = 4 };

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int code, std::vector<std::string> problems);
  int code() const { return code_; }
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  int code_;
  std::vector<std::string> problems_;
};

const std::vector<std::string>& scenario_names();

// Blocks are stored normalized: every default filled in, scalars expanded.
struct RunConfig {
  std::string scenario;
  std::string output = "polaron_out";
  std::optional<std::uint64_t> seed;
  nlohmann::json doc;  // the whole normalized config
  std::string hash;
};

// Strict JSON: duplicate keys are a parse error.
nlohmann::json parse_json(const std::string& text);
// A result record is accepted too; its embedded config is used.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// FNV-1a (64 bit) over the canonical dump of the normalized config.
std::string config_hash(const nlohmann::json& normalized);

// Typed views of normalized blocks.
GridPtr grid_from(const nlohmann::json& grid);
PekarCoupling coupling_from(const nlohmann::json& block);
CrystalSpec crystal_from(const nlohmann::json& crystal);
std::vector<GaussianCharge> charges_from(const nlohmann::json& list);
NPolaronOptions npolaron_options_from(const nlohmann::json& block);

}  // namespace polaron
