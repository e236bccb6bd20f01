#pragma once

#include "polaron/config.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace polaron {

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct ResultRecord {
  std::string scenario;
  std::string config_hash;
  std::string version = kVersion;
  std::optional<std::uint64_t> seed;
  nlohmann::json config;
  nlohmann::json outputs;  // the numerical payload; deterministic for a fixed config
  std::vector<std::string> warnings;
  std::string status = "ok";
  int exit_code = kExitOk;
  double wall_time = 0.0;
  int threads = 1;
  std::vector<Table> tables;                               // written as <name>.csv
  std::vector<std::pair<std::string, ScalarField>> fields;  // written as <name>.bin
};
nlohmann::json to_json(const ResultRecord& r);

// Dispatches to the module operations. Non-convergence gives exit code 4 with the
// diagnostics kept in the record; bad inputs found late throw ConfigError (3).
ResultRecord run_scenario(const RunConfig& c);

// record.json plus the CSV tables and binary fields; returns the record path.
std::string write_record(const ResultRecord& r, const std::string& dir);

}  // namespace polaron
