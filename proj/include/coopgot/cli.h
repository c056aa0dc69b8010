#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace coopgot {

inline constexpr const char* kToolName = "coopgot";
inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// FNV-1a over the canonical dump of the scenario, detector and curation
// sections, as 16 hex digits.
std::string config_hash(const nlohmann::json& scenario, const nlohmann::json& detector,
                        const nlohmann::json& curation);

// Parses "1..10", "3", "1,4,9" or combinations such as "1..3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& list);

// Entry point shared by the executable and the tests. Startup settings go
// to `err`; the final "OK <subcommand> key=value ..." line goes to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coopgot
