#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "foresight/bench.hpp"

namespace foresight
{

/// Header "t,attempts,successes,rate,sigma2_mean"; reals printed with %.17g
/// so a read gives back the same doubles.
void write_step_csv(std::ostream& out, const std::vector<StepRate>& rows);
std::vector<StepRate> read_step_csv(std::istream& in);

/// Pretty-printed with a trailing newline; creates parent directories.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace foresight
