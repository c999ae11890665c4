#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

#include "segkit/counterfactual.hpp"
#include "segkit/estimators.hpp"
#include "segkit/kbo.hpp"
#include "segkit/matching.hpp"
#include "segkit/segregation.hpp"
#include "segkit/shiftshare.hpp"
#include "segkit/synthgen.hpp"

namespace segkit {

using Json = nlohmann::ordered_json;

Json to_json(const FitResult& fit);
Json to_json(const ProbitMarginals& ame);
Json to_json(const MatchResult& match);
Json to_json(const IpwResult& ipw);
Json to_json(const BalanceTable& table);
Json to_json(const KboResult& kbo);  // components and per-covariate rows, no fits
Json to_json(const SsiSeries& series);
Json to_json(const ShiftShareResult& result);
Json to_json(const LassoPath& path);
Json to_json(const KsResult& ks);
Json to_json(const GroundTruth& truth, const std::vector<std::string>& sectors);

// Two-space indented text with a trailing newline.
std::string dump(const Json& j);

/// Writes through a sibling temp file and a rename so readers never see a
/// partial file. Creates missing parent directories. Throws IoFailure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace segkit
