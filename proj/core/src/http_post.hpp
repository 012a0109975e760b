#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace hoptrace::detail {

/// POSTs a JSON body and parses a JSON reply. Connection failures and non-2xx
/// statuses are retried `retries` times, then raised as TransportError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds,
                         int retries,
                         const std::vector<std::pair<std::string, std::string>>& headers = {});

}  // namespace hoptrace::detail
