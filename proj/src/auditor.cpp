// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "httplib.h"
#include "json.hpp"
#include "uqtrace/ingest.hpp"

namespace uqtrace::ingest {

void MockAuditor::add_equivalence(const std::string& a, const std::string& b) {
  pairs_.emplace_back(a, b);
}

std::optional<bool> MockAuditor::equivalent(const std::string& extracted,
                                            const std::string& reference,
                                            const std::string&) {
  const bool hit = std::any_of(
      pairs_.begin(), pairs_.end(), [&](const auto& p) {
        return (p.first == extracted && p.second == reference) ||
               (p.first == reference && p.second == extracted);
      });
  return hit;
}

HttpAuditor::HttpAuditor(std::string base_url, std::string token)
    : token_(std::move(token)) {
  // Split "http://host:port/path" into host part and request path.
  std::string url = std::move(base_url);
  const size_t scheme = url.find("://");
  const size_t host_begin = scheme == std::string::npos ? 0 : scheme + 3;
  const size_t slash = url.find('/', host_begin);
  if (slash == std::string::npos) {
    host_ = url;
    path_ = "/";
  } else {
    host_ = url.substr(0, slash);
    path_ = url.substr(slash);
  }
}

std::optional<bool> HttpAuditor::equivalent(const std::string& extracted,
                                            const std::string& reference,
                                            const std::string& question) {
  try {
    httplib::Client client(host_);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(10, 0);
    httplib::Headers headers;
    if (!token_.empty())
      headers.emplace("Authorization", "Bearer " + token_);
    nlohmann::json body{{"extracted", extracted}, {"reference", reference}};
    if (!question.empty()) body["question"] = question;
    const auto res =
        client.Post(path_, headers, body.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("equivalent") ||
        !reply["equivalent"].is_boolean())
      return std::nullopt;
    return reply["equivalent"].get<bool>();
  } catch (...) {
    return std::nullopt;  // transport failures never abort the pipeline
  }
}

}  // namespace uqtrace::ingest
