/*
 * Copyright 2026 The driftwatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Card delivery to a JSON webhook. 2xx is success; 5xx and transport
// failures are retried after 1 s, 4 s and 16 s (four attempts at most);
// any other status is a permanent failure and is not retried.

#include <chrono>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "driftwatch/error.hpp"
#include "driftwatch/labelflow.hpp"

namespace driftwatch {

struct HttpResult {
  int status = 0;  // 0: no HTTP response (connect error, timeout)
  std::string error;
};

using Transport = std::function<HttpResult(const std::string& url, const std::string& body)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryPolicy {
  std::vector<std::chrono::milliseconds> delays{std::chrono::seconds(1), std::chrono::seconds(4),
                                                std::chrono::seconds(16)};
};

struct DeliveryReceipt {
  bool delivered = false;
  bool permanent_failure = false;
  int attempts = 0;
  std::vector<int> statuses;
  std::string error;
};

inline nlohmann::json to_json_value(const DeliveryReceipt& r) {
  nlohmann::json j{{"delivered", r.delivered},
                   {"permanent_failure", r.permanent_failure},
                   {"attempts", r.attempts},
                   {"statuses", r.statuses}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline DeliveryReceipt post_with_retry(const std::string& url, const std::string& body, const Transport& transport,
                                       const RetryPolicy& policy = {}, const Sleeper& sleep = {}) {
  DeliveryReceipt receipt;
  for (std::size_t attempt = 0;; ++attempt) {
    const HttpResult res = transport(url, body);
    ++receipt.attempts;
    receipt.statuses.push_back(res.status);
    if (res.status >= 200 && res.status < 300) {
      receipt.delivered = true;
      receipt.error.clear();
      return receipt;
    }
    receipt.error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
    const bool retryable = res.status == 0 || res.status >= 500;
    if (!retryable) {
      receipt.permanent_failure = true;
      return receipt;
    }
    if (attempt >= policy.delays.size()) return receipt;
    if (sleep)
      sleep(policy.delays[attempt]);
    else
      std::this_thread::sleep_for(policy.delays[attempt]);
  }
}

/// POST the card's webhook body. The card must still be pending.
inline DeliveryReceipt post_card(const CandidateCard& card, const std::string& url, const Transport& transport,
                                 const RetryPolicy& policy = {}, const Sleeper& sleep = {}) {
  if (card.status != CardStatus::Pending)
    throw Error(Errc::PreconditionViolation, "card " + card.point_id + " is not pending");
  return post_with_retry(url, webhook_body(card).dump(), transport, policy, sleep);
}

/// Splits "scheme://host[:port]/path?query" into origin and path.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(Errc::ConfigError, "webhook URL needs a scheme: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

inline Transport http_transport(std::chrono::seconds timeout = std::chrono::seconds(10)) {
  return [timeout](const std::string& url, const std::string& body) {
    const auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    if (!client.is_valid()) return HttpResult{0, "unsupported webhook URL " + origin};
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto res = client.Post(path, body, "application/json");
    if (!res) return HttpResult{0, httplib::to_string(res.error())};
    return HttpResult{res->status, {}};
  };
}

}  // namespace driftwatch
