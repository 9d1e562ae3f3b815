#pragma once

// Client for external classifier / NER services.
//
// POST <base>/infer   {"task": "calltype"|"ner", "request_id": str, "inputs": [str...]}
//                  -> {"request_id": str, "outputs": [...]}
// GET  <base>/inventory -> {"inventory": [str...]}   (call-type handshake)

#include "faithsel/annotate.hpp"
#include "faithsel/classify.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::backend {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{2000};
};

class BackendClient {
 public:
  /// `base_url` is `http://host:port[/prefix]`.
  explicit BackendClient(std::string base_url, RetryPolicy retry = {},
                         std::chrono::seconds timeout = std::chrono::seconds(30));

  /// One logical request; retried with the same request id on transport
  /// failures and 5xx answers. Raises TransportError once retries run out,
  /// ProtocolError on malformed or mismatched responses.
  std::vector<nlohmann::json> call(std::string_view task, const std::vector<std::string>& inputs);

  std::vector<std::string> fetch_inventory();

  /// Number of HTTP attempts made so far (all requests).
  int attempts() const noexcept { return attempts_; }

 private:
  std::string next_request_id();

  std::string host_;
  std::string prefix_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  std::string id_prefix_;
  std::uint64_t counter_ = 0;
  int attempts_ = 0;
};

/// Handshakes the inventory once, then classifies `texts` in one batch.
std::vector<classify::CallTypeDistribution> classify_remote(BackendClient& client,
                                                            const classify::Inventory& inventory,
                                                            const std::vector<std::string>& texts);

/// Entities per text, each output being `[{"surface", "type", "start"?, "end"?}]`.
std::vector<annotate::EntitySet> ner_remote(BackendClient& client,
                                            const std::vector<std::string>& texts,
                                            const annotate::MatchConfig& config = {});

}  // namespace faithsel::backend
