#include "faithsel/backend.hpp"

#include "faithsel/error.hpp"

#include <httplib.h>

#include <random>
#include <sstream>
#include <thread>

namespace faithsel::backend {

using nlohmann::json;

namespace {

std::string random_hex(std::size_t n) {
  std::random_device rd;
  std::ostringstream out;
  out << std::hex;
  for (std::size_t i = 0; i < n; ++i) out << (rd() & 0xF);
  return out.str();
}

}  // namespace

BackendClient::BackendClient(std::string base_url, RetryPolicy retry, std::chrono::seconds timeout)
    : retry_(retry), timeout_(timeout), id_prefix_(random_hex(12)) {
  auto scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    throw Error(Errc::invalid_argument, "endpoint must look like http://host:port");
  }
  auto slash = base_url.find('/', scheme + 3);
  host_ = base_url.substr(0, slash);
  if (slash != std::string::npos) prefix_ = base_url.substr(slash);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

std::string BackendClient::next_request_id() {
  return id_prefix_ + "-" + std::to_string(++counter_);
}

std::vector<json> BackendClient::call(std::string_view task, const std::vector<std::string>& inputs) {
  const std::string request_id = next_request_id();
  const std::string body =
      json{{"task", task}, {"request_id", request_id}, {"inputs", inputs}}.dump();

  httplib::Client cli(host_);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);

  auto backoff = retry_.initial_backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    ++attempts_;
    auto res = cli.Post(prefix_ + "/infer", body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.is_object()) {
        throw Error(Errc::protocol_error, "response is not a JSON object");
      }
      if (reply.value("request_id", "") != request_id) {
        throw Error(Errc::protocol_error, "response carries another request id");
      }
      auto outputs = reply.find("outputs");
      if (outputs == reply.end() || !outputs->is_array()) {
        throw Error(Errc::protocol_error, "response lacks an 'outputs' array");
      }
      if (outputs->size() != inputs.size()) {
        throw Error(Errc::protocol_error, "expected " + std::to_string(inputs.size()) +
                                              " outputs, got " + std::to_string(outputs->size()));
      }
      return outputs->get<std::vector<json>>();
    }
    if (res && res->status < 500) {
      throw Error(Errc::protocol_error, "service answered HTTP " + std::to_string(res->status));
    }
    last_failure = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < retry_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(retry_.max_backoff,
                         std::chrono::milliseconds(static_cast<long long>(
                             static_cast<double>(backoff.count()) * retry_.multiplier)));
    }
  }
  throw Error(Errc::transport_error, "giving up after " + std::to_string(retry_.max_attempts) +
                                         " attempts: " + last_failure);
}

std::vector<std::string> BackendClient::fetch_inventory() {
  httplib::Client cli(host_);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  ++attempts_;
  auto res = cli.Get(prefix_ + "/inventory");
  if (!res) throw Error(Errc::transport_error, httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(Errc::protocol_error, "inventory handshake answered HTTP " +
                                          std::to_string(res->status));
  }
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("inventory") || !reply["inventory"].is_array()) {
    throw Error(Errc::protocol_error, "malformed inventory handshake");
  }
  std::vector<std::string> labels;
  for (const auto& l : reply["inventory"]) {
    if (!l.is_string()) throw Error(Errc::protocol_error, "inventory labels must be strings");
    labels.push_back(l.get<std::string>());
  }
  return labels;
}

std::vector<classify::CallTypeDistribution> classify_remote(BackendClient& client,
                                                            const classify::Inventory& inventory,
                                                            const std::vector<std::string>& texts) {
  if (client.fetch_inventory() != inventory.labels()) {
    throw Error(Errc::inventory_mismatch, "remote classifier uses another call-type inventory");
  }
  std::vector<classify::CallTypeDistribution> out;
  for (const auto& output : client.call("calltype", texts)) {
    try {
      out.push_back(classify::distribution_from_json(output, inventory));
    } catch (const Error& e) {
      if (e.code() == Errc::not_a_distribution) throw;
      throw Error(Errc::protocol_error, e.detail());
    }
  }
  return out;
}

std::vector<annotate::EntitySet> ner_remote(BackendClient& client,
                                            const std::vector<std::string>& texts,
                                            const annotate::MatchConfig& config) {
  std::vector<annotate::EntitySet> out;
  for (const auto& output : client.call("ner", texts)) {
    if (!output.is_array()) throw Error(Errc::protocol_error, "ner output must be an array");
    annotate::EntitySet set(config);
    for (const auto& e : output) {
      if (!e.is_object() || !e.contains("surface") || !e["surface"].is_string() ||
          !e.contains("type") || !e["type"].is_string()) {
        throw Error(Errc::protocol_error, "ner entity needs string 'surface' and 'type'");
      }
      std::optional<annotate::CharRange> range;
      if (e.contains("start") && e.contains("end") && e["start"].is_number_unsigned() &&
          e["end"].is_number_unsigned()) {
        range = annotate::CharRange{e["start"].get<std::size_t>(), e["end"].get<std::size_t>()};
      }
      set.insert(annotate::make_span(e["surface"].get<std::string>(),
                                     annotate::EntityType::parse(e["type"].get<std::string>()),
                                     range, config.normalization));
    }
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace faithsel::backend
