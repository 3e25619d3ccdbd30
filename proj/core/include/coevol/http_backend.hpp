#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "coevol/gateway.hpp"

namespace coevol {

/// Chat-completion client for OpenAI-compatible servers (hosted APIs,
/// vLLM, llama.cpp server, ...). `endpoint` is the full URL of the
/// completions route, e.g. `http://localhost:8000/v1/chat/completions`.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendDescriptor descriptor);

    std::string complete_once(const CompletionRequest& request) override;

    /// Request body for `request`.
    [[nodiscard]] nlohmann::json build_body(const CompletionRequest& request) const;

    /// Extracts `choices[0].message.content`; throws MalformedReplyError.
    static std::string parse_reply(const std::string& body);

    /// Maps an HTTP status to the matching error; no-op for 2xx.
    static void raise_for_status(long status, const std::string& body);

private:
    BackendDescriptor descriptor_;
};

}  // namespace coevol
