#include "coevol/http_backend.hpp"

#include <cstdlib>
#include <memory>

#include <curl/curl.h>

namespace coevol {

namespace {

struct CurlGlobal {
    CurlGlobal() { curl_global_init(CURL_GLOBAL_DEFAULT); }
    ~CurlGlobal() { curl_global_cleanup(); }
};

void ensure_curl_global()
{
    static CurlGlobal global;
}

std::size_t append_body(char* data, std::size_t size, std::size_t nmemb, void* userp)
{
    static_cast<std::string*>(userp)->append(data, size * nmemb);
    return size * nmemb;
}

std::string truncate(const std::string& s, std::size_t n = 200)
{
    return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor))
{
    ensure_curl_global();
}

nlohmann::json HttpChatBackend::build_body(const CompletionRequest& request) const
{
    auto messages = nlohmann::json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", std::string(to_string(m.speaker))}, {"content", m.text}});
    }
    return {
        {"model", descriptor_.model},
        {"messages", std::move(messages)},
        {"max_tokens", request.sampling.max_tokens},
        {"temperature", request.sampling.temperature},
        {"top_p", request.sampling.top_p},
    };
}

std::string HttpChatBackend::parse_reply(const std::string& body)
{
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) {
            throw MalformedReplyError("reply content is not a string");
        }
        return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedReplyError(std::string("malformed backend reply: ") + e.what() + ": " + truncate(body));
    }
}

void HttpChatBackend::raise_for_status(long status, const std::string& body)
{
    if (status >= 200 && status < 300) {
        return;
    }
    const auto msg = "HTTP " + std::to_string(status) + ": " + truncate(body);
    if (status == 401 || status == 403) {
        throw AuthError(msg);
    }
    if (status == 408 || status == 409 || status == 429 || status >= 500) {
        throw TransientError(msg);
    }
    throw BackendError(msg);
}

std::string HttpChatBackend::complete_once(const CompletionRequest& request)
{
    std::string auth_header;
    if (!descriptor_.auth_env.empty()) {
        const char* key = std::getenv(descriptor_.auth_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw AuthError("environment variable " + descriptor_.auth_env + " is not set");
        }
        auth_header = std::string("Authorization: Bearer ") + key;
    }

    std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), &curl_easy_cleanup);
    if (!curl) {
        throw TransientError("curl_easy_init failed");
    }
    curl_slist* raw_headers = curl_slist_append(nullptr, "Content-Type: application/json");
    if (!auth_header.empty()) {
        raw_headers = curl_slist_append(raw_headers, auth_header.c_str());
    }
    std::unique_ptr<curl_slist, decltype(&curl_slist_free_all)> headers(raw_headers, &curl_slist_free_all);

    const auto payload = build_body(request).dump();
    std::string response;
    curl_easy_setopt(curl.get(), CURLOPT_URL, descriptor_.endpoint.c_str());
    curl_easy_setopt(curl.get(), CURLOPT_HTTPHEADER, headers.get());
    curl_easy_setopt(curl.get(), CURLOPT_POSTFIELDS, payload.c_str());
    curl_easy_setopt(curl.get(), CURLOPT_POSTFIELDSIZE, static_cast<long>(payload.size()));
    curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, &append_body);
    curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &response);
    curl_easy_setopt(curl.get(), CURLOPT_TIMEOUT, static_cast<long>(descriptor_.timeout.count()));
    curl_easy_setopt(curl.get(), CURLOPT_NOSIGNAL, 1L);

    const auto rc = curl_easy_perform(curl.get());
    if (rc != CURLE_OK) {
        // Connection-level failures (refused, reset, timeout, DNS) are all retried.
        throw TransientError(std::string("request to ") + descriptor_.endpoint + " failed: " + curl_easy_strerror(rc));
    }
    long status = 0;
    curl_easy_getinfo(curl.get(), CURLINFO_RESPONSE_CODE, &status);
    raise_for_status(status, response);
    return parse_reply(response);
}

}  // namespace coevol
