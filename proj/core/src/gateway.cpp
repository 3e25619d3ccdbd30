#include "coevol/gateway.hpp"

#include <algorithm>
#include <thread>

#include "coevol/http_backend.hpp"
#include "coevol/mock_backend.hpp"

namespace coevol {

std::string_view to_string(Speaker s)
{
    switch (s) {
    case Speaker::System: return "system";
    case Speaker::User: return "user";
    case Speaker::Assistant: return "assistant";
    }
    return "user";
}

ChatSession::ChatSession(std::string role_play, bool supports_system_prompt)
    : role_play_(std::move(role_play)), supports_system_prompt_(supports_system_prompt)
{
    if (supports_system_prompt_) {
        messages_.push_back({Speaker::System, role_play_});
    }
}

std::size_t ChatSession::conversation_size() const
{
    return messages_.size() - (supports_system_prompt_ ? 1 : 0);
}

std::string ChatSession::user_as_sent(std::string_view user_text) const
{
    if (!supports_system_prompt_ && conversation_size() == 0) {
        std::string s = role_play_;
        s += "\n\n";
        s += user_text;
        return s;
    }
    return std::string(user_text);
}

std::vector<Message> ChatSession::outgoing(std::string_view user_text) const
{
    auto out = messages_;
    out.push_back({Speaker::User, user_as_sent(user_text)});
    return out;
}

ChatSession ChatSession::extended(std::string_view user_text, std::string_view reply) const
{
    ChatSession next = *this;
    next.messages_.push_back({Speaker::User, user_as_sent(user_text)});
    next.messages_.push_back({Speaker::Assistant, std::string(reply)});
    return next;
}

ChatSession refresh(const ChatSession& session)
{
    return ChatSession(session.role_play(), session.supports_system_prompt());
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy policy, int max_in_flight,
                 SamplingParams sampling, Sleeper sleeper)
    : backend_(std::move(backend)),
      policy_(policy),
      sampling_(sampling),
      sleeper_(std::move(sleeper)),
      in_flight_(std::clamp(max_in_flight, 1, 4096))
{
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

Gateway::Completion Gateway::complete(const CompletionRequest& request)
{
    requests_.fetch_add(1);
    std::string last_error;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        attempts_.fetch_add(1);
        in_flight_.acquire();
        try {
            auto text = backend_->complete_once(request);
            in_flight_.release();
            return {std::move(text), attempt};
        } catch (const TransientError& e) {
            in_flight_.release();
            last_error = e.what();
        } catch (...) {
            in_flight_.release();
            throw;
        }
        if (attempt < policy_.max_attempts) {
            sleeper_(policy_.backoff_after(attempt));
        }
    }
    throw RetryExhaustedError("gave up after " + std::to_string(policy_.max_attempts) +
                                  " attempts: " + last_error,
                              policy_.max_attempts);
}

Gateway::AskResult Gateway::ask(const ChatSession& session, std::string_view user_text, CallTag tag)
{
    CompletionRequest req{session.outgoing(user_text), sampling_, std::move(tag)};
    auto done = complete(req);
    auto next = session.extended(user_text, done.text);
    return {std::move(done.text), std::move(next), done.attempts};
}

std::shared_ptr<ChatBackend> make_backend(const BackendDescriptor& descriptor)
{
    if (descriptor.kind == BackendKind::HttpChatApi) {
        return std::make_shared<HttpChatBackend>(descriptor);
    }
    return ScriptedBackend::load(descriptor.mock_script);
}

}  // namespace coevol
