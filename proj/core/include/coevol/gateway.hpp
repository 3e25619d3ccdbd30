#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coevol/config.hpp"
#include "coevol/prompt_forge.hpp"

namespace coevol {

enum class Speaker { System, User, Assistant };

std::string_view to_string(Speaker s);

struct Message {
    Speaker speaker = Speaker::User;
    std::string text;

    bool operator==(const Message&) const = default;
};

/// Conversation memory of one agent.
///
/// With system-prompt support the role-play text is message 0 (System).
/// Without it, no System message exists and the role-play text is prepended
/// to the first User message. After the optional System message, messages
/// alternate User/Assistant.
class ChatSession {
public:
    ChatSession(std::string role_play, bool supports_system_prompt);

    [[nodiscard]] const std::string& role_play() const { return role_play_; }
    [[nodiscard]] bool supports_system_prompt() const { return supports_system_prompt_; }
    [[nodiscard]] const std::vector<Message>& messages() const { return messages_; }
    /// User/Assistant messages only.
    [[nodiscard]] std::size_t conversation_size() const;

    /// Full message list for a new user turn.
    [[nodiscard]] std::vector<Message> outgoing(std::string_view user_text) const;

    /// Copy extended by the user turn (as sent) and the assistant reply.
    [[nodiscard]] ChatSession extended(std::string_view user_text, std::string_view reply) const;

    bool operator==(const ChatSession&) const = default;

private:
    [[nodiscard]] std::string user_as_sent(std::string_view user_text) const;

    std::string role_play_;
    bool supports_system_prompt_;
    std::vector<Message> messages_;
};

/// Drops all conversation, keeping only the role-play configuration.
[[nodiscard]] ChatSession refresh(const ChatSession& session);

/// Identifies a call for scripting and tracing; real backends ignore it.
struct CallTag {
    Role role = Role::Advisor;
    Stage stage = Stage::Advise;
    int round = 1;
    std::string sample_id;
    std::optional<int> turn;
};

struct SamplingParams {
    int max_tokens = 1000;
    double temperature = 0.0;
    double top_p = 1.0;
};

struct CompletionRequest {
    std::vector<Message> messages;
    SamplingParams sampling;
    CallTag tag;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Timeouts, rate limits, 5xx replies, dropped connections.
class TransientError : public BackendError {
public:
    using BackendError::BackendError;
};

class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

class MalformedReplyError : public BackendError {
public:
    using BackendError::BackendError;
};

class RetryExhaustedError : public BackendError {
public:
    RetryExhaustedError(const std::string& what, int attempts) : BackendError(what), attempts_(attempts) {}
    [[nodiscard]] int attempts() const { return attempts_; }

private:
    int attempts_;
};

/// One network attempt. Implementations throw TransientError for anything
/// worth retrying and another BackendError for permanent failures.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete_once(const CompletionRequest& request) = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retrying, concurrency-bounded front door to a backend. Safe to share
/// between workers.
class Gateway {
public:
    struct Completion {
        std::string text;
        int attempts = 1;
    };

    Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy policy, int max_in_flight,
            SamplingParams sampling = {}, Sleeper sleeper = {});

    /// Returns the reply; never touches any session.
    Completion complete(const CompletionRequest& request);

    struct AskResult {
        std::string reply;
        ChatSession session;
        int attempts = 1;
    };

    /// Sends `user_text` on top of `session`; the returned session is longer
    /// by exactly one User and one Assistant message.
    AskResult ask(const ChatSession& session, std::string_view user_text, CallTag tag);

    [[nodiscard]] const SamplingParams& sampling() const { return sampling_; }
    [[nodiscard]] long long total_attempts() const { return attempts_.load(); }
    [[nodiscard]] long long total_requests() const { return requests_.load(); }

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy policy_;
    SamplingParams sampling_;
    Sleeper sleeper_;
    std::counting_semaphore<4096> in_flight_;
    std::atomic<long long> attempts_{0};
    std::atomic<long long> requests_{0};
};

/// Builds the backend named by `descriptor` (HTTP or scripted mock).
std::shared_ptr<ChatBackend> make_backend(const BackendDescriptor& descriptor);

}  // namespace coevol
