#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "coevol/model.hpp"

namespace coevol {

enum class Role { Positive, Critical, Advisor, Editor, Judge };

enum class Stage {
    Round1,        // predetermined-position debate
    Round2,        // free debate and cross-evaluation
    Advise,        // advisor over the debate history
    AdviseSolo,    // advisor without a debate
    Edit,          // editor over advisor suggestions
    EditSolo,      // editor answering the request directly
    JudgeForward,  // original shown as Assistant 1
    JudgeReverse,  // edited shown as Assistant 1
};

std::string_view to_string(Role r);
std::string_view to_string(Stage s);
Role role_from_string(std::string_view s);
Stage stage_from_string(std::string_view s);

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The "### Instruction / ### Input / ### Response" block built from a sample.
struct StructuredSample {
    std::string text;
    bool has_input = false;
    /// `text` cut just before the Response header.
    std::string request_only_text;
};

/// Renders the structured block for a single-turn sample, or for turn
/// `target_turn` of a conversation. For conversations the Instruction
/// section holds up to `window` preceding rounds as "User:"/"Assistant:"
/// pairs followed by the current "User:" query.
StructuredSample render_sample(const IftSample& sample, int window,
                               std::optional<int> target_turn = std::nullopt);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes `{name}` placeholders in one pass. Substituted values are
/// never rescanned, so braces inside sample text survive verbatim.
/// Throws PromptError when the template names a placeholder without a
/// binding.
std::string substitute(std::string_view tmpl, const Bindings& bindings);

class PromptCatalog {
public:
    /// The stock prompt set.
    static PromptCatalog builtin();

    /// Replaces entries with files found in `dir`: `<role>.roleplay.txt` and
    /// `<role>.<stage>.txt`. A single trailing newline in a file is dropped.
    void load_overrides(const std::filesystem::path& dir);

    [[nodiscard]] const std::string& role_play(Role role) const;
    [[nodiscard]] const std::string& task_template(Role role, Stage stage) const;
    [[nodiscard]] bool has(Role role, Stage stage) const;

    [[nodiscard]] std::string render_task(Role role, Stage stage, const Bindings& bindings) const;

    /// Order-swapped judge prompts: first shows `original` as Assistant 1,
    /// second shows `edited` as Assistant 1.
    [[nodiscard]] std::pair<std::string, std::string> render_judge_pair(std::string_view request,
                                                                        std::string_view original,
                                                                        std::string_view edited) const;

    void set_role_play(Role role, std::string text);
    void set_task(Role role, Stage stage, std::string text);

private:
    std::map<Role, std::string> role_play_;
    std::map<std::pair<Role, Stage>, std::string> task_;
};

}  // namespace coevol
