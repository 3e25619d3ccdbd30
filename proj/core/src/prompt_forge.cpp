#include "coevol/prompt_forge.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace coevol {

namespace {

constexpr std::string_view kRequestPreamble =
    "Below is an instruction that describes a task, paired with an input that provides further context.";

constexpr std::string_view kPositiveRolePlay =
    "You are an optimistic person who embodies a mindset that looks for the best in every situation, "
    "maintains a positive attitude, and embraces challenges as opportunities for growth and success.";

constexpr std::string_view kCriticalRolePlay =
    "You are a critical person who tends to view things through critical thinking and provide feedback "
    "for improvement or identify areas of concern.";

constexpr std::string_view kAdvisorRolePlay =
    "You are an experienced advisor who possesses a high level of expertise in summarizing and giving advice.";

constexpr std::string_view kEditorRolePlay =
    "You are a professional editor who possesses a high level of expertise in refining and improving "
    "writing content.";

constexpr std::string_view kJudgeRolePlay =
    "You are a helpful and precise assistant for checking the quality of the response.";

constexpr std::string_view kPositiveRound1 =
    "{sample}\n"
    "In your opinion, the above response accurately answers the instruction and the input. "
    "Please state reasons why the response is accurate if it is used for supervised fine-tuning.";

constexpr std::string_view kCriticalRound1 =
    "{sample}\n"
    "In your opinion, the above response does not accurately answer the instruction and the input. "
    "Please offer suggestions on how to improve the response if it is used for supervised fine-tuning.";

constexpr std::string_view kReviewTail =
    "\n\nAbove is another review from others, please evaluate the plausibility of each point according "
    "to the given instruction and input.";

constexpr std::string_view kAdviseTail =
    "Extract and summarize credible ideas from the above dialogue and rewrite them into no more than 3 "
    "writing suggestions for improving the given response. Directly output these suggestions in separate "
    "lines without any foreword or explanation.";

constexpr std::string_view kAdviseSoloTail =
    "Propose no more than 3 writing suggestions for improving the response to the above request. "
    "Directly output these suggestions in separate lines without any foreword or explanation.";

constexpr std::string_view kEditMiddle =
    "Referring to the above writing suggestions (MUST ignore suggestions beyond your capabilities), "
    "modify the previous response and make sure that it appropriately completes the request.";

constexpr std::string_view kJudgeSystem =
    "[System]\n"
    "We would like to request your comparison of the performance of two AI assistants in response to the "
    "user request displayed above.\n"
    "Please compare the helpfulness, relevance, accuracy, and level of detail of their responses.\n"
    "Please first output a single line containing a name indicating whose response is better, "
    "<assistant 1> or <assistant 2> or <equal>. In the subsequent line, please provide a comprehensive "
    "explanation of your comparison, avoiding any potential bias and ensuring that the order in which the "
    "responses were presented does not affect your judgment.";

std::string judge_template(std::string_view slot1, std::string_view slot2)
{
    std::string t;
    t += kRequestPreamble;
    t += "\n{sample_request}\n\n";
    t += "[The Start of Assistant 1's Response]\n";
    t += slot1;
    t += "\n[The End of Assistant 1's Response]\n\n";
    t += "[The Start of Assistant 2's Response]\n";
    t += slot2;
    t += "\n[The End of Assistant 2's Response]\n\n";
    t += kJudgeSystem;
    return t;
}

constexpr std::array kRoles = {Role::Positive, Role::Critical, Role::Advisor, Role::Editor, Role::Judge};
constexpr std::array kStages = {Stage::Round1,     Stage::Round2,   Stage::Advise,
                                Stage::AdviseSolo, Stage::Edit,     Stage::EditSolo,
                                Stage::JudgeForward, Stage::JudgeReverse};

bool is_name_char(char c)
{
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
           c == '_';
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw PromptError("cannot read prompt file " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto s = ss.str();
    if (s.ends_with("\r\n")) {
        s.resize(s.size() - 2);
    } else if (s.ends_with('\n')) {
        s.pop_back();
    }
    return s;
}

}  // namespace

std::string_view to_string(Role r)
{
    switch (r) {
    case Role::Positive: return "positive";
    case Role::Critical: return "critical";
    case Role::Advisor: return "advisor";
    case Role::Editor: return "editor";
    case Role::Judge: return "judge";
    }
    return "unknown";
}

std::string_view to_string(Stage s)
{
    switch (s) {
    case Stage::Round1: return "round1";
    case Stage::Round2: return "round2";
    case Stage::Advise: return "advise";
    case Stage::AdviseSolo: return "advise_solo";
    case Stage::Edit: return "edit";
    case Stage::EditSolo: return "edit_solo";
    case Stage::JudgeForward: return "forward";
    case Stage::JudgeReverse: return "reverse";
    }
    return "unknown";
}

Role role_from_string(std::string_view s)
{
    for (auto r : kRoles) {
        if (to_string(r) == s) return r;
    }
    throw PromptError("unknown role '" + std::string(s) + "'");
}

Stage stage_from_string(std::string_view s)
{
    for (auto st : kStages) {
        if (to_string(st) == s) return st;
    }
    throw PromptError("unknown stage '" + std::string(s) + "'");
}

StructuredSample render_sample(const IftSample& sample, int window, std::optional<int> target_turn)
{
    StructuredSample out;
    std::string instruction;
    std::string response;

    if (sample.is_multi_turn()) {
        if (!target_turn) {
            throw PromptError("multi-turn sample '" + sample.id + "' rendered without a target turn");
        }
        const int target = *target_turn;
        if (target < 0 || target >= static_cast<int>(sample.turns.size())) {
            throw PromptError("target turn " + std::to_string(target) + " out of range for sample '" +
                              sample.id + "'");
        }
        const int first = std::max(0, target - std::max(0, window));
        for (int i = first; i < target; ++i) {
            const auto& t = sample.turns[static_cast<std::size_t>(i)];
            instruction += "User: " + t.user + "\nAssistant: " + t.assistant + "\n\n";
        }
        instruction += "User: " + sample.turns[static_cast<std::size_t>(target)].user;
        response = sample.turns[static_cast<std::size_t>(target)].assistant;
    } else {
        instruction = sample.instruction;
        response = sample.response;
        out.has_input = sample.has_input();
    }

    out.request_only_text = "### Instruction:\n" + instruction;
    if (out.has_input) {
        out.request_only_text += "\n\n### Input:\n" + *sample.input;
    }
    out.text = out.request_only_text + "\n\n### Response:\n" + response;
    return out;
}

std::string substitute(std::string_view tmpl, const Bindings& bindings)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && is_name_char(tmpl[j])) {
                ++j;
            }
            if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
                const auto name = tmpl.substr(i + 1, j - i - 1);
                const auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw PromptError("no binding for placeholder {" + std::string(name) + "}");
                }
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += tmpl[i];
        ++i;
    }
    return out;
}

PromptCatalog PromptCatalog::builtin()
{
    PromptCatalog c;
    c.role_play_[Role::Positive] = kPositiveRolePlay;
    c.role_play_[Role::Critical] = kCriticalRolePlay;
    c.role_play_[Role::Advisor] = kAdvisorRolePlay;
    c.role_play_[Role::Editor] = kEditorRolePlay;
    c.role_play_[Role::Judge] = kJudgeRolePlay;

    c.task_[{Role::Positive, Stage::Round1}] = kPositiveRound1;
    c.task_[{Role::Critical, Stage::Round1}] = kCriticalRound1;
    c.task_[{Role::Positive, Stage::Round2}] =
        std::string("### Review from others:\n{crt_pred}") + std::string(kReviewTail);
    c.task_[{Role::Critical, Stage::Round2}] =
        std::string("### Review from others:\n{pos_pred}") + std::string(kReviewTail);

    c.task_[{Role::Advisor, Stage::Advise}] =
        std::string(kRequestPreamble) +
        "\n{sample}\n\n"
        "The following is a discussion about the given request and response by two reviewers.\n\n"
        "### Reviewer 1:\n{pos_pred}\n\n"
        "### Reviewer 2:\n{crt_pred}\n\n"
        "### Reviewer 1:\n{pos_free}\n\n"
        "### Reviewer 2:\n{crt_free}\n\n" +
        std::string(kAdviseTail);
    c.task_[{Role::Advisor, Stage::AdviseSolo}] =
        std::string(kRequestPreamble) + "\n{sample}\n\n" + std::string(kAdviseSoloTail);

    c.task_[{Role::Editor, Stage::Edit}] =
        "### Writing Suggestions:\n{adv_sugg}\n\n"
        "### Previous Response:\n{pre_resp}\n\n" +
        std::string(kRequestPreamble) + "\n{sample}\n\n" + std::string(kEditMiddle) +
        "\n{sample_request}\n\n### Response:";
    c.task_[{Role::Editor, Stage::EditSolo}] =
        std::string(kRequestPreamble) +
        " Write a response that appropriately completes the request.\n{sample_request}\n\n### Response:";

    c.task_[{Role::Judge, Stage::JudgeForward}] = judge_template("{pre_resp}", "{new_resp}");
    c.task_[{Role::Judge, Stage::JudgeReverse}] = judge_template("{new_resp}", "{pre_resp}");
    return c;
}

void PromptCatalog::load_overrides(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw PromptError("prompt directory " + dir.string() + " does not exist");
    }
    for (auto r : kRoles) {
        const auto rp = dir / (std::string(to_string(r)) + ".roleplay.txt");
        if (std::filesystem::exists(rp)) {
            role_play_[r] = read_file(rp);
        }
        for (auto s : kStages) {
            const auto tp = dir / (std::string(to_string(r)) + "." + std::string(to_string(s)) + ".txt");
            if (std::filesystem::exists(tp)) {
                task_[{r, s}] = read_file(tp);
            }
        }
    }
}

const std::string& PromptCatalog::role_play(Role role) const
{
    const auto it = role_play_.find(role);
    if (it == role_play_.end()) {
        throw PromptError("no role-play prompt for " + std::string(to_string(role)));
    }
    return it->second;
}

bool PromptCatalog::has(Role role, Stage stage) const
{
    return task_.contains({role, stage});
}

const std::string& PromptCatalog::task_template(Role role, Stage stage) const
{
    const auto it = task_.find({role, stage});
    if (it == task_.end()) {
        throw PromptError("no task prompt for (" + std::string(to_string(role)) + ", " +
                          std::string(to_string(stage)) + ")");
    }
    return it->second;
}

std::string PromptCatalog::render_task(Role role, Stage stage, const Bindings& bindings) const
{
    return substitute(task_template(role, stage), bindings);
}

std::pair<std::string, std::string> PromptCatalog::render_judge_pair(std::string_view request,
                                                                     std::string_view original,
                                                                     std::string_view edited) const
{
    const Bindings b{
        {"sample_request", std::string(request)},
        {"pre_resp", std::string(original)},
        {"new_resp", std::string(edited)},
    };
    return {render_task(Role::Judge, Stage::JudgeForward, b), render_task(Role::Judge, Stage::JudgeReverse, b)};
}

void PromptCatalog::set_role_play(Role role, std::string text)
{
    role_play_[role] = std::move(text);
}

void PromptCatalog::set_task(Role role, Stage stage, std::string text)
{
    task_[{role, stage}] = std::move(text);
}

}  // namespace coevol
