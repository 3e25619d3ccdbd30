#include "coevol/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace coevol {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

bool looks_like_conversation(const ojson& r)
{
    return r.is_object() && (r.contains("conversations") || r.contains("messages"));
}

bool looks_like_alpaca(const ojson& r)
{
    return r.is_object() && r.contains("instruction");
}

std::string require_string(const ojson& r, const char* key)
{
    if (!r.contains(key)) {
        throw ValidationError(std::string("missing \"") + key + "\"");
    }
    if (!r.at(key).is_string()) {
        throw ValidationError(std::string("\"") + key + "\" is not a string");
    }
    return r.at(key).get<std::string>();
}

std::string record_id(const ojson& r, std::size_t index)
{
    if (r.contains("id")) {
        const auto& id = r.at("id");
        if (id.is_string()) return id.get<std::string>();
        if (id.is_number_integer()) return std::to_string(id.get<long long>());
        throw ValidationError("\"id\" must be a string or an integer");
    }
    return std::to_string(index);
}

enum class Side { User, Assistant, System };

Side side_of(const std::string& role)
{
    if (role == "human" || role == "user") return Side::User;
    if (role == "gpt" || role == "assistant" || role == "chatgpt" || role == "model") return Side::Assistant;
    if (role == "system") return Side::System;
    throw ValidationError("unknown message role \"" + role + "\"");
}

struct MessageFields {
    const char* list;
    const char* role;
    const char* text;
};

MessageFields message_fields(const ojson& r)
{
    if (r.contains("conversations")) return {"conversations", "from", "value"};
    return {"messages", "role", "content"};
}

std::string dump_line(const ojson& j)
{
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ojson iteration_json(const IterationRecord& it)
{
    ojson j;
    j["round"] = it.round;
    if (it.debate) {
        j["debate"] = {{"pos_pred", it.debate->pos_pred},
                       {"crt_pred", it.debate->crt_pred},
                       {"pos_free", it.debate->pos_free},
                       {"crt_free", it.debate->crt_free}};
    } else {
        j["debate"] = nullptr;
    }
    if (it.advisor) {
        j["advisor"] = {{"raw", it.advisor->raw}, {"suggestions", it.advisor->suggestions}};
    } else {
        j["advisor"] = nullptr;
    }
    j["edited_response"] = it.edited_response;
    if (it.verdicts) {
        auto verdict = [](const JudgeVerdict& v) {
            return ojson{{"raw", v.raw},
                         {"choice", to_string(v.choice)},
                         {"order", to_string(v.order)},
                         {"attempts", v.attempts}};
        };
        j["verdicts"] = ojson::array({verdict(it.verdicts->first), verdict(it.verdicts->second)});
    } else {
        j["verdicts"] = nullptr;
    }
    if (it.scores) {
        j["scores"] = {{"original", it.scores->original}, {"edited", it.scores->edited}};
    } else {
        j["scores"] = nullptr;
    }
    j["decision"] = to_string(it.decision);
    j["agent_calls"] = it.agent_calls;
    j["parse_retries"] = it.parse_retries;
    j["warnings"] = it.warnings;
    return j;
}

IterationRecord iteration_from_json(const nlohmann::json& j)
{
    IterationRecord it;
    it.round = j.at("round").get<int>();
    if (!j.at("debate").is_null()) {
        const auto& d = j.at("debate");
        it.debate = DebateTranscript{d.at("pos_pred").get<std::string>(), d.at("crt_pred").get<std::string>(),
                                     d.at("pos_free").get<std::string>(), d.at("crt_free").get<std::string>()};
    }
    if (!j.at("advisor").is_null()) {
        const auto& a = j.at("advisor");
        it.advisor = AdvisorOutput{a.at("raw").get<std::string>(), a.at("suggestions").get<std::vector<std::string>>()};
    }
    it.edited_response = j.at("edited_response").get<std::string>();
    if (!j.at("verdicts").is_null()) {
        auto verdict = [](const nlohmann::json& v) {
            JudgeVerdict out;
            out.raw = v.at("raw").get<std::string>();
            out.choice = choice_from_string(v.at("choice").get<std::string>());
            out.order = order_from_string(v.at("order").get<std::string>());
            out.attempts = v.at("attempts").get<int>();
            return out;
        };
        const auto& vs = j.at("verdicts");
        it.verdicts = std::make_pair(verdict(vs.at(0)), verdict(vs.at(1)));
    }
    if (!j.at("scores").is_null()) {
        it.scores = ScorePair{j.at("scores").at("original").get<int>(), j.at("scores").at("edited").get<int>()};
    }
    it.decision = decision_from_string(j.at("decision").get<std::string>());
    it.agent_calls = j.at("agent_calls").get<int>();
    it.parse_retries = j.at("parse_retries").get<int>();
    it.warnings = j.at("warnings").get<std::vector<std::string>>();
    return it;
}

}  // namespace

DatasetReader::DatasetReader(const fs::path& path, DatasetFormat format, bool strict)
    : path_(path), format_(format), strict_(strict)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError("cannot read dataset " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    content_ = ss.str();
    index_elements();
}

void DatasetReader::index_elements()
{
    const auto& s = content_;
    std::size_t i = 0;
    std::size_t line = 1;
    auto skip_ws = [&] {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) {
            if (s[i] == '\n') ++line;
            ++i;
        }
    };
    skip_ws();
    if (i >= s.size()) {
        return;
    }
    if (s[i] != '[') {
        // JSON lines: one record per non-blank line.
        std::size_t begin = 0;
        std::size_t ln = 1;
        while (begin < s.size()) {
            auto end = s.find('\n', begin);
            if (end == std::string::npos) end = s.size();
            const auto text = trim(std::string_view(s).substr(begin, end - begin));
            if (!text.empty()) {
                spans_.push_back({begin, end, ln});
            }
            begin = end + 1;
            ++ln;
        }
        return;
    }

    ++i;
    int depth = 0;
    bool in_string = false;
    std::optional<Span> current;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\n') ++line;
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (!current && !std::isspace(static_cast<unsigned char>(c)) && c != ',' && !(depth == 0 && c == ']')) {
            current = Span{i, i, line};
        }
        switch (c) {
        case '"':
            in_string = true;
            break;
        case '{':
        case '[':
            ++depth;
            break;
        case '}':
        case ']':
            if (depth == 0) {
                if (c == '}') {
                    break;
                }
                if (current) {
                    current->end = i;
                    spans_.push_back(*current);
                }
                return;
            }
            --depth;
            break;
        case ',':
            if (depth == 0 && current) {
                current->end = i;
                spans_.push_back(*current);
                current.reset();
            }
            break;
        default:
            break;
        }
    }
    throw DatasetError(path_.string() + ": unterminated top-level array");
}

void DatasetReader::reject(std::size_t index, std::size_t line, const std::string& message)
{
    const auto full = path_.string() + ":" + std::to_string(line) + ": record " + std::to_string(index) + ": " + message;
    if (strict_) {
        throw DatasetError(full);
    }
    issues_.push_back({index, line, full});
}

std::optional<LoadedRecord> DatasetReader::next()
{
    while (cursor_ < spans_.size()) {
        const auto index = cursor_++;
        const auto& span = spans_[index];
        ojson record;
        try {
            record = ojson::parse(std::string_view(content_).substr(span.begin, span.end - span.begin));
        } catch (const nlohmann::json::parse_error& e) {
            reject(index, span.line, std::string("invalid JSON: ") + e.what());
            continue;
        }
        if (format_ == DatasetFormat::Auto) {
            if (looks_like_conversation(record)) {
                format_ = DatasetFormat::ConversationMultiTurn;
            } else if (looks_like_alpaca(record)) {
                format_ = DatasetFormat::AlpacaSingleTurn;
            } else {
                reject(index, span.line, "cannot tell the record format");
                continue;
            }
        } else if (index == 0 || seen_ids_.empty()) {
            const bool conv = looks_like_conversation(record);
            const bool alpaca = looks_like_alpaca(record);
            if ((format_ == DatasetFormat::AlpacaSingleTurn && conv && !alpaca) ||
                (format_ == DatasetFormat::ConversationMultiTurn && alpaca && !conv)) {
                throw DatasetError(path_.string() + ": declared format '" + to_string(format_) +
                                   "' does not match the records");
            }
        }
        try {
            auto sample = sample_from_record(record, format_, index);
            if (!seen_ids_.insert(sample.id).second) {
                throw ValidationError("duplicate id \"" + sample.id + "\"");
            }
            return LoadedRecord{std::move(sample), std::move(record), index, span.line};
        } catch (const ValidationError& e) {
            reject(index, span.line, e.what());
        }
    }
    return std::nullopt;
}

LoadedDataset load_dataset(const fs::path& path, DatasetFormat format, bool strict)
{
    DatasetReader reader(path, format, strict);
    LoadedDataset out;
    while (auto rec = reader.next()) {
        out.records.push_back(std::move(*rec));
    }
    out.format = reader.format();
    out.issues = reader.issues();
    return out;
}

IftSample sample_from_record(const ojson& record, DatasetFormat format, std::size_t index)
{
    if (!record.is_object()) {
        throw ValidationError("record is not an object");
    }
    IftSample s;
    s.id = record_id(record, index);
    if (format == DatasetFormat::AlpacaSingleTurn) {
        s.instruction = require_string(record, "instruction");
        if (record.contains("input") && !record.at("input").is_null()) {
            auto input = require_string(record, "input");
            if (!input.empty()) s.input = std::move(input);
        }
        s.response = require_string(record, "output");
        if (s.instruction.empty()) {
            throw ValidationError("empty \"instruction\"");
        }
    } else if (format == DatasetFormat::ConversationMultiTurn) {
        if (!looks_like_conversation(record)) {
            throw ValidationError("missing \"conversations\" or \"messages\"");
        }
        const auto fields = message_fields(record);
        const auto& list = record.at(fields.list);
        if (!list.is_array()) {
            throw ValidationError(std::string("\"") + fields.list + "\" is not an array");
        }
        std::optional<std::string> pending_user;
        for (const auto& m : list) {
            const auto side = side_of(require_string(m, fields.role));
            auto text = require_string(m, fields.text);
            if (side == Side::System) continue;
            if (side == Side::User) {
                if (pending_user) throw ValidationError("two consecutive user messages");
                pending_user = std::move(text);
            } else {
                if (!pending_user) throw ValidationError("assistant message without a preceding user message");
                s.turns.push_back({std::move(*pending_user), std::move(text), static_cast<int>(s.turns.size())});
                pending_user.reset();
            }
        }
        if (pending_user) {
            throw ValidationError("conversation ends with an unanswered user message");
        }
        if (s.turns.empty()) {
            throw ValidationError("conversation has no turns");
        }
    } else {
        throw ValidationError("dataset format not resolved");
    }
    s.validate();
    return s;
}

ojson evolved_record(const LoadedRecord& record, const SampleOutcome& outcome)
{
    ojson out = record.source;
    if (outcome.failed()) {
        return out;
    }
    if (!record.sample.is_multi_turn()) {
        out["output"] = outcome.traces.at(0).final_response;
        return out;
    }
    const auto fields = message_fields(out);
    std::size_t turn = 0;
    for (auto& m : out[fields.list]) {
        if (side_of(m.at(fields.role).get<std::string>()) != Side::Assistant) continue;
        if (turn < outcome.traces.size()) {
            m[fields.text] = outcome.traces[turn].final_response;
        }
        ++turn;
    }
    return out;
}

ojson to_json(const SampleOutcome& outcome)
{
    ojson j;
    j["sample_id"] = outcome.sample_id;
    j["multi_turn"] = outcome.multi_turn;
    j["status"] = to_string(outcome.status);
    j["error"] = outcome.error;
    auto traces = ojson::array();
    for (const auto& t : outcome.traces) {
        ojson tj;
        tj["turn"] = t.turn_index ? ojson(*t.turn_index) : ojson(nullptr);
        tj["status"] = to_string(t.status);
        tj["error"] = t.error;
        tj["original_response"] = t.original_response;
        tj["final_response"] = t.final_response;
        tj["rounds_evolved"] = t.rounds_evolved;
        tj["agent_calls"] = t.agent_calls();
        auto its = ojson::array();
        for (const auto& it : t.iterations) {
            its.push_back(iteration_json(it));
        }
        tj["iterations"] = std::move(its);
        traces.push_back(std::move(tj));
    }
    j["traces"] = std::move(traces);
    return j;
}

SampleOutcome outcome_from_json(const nlohmann::json& j)
{
    SampleOutcome o;
    o.sample_id = j.at("sample_id").get<std::string>();
    o.multi_turn = j.at("multi_turn").get<bool>();
    o.status = status_from_string(j.at("status").get<std::string>());
    o.error = j.at("error").get<std::string>();
    for (const auto& tj : j.at("traces")) {
        EvolutionTrace t;
        t.sample_id = o.sample_id;
        if (!tj.at("turn").is_null()) t.turn_index = tj.at("turn").get<int>();
        t.status = status_from_string(tj.at("status").get<std::string>());
        t.error = tj.at("error").get<std::string>();
        t.original_response = tj.at("original_response").get<std::string>();
        t.final_response = tj.at("final_response").get<std::string>();
        t.rounds_evolved = tj.at("rounds_evolved").get<int>();
        for (const auto& it : tj.at("iterations")) {
            t.iterations.push_back(iteration_from_json(it));
        }
        o.traces.push_back(std::move(t));
    }
    return o;
}

std::string to_line(const ojson& j)
{
    return dump_line(j);
}

std::vector<SampleOutcome> read_traces(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError("cannot read trace file " + path.string());
    }
    std::vector<SampleOutcome> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(outcome_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(n) + ": malformed trace: " + e.what());
        }
    }
    return out;
}

std::vector<SuggestionRecord> collect_suggestions(const std::vector<SampleOutcome>& outcomes)
{
    std::vector<SuggestionRecord> out;
    for (const auto& o : outcomes) {
        for (const auto& t : o.traces) {
            for (const auto& it : t.iterations) {
                if (!it.advisor) continue;
                int idx = 0;
                for (const auto& s : it.advisor->suggestions) {
                    out.push_back({o.sample_id, t.turn_index, it.round, idx++, s});
                }
            }
        }
    }
    return out;
}

ojson to_json(const SuggestionRecord& r)
{
    ojson j;
    j["sample_id"] = r.sample_id;
    j["turn"] = r.turn ? ojson(*r.turn) : ojson(nullptr);
    j["round"] = r.round;
    j["index"] = r.index;
    j["suggestion"] = r.suggestion;
    return j;
}

void Checkpoint::save(const fs::path& path) const
{
    ojson j;
    j["run_id"] = run_id;
    j["config_digest"] = config_digest;
    j["total"] = total;
    j["evolved_offset"] = evolved_offset;
    j["trace_offset"] = trace_offset;
    j["completed"] = completed;
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DatasetError("cannot write checkpoint " + tmp.string());
        }
        out << j.dump(2) << '\n';
        if (!out.flush()) {
            throw DatasetError("cannot write checkpoint " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

Checkpoint Checkpoint::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DatasetError("no checkpoint at " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        Checkpoint c;
        c.run_id = j.at("run_id").get<std::string>();
        c.config_digest = j.at("config_digest").get<std::string>();
        c.total = j.at("total").get<std::size_t>();
        c.evolved_offset = j.at("evolved_offset").get<std::uintmax_t>();
        c.trace_offset = j.at("trace_offset").get<std::uintmax_t>();
        c.completed = j.at("completed").get<std::vector<std::string>>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
}

RunPaths RunPaths::under(const fs::path& out_dir, const std::string& run_id)
{
    const auto dir = out_dir / run_id;
    return {dir, dir / "evolved.jsonl", dir / "traces.jsonl", dir / "checkpoint.json", dir / "report.json"};
}

}  // namespace coevol
