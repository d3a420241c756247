#include "hitl/loop/journal.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"

#include <algorithm>

namespace hitl::loop {

using nlohmann::json;

std::string_view to_string(Phase phase) {
    switch (phase) {
    case Phase::idle: return "idle";
    case Phase::training: return "training";
    case Phase::awaiting_annotation: return "awaiting_annotation";
    case Phase::finished: return "finished";
    }
    return "idle";
}

namespace {

[[noreturn]] void illegal(const std::string& type, Phase phase) {
    throw Error(ErrorCode::contract_violation,
                "event '" + type + "' is not allowed in phase " + std::string(to_string(phase)));
}

} // namespace

void RunState::apply(const json& event) {
    const std::string type = event.at("type").get<std::string>();
    if (phase == Phase::finished) illegal(type, phase);
    if (type == "run_created") {
        if (events != 0) illegal(type, phase);
        run_id = event.at("run_id").get<std::string>();
        pool = event.at("pool").get<std::vector<std::string>>();
        auto_advance = event.value("auto_advance", true);
        phase = Phase::idle;
    } else if (type == "run_started" || type == "resumed") {
        if (phase != Phase::idle) illegal(type, phase);
        phase = Phase::training;
    } else if (type == "igniter_evaluated") {
        if (phase != Phase::training) illegal(type, phase);
        baseline = event.at("dice");
    } else if (type == "round_opened") {
        if (phase != Phase::training) illegal(type, phase);
        current_round = event.at("round").get<int>();
        pending = event.at("batch").get<std::vector<std::string>>();
        estimates = event.value("estimates", json::array()).get<std::vector<json>>();
        phase = Phase::awaiting_annotation;
    } else if (type == "annotation") {
        if (phase != Phase::awaiting_annotation) illegal(type, phase);
        const auto id = event.at("sample_id").get<std::string>();
        const auto it = std::find(pending.begin(), pending.end(), id);
        if (it == pending.end()) {
            throw Error(ErrorCode::contract_violation, "annotation for non-pending sample " + id);
        }
        pending.erase(it);
        refined.push_back(id);
    } else if (type == "paused") {
        if (phase != Phase::awaiting_annotation || !pending.empty()) illegal(type, phase);
        phase = Phase::idle;
    } else if (type == "training_started") {
        if (phase != Phase::awaiting_annotation && phase != Phase::training) illegal(type, phase);
        if (!pending.empty()) {
            throw Error(ErrorCode::contract_violation, "training started with annotations pending");
        }
        phase = Phase::training;
    } else if (type == "round_completed") {
        if (phase != Phase::training) illegal(type, phase);
        rounds.push_back(event.at("record"));
        estimates.clear();
    } else if (type == "run_finished") {
        if (phase != Phase::training) illegal(type, phase);
        if (event.contains("note") && !event.at("note").is_null()) note = event.at("note").get<std::string>();
        phase = Phase::finished;
        pending.clear();
    } else if (type == "run_failed") {
        error = event.at("message").get<std::string>();
        phase = Phase::finished;
        pending.clear();
    } else {
        throw Error(ErrorCode::contract_violation, "unknown event type '" + type + "'");
    }
    ++events;
}

json RunState::to_json() const {
    return {
        {"run_id", run_id},
        {"phase", to_string(phase)},
        {"current_round", current_round},
        {"pending", pending},
        {"refined", refined},
        {"pool_size", pool.size()},
        {"baseline", baseline},
        {"rounds", rounds},
        {"estimates", estimates},
        {"auto_advance", auto_advance},
        {"error", error ? json(*error) : json(nullptr)},
        {"note", note ? json(*note) : json(nullptr)},
        {"events", events},
    };
}

RunState replay(const std::vector<json>& events) {
    RunState state;
    for (const auto& e : events) state.apply(e);
    return state;
}

Journal::Journal(std::filesystem::path path) : path_(std::move(path)) {
    if (!path_.empty()) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        out_.open(path_, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error(ErrorCode::io, "cannot open event log " + path_.string());
    }
}

void Journal::emit(json event) {
    std::lock_guard lock(mutex_);
    event["seq"] = state_.events;
    RunState next = state_;
    next.apply(event);
    if (out_.is_open()) {
        out_ << event.dump() << '\n';
        out_.flush();
        if (!out_) throw Error(ErrorCode::io, "failed writing event log " + path_.string());
    }
    state_ = std::move(next);
    events_.push_back(event);
    if (listener_) listener_(event, state_);
}

RunState Journal::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

std::vector<json> Journal::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

void Journal::set_listener(Listener listener) {
    std::lock_guard lock(mutex_);
    listener_ = std::move(listener);
}

void Journal::snapshot() const {
    if (path_.empty()) return;
    const json state = this->state().to_json();
    io::write_text(path_.parent_path() / "state.json", state.dump(2) + "\n");
}

std::vector<json> Journal::read(const std::filesystem::path& path) {
    const std::string text = io::read_text(path);
    std::vector<json> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string_view line(text.data() + start, end - start);
        if (!line.empty()) {
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
                throw Error(ErrorCode::malformed_stream, "bad event log line in " + path.string());
            }
            out.push_back(std::move(j));
        }
        start = end + 1;
    }
    return out;
}

} // namespace hitl::loop
