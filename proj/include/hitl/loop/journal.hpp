#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::loop {

enum class Phase { idle, training, awaiting_annotation, finished };

std::string_view to_string(Phase phase);

/// Live view of a run, rebuilt from its events alone.
struct RunState {
    std::string run_id;
    Phase phase = Phase::idle;
    int current_round = 0;
    std::vector<std::string> pending;
    std::vector<std::string> refined;
    std::vector<std::string> pool;
    nlohmann::json baseline;               // null until the igniter is evaluated
    std::vector<nlohmann::json> rounds;    // completed round records
    std::vector<nlohmann::json> estimates; // difficulty estimates for the open round
    bool auto_advance = true;
    std::optional<std::string> error;
    std::optional<std::string> note;
    std::size_t events = 0;

    /// Throws contract_violation for an event that is illegal in the current
    /// phase, so a corrupt log cannot silently produce a bogus state.
    void apply(const nlohmann::json& event);
    nlohmann::json to_json() const;

    friend bool operator==(const RunState&, const RunState&) = default;
};

RunState replay(const std::vector<nlohmann::json>& events);

/// Appends events to an NDJSON file and folds them into a RunState. Safe to
/// share between the loop thread and request handlers.
class Journal {
  public:
    using Listener = std::function<void(const nlohmann::json& event, const RunState& state)>;

    /// An empty path keeps events in memory only.
    explicit Journal(std::filesystem::path path = {});

    /// Adds "seq", validates by applying, appends, then notifies.
    void emit(nlohmann::json event);
    RunState state() const;
    std::vector<nlohmann::json> events() const;
    void set_listener(Listener listener);
    /// Writes state.json next to the log (no-op for an in-memory journal).
    void snapshot() const;
    const std::filesystem::path& path() const { return path_; }

    static std::vector<nlohmann::json> read(const std::filesystem::path& path);

  private:
    mutable std::mutex mutex_;
    std::filesystem::path path_;
    std::ofstream out_;
    RunState state_;
    std::vector<nlohmann::json> events_;
    Listener listener_;
};

} // namespace hitl::loop
