#pragma once

#include "hitl/loop/config.hpp"
#include "hitl/loop/journal.hpp"
#include "hitl/loop/loop.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hitl::service {

struct ServiceOptions {
    loop::RunConfig config;           // template for runs; its data source is loaded once
    std::filesystem::path runs_root;  // each run writes to runs_root/<run id>
    std::string cors_origin = "*";
    std::filesystem::path static_dir; // optional UI bundle mounted at "/"
};

/// HTTP facade over interactive runs. Every run owns a journal whose events
/// are the only way its state changes; annotations arrive through POST and
/// unblock the run's loop thread once the round's batch is complete.
class Service {
  public:
    explicit Service(ServiceOptions options);
    Service(ServiceOptions options, std::shared_ptr<const loop::PreparedData> data);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Request fields: "set" (list of key=value overrides), "auto_advance"
    /// (default true) and "start" (default true). Returns {run_id, state}.
    nlohmann::json create_run(const nlohmann::json& request = nlohmann::json::object(),
                              const std::optional<std::filesystem::path>& output_dir = std::nullopt);
    /// Starts an idle run or resumes a paused one; throws conflict otherwise.
    nlohmann::json advance(const std::string& run_id);
    loop::RunState state(const std::string& run_id) const;
    std::vector<nlohmann::json> events(const std::string& run_id) const;
    /// Blocks until the run's loop thread exits; returns its report, or
    /// nullopt when the run failed.
    std::optional<loop::RunReport> wait_finished(const std::string& run_id);

    const loop::PreparedData& data() const;

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call bind() first.
    void serve();
    /// serve() on a background thread; returns once the server accepts.
    void start_background();
    /// Stops the server and cancels and joins every run thread.
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace hitl::service
