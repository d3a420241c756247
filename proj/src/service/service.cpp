#include "hitl/service/service.hpp"

#include "hitl/annot/annotator.hpp"
#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"
#include "hitl/core/rle.hpp"
#include "hitl/loop/report.hpp"
#include "hitl/service/codec.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

namespace hitl::service {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct LiveRun;

class HumanAnnotator : public loop::Annotator {
  public:
    explicit HumanAnnotator(LiveRun& run) : run_(run) {}
    std::vector<annot::AnnotationEvent> annotate(int round, const std::vector<loop::BatchCase>& batch) override;
    bool journals_events() const override { return true; }

  private:
    LiveRun& run_;
};

struct LiveRun {
    std::string id;
    loop::RunConfig cfg;
    fs::path dir;
    bool auto_advance = true;
    std::unique_ptr<loop::Journal> journal;
    std::unique_ptr<annot::HumanIntake> intake;
    std::unique_ptr<HumanAnnotator> annotator;
    std::thread worker;

    mutable std::mutex m;
    std::condition_variable cv;
    bool started = false;
    bool advance_requested = false;
    bool cancelled = false;
    bool done = false;
    std::optional<loop::RunReport> report;
    std::map<std::string, Clock::time_point, std::less<>> first_served;
    Clock::time_point batch_opened = Clock::now();
};

std::vector<annot::AnnotationEvent> HumanAnnotator::annotate(int round, const std::vector<loop::BatchCase>& batch) {
    std::vector<annot::PendingCase> cases;
    for (const auto& b : batch) cases.push_back({b.sample_id, b.prediction});
    {
        std::lock_guard lock(run_.m);
        run_.first_served.clear();
        run_.batch_opened = Clock::now();
    }
    run_.intake->open_batch(round, std::move(cases));
    auto events = run_.intake->wait_batch();
    if (!run_.auto_advance) {
        run_.journal->emit({{"type", "paused"}, {"round", round}});
        std::unique_lock lock(run_.m);
        run_.cv.wait(lock, [&] { return run_.advance_requested || run_.cancelled; });
        if (run_.cancelled) throw Error(ErrorCode::conflict, "run cancelled");
        run_.advance_requested = false;
        lock.unlock();
        run_.journal->emit({{"type", "resumed"}, {"round", round}});
    }
    return events;
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::rejected_input:
    case ErrorCode::malformed_stream:
    case ErrorCode::configuration: return 400;
    default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    send_json(res, status, {{"code", code}, {"message", message}});
}

struct SampleRef {
    const Sample* sample = nullptr;
    Role role = Role::seed;
};

} // namespace

struct Service::Impl {
    ServiceOptions options;
    std::shared_ptr<const loop::PreparedData> data;
    std::map<std::string, SampleRef, std::less<>> samples;
    std::map<std::string, Dims, std::less<>> sample_dims;

    mutable std::mutex registry_mutex;
    std::map<std::string, std::shared_ptr<LiveRun>, std::less<>> runs;
    std::vector<std::string> run_order;
    int next_run = 1;

    httplib::Server server;
    std::thread server_thread;
    bool bound = false;

    void index_samples() {
        for (const Dataset* d : {&data->bundle.seed, &data->bundle.target, &data->bundle.test}) {
            for (const auto& s : d->samples) {
                samples.emplace(s.id, SampleRef{&s, d->role});
                sample_dims.emplace(s.id, s.volume.dims());
            }
        }
    }

    std::shared_ptr<LiveRun> find_run(std::string_view id) const {
        std::lock_guard lock(registry_mutex);
        const auto it = runs.find(id);
        if (it == runs.end()) throw Error(ErrorCode::not_found, "unknown run " + std::string(id));
        return it->second;
    }

    std::shared_ptr<LiveRun> run_for_request(const httplib::Request& req) const {
        if (req.has_param("run")) return find_run(req.get_param_value("run"));
        std::lock_guard lock(registry_mutex);
        if (run_order.empty()) return nullptr;
        return runs.at(run_order.back());
    }

    const SampleRef& find_sample(std::string_view id) const {
        const auto it = samples.find(id);
        if (it == samples.end()) throw Error(ErrorCode::not_found, "unknown sample " + std::string(id));
        return it->second;
    }

    json create_run(const json& request, const std::optional<fs::path>& output_dir) {
        json cfg_json = loop::to_json(options.config);
        if (request.contains("set")) {
            for (const auto& s : request.at("set")) loop::apply_override(cfg_json, s.get<std::string>());
        }
        loop::RunConfig cfg = loop::run_config_from_json(cfg_json);
        auto run = std::make_shared<LiveRun>();
        {
            std::lock_guard lock(registry_mutex);
            do {
                run->id = "run-" + std::to_string(next_run++);
            } while (runs.contains(run->id));
        }
        run->dir = output_dir ? *output_dir : options.runs_root / run->id;
        cfg.output_dir = run->dir;
        run->cfg = cfg;
        run->auto_advance = request.value("auto_advance", true);
        fs::create_directories(run->dir);
        run->journal = std::make_unique<loop::Journal>(run->dir / "events.ndjson");
        run->intake = std::make_unique<annot::HumanIntake>(sample_dims);
        run->annotator = std::make_unique<HumanAnnotator>(*run);
        LiveRun* raw = run.get();
        run->intake->set_listener([raw](const annot::AnnotationEvent& ev) {
            const std::string rel = "annotations/" + ev.sample_id + ".lbl";
            io::write_label_map(raw->dir / rel, ev.label);
            raw->journal->emit(loop::annotation_event_json(ev, rel));
        });
        std::vector<std::string> pool;
        for (const auto& s : data->bundle.target.samples) pool.push_back(s.id);
        run->journal->emit({{"type", "run_created"},
                            {"run_id", run->id},
                            {"pool", pool},
                            {"auto_advance", run->auto_advance},
                            {"config", loop::to_json(cfg, false)}});
        {
            std::lock_guard lock(registry_mutex);
            runs.emplace(run->id, run);
            run_order.push_back(run->id);
        }
        if (request.value("start", true)) start(*run);
        return {{"run_id", run->id}, {"state", run->journal->state().to_json()}};
    }

    void start(LiveRun& run) {
        {
            std::lock_guard lock(run.m);
            if (run.started) throw Error(ErrorCode::conflict, "run " + run.id + " already started");
            run.started = true;
        }
        run.journal->emit({{"type", "run_started"}});
        run.worker = std::thread([this, &run] {
            std::optional<loop::RunReport> report;
            try {
                loop::LoopOptions opts;
                opts.annotator = run.annotator.get();
                opts.journal = run.journal.get();
                report = loop::run_loop(run.cfg, *data, opts);
            } catch (const std::exception& e) {
                if (run.journal->state().phase != loop::Phase::finished) {
                    try {
                        run.journal->emit({{"type", "run_failed"}, {"round", run.journal->state().current_round},
                                           {"message", e.what()}});
                    } catch (...) {
                    }
                }
            }
            std::lock_guard lock(run.m);
            run.report = std::move(report);
            run.done = true;
            run.cv.notify_all();
        });
    }

    json advance(const std::string& id) {
        auto run = find_run(id);
        bool need_start = false;
        {
            std::lock_guard lock(run->m);
            need_start = !run->started;
        }
        if (need_start) {
            start(*run);
            return run->journal->state().to_json();
        }
        const loop::RunState st = run->journal->state();
        if (st.phase == loop::Phase::idle) {
            std::lock_guard lock(run->m);
            run->advance_requested = true;
            run->cv.notify_all();
            return st.to_json();
        }
        if (st.phase == loop::Phase::awaiting_annotation) {
            throw Error(ErrorCode::conflict, std::to_string(st.pending.size()) + " annotations still pending");
        }
        if (st.phase == loop::Phase::training) throw Error(ErrorCode::conflict, "training in progress");
        throw Error(ErrorCode::conflict, "run is finished");
    }

    json metrics(const loop::RunState& st) const {
        json rounds = json::array();
        for (const auto& r : st.rounds) {
            rounds.push_back({{"round", r.at("round")},
                              {"n", r.at("n")},
                              {"cumulative_count", r.at("cumulative_count")},
                              {"mean_time_min", r.at("mean_time_min")},
                              {"total_time_min", r.at("total_time_min")},
                              {"dice", r.at("dice")}});
        }
        return {{"run_id", st.run_id}, {"phase", loop::to_string(st.phase)}, {"baseline", st.baseline},
                {"rounds", rounds}};
    }

    std::optional<LabelMap> label_layer(const LiveRun* run, const std::string& id, const std::string& layer) const {
        if (!run) return std::nullopt;
        if (layer == "annotation") {
            if (auto a = run->intake->annotation(id)) return a;
            const fs::path p = run->dir / "annotations" / (id + ".lbl");
            if (fs::exists(p)) return io::read_label_map(p);
            return std::nullopt;
        }
        const int current = run->journal->state().current_round;
        for (int k = current; k >= 0; --k) {
            const fs::path p = run->dir / "predictions" / ("round-" + std::to_string(k)) / (id + ".lbl");
            if (fs::exists(p)) return io::read_label_map(p);
        }
        return std::nullopt;
    }

    void handle_slice(const httplib::Request& req, httplib::Response& res, const std::string& id) {
        const SampleRef& ref = find_sample(id);
        const Dims& dims = ref.sample->volume.dims();
        const std::string axis = req.has_param("axis") ? req.get_param_value("axis") : "z";
        const std::string layer = req.has_param("layer") ? req.get_param_value("layer") : "image";
        if (axis != "z" && axis != "y" && axis != "x") {
            throw Error(ErrorCode::rejected_input, "axis must be z, y or x");
        }
        if (layer != "image" && layer != "prediction" && layer != "annotation") {
            throw Error(ErrorCode::rejected_input, "layer must be image, prediction or annotation");
        }
        long index = 0;
        try {
            index = req.has_param("index") ? std::stol(req.get_param_value("index")) : 0;
        } catch (const std::exception&) {
            throw Error(ErrorCode::rejected_input, "index must be an integer");
        }
        const std::size_t extent = axis == "z" ? dims.depth : axis == "y" ? dims.height : dims.width;
        if (index < 0 || std::size_t(index) >= extent) {
            throw Error(ErrorCode::not_found, "slice index " + std::to_string(index) + " outside [0, " +
                                                  std::to_string(extent) + ")");
        }
        const std::size_t rows = axis == "z" ? dims.height : dims.depth;
        const std::size_t cols = axis == "x" ? dims.height : dims.width;
        const auto voxel = [&](std::size_t r, std::size_t c) {
            const std::size_t i = std::size_t(index);
            if (axis == "z") return dims.index(i, r, c);
            if (axis == "y") return dims.index(r, i, c);
            return dims.index(r, c, i);
        };
        const auto run = run_for_request(req);
        if (layer == "image") {
            std::vector<std::uint8_t> px(rows * cols);
            const auto v = ref.sample->volume.voxels();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) px[r * cols + c] = window_hu(v[voxel(r, c)]);
            if (run) {
                std::lock_guard lock(run->m);
                run->first_served.try_emplace(id, Clock::now());
            }
            const auto png = encode_png_gray(px, cols, rows);
            res.status = 200;
            res.set_content(std::string(png.begin(), png.end()), "image/png");
            return;
        }
        const auto map = label_layer(run.get(), id, layer);
        if (!map) throw Error(ErrorCode::not_found, "no " + layer + " layer for sample " + id);
        std::vector<Label> plane(rows * cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) plane[r * cols + c] = (*map)[voxel(r, c)];
        const auto bytes = rle::encode(plane);
        send_json(res, 200, {{"axis", axis}, {"index", index}, {"layer", layer}, {"dims", {rows, cols}},
                             {"rle", base64_encode(bytes)}});
    }

    void handle_meta(const httplib::Request& req, httplib::Response& res, const std::string& id) {
        const SampleRef& ref = find_sample(id);
        const auto& d = ref.sample->volume.dims();
        const auto& sp = ref.sample->volume.spacing();
        json meta = {{"id", id},
                     {"role", to_string(ref.role)},
                     {"dims", {d.depth, d.height, d.width}},
                     {"spacing", {sp.z, sp.y, sp.x}}};
        const auto run = run_for_request(req);
        if (run && ref.role == Role::target) {
            const auto st = run->journal->state();
            const bool refined = std::find(st.refined.begin(), st.refined.end(), id) != st.refined.end();
            const bool pending = std::find(st.pending.begin(), st.pending.end(), id) != st.pending.end();
            meta["run_id"] = run->id;
            meta["status"] = refined ? "refined" : st.baseline.is_null() ? "unlabelled" : "machine_labelled";
            meta["pending"] = pending;
            for (const auto& e : st.estimates) {
                if (e.at("sample_id") == id) meta["estimate"] = e;
            }
        }
        send_json(res, 200, meta);
    }

    void handle_annotation(const httplib::Request& req, httplib::Response& res, const std::string& id) {
        find_sample(id);
        const auto run = run_for_request(req);
        if (!run) throw Error(ErrorCode::conflict, "no run is accepting annotations");
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::rejected_input, "body must be a JSON object");
        if (!body.contains("dims") || !body.at("dims").is_array() || body.at("dims").size() != 3 ||
            !body.contains("rle") || !body.at("rle").is_string()) {
            throw Error(ErrorCode::rejected_input, "body needs dims [d, h, w] and rle (base64)");
        }
        Dims dims;
        try {
            dims = {body["dims"][0].get<std::size_t>(), body["dims"][1].get<std::size_t>(),
                    body["dims"][2].get<std::size_t>()};
        } catch (const json::exception&) {
            throw Error(ErrorCode::rejected_input, "dims must be non-negative integers");
        }
        std::vector<std::uint8_t> bytes;
        try {
            bytes = base64_decode(body.at("rle").get<std::string>());
        } catch (const Error& e) {
            throw annot::IntakeError(annot::Rejection::invalid_label, e.what());
        }
        double elapsed = 0.0;
        if (body.contains("elapsed_min") && !body.at("elapsed_min").is_null()) {
            if (!body.at("elapsed_min").is_number()) {
                throw annot::IntakeError(annot::Rejection::invalid_time, "elapsed_min must be a number");
            }
            elapsed = body.at("elapsed_min").get<double>();
        } else {
            std::lock_guard lock(run->m);
            const auto it = run->first_served.find(id);
            const auto since = it != run->first_served.end() ? it->second : run->batch_opened;
            elapsed = std::max(std::chrono::duration<double>(Clock::now() - since).count() / 60.0, 1e-3);
        }
        const auto ev = run->intake->accept_encoded(id, dims, bytes, elapsed);
        send_json(res, 200, {{"sample_id", ev.sample_id},
                             {"run_id", run->id},
                             {"round", ev.round},
                             {"status", "refined"},
                             {"time_min", ev.time_min},
                             {"error_stats",
                              {{"error_voxels", ev.error_stats.error_voxels},
                               {"fp_voxels", ev.error_stats.fp_voxels},
                               {"fn_voxels", ev.error_stats.fn_voxels},
                               {"error_components", ev.error_stats.error_components}}}});
    }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const annot::IntakeError& e) {
                send_error(res, http_status(e.code()), annot::to_string(e.reason()), e.what());
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), to_string(e.code()), e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "rejected_input", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        });
        server.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            std::vector<std::shared_ptr<LiveRun>> list;
            {
                std::lock_guard lock(registry_mutex);
                for (const auto& id : run_order) list.push_back(runs.at(id));
            }
            for (const auto& r : list) {
                const auto st = r->journal->state();
                out.push_back({{"run_id", r->id}, {"phase", loop::to_string(st.phase)},
                               {"current_round", st.current_round}, {"pending", st.pending.size()}});
            }
            send_json(res, 200, out);
        });
        server.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
            json body = req.body.empty() ? json::object() : json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::rejected_input, "body must be a JSON object");
            send_json(res, 201, create_run(body, std::nullopt));
        });
        server.Get(R"(/api/runs/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, find_run(req.matches[1].str())->journal->state().to_json());
        });
        server.Post(R"(/api/runs/([^/]+)/advance)", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, advance(req.matches[1].str()));
        });
        server.Get(R"(/api/runs/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, metrics(find_run(req.matches[1].str())->journal->state()));
        });
        server.Get(R"(/api/samples/([^/]+)/meta)", [this](const httplib::Request& req, httplib::Response& res) {
            handle_meta(req, res, req.matches[1].str());
        });
        server.Get(R"(/api/samples/([^/]+)/slice)", [this](const httplib::Request& req, httplib::Response& res) {
            handle_slice(req, res, req.matches[1].str());
        });
        server.Post(R"(/api/samples/([^/]+)/annotation)", [this](const httplib::Request& req, httplib::Response& res) {
            handle_annotation(req, res, req.matches[1].str());
        });
        if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir.string());
    }

    void stop_all() {
        server.stop();
        if (server_thread.joinable()) server_thread.join();
        std::vector<std::shared_ptr<LiveRun>> list;
        {
            std::lock_guard lock(registry_mutex);
            for (const auto& [id, r] : runs) list.push_back(r);
        }
        for (const auto& r : list) {
            {
                std::lock_guard lock(r->m);
                r->cancelled = true;
                r->cv.notify_all();
            }
            r->intake->cancel();
        }
        for (const auto& r : list)
            if (r->worker.joinable()) r->worker.join();
    }
};

Service::Service(ServiceOptions options)
    : Service(options, std::make_shared<const loop::PreparedData>(loop::prepare(loop::load_data(options.config)))) {}

Service::Service(ServiceOptions options, std::shared_ptr<const loop::PreparedData> data) : impl_(std::make_unique<Impl>()) {
    impl_->options = std::move(options);
    impl_->data = std::move(data);
    impl_->index_samples();
    impl_->routes();
}

Service::~Service() { stop(); }

json Service::create_run(const json& request, const std::optional<fs::path>& output_dir) {
    return impl_->create_run(request, output_dir);
}

json Service::advance(const std::string& run_id) { return impl_->advance(run_id); }

loop::RunState Service::state(const std::string& run_id) const { return impl_->find_run(run_id)->journal->state(); }

std::vector<json> Service::events(const std::string& run_id) const { return impl_->find_run(run_id)->journal->events(); }

std::optional<loop::RunReport> Service::wait_finished(const std::string& run_id) {
    auto run = impl_->find_run(run_id);
    {
        std::unique_lock lock(run->m);
        if (!run->started) throw Error(ErrorCode::conflict, "run " + run_id + " was never started");
        run->cv.wait(lock, [&] { return run->done; });
    }
    if (run->worker.joinable() && run->worker.get_id() != std::this_thread::get_id()) run->worker.join();
    std::lock_guard lock(run->m);
    return run->report;
}

const loop::PreparedData& Service::data() const { return *impl_->data; }

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw Error(ErrorCode::io, "cannot bind " + host);
        impl_->bound = true;
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->bound = true;
    return port;
}

void Service::serve() {
    if (!impl_->bound) throw Error(ErrorCode::configuration, "bind() before serve()");
    impl_->server.listen_after_bind();
}

void Service::start_background() {
    if (!impl_->bound) throw Error(ErrorCode::configuration, "bind() before start_background()");
    impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void Service::stop() {
    if (impl_) impl_->stop_all();
}

} // namespace hitl::service
