#include "hitl/loop/config.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"
#include "hitl/seg/model_io.hpp"

#include <charconv>

namespace hitl::loop {

using nlohmann::json;

std::string_view to_string(RetrainCorpus corpus) {
    return corpus == RetrainCorpus::annotated_target_only ? "annotated_target_only"
                                                          : "annotated_target_plus_seed";
}

RetrainCorpus retrain_corpus_from_string(std::string_view text) {
    if (text == "annotated_target_only") return RetrainCorpus::annotated_target_only;
    if (text == "annotated_target_plus_seed") return RetrainCorpus::annotated_target_plus_seed;
    throw Error(ErrorCode::configuration, "unknown retrain_corpus '" + std::string(text) + "'");
}

std::string_view to_string(TestPolicy policy) {
    return policy == TestPolicy::fixed_holdout ? "fixed_holdout" : "last_round_samples";
}

TestPolicy test_policy_from_string(std::string_view text) {
    if (text == "fixed_holdout") return TestPolicy::fixed_holdout;
    if (text == "last_round_samples") return TestPolicy::last_round_samples;
    throw Error(ErrorCode::configuration, "unknown test_policy '" + std::string(text) + "'");
}

void RunConfig::validate() const {
    if (data_dir.empty() && !generate) {
        throw Error(ErrorCode::configuration, "config needs data.dir or data.generate");
    }
    igniter.validate();
    sustainer.validate();
    try {
        cost.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::configuration, e.what());
    }
    schedule.validate();
    if (!(margin_threshold >= 0.0 && margin_threshold <= 1.0)) {
        throw Error(ErrorCode::configuration, "margin_threshold must lie in [0, 1]");
    }
    if (!(oracle_noise_rate >= 0.0 && oracle_noise_rate <= 1.0)) {
        throw Error(ErrorCode::configuration, "oracle_noise_rate must lie in [0, 1]");
    }
}

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.generate = GenerateSpec{};
    return cfg;
}

json to_json(const annot::CostModel& cost) {
    return {{"t_base", cost.t_base}, {"c_vox", cost.c_vox}, {"c_comp", cost.c_comp}, {"t_scratch", cost.t_scratch}};
}

annot::CostModel cost_model_from_json(const json& j, const annot::CostModel& base) {
    annot::CostModel c = base;
    c.t_base = j.value("t_base", c.t_base);
    c.c_vox = j.value("c_vox", c.c_vox);
    c.c_comp = j.value("c_comp", c.c_comp);
    c.t_scratch = j.value("t_scratch", c.t_scratch);
    return c;
}

json to_json(const strategy::RoundSchedule& schedule) {
    json budgets = json::array();
    for (const auto& b : schedule.budgets) {
        switch (b.kind) {
        case strategy::Budget::Kind::count: budgets.push_back({{"count", b.count}}); break;
        case strategy::Budget::Kind::time_min: budgets.push_back({{"time_min", b.minutes}}); break;
        case strategy::Budget::Kind::remainder: budgets.push_back({{"remainder", true}}); break;
        }
    }
    return {{"budgets", budgets},
            {"policy", strategy::to_string(schedule.policy)},
            {"difficulty_source", strategy::to_string(schedule.difficulty_source)},
            {"rng_seed", schedule.rng_seed}};
}

strategy::RoundSchedule schedule_from_json(const json& j, const strategy::RoundSchedule& base) {
    strategy::RoundSchedule s = base;
    if (j.contains("budgets")) {
        s.budgets.clear();
        for (const auto& b : j.at("budgets")) {
            if (b.contains("count")) {
                const auto n = b.at("count").get<long long>();
                if (n <= 0) throw Error(ErrorCode::configuration, "count budgets must be positive");
                s.budgets.push_back(strategy::Budget::of_count(std::size_t(n)));
            } else if (b.contains("time_min")) {
                s.budgets.push_back(strategy::Budget::of_minutes(b.at("time_min").get<double>()));
            } else if (b.value("remainder", false)) {
                s.budgets.push_back(strategy::Budget::rest());
            } else {
                throw Error(ErrorCode::configuration, "budget needs count, time_min or remainder");
            }
        }
    }
    if (j.contains("policy")) s.policy = strategy::policy_from_string(j.at("policy").get<std::string>());
    if (j.contains("difficulty_source")) {
        s.difficulty_source = strategy::difficulty_source_from_string(j.at("difficulty_source").get<std::string>());
    }
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    return s;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

} // namespace

json to_json(const RunConfig& cfg, bool with_output) {
    json data = json::object();
    if (!cfg.data_dir.empty()) data["dir"] = cfg.data_dir.string();
    if (cfg.generate) {
        data["generate"] = {{"counts",
                             {{"seed", cfg.generate->counts.seed_n},
                              {"target", cfg.generate->counts.target_n},
                              {"test", cfg.generate->counts.test_n}}},
                            {"seed", cfg.generate->seed},
                            {"shift_preset", std::string(synth::to_string(cfg.generate->preset))}};
    }
    json j = {
        {"data", data},
        {"igniter", seg::to_json(cfg.igniter)},
        {"sustainer", seg::to_json(cfg.sustainer)},
        {"cost_model", to_json(cfg.cost)},
        {"schedule", to_json(cfg.schedule)},
        {"margin_threshold", cfg.margin_threshold},
        {"retrain_corpus", to_string(cfg.retrain_corpus)},
        {"test_policy", to_string(cfg.test_policy)},
        {"oracle_noise_rate", cfg.oracle_noise_rate},
        {"rng_seed", cfg.rng_seed},
    };
    if (with_output) j["output_dir"] = cfg.output_dir.string();
    return j;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::configuration, "run config must be a JSON object");
    RunConfig cfg;
    try {
        if (j.contains("data")) {
            const auto& d = j.at("data");
            if (d.contains("dir")) cfg.data_dir = resolve(d.at("dir").get<std::string>(), base_dir);
            if (d.contains("generate")) {
                GenerateSpec g;
                const auto& gj = d.at("generate");
                if (gj.contains("counts")) {
                    const auto& c = gj.at("counts");
                    g.counts.seed_n = c.value("seed", g.counts.seed_n);
                    g.counts.target_n = c.value("target", g.counts.target_n);
                    g.counts.test_n = c.value("test", g.counts.test_n);
                }
                g.seed = gj.value("seed", g.seed);
                if (gj.contains("shift_preset")) {
                    g.preset = synth::shift_preset_from_string(gj.at("shift_preset").get<std::string>());
                }
                cfg.generate = g;
            }
        } else {
            cfg.generate = GenerateSpec{};
        }
        if (j.contains("igniter")) cfg.igniter = seg::train_config_from_json(j.at("igniter"), cfg.igniter);
        if (j.contains("sustainer")) cfg.sustainer = seg::train_config_from_json(j.at("sustainer"), cfg.sustainer);
        if (j.contains("cost_model")) cfg.cost = cost_model_from_json(j.at("cost_model"), cfg.cost);
        if (j.contains("schedule")) cfg.schedule = schedule_from_json(j.at("schedule"), cfg.schedule);
        cfg.margin_threshold = j.value("margin_threshold", cfg.margin_threshold);
        if (j.contains("retrain_corpus")) {
            cfg.retrain_corpus = retrain_corpus_from_string(j.at("retrain_corpus").get<std::string>());
        }
        if (j.contains("test_policy")) cfg.test_policy = test_policy_from_string(j.at("test_policy").get<std::string>());
        cfg.oracle_noise_rate = j.value("oracle_noise_rate", cfg.oracle_noise_rate);
        cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
        if (j.contains("output_dir")) cfg.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::configuration, std::string("run config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::configuration) throw;
        throw Error(ErrorCode::configuration, e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const std::string text = io::read_text(path);
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::configuration, "config " + path.string() + " is not valid JSON");
    return run_config_from_json(j, path.parent_path());
}

void apply_override(json& j, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw Error(ErrorCode::configuration, "override must look like key=value: " + std::string(assignment));
    }
    const std::string_view key = assignment.substr(0, eq);
    const std::string value_text(assignment.substr(eq + 1));
    json value = json::parse(value_text, nullptr, false);
    if (value.is_discarded()) value = value_text;

    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part(key.substr(start, dot == std::string_view::npos ? key.npos : dot - start));
        if (part.empty()) throw Error(ErrorCode::configuration, "empty segment in override key " + std::string(key));
        std::size_t index = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), index);
        const bool numeric = ec == std::errc() && ptr == part.data() + part.size();
        json* next = nullptr;
        if (numeric && node->is_array()) {
            if (index >= node->size()) {
                throw Error(ErrorCode::configuration, "override index out of range in " + std::string(key));
            }
            next = &(*node)[index];
        } else {
            if (node->is_null()) *node = json::object();
            if (!node->is_object()) {
                throw Error(ErrorCode::configuration, "override path " + std::string(key) + " crosses a non-object");
            }
            next = &(*node)[part];
        }
        if (dot == std::string_view::npos) {
            *next = value;
            return;
        }
        node = next;
        start = dot + 1;
    }
}

} // namespace hitl::loop
