#include "hitl/loop/loop.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"
#include "hitl/core/preprocess.hpp"
#include "hitl/loop/report.hpp"
#include "hitl/seg/model_io.hpp"
#include "hitl/strategy/strategy.hpp"
#include "hitl/synth/dataset_io.hpp"

#include <chrono>
#include <map>

namespace hitl::loop {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

json error_stats_json(const annot::ErrorStats& s) {
    return {{"error_voxels", s.error_voxels},
            {"fp_voxels", s.fp_voxels},
            {"fn_voxels", s.fn_voxels},
            {"error_components", s.error_components}};
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

} // namespace

json annotation_event_json(const annot::AnnotationEvent& ev, const std::string& label_path) {
    return {{"type", "annotation"},
            {"sample_id", ev.sample_id},
            {"round", ev.round},
            {"mode", annot::to_string(ev.mode)},
            {"time_min", ev.time_min},
            {"label", label_path},
            {"error_stats", error_stats_json(ev.error_stats)}};
}

synth::DatasetBundle load_data(const RunConfig& cfg) {
    if (!cfg.data_dir.empty()) return synth::load_dataset_dir(cfg.data_dir);
    if (!cfg.generate) throw Error(ErrorCode::configuration, "config needs data.dir or data.generate");
    return synth::generate_default_datasets(cfg.generate->counts, cfg.generate->seed, cfg.generate->preset);
}

PreparedData prepare(synth::DatasetBundle bundle) {
    PreparedData data;
    data.bundle = std::move(bundle);
    const auto build = [](const Dataset& d, std::vector<seg::FeatureVolume>& out) {
        out.reserve(d.samples.size());
        for (const auto& s : d.samples) out.emplace_back(preprocess(s.volume));
    };
    build(data.bundle.seed, data.seed_features);
    build(data.bundle.target, data.target_features);
    build(data.bundle.test, data.test_features);
    return data;
}

OracleAnnotator::OracleAnnotator(const Dataset& target, annot::CostModel cost, double noise_rate,
                                 std::uint64_t noise_seed)
    : target_(target), cost_(cost), noise_rate_(noise_rate), noise_seed_(noise_seed) {}

std::vector<annot::AnnotationEvent> OracleAnnotator::annotate(int round, const std::vector<BatchCase>& batch) {
    std::vector<annot::AnnotationEvent> out;
    for (const auto& c : batch) {
        const auto it = std::find_if(target_.samples.begin(), target_.samples.end(),
                                     [&](const Sample& s) { return s.id == c.sample_id; });
        if (it == target_.samples.end()) {
            throw Error(ErrorCode::contract_violation, "oracle asked for unknown sample " + c.sample_id);
        }
        Sample view;
        view.id = it->id;
        view.ground_truth = it->ground_truth;
        if (c.prediction) view.prediction = *c.prediction;
        annot::OracleOptions options{noise_rate_, synth::mix_seed(noise_seed_, fnv1a(c.sample_id))};
        out.push_back(annot::oracle_annotate(view, round, cost_, options));
    }
    return out;
}

std::uint64_t igniter_seed(const RunConfig& cfg) {
    return synth::mix_seed(cfg.rng_seed, synth::mix_seed(cfg.igniter.rng_seed, 0));
}

std::uint64_t sustainer_seed(const RunConfig& cfg, int round) {
    return synth::mix_seed(cfg.rng_seed, synth::mix_seed(cfg.sustainer.rng_seed, std::uint64_t(round) + 1));
}

seg::SegmenterModel train_igniter(const RunConfig& cfg, const PreparedData& data) {
    std::vector<seg::TrainingPair> corpus;
    for (std::size_t i = 0; i < data.seed_features.size(); ++i) {
        corpus.push_back({&data.seed_features[i], &*data.bundle.seed.samples[i].ground_truth,
                          seg::Provenance::seed_ground_truth});
    }
    seg::TrainConfig tc = cfg.igniter;
    tc.rng_seed = igniter_seed(cfg);
    return seg::train(corpus, tc);
}

DiceScore evaluate(const seg::SegmenterModel& model, std::span<const seg::FeatureVolume> features,
                   const Dataset& dataset) {
    std::vector<DiceScore> scores;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& gt = dataset.samples.at(i).ground_truth;
        if (!gt) throw Error(ErrorCode::contract_violation, "evaluation sample without ground truth");
        scores.push_back(dice(seg::predict(model, features[i]).labels, *gt));
    }
    return mean_dice(scores);
}

RunReport run_loop(const RunConfig& cfg, const PreparedData& data, const LoopOptions& options) {
    cfg.validate();
    const auto& target = data.bundle.target.samples;
    const std::size_t n_target = target.size();
    const fs::path out = options.write_artifacts ? cfg.output_dir : fs::path{};
    if (!out.empty()) fs::create_directories(out);

    std::unique_ptr<Journal> own_journal;
    Journal* journal = options.journal;
    if (!journal) {
        own_journal = std::make_unique<Journal>(out.empty() ? fs::path{} : out / "events.ndjson");
        journal = own_journal.get();
    }
    std::unique_ptr<OracleAnnotator> oracle;
    Annotator* annotator = options.annotator;
    if (!annotator) {
        oracle = std::make_unique<OracleAnnotator>(data.bundle.target, cfg.cost, cfg.oracle_noise_rate,
                                                   synth::mix_seed(cfg.rng_seed, 0x0a11));
        annotator = oracle.get();
    }

    std::vector<std::string> pool_ids;
    for (const auto& s : target) pool_ids.push_back(s.id);
    if (journal->state().events == 0) {
        journal->emit({{"type", "run_created"}, {"run_id", "run"}, {"pool", pool_ids},
                       {"auto_advance", true}, {"config", to_json(cfg, false)}});
    }
    if (journal->state().phase == Phase::idle) journal->emit({{"type", "run_started"}});

    RunReport report;
    report.config = to_json(cfg, false);
    int current_round = 0;
    try {
        const auto t_ign = std::chrono::steady_clock::now();
        std::vector<seg::TrainingPair> seed_pairs;
        for (std::size_t i = 0; i < data.seed_features.size(); ++i) {
            seed_pairs.push_back({&data.seed_features[i], &*data.bundle.seed.samples[i].ground_truth,
                                  seg::Provenance::seed_ground_truth});
        }
        seg::SegmenterModel model;
        if (options.igniter) {
            model = *options.igniter;
        } else {
            if (options.on_corpus) options.on_corpus(0, seed_pairs);
            model = train_igniter(cfg, data);
        }
        if (!out.empty()) seg::save_model(out / "models" / "round-0.json", model);
        std::vector<seg::SegmenterModel> models{model};

        const bool holdout = cfg.test_policy == TestPolicy::fixed_holdout;
        if (holdout) report.baseline = evaluate(model, data.test_features, data.bundle.test);
        report.igniter_wall_clock_s = seconds_since(t_ign);
        journal->emit({{"type", "igniter_evaluated"},
                       {"dice", holdout ? to_json(report.baseline) : json(nullptr)}});

        std::vector<char> refined(n_target, 0);
        std::vector<std::optional<LabelMap>> annotations(n_target);
        std::vector<std::shared_ptr<const LabelMap>> predictions(n_target);
        std::vector<strategy::DifficultyEstimate> estimates(n_target);

        const auto predict_pool = [&](const seg::SegmenterModel& m, int round) {
            for (std::size_t i = 0; i < n_target; ++i) {
                if (refined[i]) continue;
                seg::Prediction p = seg::predict(m, data.target_features[i]);
                estimates[i] = strategy::estimate_difficulty(target[i].id, p.probabilities, target[i].volume.dims(),
                                                             cfg.cost, cfg.margin_threshold);
                if (cfg.schedule.difficulty_source == strategy::DifficultySource::oracle) {
                    estimates[i].oracle_cost_min = annot::oracle_minutes(p.labels, *target[i].ground_truth, cfg.cost);
                }
                if (!out.empty()) {
                    io::write_label_map(out / "predictions" / ("round-" + std::to_string(round)) /
                                            (target[i].id + ".lbl"),
                                        p.labels);
                }
                predictions[i] = std::make_shared<const LabelMap>(std::move(p.labels));
            }
        };
        predict_pool(model, 0);

        std::map<std::string, std::size_t, std::less<>> index_of;
        for (std::size_t i = 0; i < n_target; ++i) index_of.emplace(target[i].id, i);

        std::size_t cumulative = 0;
        std::vector<std::string> last_batch;
        const auto& budgets = cfg.schedule.budgets;
        for (std::size_t r = 0; r < budgets.size(); ++r) {
            const int round = int(r) + 1;
            current_round = round;
            std::vector<strategy::DifficultyEstimate> pool;
            for (std::size_t i = 0; i < n_target; ++i)
                if (!refined[i]) pool.push_back(estimates[i]);
            if (pool.empty()) {
                if (r > 0 || n_target == 0) {
                    report.note = "schedule truncated after round " + std::to_string(round - 1) +
                                  ": target pool exhausted";
                }
                break;
            }
            const auto t_round = std::chrono::steady_clock::now();
            const auto batch_ids =
                strategy::select_batch(pool, budgets[r], cfg.schedule.policy, cfg.schedule.difficulty_source,
                                       synth::mix_seed(synth::mix_seed(cfg.rng_seed, cfg.schedule.rng_seed),
                                                       std::uint64_t(round)));
            json est_json = json::array();
            for (const auto& e : pool) {
                est_json.push_back({{"sample_id", e.sample_id},
                                    {"proxy_score", round4(e.proxy_score)},
                                    {"predicted_cost_min", round4(e.predicted_cost_min)},
                                    {"oracle_cost_min", e.oracle_cost_min ? json(round4(*e.oracle_cost_min))
                                                                          : json(nullptr)}});
            }
            journal->emit({{"type", "round_opened"}, {"round", round}, {"batch", batch_ids}, {"estimates", est_json}});

            std::vector<BatchCase> cases;
            for (const auto& id : batch_ids) cases.push_back({id, predictions[index_of.at(id)]});
            RoundRecord record;
            record.round = round;
            if (!cases.empty()) {
                const auto events = annotator->annotate(round, cases);
                if (events.size() != cases.size()) {
                    throw Error(ErrorCode::contract_violation, "annotator returned a partial batch");
                }
                for (std::size_t b = 0; b < events.size(); ++b) {
                    const auto& ev = events[b];
                    if (ev.sample_id != cases[b].sample_id) {
                        throw Error(ErrorCode::contract_violation, "annotator returned events out of order");
                    }
                    const std::size_t i = index_of.at(ev.sample_id);
                    const std::string rel = "annotations/" + ev.sample_id + ".lbl";
                    if (!annotator->journals_events()) {
                        if (!out.empty()) io::write_label_map(out / rel, ev.label);
                        journal->emit(annotation_event_json(ev, rel));
                    }
                    if (options.on_annotation) options.on_annotation(round, ev);
                    refined[i] = 1;
                    annotations[i] = ev.label;
                    record.annotated.push_back({ev.sample_id, ev.time_min});
                    record.total_time_min += ev.time_min;
                }
                record.mean_time_min = record.total_time_min / double(events.size());
            }
            cumulative += record.annotated.size();
            record.cumulative_count = cumulative;
            journal->emit({{"type", "training_started"}, {"round", round}});

            const bool exhausted = std::find(refined.begin(), refined.end(), 0) == refined.end();
            const bool final_round = r + 1 == budgets.size() || exhausted;
            const bool skip_training = cases.empty() || (!holdout && final_round);
            if (!skip_training) {
                std::vector<seg::TrainingPair> corpus;
                if (cfg.retrain_corpus == RetrainCorpus::annotated_target_plus_seed) corpus = seed_pairs;
                for (std::size_t i = 0; i < n_target; ++i) {
                    if (annotations[i]) {
                        corpus.push_back({&data.target_features[i], &*annotations[i],
                                          seg::Provenance::refined_annotation});
                    }
                }
                if (options.on_corpus) options.on_corpus(round, corpus);
                seg::TrainConfig tc = cfg.sustainer;
                tc.rng_seed = sustainer_seed(cfg, round);
                model = seg::train(corpus, tc);
                record.train_meta = model.train_meta;
                if (!out.empty()) {
                    seg::save_model(out / "models" / ("round-" + std::to_string(round) + ".json"), model);
                }
            }
            models.push_back(model);
            if (holdout) {
                record.dice = skip_training && !report.rounds.empty() ? report.rounds.back().dice
                              : skip_training                          ? report.baseline
                                                                       : evaluate(model, data.test_features,
                                                                                  data.bundle.test);
            }
            if (!cases.empty()) last_batch = batch_ids;
            if (!exhausted) predict_pool(model, round);
            record.wall_clock_s = seconds_since(t_round);
            report.rounds.push_back(record);

            json rec = to_json(report).at("rounds").back();
            if (!holdout) rec["dice"] = nullptr;
            journal->emit({{"type", "round_completed"}, {"round", round}, {"record", rec}});
            journal->snapshot();
        }

        if (!holdout) {
            // Score every model on the cases refined in the last round.
            Dataset eval_set{Role::test, {}};
            std::vector<seg::FeatureVolume> eval_features;
            for (const auto& id : last_batch) {
                const std::size_t i = index_of.at(id);
                Sample s;
                s.id = id;
                s.ground_truth = annotations[i];
                eval_set.samples.push_back(std::move(s));
                eval_features.push_back(data.target_features[i]);
            }
            if (!eval_set.samples.empty()) {
                report.baseline = evaluate(models[0], eval_features, eval_set);
                for (std::size_t k = 0; k < report.rounds.size(); ++k) {
                    report.rounds[k].dice = evaluate(models[k + 1], eval_features, eval_set);
                }
            } else {
                report.note = "no annotated round to use as test set";
            }
        }

        for (const auto& rr : report.rounds) report.total_annotation_min += rr.total_time_min;
        report.final_dice = report.rounds.empty() ? report.baseline : report.rounds.back().dice;
        report.dice_gain = report.final_dice.mean() - report.baseline.mean();
        const json canonical = to_json(report);
        journal->emit({{"type", "run_finished"}, {"totals", canonical.at("totals")},
                       {"note", report.note ? json(*report.note) : json(nullptr)}});
        journal->snapshot();
        if (!out.empty()) write_report_files(out, report);
        return report;
    } catch (const Error& e) {
        const std::string message =
            e.code() == ErrorCode::divergence ? "round " + std::to_string(current_round) + ": " + e.what() : e.what();
        if (journal->state().phase != Phase::finished) {
            journal->emit({{"type", "run_failed"}, {"round", current_round}, {"message", message}});
            journal->snapshot();
        }
        if (!out.empty() && e.code() == ErrorCode::divergence) {
            report.note = "aborted: " + message;
            write_report_files(out, report);
        }
        throw;
    }
}

RunReport run_loop(const RunConfig& cfg, const LoopOptions& options) {
    cfg.validate();
    const PreparedData data = prepare(load_data(cfg));
    return run_loop(cfg, data, options);
}

} // namespace hitl::loop
