#include "hitl/loop/calibration.hpp"

#include "hitl/core/error.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace hitl::loop {

annot::CostModel fit_cost_model(std::span<const CostObservation> rows) {
    if (rows.empty()) throw Error(ErrorCode::rejected_input, "cost fit needs observations");
    const Eigen::Index n = Eigen::Index(rows.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[std::size_t(i)];
        const double w = std::sqrt(r.weight);
        a(i, 0) = w;
        a(i, 1) = w * r.error_voxels;
        a(i, 2) = w * r.error_components;
        b(i) = w * r.target_min;
    }
    // Column scaling keeps the solve well conditioned.
    Eigen::Vector3d scale;
    for (int c = 0; c < 3; ++c) {
        const double norm = a.col(c).norm();
        scale(c) = norm > 0.0 ? norm : 1.0;
        a.col(c) /= scale(c);
    }
    Eigen::Vector3d best = Eigen::Vector3d::Zero();
    double best_residual = b.squaredNorm();
    for (int mask = 1; mask < 8; ++mask) {
        std::vector<int> cols;
        for (int c = 0; c < 3; ++c)
            if (mask & (1 << c)) cols.push_back(c);
        Eigen::MatrixXd sub(n, Eigen::Index(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(Eigen::Index(k)) = a.col(cols[k]);
        const Eigen::VectorXd x = sub.colPivHouseholderQr().solve(b);
        if ((x.array() < 0.0).any() || !x.allFinite()) continue;
        const double residual = (sub * x - b).squaredNorm();
        if (residual < best_residual - 1e-12) {
            best_residual = residual;
            best.setZero();
            for (std::size_t k = 0; k < cols.size(); ++k) best(cols[k]) = x(Eigen::Index(k));
        }
    }
    annot::CostModel cost;
    cost.t_base = best(0) / scale(0);
    cost.c_vox = best(1) / scale(1);
    cost.c_comp = best(2) / scale(2);
    cost.t_scratch = cost.t_base;
    return cost;
}

CalibrationResult calibrate(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int iterations,
                            const std::function<void(const std::string&)>& progress) {
    if (seeds.empty() || iterations < 1) throw Error(ErrorCode::configuration, "calibration needs seeds and iterations >= 1");
    CalibrationResult result;
    result.cost = base.cost;
    std::vector<PreparedData> datasets;
    std::vector<seg::SegmenterModel> igniters;
    for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.rng_seed = seed;
        if (cfg.data_dir.empty() && cfg.generate) cfg.generate->seed = seed;
        datasets.push_back(prepare(load_data(cfg)));
        igniters.push_back(train_igniter(cfg, datasets.back()));
    }
    // Drawing a case from scratch is editing an empty prediction.
    std::vector<annot::ErrorStats> scratch_stats;
    for (const auto& d : datasets)
        for (const auto& sample : d.bundle.target.samples)
            scratch_stats.push_back(annot::compare(LabelMap(sample.ground_truth->dims()), *sample.ground_truth));
    for (int it = 0; it < iterations; ++it) {
        std::vector<CostObservation> first, last;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            RunConfig cfg = base;
            cfg.rng_seed = seeds[s];
            if (cfg.data_dir.empty() && cfg.generate) cfg.generate->seed = seeds[s];
            cfg.cost = result.cost;
            std::map<int, std::vector<annot::ErrorStats>> by_round;
            LoopOptions options;
            options.igniter = igniters[s];
            options.write_artifacts = false;
            options.on_annotation = [&](int round, const annot::AnnotationEvent& ev) {
                by_round[round].push_back(ev.error_stats);
            };
            run_loop(cfg, datasets[s], options);
            if (by_round.empty()) continue;
            for (const auto& st : by_round.begin()->second) {
                first.push_back({double(st.error_voxels), double(st.error_components), kRound1TargetMin, 1.0});
            }
            for (const auto& st : by_round.rbegin()->second) {
                last.push_back({double(st.error_voxels), double(st.error_components), kFinalTargetMin, 1.0});
            }
        }
        if (first.empty() || last.empty()) throw Error(ErrorCode::configuration, "calibration run annotated nothing");
        std::vector<CostObservation> rows;
        for (auto r : first) {
            r.weight = 1.0 / double(first.size());
            rows.push_back(r);
        }
        for (auto r : last) {
            r.weight = 1.0 / double(last.size());
            rows.push_back(r);
        }
        annot::CostModel fitted = fit_cost_model(rows);
        double scratch = 0.0;
        for (const auto& st : scratch_stats) scratch += fitted.minutes(st.error_voxels, st.error_components);
        const double empty_min = scratch / double(scratch_stats.size());
        const auto mean_minutes = [&](const std::vector<CostObservation>& v) {
            double sum = 0.0;
            for (const auto& r : v) sum += fitted.minutes(std::size_t(r.error_voxels), std::size_t(r.error_components));
            return sum / double(v.size());
        };
        result.round1_mean_min = mean_minutes(first);
        result.final_mean_min = mean_minutes(last);
        // Drawing from scratch is never cheaper than correcting a round-1 prediction.
        fitted.t_scratch = std::max({fitted.t_base, empty_min, result.round1_mean_min});
        result.cost = fitted;
        result.round1_cases = first.size();
        result.final_cases = last.size();
        result.iterations = it + 1;
        if (progress) {
            progress(fmt::format("iteration {}: t_base {:.6g} c_vox {:.6g} c_comp {:.6g} -> round 1 {:.3f} min, final {:.3f} min",
                                 it + 1, fitted.t_base, fitted.c_vox, fitted.c_comp, result.round1_mean_min,
                                 result.final_mean_min));
        }
    }
    return result;
}

} // namespace hitl::loop
