#include "hitl/seg/segmenter.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace hitl::seg {

namespace {

/// Softmax scores for one standardised row; returns the probabilities.
std::array<double, kNumClasses> softmax_row(std::span<const double> weights, std::span<const double> row) {
    std::array<double, kNumClasses> s{};
    for (std::size_t f = 0; f < row.size(); ++f) {
        const double x = row[f];
        const double* w = weights.data() + f * kNumClasses;
        s[0] += w[0] * x;
        s[1] += w[1] * x;
        s[2] += w[2] * x;
    }
    const double m = std::max({s[0], s[1], s[2]});
    double z = 0.0;
    for (double& v : s) {
        v = std::exp(v - m);
        z += v;
    }
    for (double& v : s) v /= z;
    return s;
}

void standardize(const Standardization& st, std::span<double> row) {
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = (row[f] - st.mean[f]) / st.stddev[f];
}

Standardization fit_standardization(std::span<const TrainingPair> corpus, const FeatureConfig& config) {
    const std::size_t nf = config.count();
    std::vector<double> sum(nf, 0.0), sq(nf, 0.0), row(nf);
    std::size_t n = 0;
    for (const auto& pair : corpus) {
        const std::size_t voxels = pair.features->dims().voxel_count();
        for (std::size_t i = 0; i < voxels; ++i) {
            pair.features->fill(config, i, row);
            for (std::size_t f = 0; f < nf; ++f) sum[f] += row[f];
        }
        n += voxels;
    }
    Standardization st{std::vector<double>(nf, 0.0), std::vector<double>(nf, 1.0), std::vector<bool>(nf, false)};
    if (n == 0) return st;
    for (std::size_t f = 0; f < nf; ++f) st.mean[f] = sum[f] / double(n);
    for (const auto& pair : corpus) {
        const std::size_t voxels = pair.features->dims().voxel_count();
        for (std::size_t i = 0; i < voxels; ++i) {
            pair.features->fill(config, i, row);
            for (std::size_t f = 0; f < nf; ++f) sq[f] += (row[f] - st.mean[f]) * (row[f] - st.mean[f]);
        }
    }
    for (std::size_t f = 0; f < nf; ++f) {
        const double sd = std::sqrt(sq[f] / double(n));
        if (sd > 1e-12) {
            st.stddev[f] = sd;
        } else {
            st.mean[f] = 0.0;
            st.stddev[f] = 1.0;
            st.flagged[f] = true;
        }
    }
    return st;
}

struct Draw {
    std::uint32_t pair;
    std::uint32_t voxel;
};

} // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::configuration, "learning_rate must be > 0");
    if (!(voxel_subsample_rate > 0.0 && voxel_subsample_rate <= 1.0)) {
        throw Error(ErrorCode::configuration, "voxel_subsample_rate must lie in (0, 1]");
    }
    if (batch_size == 0) throw Error(ErrorCode::configuration, "batch_size must be >= 1");
    if (decay_interval_steps == 0) throw Error(ErrorCode::configuration, "decay_interval_steps must be >= 1");
    if (!(lr_decay > 0.0)) throw Error(ErrorCode::configuration, "lr_decay must be > 0");
}

TrainConfig TrainConfig::igniter_defaults() {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 256;
    cfg.learning_rate = 1e-2;
    cfg.lr_decay = 0.95;
    cfg.decay_interval_steps = 500;
    return cfg;
}

TrainConfig TrainConfig::sustainer_defaults() {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 256;
    cfg.learning_rate = 1e-2;
    cfg.lr_decay = 1.0;
    cfg.decay_interval_steps = 500;
    return cfg;
}

std::string_view to_string(Provenance provenance) {
    switch (provenance) {
    case Provenance::seed_ground_truth: return "seed_ground_truth";
    case Provenance::refined_annotation: return "refined_annotation";
    case Provenance::other: return "other";
    }
    return "other";
}

SegmenterModel SegmenterModel::zero(FeatureConfig config) {
    SegmenterModel m;
    const std::size_t nf = config.count();
    m.feature_config = std::move(config);
    m.weights.assign(nf * kNumClasses, 0.0);
    m.standardization = {std::vector<double>(nf, 0.0), std::vector<double>(nf, 1.0),
                         std::vector<bool>(nf, false)};
    return m;
}

double softmax_cross_entropy(std::span<const double> weights, std::size_t feature_count,
                             std::span<const double> rows, std::span<const Label> labels,
                             std::span<double> gradient) {
    std::fill(gradient.begin(), gradient.end(), 0.0);
    const std::size_t n = labels.size();
    if (n == 0) return 0.0;
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = rows.subspan(r * feature_count, feature_count);
        auto p = softmax_row(weights, row);
        loss -= std::log(std::max(p[labels[r]], 1e-300));
        p[labels[r]] -= 1.0;
        for (std::size_t f = 0; f < feature_count; ++f) {
            double* g = gradient.data() + f * kNumClasses;
            g[0] += row[f] * p[0];
            g[1] += row[f] * p[1];
            g[2] += row[f] * p[2];
        }
    }
    const double inv = 1.0 / double(n);
    for (double& g : gradient) g *= inv;
    return loss * inv;
}

SegmenterModel train(std::span<const TrainingPair> corpus, const TrainConfig& cfg,
                     const std::optional<SegmenterModel>& init, const FeatureConfig& features) {
    if (cfg.epochs == 0) {
        return init ? *init : SegmenterModel::zero(features);
    }
    cfg.validate();
    if (corpus.empty()) {
        throw Error(ErrorCode::configuration, "train: no labelled pairs with epochs > 0");
    }
    for (const auto& pair : corpus) {
        if (!pair.features || !pair.labels || pair.features->dims() != pair.labels->dims()) {
            throw Error(ErrorCode::rejected_input, "train: feature/label dims mismatch");
        }
    }
    if (init && init->feature_config != features) {
        throw Error(ErrorCode::configuration, "train: init model uses a different feature config");
    }

    SegmenterModel model = init ? *init : SegmenterModel::zero(features);
    if (!init) model.standardization = fit_standardization(corpus, features);
    const std::size_t nf = features.count();

    // Voxel indices per class for balanced sampling.
    std::vector<std::array<std::vector<std::uint32_t>, kNumClasses>> by_class(corpus.size());
    if (cfg.class_balance) {
        for (std::size_t p = 0; p < corpus.size(); ++p) {
            const auto labels = corpus[p].labels->labels();
            for (std::size_t i = 0; i < labels.size(); ++i) {
                by_class[p][labels[i]].push_back(static_cast<std::uint32_t>(i));
            }
        }
    }

    std::mt19937_64 rng(cfg.rng_seed);
    std::vector<Draw> draws;
    std::vector<double> rows(cfg.batch_size * nf);
    std::vector<Label> batch_labels(cfg.batch_size);
    std::vector<double> gradient(nf * kNumClasses);
    std::size_t step = 0;
    model.train_meta.epoch_losses.clear();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        draws.clear();
        for (std::size_t p = 0; p < corpus.size(); ++p) {
            const std::size_t voxels = corpus[p].labels->dims().voxel_count();
            const auto m = static_cast<std::size_t>(
                std::max(1.0, std::round(cfg.voxel_subsample_rate * double(voxels))));
            if (cfg.class_balance) {
                std::array<std::size_t, kNumClasses> present{};
                std::size_t k = 0;
                for (std::size_t c = 0; c < kNumClasses; ++c)
                    if (!by_class[p][c].empty()) present[k++] = c;
                std::uniform_int_distribution<std::size_t> pick_class(0, k - 1);
                for (std::size_t j = 0; j < m; ++j) {
                    const auto& pool = by_class[p][present[pick_class(rng)]];
                    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                    draws.push_back({static_cast<std::uint32_t>(p), pool[pick(rng)]});
                }
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, voxels - 1);
                for (std::size_t j = 0; j < m; ++j) {
                    draws.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(pick(rng))});
                }
            }
        }
        std::shuffle(draws.begin(), draws.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < draws.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, draws.size() - start);
            for (std::size_t r = 0; r < len; ++r) {
                const Draw d = draws[start + r];
                auto row = std::span<double>(rows).subspan(r * nf, nf);
                corpus[d.pair].features->fill(features, d.voxel, row);
                standardize(model.standardization, row);
                batch_labels[r] = (*corpus[d.pair].labels)[d.voxel];
            }
            const double loss = softmax_cross_entropy(model.weights, nf,
                                                      std::span<const double>(rows).first(len * nf),
                                                      std::span<const Label>(batch_labels).first(len),
                                                      gradient);
            if (!std::isfinite(loss)) {
                throw Error(ErrorCode::divergence, "train: non-finite loss at step " + std::to_string(step));
            }
            const double lr = cfg.learning_rate *
                              std::pow(cfg.lr_decay, double(step / cfg.decay_interval_steps));
            for (std::size_t w = 0; w < gradient.size(); ++w) model.weights[w] -= lr * gradient[w];
            epoch_loss += loss * double(len);
            ++step;
        }
        model.train_meta.epoch_losses.push_back(epoch_loss / double(draws.size()));
    }
    for (double w : model.weights) {
        if (!std::isfinite(w)) throw Error(ErrorCode::divergence, "train: non-finite weights after training");
    }

    auto& meta = model.train_meta;
    meta.epochs = cfg.epochs;
    meta.batch_size = cfg.batch_size;
    meta.learning_rate = cfg.learning_rate;
    meta.lr_decay = cfg.lr_decay;
    meta.decay_interval_steps = cfg.decay_interval_steps;
    meta.steps = step;
    meta.rng_seed = cfg.rng_seed;
    meta.final_mean_loss = meta.epoch_losses.empty() ? 0.0 : meta.epoch_losses.back();
    return model;
}

SegmenterModel train(std::span<const LabeledVolume> corpus, const TrainConfig& cfg,
                     const std::optional<SegmenterModel>& init, const FeatureConfig& features) {
    std::vector<FeatureVolume> planes;
    planes.reserve(corpus.size());
    for (const auto& item : corpus) planes.emplace_back(preprocess(*item.volume));
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        pairs.push_back({&planes[i], corpus[i].labels, Provenance::other});
    }
    return train(pairs, cfg, init, features);
}

Prediction predict(const SegmenterModel& model, const FeatureVolume& features) {
    const Dims& dims = features.dims();
    const std::size_t nf = model.feature_count();
    std::vector<Label> labels(dims.voxel_count());
    std::vector<double> probs(dims.voxel_count() * kNumClasses);
    std::vector<double> row(nf);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        features.fill(model.feature_config, i, row);
        standardize(model.standardization, row);
        const auto p = softmax_row(model.weights, row);
        Label best = 0;
        for (Label c = 1; c < kNumClasses; ++c)
            if (p[c] > p[best]) best = c;
        labels[i] = best;
        for (std::size_t c = 0; c < kNumClasses; ++c) probs[i * kNumClasses + c] = p[c];
    }
    return {LabelMap(dims, std::move(labels)), std::move(probs)};
}

Prediction predict(const SegmenterModel& model, const Volume& raw) {
    return predict(model, FeatureVolume(preprocess(raw)));
}

} // namespace hitl::seg
