#include "support/fixtures.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/metrics.hpp"
#include "hitl/core/preprocess.hpp"
#include "hitl/seg/features.hpp"
#include "hitl/seg/model_io.hpp"
#include "hitl/seg/segmenter.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace hitl;
using namespace hitl::seg;

namespace {

std::vector<double> features_at(const FeatureVolume& fv, std::size_t index) {
    const FeatureConfig cfg = FeatureConfig::standard();
    std::vector<double> out(cfg.count());
    fv.fill(cfg, index, out);
    return out;
}

std::size_t slot(FeatureKind kind) {
    const auto& f = FeatureConfig::standard().features;
    return std::size_t(std::find(f.begin(), f.end(), kind) - f.begin());
}

struct Toy {
    Volume volume;
    LabelMap labels;
};

// Bright organ-A block, dark organ-B block; `k` shifts both so a corpus of
// several toys resembles a training set rather than one repeated case.
Toy separable_toy(std::size_t k = 0) {
    const Dims dims{16, 48, 48};
    std::vector<double> v(dims.voxel_count(), 0.0);
    std::vector<Label> l(dims.voxel_count(), kBackground);
    const std::size_t o = 2 * k;
    for (std::size_t z = 0; z < dims.depth; ++z)
        for (std::size_t y = 0; y < dims.height; ++y)
            for (std::size_t x = 0; x < dims.width; ++x) {
                const std::size_t i = dims.index(z, y, x);
                if (y >= o && y < o + 18 && x < 20) {
                    v[i] = 200.0;
                    l[i] = kOrganA;
                } else if (y >= 28 && x >= 26 + o / 2) {
                    v[i] = -150.0;
                    l[i] = kOrganB;
                }
            }
    return {Volume(dims, {1, 1, 1}, std::move(v)), LabelMap(dims, std::move(l))};
}

double loss_only(const std::vector<double>& w, std::size_t f, const std::vector<double>& rows,
                 const std::vector<Label>& labels) {
    std::vector<double> g(w.size());
    return softmax_cross_entropy(w, f, rows, labels, g);
}

} // namespace

TEST_CASE("constant volume features") {
    const Volume pre = preprocess(Volume({4, 4, 4}, {1, 1, 1}, std::vector<double>(64, 100.0)));
    const FeatureVolume fv(pre);
    for (std::size_t i = 0; i < 64; ++i) {
        const auto f = features_at(fv, i);
        CHECK(f[slot(FeatureKind::raw)] == f[slot(FeatureKind::smooth_r1)]);
        CHECK(f[slot(FeatureKind::raw)] == f[slot(FeatureKind::smooth_r2)]);
        CHECK(f[slot(FeatureKind::gradient_magnitude)] == 0.0);
        CHECK(f[slot(FeatureKind::bias)] == 1.0);
    }
}

TEST_CASE("centre voxel of a 3x3x3 volume has coordinates 0.5") {
    std::vector<double> v(27);
    for (std::size_t i = 0; i < 27; ++i) v[i] = double(i);
    const FeatureVolume fv(preprocess(Volume({3, 3, 3}, {1, 1, 1}, v)));
    const auto f = features_at(fv, Dims{3, 3, 3}.index(1, 1, 1));
    CHECK(f[slot(FeatureKind::coord_z)] == 0.5);
    CHECK(f[slot(FeatureKind::coord_y)] == 0.5);
    CHECK(f[slot(FeatureKind::coord_x)] == 0.5);
}

TEST_CASE("gradient magnitude of a ramp along x is slope over spacing") {
    const Dims dims{3, 3, 7};
    const double sx = 0.8, slope = 0.25;
    std::vector<double> v(dims.voxel_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = slope * double(i % dims.width);
    // Features take an already preprocessed volume, so the ramp goes in as is.
    const FeatureVolume fv(Volume(dims, {2.0, 1.5, sx}, v));
    for (std::size_t x = 1; x + 1 < dims.width; ++x) {
        const auto f = features_at(fv, dims.index(1, 1, x));
        CHECK(f[slot(FeatureKind::gradient_magnitude)] == doctest::Approx(slope / sx).epsilon(1e-6));
    }
}

TEST_CASE("extract_features matches the per-voxel fill") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> hu(0.0, 80.0);
    std::vector<double> v(4 * 5 * 6);
    for (auto& x : v) x = hu(rng);
    const Volume pre = preprocess(Volume({4, 5, 6}, {1, 1, 1}, v));
    const FeatureMatrix m = extract_features(pre);
    const FeatureVolume fv(pre);
    REQUIRE(m.rows == 120);
    REQUIRE(m.cols == 8);
    for (std::size_t r = 0; r < m.rows; r += 7) {
        const auto f = features_at(fv, r);
        for (std::size_t c = 0; c < m.cols; ++c) CHECK(m.at(r, c) == f[c]);
    }
}

TEST_CASE("analytic gradient matches central finite differences on 50 random batches") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 2);
    const std::size_t f = 8, n = 10;
    const double h = 1e-5;
    double worst = 0.0;
    for (int batch = 0; batch < 50; ++batch) {
        std::vector<double> w(f * kNumClasses), rows(n * f);
        std::vector<Label> labels(n);
        for (auto& x : w) x = 0.5 * normal(rng);
        for (auto& x : rows) x = normal(rng);
        for (auto& l : labels) l = Label(cls(rng));
        std::vector<double> grad(w.size());
        softmax_cross_entropy(w, f, rows, labels, grad);
        for (std::size_t k = 0; k < w.size(); ++k) {
            auto plus = w, minus = w;
            plus[k] += h;
            minus[k] -= h;
            const double numeric = (loss_only(plus, f, rows, labels) - loss_only(minus, f, rows, labels)) / (2 * h);
            const double rel = std::abs(numeric - grad[k]) / std::max({std::abs(numeric), std::abs(grad[k]), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("zero epochs returns the init or the zero model") {
    const Toy toy = separable_toy();
    const LabeledVolume corpus[] = {{&toy.volume, &toy.labels}};
    TrainConfig cfg = TrainConfig::sustainer_defaults();
    cfg.epochs = 0;
    const SegmenterModel zero = train(corpus, cfg);
    CHECK(zero.weights == SegmenterModel::zero().weights);

    SegmenterModel init = SegmenterModel::zero();
    init.weights[3] = 0.25;
    CHECK(train(corpus, cfg, init).weights == init.weights);
    CHECK(train(std::span<const LabeledVolume>{}, cfg).weights == zero.weights);
}

TEST_CASE("zero-weight model predicts uniform probabilities and background") {
    std::vector<double> v(60);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
    const Prediction p = predict(SegmenterModel::zero(), Volume({3, 4, 5}, {1, 1, 1}, v));
    for (double q : p.probabilities) CHECK(q == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(p.labels.count(kBackground) == 60);
}

TEST_CASE("separable toy corpus is learned under the default schedule") {
    std::vector<Toy> toys;
    for (std::size_t k = 0; k < 6; ++k) toys.push_back(separable_toy(k));
    std::vector<LabeledVolume> corpus;
    for (const auto& t : toys) corpus.push_back({&t.volume, &t.labels});
    const SegmenterModel model = train(corpus, TrainConfig::sustainer_defaults());
    std::size_t correct = 0, total = 0;
    for (const auto& t : toys) {
        const Prediction p = predict(model, t.volume);
        for (std::size_t i = 0; i < p.labels.labels().size(); ++i) correct += p.labels[i] == t.labels[i];
        total += p.labels.labels().size();
        const DiceScore d = dice(p.labels, t.labels);
        CHECK(d.of(kOrganA) >= 0.95);
        CHECK(d.of(kOrganB) >= 0.95);
        for (std::size_t i = 0; i < p.labels.labels().size(); ++i) {
            const double sum = p.probabilities[3 * i] + p.probabilities[3 * i + 1] + p.probabilities[3 * i + 2];
            REQUIRE(std::abs(sum - 1.0) <= 1e-9);
        }
    }
    CHECK(double(correct) / double(total) >= 0.99);
}

TEST_CASE("training is deterministic in the seed") {
    const Toy toy = separable_toy();
    const LabeledVolume corpus[] = {{&toy.volume, &toy.labels}};
    TrainConfig cfg = TrainConfig::sustainer_defaults();
    cfg.epochs = 3;
    cfg.rng_seed = 5;
    const SegmenterModel a = train(corpus, cfg);
    const SegmenterModel b = train(corpus, cfg);
    CHECK(a == b);
    cfg.rng_seed = 6;
    CHECK_FALSE(train(corpus, cfg).weights == a.weights);
    CHECK(a.train_meta.epoch_losses.size() == 3);
}

TEST_CASE("training failures") {
    const Toy toy = separable_toy();
    const LabeledVolume corpus[] = {{&toy.volume, &toy.labels}};
    try {
        train(std::span<const LabeledVolume>{}, TrainConfig::sustainer_defaults());
        FAIL("expected configuration error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::configuration);
    }
    TrainConfig wild = TrainConfig::sustainer_defaults();
    wild.learning_rate = 1e308;
    try {
        train(corpus, wild);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::divergence);
    }
    TrainConfig bad = TrainConfig::sustainer_defaults();
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("model JSON and file round-trip") {
    const Toy toy = separable_toy();
    const LabeledVolume corpus[] = {{&toy.volume, &toy.labels}};
    TrainConfig cfg = TrainConfig::igniter_defaults();
    cfg.epochs = 2;
    const SegmenterModel model = train(corpus, cfg);
    CHECK(model_from_json(to_json(model)) == model);
    const auto dir = test::temp_dir("model");
    save_model(dir / "m.json", model);
    CHECK(load_model(dir / "m.json") == model);
    std::filesystem::remove_all(dir);

    const TrainConfig back = train_config_from_json(to_json(cfg), TrainConfig{});
    CHECK(back.learning_rate == cfg.learning_rate);
    CHECK(back.lr_decay == cfg.lr_decay);
    CHECK(back.epochs == cfg.epochs);
}
