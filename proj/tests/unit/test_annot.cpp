#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include "hitl/annot/annotator.hpp"
#include "hitl/annot/components.hpp"
#include "hitl/core/rle.hpp"

#include <doctest.h>

#include <atomic>
#include <numeric>
#include <thread>

using namespace hitl;
using namespace hitl::annot;

namespace {

std::vector<std::uint8_t> random_mask(const Dims& d, std::mt19937_64& rng, double p) {
    std::bernoulli_distribution on(p);
    std::vector<std::uint8_t> mask(d.voxel_count());
    for (auto& m : mask) m = on(rng);
    return mask;
}

Sample target_sample(std::uint64_t seed) {
    auto bundle = test::small_bundle(seed, {1, 1, 1});
    return bundle.target.samples.front();
}

std::map<std::string, Dims, std::less<>> known_of(const std::vector<Sample>& samples) {
    std::map<std::string, Dims, std::less<>> known;
    for (const auto& s : samples) known.emplace(s.id, s.volume.dims());
    return known;
}

} // namespace

TEST_CASE("component counts match a union-find oracle") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 60; ++trial) {
        const Dims d{std::size_t(1 + trial % 5), 7, 9};
        const auto mask = random_mask(d, rng, 0.05 + 0.01 * (trial % 30));
        CHECK(count_components(mask, d) == test::union_find_components(mask, d));
    }
    // Diagonal neighbours join under 26-connectivity.
    std::vector<std::uint8_t> diag(8, 0);
    diag[Dims{2, 2, 2}.index(0, 0, 0)] = 1;
    diag[Dims{2, 2, 2}.index(1, 1, 1)] = 1;
    CHECK(count_components(diag, {2, 2, 2}) == 1);
}

TEST_CASE("cost formula hand example") {
    const CostModel cost{0.5, 0.002, 0.1, 30.0};
    CHECK(cost.minutes(150, 2) == doctest::Approx(1.0));

    // 150 error voxels in two separated slabs.
    const Dims d{10, 10, 10};
    std::vector<Label> truth(d.voxel_count(), kBackground), pred(d.voxel_count(), kBackground);
    std::size_t placed = 0;
    for (std::size_t z = 0; z < 10 && placed < 100; ++z)
        for (std::size_t y = 0; y < 10 && placed < 100; ++y, ++placed) pred[d.index(z, y, 0)] = kOrganA;
    for (std::size_t z = 0; z < 5; ++z)
        for (std::size_t y = 0; y < 10; ++y) truth[d.index(z, y, 9)] = kOrganB;
    const ErrorStats s = compare(LabelMap(d, pred), LabelMap(d, truth));
    CHECK(s.error_voxels == 150);
    CHECK(s.error_components == 2);
    CHECK(s.fp_voxels[0] == 100);
    CHECK(s.fn_voxels[1] == 50);
    Sample sample;
    sample.id = "x";
    sample.volume = Volume(d, {1, 1, 1}, std::vector<double>(d.voxel_count(), 0.0));
    sample.ground_truth = LabelMap(d, truth);
    sample.prediction = LabelMap(d, pred);
    CHECK(oracle_annotate(sample, 1, cost).time_min == doctest::Approx(1.0));
}

TEST_CASE("perfect prediction costs t_base") {
    const CostModel cost = CostModel::calibrated_default();
    Sample s = target_sample(1);
    s.prediction = s.ground_truth;
    const AnnotationEvent ev = oracle_annotate(s, 2, cost);
    CHECK(ev.time_min == cost.t_base);
    CHECK(ev.error_stats == ErrorStats{});
    CHECK(ev.round == 2);
}

TEST_CASE("oracle returns ground truth bitwise and charges the formula on random error masks") {
    const CostModel cost{0.4, 0.003, 0.2, 20.0};
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        Sample s = target_sample(std::uint64_t(trial));
        const Dims& d = s.ground_truth->dims();
        const auto mask = random_mask(d, rng, 0.002 * (1 + trial));
        std::vector<Label> pred(s.ground_truth->labels().begin(), s.ground_truth->labels().end());
        std::size_t flipped = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (!mask[i]) continue;
            pred[i] = Label((pred[i] + 1 + trial % 2) % 3);
            ++flipped;
        }
        s.prediction = LabelMap(d, pred);
        const AnnotationEvent ev = oracle_annotate(s, 1, cost);
        CHECK(ev.label == *s.ground_truth);
        const std::size_t comps = test::union_find_components(mask, d);
        CHECK(ev.error_stats.error_voxels == flipped);
        CHECK(ev.error_stats.error_components == comps);
        CHECK(ev.time_min == doctest::Approx(0.4 + 0.003 * double(flipped) + 0.2 * double(comps)));
    }
}

TEST_CASE("oracle without prediction charges t_scratch; without ground truth it refuses") {
    const CostModel cost{0.5, 0.01, 0.1, 12.0};
    Sample s = target_sample(3);
    CHECK(oracle_annotate(s, 0, cost).time_min == 12.0);
    s.ground_truth.reset();
    try {
        oracle_annotate(s, 0, cost);
        FAIL("expected contract violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::contract_violation);
    }
}

TEST_CASE("noisy oracle only touches boundary voxels and is seeded") {
    const Sample s = target_sample(4);
    const OracleOptions opts{0.3, 17};
    const AnnotationEvent a = oracle_annotate(s, 1, CostModel::calibrated_default(), opts);
    const AnnotationEvent b = oracle_annotate(s, 1, CostModel::calibrated_default(), opts);
    CHECK(a.label == b.label);
    CHECK_FALSE(a.label == *s.ground_truth);
    const Dims& d = s.ground_truth->dims();
    for (std::size_t z = 0; z < d.depth; ++z)
        for (std::size_t y = 0; y < d.height; ++y)
            for (std::size_t x = 0; x < d.width; ++x) {
                const Label t = s.ground_truth->at(z, y, x);
                if (a.label.at(z, y, x) == t) continue;
                bool boundary = false;
                for (auto [dz, dy, dx] : {std::tuple{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}) {
                    const long nz = long(z) + dz, ny = long(y) + dy, nx = long(x) + dx;
                    if (nz < 0 || ny < 0 || nx < 0 || nz >= long(d.depth) || ny >= long(d.height) || nx >= long(d.width))
                        continue;
                    boundary = boundary || s.ground_truth->at(std::size_t(nz), std::size_t(ny), std::size_t(nx)) != t;
                }
                REQUIRE(boundary);
            }
}

TEST_CASE("cost model validation") {
    CHECK_NOTHROW(CostModel::calibrated_default().validate());
    CHECK_THROWS_AS((CostModel{-1, 0, 0, 0}.validate()), Error);
    CHECK_THROWS_AS((CostModel{2, 0, 0, 1}.validate()), Error);
}

TEST_CASE("human intake state machine") {
    const auto bundle = test::small_bundle(6, {1, 4, 1});
    const auto& target = bundle.target.samples;
    HumanIntake intake(known_of(target));
    std::vector<std::string> heard;
    intake.set_listener([&](const AnnotationEvent& ev) { heard.push_back(ev.sample_id); });
    auto pred = std::make_shared<const LabelMap>(target[0].volume.dims());
    intake.open_batch(1, {{target[0].id, pred}, {target[1].id, pred}});
    CHECK(intake.pending() == std::vector<std::string>{target[0].id, target[1].id});

    const auto expect = [&](Rejection r, auto&& f) {
        try {
            f();
            FAIL("expected rejection");
        } catch (const IntakeError& e) {
            CHECK(e.reason() == r);
        }
    };
    const LabelMap& truth0 = *target[0].ground_truth;
    expect(Rejection::unknown_sample, [&] { intake.accept("nope", truth0, 1.0); });
    expect(Rejection::not_pending, [&] { intake.accept(target[2].id, *target[2].ground_truth, 1.0); });
    expect(Rejection::dims_mismatch, [&] { intake.accept(target[0].id, LabelMap(Dims{1, 1, 1}), 1.0); });
    expect(Rejection::invalid_time, [&] { intake.accept(target[0].id, truth0, 0.0); });
    // A class code 3 never decodes.
    const Dims& d = truth0.dims();
    std::vector<std::uint8_t> bad{3, 0, 0, 0, 0};
    const auto n = std::uint32_t(d.voxel_count());
    bad[1] = std::uint8_t(n), bad[2] = std::uint8_t(n >> 8), bad[3] = std::uint8_t(n >> 16), bad[4] = std::uint8_t(n >> 24);
    expect(Rejection::invalid_label, [&] { intake.accept_encoded(target[0].id, d, bad, 1.0); });
    CHECK_FALSE(intake.is_refined(target[0].id));
    CHECK(heard.empty());

    const AnnotationEvent ev = intake.accept_encoded(target[0].id, d, rle::encode(truth0), 2.5);
    CHECK(ev.time_min == 2.5);
    CHECK(ev.round == 1);
    CHECK(intake.is_refined(target[0].id));
    CHECK(intake.pending() == std::vector<std::string>{target[1].id});

    // Second submission conflicts and the first label is kept.
    expect(Rejection::already_annotated, [&] { intake.accept(target[0].id, LabelMap(d), 1.0); });
    CHECK(*intake.annotation(target[0].id) == truth0);

    std::thread submit([&] { intake.accept(target[1].id, *target[1].ground_truth, 1.0); });
    const auto events = intake.wait_batch();
    submit.join();
    REQUIRE(events.size() == 2);
    CHECK(events[0].sample_id == target[0].id);
    CHECK(heard == std::vector<std::string>{target[0].id, target[1].id});
    expect(Rejection::already_annotated, [&] { intake.open_batch(2, {{target[0].id, pred}}); });
}

TEST_CASE("concurrent submissions for one sample: exactly one wins") {
    const auto bundle = test::small_bundle(7, {1, 2, 1});
    const auto& target = bundle.target.samples;
    HumanIntake intake(known_of(target));
    intake.open_batch(1, {{target[0].id, nullptr}});
    std::atomic<int> accepted{0}, conflicts{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            try {
                intake.accept(target[0].id, t % 2 ? *target[0].ground_truth : LabelMap(target[0].volume.dims()), 1.0 + t);
                ++accepted;
            } catch (const IntakeError& e) {
                if (e.code() == ErrorCode::conflict) ++conflicts;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(accepted == 1);
    CHECK(conflicts == 7);
    CHECK(intake.wait_batch().size() == 1);
}

TEST_CASE("cancel releases a waiting batch") {
    const auto bundle = test::small_bundle(8, {1, 2, 1});
    HumanIntake intake(known_of(bundle.target.samples));
    intake.open_batch(1, {{bundle.target.samples[0].id, nullptr}});
    std::thread canceller([&] { intake.cancel(); });
    CHECK_THROWS_AS(intake.wait_batch(), Error);
    canceller.join();
}
