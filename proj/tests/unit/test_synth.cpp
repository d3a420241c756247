#include "support/fixtures.hpp"

#include "hitl/core/error.hpp"
#include "hitl/synth/dataset_io.hpp"
#include "hitl/synth/generator.hpp"

#include <doctest.h>

#include <set>

using namespace hitl;
using namespace hitl::synth;

namespace {

DomainSpec small_spec() {
    DomainSpec spec = default_seed_spec();
    spec.dims = {8, 24, 24};
    return spec;
}

double mean_intensity(const Sample& s) {
    double sum = 0.0;
    for (double v : s.volume.voxels()) sum += v;
    return sum / double(s.volume.voxels().size());
}

} // namespace

TEST_CASE("generate_sample is deterministic in domain, knob and index") {
    const DifficultyKnob knob{0.8, 0.5};
    const Sample a = generate_sample(small_spec(), knob, 3, "X");
    const Sample b = generate_sample(small_spec(), knob, 3, "X");
    CHECK(a.volume == b.volume);
    CHECK(*a.ground_truth == *b.ground_truth);
    const Sample c = generate_sample(small_spec(), knob, 4, "X");
    CHECK_FALSE(c.volume == a.volume);
}

TEST_CASE("zero knob and zero noise give a pure intensity step at the label boundary") {
    DomainSpec spec = small_spec();
    spec.noise_sigma = 0.0;
    const Sample s = generate_sample(spec, DifficultyKnob{}, 1);
    const auto& truth = *s.ground_truth;
    CHECK(truth.count(kOrganA) > 0);
    CHECK(truth.count(kOrganB) > 0);
    for (std::size_t i = 0; i < truth.labels().size(); ++i) {
        const double expected = float(spec.organ_intensity[truth[i]]);
        REQUIRE(s.volume.voxels()[i] == expected);
    }
}

TEST_CASE("intensity bias shifts the mean by the bias") {
    DomainSpec spec = small_spec();
    spec.rng_seed = 9;
    DomainSpec biased = spec;
    biased.intensity_bias = 40.0;
    const DifficultyKnob knob{0.5, 0.3};
    const double diff = mean_intensity(generate_sample(biased, knob, 2)) - mean_intensity(generate_sample(spec, knob, 2));
    CHECK(diff == doctest::Approx(40.0).epsilon(0.5 / 40.0));
}

TEST_CASE("organs are disjoint and organ A is present in every case") {
    for (std::uint64_t i = 0; i < 20; ++i) {
        const Sample s = generate_sample(small_spec(), DifficultyKnob{1.0, 0.7}, i);
        CHECK(s.ground_truth->count(kOrganA) > 0);
        CHECK(s.ground_truth->count(kOrganB) > 0);
        CHECK(s.volume.dims() == s.ground_truth->dims());
    }
}

TEST_CASE("invalid domains and knobs are rejected") {
    DomainSpec spec = small_spec();
    spec.noise_sigma = -1.0;
    CHECK_THROWS_AS(generate_sample(spec, {}, 0), Error);
    CHECK_THROWS_AS(generate_sample(small_spec(), DifficultyKnob{0.0, 1.5}, 0), Error);
    DomainSpec tiny = small_spec();
    tiny.dims = {2, 2, 2};
    try {
        generate_sample(tiny, {}, 0);
        FAIL("expected generation error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::generation);
    }
}

TEST_CASE("dataset counts, ids and roles") {
    const DatasetBundle b = test::small_bundle(1, Counts{20, 80, 20});
    CHECK(b.seed.samples.size() == 20);
    CHECK(b.target.samples.size() == 80);
    CHECK(b.test.samples.size() == 20);
    CHECK(b.seed.role == Role::seed);
    CHECK(b.target.role == Role::target);
    CHECK(b.test.role == Role::test);
    std::set<std::string> ids;
    for (const Dataset* d : {&b.seed, &b.target, &b.test})
        for (const auto& s : d->samples) ids.insert(s.id);
    CHECK(ids.size() == 120);
    CHECK(b.seed.samples.front().id == "S-000");
    CHECK(b.target.samples.front().id == "U-000");
    CHECK(b.test.samples.back().id == "T-019");
    CHECK(b.info.samples.size() == 120);
    CHECK_THROWS_AS(test::small_bundle(1, Counts{1, 0, 1}), Error);
}

TEST_CASE("same master seed gives identical datasets") {
    const DatasetBundle a = test::small_bundle(4);
    const DatasetBundle b = test::small_bundle(4);
    for (std::size_t i = 0; i < a.target.samples.size(); ++i) {
        CHECK(a.target.samples[i].volume == b.target.samples[i].volume);
        CHECK(*a.target.samples[i].ground_truth == *b.target.samples[i].ground_truth);
    }
    const DatasetBundle c = test::small_bundle(5);
    CHECK_FALSE(a.target.samples[0].volume == c.target.samples[0].volume);
}

TEST_CASE("target preset differs from the seed domain") {
    const DomainSpec seed = default_seed_spec();
    for (auto preset : {ShiftPreset::mild, ShiftPreset::standard, ShiftPreset::severe}) {
        const DomainSpec t = target_spec_for(preset);
        CHECK(t.intensity_bias > seed.intensity_bias);
        CHECK(t.contrast_scale < seed.contrast_scale);
        CHECK(t.noise_sigma > seed.noise_sigma);
        CHECK(shift_preset_from_string(to_string(preset)) == preset);
    }
    CHECK_THROWS_AS(shift_preset_from_string("extreme"), Error);
}

TEST_CASE("dataset directory round-trips") {
    const auto dir = test::temp_dir("dataset");
    const DatasetBundle b = test::small_bundle(2, Counts{2, 3, 2});
    write_dataset_dir(dir, b);
    const DatasetBundle r = load_dataset_dir(dir);
    REQUIRE(r.target.samples.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r.target.samples[i].id == b.target.samples[i].id);
        CHECK(r.target.samples[i].volume == b.target.samples[i].volume);
        CHECK(*r.target.samples[i].ground_truth == *b.target.samples[i].ground_truth);
    }
    CHECK(r.info.target_spec.intensity_bias == b.info.target_spec.intensity_bias);
    try {
        load_dataset_dir(dir / "nope");
        FAIL("expected not_found");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::not_found);
    }
    std::filesystem::remove_all(dir);
}
