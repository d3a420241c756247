#include "hitl/synth/dataset_io.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"

namespace hitl::synth {

using nlohmann::json;

json to_json(const DomainSpec& spec) {
    return {
        {"dims", {spec.dims.depth, spec.dims.height, spec.dims.width}},
        {"spacing", {spec.spacing.z, spec.spacing.y, spec.spacing.x}},
        {"intensity_bias", spec.intensity_bias},
        {"contrast_scale", spec.contrast_scale},
        {"noise_sigma", spec.noise_sigma},
        {"organ_scale_range", {spec.organ_scale_min, spec.organ_scale_max}},
        {"organ_intensity", spec.organ_intensity},
        {"rng_seed", spec.rng_seed},
    };
}

DomainSpec domain_spec_from_json(const json& j) {
    DomainSpec spec;
    const auto& d = j.at("dims");
    spec.dims = {d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(), d.at(2).get<std::size_t>()};
    const auto& s = j.at("spacing");
    spec.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    spec.intensity_bias = j.at("intensity_bias").get<double>();
    spec.contrast_scale = j.at("contrast_scale").get<double>();
    spec.noise_sigma = j.at("noise_sigma").get<double>();
    spec.organ_scale_min = j.at("organ_scale_range").at(0).get<double>();
    spec.organ_scale_max = j.at("organ_scale_range").at(1).get<double>();
    spec.organ_intensity = j.at("organ_intensity").get<std::array<double, 3>>();
    spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
    spec.validate();
    return spec;
}

namespace {

const Dataset& dataset_for(const DatasetBundle& b, Role role) {
    return role == Role::seed ? b.seed : role == Role::target ? b.target : b.test;
}

Dataset& dataset_for(DatasetBundle& b, Role role) {
    return role == Role::seed ? b.seed : role == Role::target ? b.target : b.test;
}

} // namespace

void write_dataset_dir(const std::filesystem::path& dir, const DatasetBundle& bundle) {
    std::filesystem::create_directories(dir / "volumes");
    std::filesystem::create_directories(dir / "labels");

    json samples = json::array();
    for (Role role : {Role::seed, Role::target, Role::test}) {
        for (const Sample& s : dataset_for(bundle, role).samples) {
            const auto vol_rel = "volumes/" + s.id + ".vol";
            const auto lbl_rel = "labels/" + s.id + ".lbl";
            io::write_volume(dir / vol_rel, s.volume);
            if (s.ground_truth) io::write_label_map(dir / lbl_rel, *s.ground_truth);
            json entry = {{"id", s.id}, {"role", to_string(role)}, {"volume", vol_rel}};
            if (s.ground_truth) entry["labels"] = lbl_rel;
            for (const auto& p : bundle.info.samples) {
                if (p.id == s.id) {
                    entry["index"] = p.index;
                    entry["knob"] = {{"boundary_blur_sigma", p.knob.boundary_blur_sigma},
                                     {"lesion_probability", p.knob.lesion_probability}};
                }
            }
            samples.push_back(std::move(entry));
        }
    }
    const auto& info = bundle.info;
    json manifest = {
        {"format", "hitl-dataset/1"},
        {"master_seed", info.master_seed},
        {"seed_spec", to_json(info.seed_spec)},
        {"target_spec", to_json(info.target_spec)},
        {"knob_distribution",
         {{"max_blur_sigma", info.knobs.max_blur_sigma},
          {"max_lesion_probability", info.knobs.max_lesion_probability}}},
        {"counts",
         {{"seed", info.counts.seed_n}, {"target", info.counts.target_n}, {"test", info.counts.test_n}}},
        {"samples", std::move(samples)},
    };
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetBundle load_dataset_dir(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::is_regular_file(manifest_path)) {
        throw Error(ErrorCode::not_found, "no dataset manifest at " + manifest_path.string());
    }
    DatasetBundle bundle;
    try {
        const json m = json::parse(io::read_text(manifest_path));
        auto& info = bundle.info;
        info.master_seed = m.at("master_seed").get<std::uint64_t>();
        info.seed_spec = domain_spec_from_json(m.at("seed_spec"));
        info.target_spec = domain_spec_from_json(m.at("target_spec"));
        info.knobs.max_blur_sigma = m.at("knob_distribution").at("max_blur_sigma").get<double>();
        info.knobs.max_lesion_probability =
            m.at("knob_distribution").at("max_lesion_probability").get<double>();
        info.counts = {m.at("counts").at("seed").get<std::size_t>(),
                       m.at("counts").at("target").get<std::size_t>(),
                       m.at("counts").at("test").get<std::size_t>()};
        for (const auto& e : m.at("samples")) {
            Sample s;
            s.id = e.at("id").get<std::string>();
            const Role role = role_from_string(e.at("role").get<std::string>());
            s.volume = io::read_volume(dir / e.at("volume").get<std::string>());
            if (e.contains("labels")) {
                s.ground_truth = io::read_label_map(dir / e.at("labels").get<std::string>());
            }
            validate(s);
            SampleProvenance p{s.id, role, e.value("index", std::uint64_t{0}), {}};
            if (e.contains("knob")) {
                p.knob = {e["knob"].at("boundary_blur_sigma").get<double>(),
                          e["knob"].at("lesion_probability").get<double>()};
            }
            info.samples.push_back(std::move(p));
            dataset_for(bundle, role).samples.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_stream, "manifest " + manifest_path.string() + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::not_found || e.code() == ErrorCode::malformed_stream) throw;
        throw Error(ErrorCode::malformed_stream, "dataset " + dir.string() + ": " + e.what());
    }
    return bundle;
}

} // namespace hitl::synth
