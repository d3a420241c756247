#include "hitl/seg/model_io.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"

#include <cmath>

namespace hitl::seg {

using nlohmann::json;

json to_json(const TrainMeta& meta) {
    return {{"epochs", meta.epochs},
            {"batch_size", meta.batch_size},
            {"learning_rate", meta.learning_rate},
            {"lr_decay", meta.lr_decay},
            {"decay_interval_steps", meta.decay_interval_steps},
            {"steps", meta.steps},
            {"rng_seed", meta.rng_seed},
            {"final_mean_loss", meta.final_mean_loss},
            {"epoch_losses", meta.epoch_losses}};
}

TrainMeta train_meta_from_json(const json& j) {
    TrainMeta meta;
    meta.epochs = j.at("epochs").get<std::size_t>();
    meta.batch_size = j.at("batch_size").get<std::size_t>();
    meta.learning_rate = j.at("learning_rate").get<double>();
    meta.lr_decay = j.at("lr_decay").get<double>();
    meta.decay_interval_steps = j.at("decay_interval_steps").get<std::size_t>();
    meta.steps = j.at("steps").get<std::size_t>();
    meta.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    meta.final_mean_loss = j.at("final_mean_loss").get<double>();
    meta.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    return meta;
}

json to_json(const SegmenterModel& model) {
    json features = json::array();
    for (FeatureKind k : model.feature_config.features) features.push_back(to_string(k));
    const auto& st = model.standardization;
    return {
        {"feature_config",
         {{"name", model.feature_config.name},
          {"version", model.feature_config.version},
          {"features", std::move(features)}}},
        {"standardization", {{"mean", st.mean}, {"stddev", st.stddev}, {"flagged", st.flagged}}},
        {"weights",
         {{"rows", model.feature_count()}, {"cols", kNumClasses}, {"row_major", model.weights}}},
        {"train_meta", to_json(model.train_meta)},
    };
}

SegmenterModel model_from_json(const json& j) {
    try {
        SegmenterModel m;
        const auto& fc = j.at("feature_config");
        m.feature_config.name = fc.at("name").get<std::string>();
        m.feature_config.version = fc.at("version").get<int>();
        for (const auto& f : fc.at("features")) {
            m.feature_config.features.push_back(feature_kind_from_string(f.get<std::string>()));
        }
        const std::size_t nf = m.feature_config.count();
        const auto& st = j.at("standardization");
        m.standardization.mean = st.at("mean").get<std::vector<double>>();
        m.standardization.stddev = st.at("stddev").get<std::vector<double>>();
        m.standardization.flagged = st.at("flagged").get<std::vector<bool>>();
        m.weights = j.at("weights").at("row_major").get<std::vector<double>>();
        if (m.weights.size() != nf * kNumClasses || m.standardization.mean.size() != nf ||
            m.standardization.stddev.size() != nf || m.standardization.flagged.size() != nf) {
            throw Error(ErrorCode::malformed_stream, "model: array sizes do not match feature count");
        }
        for (double w : m.weights) {
            if (!std::isfinite(w)) throw Error(ErrorCode::malformed_stream, "model: non-finite weight");
        }
        for (double s : m.standardization.stddev) {
            if (!(s > 0.0)) throw Error(ErrorCode::malformed_stream, "model: stddev must be > 0");
        }
        m.train_meta = train_meta_from_json(j.at("train_meta"));
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_stream, std::string("model json: ") + e.what());
    }
}

json to_json(const TrainConfig& cfg) {
    return {
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"learning_rate", cfg.learning_rate},
        {"lr_decay", cfg.lr_decay},
        {"decay_interval_steps", cfg.decay_interval_steps},
        {"voxel_subsample_rate", cfg.voxel_subsample_rate},
        {"class_balance", cfg.class_balance},
        {"rng_seed", cfg.rng_seed},
    };
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
    TrainConfig cfg = base;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
    cfg.decay_interval_steps = j.value("decay_interval_steps", cfg.decay_interval_steps);
    cfg.voxel_subsample_rate = j.value("voxel_subsample_rate", cfg.voxel_subsample_rate);
    cfg.class_balance = j.value("class_balance", cfg.class_balance);
    cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
    return cfg;
}

void save_model(const std::filesystem::path& path, const SegmenterModel& model) {
    io::write_text(path, to_json(model).dump(2) + "\n");
}

SegmenterModel load_model(const std::filesystem::path& path) {
    const std::string text = io::read_text(path);
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::malformed_stream, "model: invalid JSON in " + path.string());
    return model_from_json(j);
}

} // namespace hitl::seg
