#include "hitl/loop/report.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"
#include "hitl/seg/model_io.hpp"

#include <fmt/format.h>

#include <cmath>

namespace hitl::loop {

using nlohmann::json;

double round4(double value) {
    const double r = std::round(value * 1e4) / 1e4;
    return r == 0.0 ? 0.0 : r; // no negative zero
}

ReportFormat report_format_from_string(std::string_view text) {
    if (text == "md") return ReportFormat::md;
    if (text == "csv") return ReportFormat::csv;
    if (text == "json") return ReportFormat::json;
    throw Error(ErrorCode::configuration, "unknown report format '" + std::string(text) + "'");
}

json to_json(const DiceScore& d) {
    const double a = round4(d.per_class[0]), b = round4(d.per_class[1]);
    return {{"per_class", {a, b}}, {"mean", round4(0.5 * (a + b))}};
}

DiceScore dice_from_json(const json& j) {
    DiceScore d;
    d.per_class = j.at("per_class").get<std::array<double, 2>>();
    return d;
}

json to_json(const RunReport& report) {
    json rounds = json::array();
    for (const auto& r : report.rounds) {
        json annotated = json::array();
        for (const auto& a : r.annotated) annotated.push_back({{"sample_id", a.sample_id}, {"time_min", round4(a.time_min)}});
        rounds.push_back({{"round", r.round},
                          {"n", r.annotated.size()},
                          {"annotated", annotated},
                          {"cumulative_count", r.cumulative_count},
                          {"mean_time_min", round4(r.mean_time_min)},
                          {"total_time_min", round4(r.total_time_min)},
                          {"train_meta", r.train_meta ? seg::to_json(*r.train_meta) : json(nullptr)},
                          {"dice", to_json(r.dice)}});
    }
    const json final_dice = to_json(report.final_dice);
    const json baseline = to_json(report.baseline);
    return {{"format", "hitl-report/1"},
            {"config", report.config},
            {"baseline", baseline},
            {"rounds", rounds},
            {"totals",
             {{"total_annotation_min", round4(report.total_annotation_min)},
              {"final_dice", final_dice},
              {"dice_gain", round4(final_dice.at("mean").get<double>() - baseline.at("mean").get<double>())}}},
            {"note", report.note ? json(*report.note) : json(nullptr)}};
}

RunReport report_from_json(const json& j) {
    try {
        if (j.at("format") != "hitl-report/1") throw Error(ErrorCode::malformed_stream, "unknown report format");
        RunReport r;
        r.config = j.at("config");
        r.baseline = dice_from_json(j.at("baseline"));
        for (const auto& rj : j.at("rounds")) {
            RoundRecord rec;
            rec.round = rj.at("round").get<int>();
            for (const auto& a : rj.at("annotated")) {
                rec.annotated.push_back({a.at("sample_id").get<std::string>(), a.at("time_min").get<double>()});
            }
            rec.cumulative_count = rj.at("cumulative_count").get<std::size_t>();
            rec.mean_time_min = rj.at("mean_time_min").get<double>();
            rec.total_time_min = rj.at("total_time_min").get<double>();
            if (!rj.at("train_meta").is_null()) rec.train_meta = seg::train_meta_from_json(rj.at("train_meta"));
            rec.dice = dice_from_json(rj.at("dice"));
            r.rounds.push_back(std::move(rec));
        }
        const auto& totals = j.at("totals");
        r.total_annotation_min = totals.at("total_annotation_min").get<double>();
        r.final_dice = dice_from_json(totals.at("final_dice"));
        r.dice_gain = totals.at("dice_gain").get<double>();
        if (!j.at("note").is_null()) r.note = j.at("note").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_stream, std::string("report json: ") + e.what());
    }
}

namespace {

struct Row {
    int round;
    std::size_t n, cumulative;
    double mean_time;
    DiceScore dice;
};

std::vector<Row> table_rows(const RunReport& report) {
    std::vector<Row> rows{{0, 0, 0, 0.0, report.baseline}};
    for (const auto& r : report.rounds) {
        rows.push_back({r.round, r.annotated.size(), r.cumulative_count, r.mean_time_min, r.dice});
    }
    return rows;
}

} // namespace

std::string emit_report(const RunReport& report, ReportFormat format) {
    std::string out;
    switch (format) {
    case ReportFormat::json: return to_json(report).dump(2) + "\n";
    case ReportFormat::csv:
        out = "round,n,cumulative_n,mean_time_min,dice_class1,dice_class2,mean_dice\n";
        for (const auto& r : table_rows(report)) {
            const json d = to_json(r.dice);
            out += fmt::format("{},{},{},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.round, r.n, r.cumulative,
                               round4(r.mean_time), d["per_class"][0].get<double>(),
                               d["per_class"][1].get<double>(), d["mean"].get<double>());
        }
        return out;
    case ReportFormat::md:
        out = "| round | n | cumulative n | mean time (min) | Dice class 1 | Dice class 2 | mean Dice |\n"
              "|---:|---:|---:|---:|---:|---:|---:|\n";
        for (const auto& r : table_rows(report)) {
            const json d = to_json(r.dice);
            out += fmt::format("| {} | {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", r.round, r.n, r.cumulative,
                               round4(r.mean_time), d["per_class"][0].get<double>(),
                               d["per_class"][1].get<double>(), d["mean"].get<double>());
        }
        out += fmt::format("\nTotal annotation time: {:.4f} min. Dice gain: {:.4f}.\n",
                           round4(report.total_annotation_min), to_json(report).at("totals").at("dice_gain").get<double>());
        if (report.note) out += "\nNote: " + *report.note + "\n";
        return out;
    }
    throw Error(ErrorCode::configuration, "unknown report format");
}

void write_report_files(const std::filesystem::path& dir, const RunReport& report) {
    std::filesystem::create_directories(dir);
    io::write_text(dir / "report.json", emit_report(report, ReportFormat::json));
    io::write_text(dir / "report.md", emit_report(report, ReportFormat::md));
    io::write_text(dir / "rounds.csv", emit_report(report, ReportFormat::csv));
    json rounds = json::array();
    for (const auto& r : report.rounds) rounds.push_back(r.wall_clock_s);
    io::write_text(dir / "timings.json",
                   json{{"igniter_s", report.igniter_wall_clock_s}, {"rounds_s", rounds}}.dump(2) + "\n");
}

RunReport read_report(const std::filesystem::path& run_dir) {
    const auto path = run_dir / "report.json";
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::not_found, "no report.json in " + run_dir.string());
    const json j = json::parse(io::read_text(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::malformed_stream, path.string() + " is not valid JSON");
    RunReport r = report_from_json(j);
    const auto timings = run_dir / "timings.json";
    if (std::filesystem::exists(timings)) {
        const json t = json::parse(io::read_text(timings), nullptr, false);
        if (t.is_object()) {
            r.igniter_wall_clock_s = t.value("igniter_s", 0.0);
            const auto rs = t.value("rounds_s", json::array());
            for (std::size_t i = 0; i < rs.size() && i < r.rounds.size(); ++i) r.rounds[i].wall_clock_s = rs[i].get<double>();
        }
    }
    return r;
}

} // namespace hitl::loop
