#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "fieldcomp/ann.hpp"
#include "fieldcomp/errors.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/metrics.hpp"
#include "fieldcomp/pca.hpp"
#include "fieldcomp/simulator.hpp"

namespace fieldcomp {

// Shortest decimal representation that round-trips the exact double, so
// serialized files are byte-stable and lossless.
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError("invalid number '" + s + "' in " + context);
    return v;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed while reading '" + path + "'");
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed while writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Compensation-run files: CSV body plus a JSON metadata sidecar holding the
// label and provenance (truth, noise_sigma, seed, config hash).

inline std::string run_csv_body(const CompensationRun& run) {
    std::ostringstream out;
    out << "run_id,beam_id,px,py,pz\n";
    for (const PlanePoint& p : run.points) {
        out << run.run_id << ',' << p.beam_id << ',' << format_double(p.point.x) << ','
            << format_double(p.point.y) << ',' << format_double(p.point.z) << '\n';
    }
    return out.str();
}

inline std::string run_meta_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

inline void write_run_files(const std::string& csv_path, const CompensationRun& run,
                            std::uint64_t seed, const std::string& config_hash) {
    write_text_file(csv_path, run_csv_body(run));
    nlohmann::json meta{
        {"truth", {run.truth.x, run.truth.y, run.truth.z}},
        {"noise_sigma", run.scenario_summary.noise_sigma},
        {"bounds_half", run.scenario_summary.bounds_half},
        {"seed", seed},
        {"config_hash", config_hash},
    };
    write_text_file(run_meta_path(csv_path), meta.dump(2) + "\n");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

// Parses a run CSV body. Points and per-row run ids are returned; the label
// comes from the sidecar.
inline CompensationRun parse_run_csv(const std::string& body, const std::string& context) {
    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("empty run file in " + context);
    {
        auto header = detail::split_csv_line(line);
        if (header != std::vector<std::string>{"run_id", "beam_id", "px", "py", "pz"})
            throw ParseError("bad run CSV header in " + context);
    }
    CompensationRun run;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 5)
            throw ParseError("expected 5 fields at " + context + ":" + std::to_string(row));
        std::string where = context + ":" + std::to_string(row);
        if (run.points.empty()) {
            run.run_id = fields[0];
        } else if (fields[0] != run.run_id) {
            throw ParseError("inconsistent run_id at " + where);
        }
        double beam_raw = parse_double(fields[1], where);
        int beam = static_cast<int>(beam_raw);
        if (beam_raw != beam || beam < 1 || beam > 3)
            throw ParseError("beam_id must be 1, 2 or 3 at " + where);
        Vec3 p{parse_double(fields[2], where), parse_double(fields[3], where),
               parse_double(fields[4], where)};
        run.points.push_back({beam, p});
    }
    if (run.points.empty()) throw ParseError("run file has no data rows in " + context);
    return run;
}

// Loads a labelled run (CSV plus sidecar) for training.
inline CompensationRun read_run_files(const std::string& csv_path) {
    CompensationRun run = parse_run_csv(read_text_file(csv_path), csv_path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text_file(run_meta_path(csv_path)));
        auto truth = meta.at("truth");
        run.truth = {truth.at(0).get<double>(), truth.at(1).get<double>(),
                     truth.at(2).get<double>()};
        run.scenario_summary.noise_sigma = meta.at("noise_sigma").get<double>();
        run.scenario_summary.bounds_half = meta.at("bounds_half").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad metadata sidecar " + run_meta_path(csv_path) + ": " + e.what());
    }
    return run;
}

// Loads measurement points only (no sidecar required); for cmd_predict.
inline std::vector<PlanePoint> read_points_csv(const std::string& csv_path) {
    return parse_run_csv(read_text_file(csv_path), csv_path).points;
}

// ---------------------------------------------------------------------------
// Model files: a JSON object with a "kind" tag.

struct LoadedModel {
    std::string kind;  // planes | pca | ann9 | ann4
    OffsetPcaModel pca;
    MlpNetwork ann;
};

inline nlohmann::json scaler_to_json(const Scaler& s) {
    return {{"mean", s.mean}, {"scale", s.scale}};
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
    Scaler s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    if (s.mean.size() != s.scale.size())
        throw ParseError("scaler mean/scale lengths differ");
    for (double v : s.scale)
        if (!(v > 0)) throw ParseError("scaler scales must be positive");
    return s;
}

inline void save_planes_model(const std::string& path) {
    nlohmann::json j{{"kind", "planes"}};
    write_text_file(path, j.dump(2) + "\n");
}

inline void save_offset_model(const std::string& path, const OffsetPcaModel& model) {
    nlohmann::json j;
    j["kind"] = "pca";
    j["normals"] = nlohmann::json::array();
    for (Vec3 n : model.normals) j["normals"].push_back({n.x, n.y, n.z});
    j["offset_pca"] = {{"mean", model.offset_pca.mean},
                       {"components", model.offset_pca.components},
                       {"explained_variance", model.offset_pca.explained_variance},
                       {"explained_ratio", model.offset_pca.explained_ratio}};
    j["n_components_retained"] = model.n_components_retained;
    j["run_ids"] = model.run_ids;
    write_text_file(path, j.dump(2) + "\n");
}

struct MlpTrainingMeta {
    std::uint64_t seed = 0;
    int epochs_run = 0;
    double final_loss = 0.0;
};

inline void save_mlp_model(const std::string& path, const MlpNetwork& net,
                           const MlpTrainingMeta& meta) {
    std::string kind;
    if (net.encoding == kNinePointEncoding)
        kind = "ann9";
    else if (net.encoding == kFourPointEncoding)
        kind = "ann4";
    else
        throw EncodingMismatch("only nine_point/four_point networks can be persisted");
    nlohmann::json j;
    j["kind"] = kind;
    j["encoding"] = net.encoding;
    j["layer_sizes"] = net.layer_sizes;
    j["weights"] = net.weights;
    j["biases"] = net.biases;
    j["input_scaler"] = scaler_to_json(net.input_scaler);
    j["output_scaler"] = scaler_to_json(net.output_scaler);
    j["training"] = {{"seed", meta.seed},
                     {"epochs_run", meta.epochs_run},
                     {"final_loss", meta.final_loss}};
    write_text_file(path, j.dump(2) + "\n");
}

inline LoadedModel load_model(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad model file " + path + ": " + e.what());
    }
    LoadedModel model;
    try {
        model.kind = j.at("kind").get<std::string>();
        if (model.kind == "planes") {
            // No parameters: predictions fit planes to the input points.
        } else if (model.kind == "pca") {
            auto normals = j.at("normals");
            if (normals.size() != 3) throw ParseError("pca model needs 3 normals");
            for (int b = 0; b < 3; ++b) {
                model.pca.normals[b] = {normals.at(b).at(0).get<double>(),
                                        normals.at(b).at(1).get<double>(),
                                        normals.at(b).at(2).get<double>()};
            }
            const auto& pj = j.at("offset_pca");
            model.pca.offset_pca.mean = pj.at("mean").get<std::vector<double>>();
            model.pca.offset_pca.components =
                pj.at("components").get<std::vector<std::vector<double>>>();
            model.pca.offset_pca.explained_variance =
                pj.at("explained_variance").get<std::vector<double>>();
            model.pca.offset_pca.explained_ratio =
                pj.at("explained_ratio").get<std::vector<double>>();
            model.pca.n_components_retained = j.at("n_components_retained").get<int>();
            if (j.contains("run_ids"))
                model.pca.run_ids = j.at("run_ids").get<std::vector<std::string>>();
            if (model.pca.n_components_retained < 1 || model.pca.n_components_retained > 3)
                throw ParseError("pca model retained components out of range");
        } else if (model.kind == "ann9" || model.kind == "ann4") {
            model.ann.encoding = j.at("encoding").get<std::string>();
            model.ann.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
            model.ann.weights = j.at("weights").get<std::vector<std::vector<double>>>();
            model.ann.biases = j.at("biases").get<std::vector<std::vector<double>>>();
            model.ann.input_scaler = scaler_from_json(j.at("input_scaler"));
            model.ann.output_scaler = scaler_from_json(j.at("output_scaler"));
            detail::check_network_shapes(model.ann);
        } else {
            throw ParseError("unknown model kind '" + model.kind + "' in " + path);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad model file " + path + ": " + e.what());
    }
    return model;
}

// ---------------------------------------------------------------------------
// Benchmark CSV.

inline std::string scaling_csv_body(const std::vector<ScalingPoint>& points) {
    std::ostringstream out;
    out << "method,n_measurements,amortized_training_measurements,sigma,containment_68,"
           "n_trials,seed\n";
    for (const ScalingPoint& p : points) {
        out << p.method << ',' << p.n_measurements << ',' << p.amortized_training_measurements
            << ',' << format_double(p.sigma) << ',' << format_double(p.containment_68) << ','
            << p.n_trials << ',' << p.seed << '\n';
    }
    return out.str();
}

}  // namespace fieldcomp
