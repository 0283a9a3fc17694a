#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fieldcomp/config.hpp"
#include "fieldcomp/errors.hpp"
#include "fieldcomp/io.hpp"
#include "fieldcomp/rng.hpp"
#include "fieldcomp/simulator.hpp"

using namespace fieldcomp;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string temp_dir() {
    static std::string dir = [] {
        std::filesystem::path p =
            std::filesystem::temp_directory_path() / "fieldcomp_io_test";
        std::filesystem::create_directories(p);
        return p.string();
    }();
    return dir;
}

bool same_bits(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

TEST_CASE("format_double and parse_double round-trip bitwise") {
    for (double v : {0.1, 1.0 / 3.0, 1e300, 5e-324, -2.5e-17, 12345.0, 0.0, -0.0,
                     6.02214076e23, -1.0}) {
        std::string s = format_double(v);
        REQUIRE(same_bits(parse_double(s, "test"), v));
    }
    REQUIRE(format_double(3.0) == "3");
    REQUIRE(format_double(0.1) == "0.1");
}

TEST_CASE("parse_double rejects malformed numbers") {
    REQUIRE_THROWS_AS(parse_double("abc", "ctx"), ParseError);
    REQUIRE_THROWS_AS(parse_double("1.2x", "ctx"), ParseError);
    REQUIRE_THROWS_AS(parse_double("", "ctx"), ParseError);
    REQUIRE_THROWS_WITH(parse_double("nope", "somewhere:3"), ContainsSubstring("somewhere:3"));
}

TEST_CASE("run CSV serialization round-trips byte for byte") {
    ScenarioConfig cfg;
    TrapScenario sc = sample_scenario(cfg, 31);
    CompensationRun run = generate_compensation_run(sc, 4, 32);

    std::string body = run_csv_body(run);
    CompensationRun parsed = parse_run_csv(body, "test");
    REQUIRE(parsed.run_id == run.run_id);
    REQUIRE(parsed.points.size() == run.points.size());
    for (std::size_t i = 0; i < run.points.size(); ++i) {
        REQUIRE(parsed.points[i].beam_id == run.points[i].beam_id);
        REQUIRE(same_bits(parsed.points[i].point.x, run.points[i].point.x));
        REQUIRE(same_bits(parsed.points[i].point.y, run.points[i].point.y));
        REQUIRE(same_bits(parsed.points[i].point.z, run.points[i].point.z));
    }
    parsed.run_id = run.run_id;
    REQUIRE(run_csv_body(parsed) == body);
}

TEST_CASE("run files round-trip through disk with their sidecar") {
    ScenarioConfig cfg;
    TrapScenario sc = sample_scenario(cfg, 33);
    CompensationRun run = generate_compensation_run(sc, 5, 34);

    std::string path = temp_dir() + "/roundtrip_run.csv";
    write_run_files(path, run, 34, "deadbeefdeadbeef");
    CompensationRun loaded = read_run_files(path);

    REQUIRE(loaded.run_id == run.run_id);
    REQUIRE(loaded.points.size() == run.points.size());
    REQUIRE(same_bits(loaded.truth.x, run.truth.x));
    REQUIRE(same_bits(loaded.truth.y, run.truth.y));
    REQUIRE(same_bits(loaded.truth.z, run.truth.z));
    REQUIRE(loaded.scenario_summary.noise_sigma == run.scenario_summary.noise_sigma);
    REQUIRE(loaded.scenario_summary.bounds_half == run.scenario_summary.bounds_half);

    std::vector<PlanePoint> points = read_points_csv(path);
    REQUIRE(points.size() == run.points.size());
}

TEST_CASE("run CSV parsing reports malformed input with its location") {
    REQUIRE_THROWS_AS(parse_run_csv("", "f.csv"), ParseError);
    REQUIRE_THROWS_AS(parse_run_csv("x,y\n", "f.csv"), ParseError);
    const std::string header = "run_id,beam_id,px,py,pz\n";
    REQUIRE_THROWS_AS(parse_run_csv(header, "f.csv"), ParseError);  // no data rows
    REQUIRE_THROWS_AS(parse_run_csv(header + "r,1,1,2\n", "f.csv"), ParseError);
    REQUIRE_THROWS_AS(parse_run_csv(header + "r,4,1,2,3\n", "f.csv"), ParseError);
    REQUIRE_THROWS_AS(parse_run_csv(header + "r,1.5,1,2,3\n", "f.csv"), ParseError);
    REQUIRE_THROWS_AS(parse_run_csv(header + "r,1,a,2,3\n", "f.csv"), ParseError);
    REQUIRE_THROWS_AS(parse_run_csv(header + "r,1,1,2,3\ns,2,1,2,3\n", "f.csv"),
                      ParseError);
    REQUIRE_THROWS_WITH(parse_run_csv(header + "r,1,1,2,3\nr,9,1,2,3\n", "f.csv"),
                        ContainsSubstring("f.csv:3"));
}

TEST_CASE("file IO errors carry the offending path") {
    REQUIRE_THROWS_AS(read_text_file(temp_dir() + "/does_not_exist.txt"), IoError);
    REQUIRE_THROWS_WITH(read_text_file(temp_dir() + "/does_not_exist.txt"),
                        ContainsSubstring("does_not_exist.txt"));
    REQUIRE_THROWS_AS(write_text_file(temp_dir() + "/no_such_dir/x.txt", "hi"), IoError);
}

TEST_CASE("offset model JSON round-trips bitwise") {
    ScenarioConfig cfg;
    BenchmarkConfig bench;
    detail::BenchmarkFamily fam = detail::build_benchmark_family(bench, 35);
    OffsetPcaModel model = fit_offset_model(fam.runs, 1);

    std::string path = temp_dir() + "/model_pca.json";
    save_offset_model(path, model);
    LoadedModel loaded = load_model(path);

    REQUIRE(loaded.kind == "pca");
    REQUIRE(loaded.pca.n_components_retained == model.n_components_retained);
    REQUIRE(loaded.pca.run_ids == model.run_ids);
    for (int b = 0; b < 3; ++b) {
        REQUIRE(same_bits(loaded.pca.normals[static_cast<std::size_t>(b)].x,
                          model.normals[static_cast<std::size_t>(b)].x));
        REQUIRE(same_bits(loaded.pca.normals[static_cast<std::size_t>(b)].y,
                          model.normals[static_cast<std::size_t>(b)].y));
        REQUIRE(same_bits(loaded.pca.normals[static_cast<std::size_t>(b)].z,
                          model.normals[static_cast<std::size_t>(b)].z));
    }
    REQUIRE(loaded.pca.offset_pca.mean == model.offset_pca.mean);
    REQUIRE(loaded.pca.offset_pca.components == model.offset_pca.components);
    REQUIRE(loaded.pca.offset_pca.explained_variance == model.offset_pca.explained_variance);
    REQUIRE(loaded.pca.offset_pca.explained_ratio == model.offset_pca.explained_ratio);

    // The reloaded model must predict identically.
    std::vector<PlanePoint> probe;
    for (int b = 1; b <= 3; ++b)
        for (const PlanePoint& p : fam.runs[0].points)
            if (p.beam_id == b) {
                probe.push_back(p);
                break;
            }
    Vec3 a = predict_pca(model, probe);
    Vec3 b = predict_pca(loaded.pca, probe);
    REQUIRE(same_bits(a.x, b.x));
    REQUIRE(same_bits(a.y, b.y));
    REQUIRE(same_bits(a.z, b.z));
}

TEST_CASE("network JSON round-trips to bitwise-identical predictions") {
    TrainingSet ts;
    ts.encoding = kFourPointEncoding;
    Rng rng(36);
    for (int i = 0; i < 10; ++i) {
        Vec3 p = rng.uniform3(-100.0, 100.0);
        ts.examples.push_back({encode_four({1 + i % 3, p}), rng.uniform3(-50.0, 50.0)});
    }
    Hyperparams hyper;
    hyper.epochs = 50;
    TrainResult trained = train(ts, hyper, 37);

    std::string path = temp_dir() + "/model_ann4.json";
    save_mlp_model(path, trained.net,
                   {37, static_cast<int>(trained.loss_history.size()),
                    trained.loss_history.back()});
    LoadedModel loaded = load_model(path);
    REQUIRE(loaded.kind == "ann4");
    REQUIRE(loaded.ann.encoding == kFourPointEncoding);
    REQUIRE(loaded.ann.layer_sizes == trained.net.layer_sizes);
    REQUIRE(loaded.ann.weights == trained.net.weights);
    REQUIRE(loaded.ann.biases == trained.net.biases);

    std::vector<double> probe = encode_four({2, Vec3{17.5, -3.25, 88.0}});
    REQUIRE(forward(loaded.ann, probe) == forward(trained.net, probe));
}

TEST_CASE("planes model file is a bare kind tag") {
    std::string path = temp_dir() + "/model_planes.json";
    save_planes_model(path);
    LoadedModel loaded = load_model(path);
    REQUIRE(loaded.kind == "planes");
}

TEST_CASE("load_model rejects corrupt or foreign files") {
    std::string path = temp_dir() + "/bad_model.json";
    write_text_file(path, "{not json");
    REQUIRE_THROWS_AS(load_model(path), ParseError);
    write_text_file(path, "{\"no_kind\": 1}");
    REQUIRE_THROWS_AS(load_model(path), ParseError);
    write_text_file(path, "{\"kind\": \"warp\"}");
    REQUIRE_THROWS_WITH(load_model(path), ContainsSubstring("warp"));
    REQUIRE_THROWS_AS(load_model(temp_dir() + "/missing_model.json"), IoError);
}

TEST_CASE("scaler JSON rejects non-positive scales") {
    nlohmann::json j{{"mean", {0.0, 0.0}}, {"scale", {1.0, 0.0}}};
    REQUIRE_THROWS_AS(scaler_from_json(j), ValidationError);
}

TEST_CASE("scaling CSV lists one row per benchmark point") {
    ScalingPoint p;
    p.method = "planes";
    p.n_measurements = 24;
    p.amortized_training_measurements = 0;
    p.sigma = 51.5;
    p.containment_68 = 0.65;
    p.n_trials = 100;
    p.seed = 3;
    std::string body = scaling_csv_body({p});
    REQUIRE(body ==
            "method,n_measurements,amortized_training_measurements,sigma,containment_68,"
            "n_trials,seed\nplanes,24,0,51.5,0.65,100,3\n");
}

TEST_CASE("tool config serialization is a fixed point") {
    ToolConfig cfg;
    nlohmann::json j = tool_config_to_json(cfg);
    ToolConfig reparsed = tool_config_from_json(j);
    REQUIRE(tool_config_to_json(reparsed).dump() == j.dump());
}

TEST_CASE("tool config rejects unknown keys at every level") {
    nlohmann::json base = tool_config_to_json(ToolConfig{});

    auto expect_reject = [](nlohmann::json j, const std::string& key) {
        REQUIRE_THROWS_WITH(tool_config_from_json(j), ContainsSubstring(key));
    };

    nlohmann::json j = base;
    j["scenari"] = 1;
    expect_reject(j, "scenari");

    j = base;
    j["scenario"]["noise"] = 1;
    expect_reject(j, "noise");

    j = base;
    j["generate"]["runs"] = 1;
    expect_reject(j, "runs");

    j = base;
    j["pca"]["components"] = 1;
    expect_reject(j, "components");

    j = base;
    j["ann"]["momentum"] = 0.9;
    expect_reject(j, "momentum");

    j = base;
    j["benchmark"]["budget"] = 1;
    expect_reject(j, "budget");

    j = base;
    j["benchmark"]["methods"][0]["extra"] = 1;
    expect_reject(j, "extra");
}

TEST_CASE("points_per_beam accepts a scalar and checks array lengths") {
    nlohmann::json j = tool_config_to_json(ToolConfig{});
    j["generate"]["points_per_beam"] = 5;
    ToolConfig cfg = tool_config_from_json(j);
    REQUIRE(cfg.generate.points_per_beam == std::vector<int>(7, 5));

    j["generate"]["n_runs"] = 4;
    j["generate"]["points_per_beam"] = nlohmann::json::array({4, 4, 3, 3});
    cfg = tool_config_from_json(j);
    REQUIRE(cfg.generate.points_per_beam == std::vector<int>{4, 4, 3, 3});

    j["generate"]["points_per_beam"] = nlohmann::json::array({4, 4, 3});
    REQUIRE_THROWS_AS(tool_config_from_json(j), ConfigError);
}

TEST_CASE("tool config validates value ranges") {
    nlohmann::json base = tool_config_to_json(ToolConfig{});

    nlohmann::json j = base;
    j["pca"]["n_components"] = 0;
    REQUIRE_THROWS_AS(tool_config_from_json(j), ValidationError);
    j["pca"]["n_components"] = 4;
    REQUIRE_THROWS_AS(tool_config_from_json(j), ValidationError);

    j = base;
    j["benchmark"]["n_trials"] = 1;
    REQUIRE_THROWS_AS(tool_config_from_json(j), ValidationError);

    j = base;
    j["benchmark"]["methods"][0]["method"] = "warp";
    REQUIRE_THROWS_WITH(tool_config_from_json(j), ContainsSubstring("warp"));

    j = base;
    j["scenario"]["noise_sigma"] = -1.0;
    REQUIRE_THROWS_AS(tool_config_from_json(j), ValidationError);

    j = base;
    j["ann"]["epochs"] = 0;
    REQUIRE_THROWS_AS(tool_config_from_json(j), ValidationError);

    j = base;
    j["benchmark"]["ann9_epochs"] = 0;
    REQUIRE_THROWS_AS(tool_config_from_json(j), ValidationError);
}

TEST_CASE("parse_tool_config wraps JSON syntax errors") {
    REQUIRE_THROWS_AS(parse_tool_config("{oops", "cfg.json"), ParseError);
    REQUIRE_THROWS_WITH(parse_tool_config("{oops", "cfg.json"), ContainsSubstring("cfg.json"));
    ToolConfig cfg = parse_tool_config(tool_config_to_json(ToolConfig{}).dump(), "cfg.json");
    REQUIRE(cfg.benchmark.n_trials == 500);
}

TEST_CASE("config_hash is stable and input-sensitive") {
    ToolConfig a;
    ToolConfig b;
    REQUIRE(config_hash(a) == config_hash(b));
    REQUIRE(config_hash(a).size() == 16);
    b.benchmark.n_trials = 501;
    REQUIRE(config_hash(a) != config_hash(b));
    ToolConfig c;
    c.scenario.spread = 601.0;
    REQUIRE(config_hash(a) != config_hash(c));
}

TEST_CASE("make_benchmark_config wires the tool config through") {
    ToolConfig cfg;
    cfg.generate.points_per_beam = {5, 5, 5, 4, 4, 4, 4};
    cfg.benchmark.n_trials = 77;
    cfg.pca.n_components = 2;
    BenchmarkConfig bc = make_benchmark_config(cfg);
    REQUIRE(bc.run_schedule == cfg.generate.points_per_beam);
    REQUIRE(bc.n_trials == 77);
    REQUIRE(bc.pca_components == 2);
    REQUIRE(bc.ann9_epochs == 25);
    REQUIRE(bc.ann4_epochs == 120);
}
