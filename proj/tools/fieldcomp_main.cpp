// fieldcomp: synthetic stray-field compensation toolkit.
//
// Subcommands:
//   generate   draw a scenario family and write labelled compensation runs
//   train      fit a model (planes | pca | ann9 | ann4) from run files
//   predict    apply a saved model to a measurement file
//   benchmark  compare methods' accuracy vs measurement budget
//
// Exit codes: 0 success, 2 config/validation error, 3 I/O error,
// 4 numerical failure.

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fieldcomp/fieldcomp.hpp"

namespace fc = fieldcomp;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

void add_common_options(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON configuration file (defaults built in)");
    cmd->add_option("--seed", opts.seed, "Base seed for all random draws")
        ->capture_default_str();
    cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
}

fc::ToolConfig load_tool_config(const std::string& path) {
    if (path.empty()) {
        fc::ToolConfig cfg;
        fc::validate_scenario_config(cfg.scenario);
        return cfg;
    }
    return fc::parse_tool_config(fc::read_text_file(path), path);
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw fc::IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string format_console(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string format_point(fc::Vec3 p) {
    return format_console(p.x) + " " + format_console(p.y) + " " + format_console(p.z);
}

// ---------------------------------------------------------------------------

int cmd_generate(const CommonOpts& opts) {
    fc::ToolConfig cfg = load_tool_config(opts.config_path);
    ensure_out_dir(opts.out_dir);
    std::string hash = fc::config_hash(cfg);

    // Same derivation as the benchmark's family builder, so files written
    // here reproduce the runs a benchmark with this seed trains on.
    std::uint64_t scenario_stream = fc::derive_seed(opts.seed, fc::seed_tag::train_scenario);
    std::uint64_t run_stream = fc::derive_seed(opts.seed, fc::seed_tag::train_run);

    std::size_t total_points = 0;
    for (int i = 0; i < cfg.generate.n_runs; ++i) {
        fc::TrapScenario sc =
            fc::sample_scenario(cfg.scenario, fc::derive_seed(scenario_stream, i));
        fc::CompensationRun run = fc::generate_compensation_run(
            sc, cfg.generate.points_per_beam[i], fc::derive_seed(run_stream, i), nullptr,
            "run-" + std::to_string(i));
        std::string csv_path = (fs::path(opts.out_dir) / ("run_" + std::to_string(i) + ".csv")).string();
        fc::write_run_files(csv_path, run, opts.seed, hash);
        total_points += run.points.size();
        std::cout << run.run_id << ": " << cfg.generate.points_per_beam[i]
                  << " points/beam, truth " << format_point(run.truth) << " -> " << csv_path
                  << "\n";
    }
    std::cout << "wrote " << cfg.generate.n_runs << " runs, " << total_points
              << " points total (seed " << opts.seed << ", config " << hash << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonOpts& opts, const std::string& method,
              const std::vector<std::string>& run_files) {
    fc::ToolConfig cfg = load_tool_config(opts.config_path);
    ensure_out_dir(opts.out_dir);

    std::string model_path = (fs::path(opts.out_dir) / ("model_" + method + ".json")).string();

    if (method == "planes") {
        // The plane model has no trained parameters: prediction fits fresh
        // planes to the measurement file. The model file records the choice.
        fc::save_planes_model(model_path);
        std::cout << "planes model -> " << model_path << "\n";
        return 0;
    }

    if (run_files.empty()) throw fc::InvalidConfig("train needs at least one run file");
    std::vector<fc::CompensationRun> runs;
    for (const std::string& f : run_files) runs.push_back(fc::read_run_files(f));

    if (method == "pca") {
        fc::OffsetPcaModel model = fc::fit_offset_model(runs, cfg.pca.n_components);
        fc::save_offset_model(model_path, model);
        std::cout << "pca model on " << runs.size() << " runs -> " << model_path
                  << "\nexplained_ratio[0] = "
                  << format_console(model.offset_pca.explained_ratio[0]) << "\n";
        return 0;
    }

    if (method == "ann9" || method == "ann4") {
        fc::TrainingSet ts = method == "ann9" ? fc::build_nine_point_training(runs)
                                              : fc::build_four_point_training(runs);
        fc::TrainResult result = fc::train(ts, cfg.ann, opts.seed);
        fc::MlpTrainingMeta meta;
        meta.seed = opts.seed;
        meta.epochs_run = static_cast<int>(result.loss_history.size());
        meta.final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();
        fc::save_mlp_model(model_path, result.net, meta);

        std::string loss_path =
            (fs::path(opts.out_dir) / ("model_" + method + "_loss.csv")).string();
        std::string loss_csv = "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_history.size(); ++e)
            loss_csv += std::to_string(e) + "," + fc::format_double(result.loss_history[e]) + "\n";
        fc::write_text_file(loss_path, loss_csv);

        std::cout << method << " model on " << ts.examples.size() << " examples -> " << model_path
                  << "\nepochs_run = " << meta.epochs_run
                  << ", final_loss = " << format_console(meta.final_loss) << " (history -> "
                  << loss_path << ")\n";
        return 0;
    }

    throw fc::InvalidConfig("unknown training method '" + method + "'");
}

// ---------------------------------------------------------------------------

fc::Vec3 predict_with_planes(const std::vector<fc::PlanePoint>& points) {
    std::array<std::vector<fc::Vec3>, 3> by_beam;
    for (const fc::PlanePoint& p : points) {
        fc::validate_beam_id(p.beam_id);
        by_beam[p.beam_id - 1].push_back(p.point);
    }
    std::array<fc::Plane, 3> planes;
    for (int b = 0; b < 3; ++b) {
        if (by_beam[b].empty())
            throw fc::MissingBeam("no measurements for beam " + std::to_string(b + 1));
        planes[b] = fc::fit_plane(by_beam[b]);
    }
    return fc::intersect_planes(planes[0], planes[1], planes[2]);
}

int cmd_predict(const std::string& model_path, const std::string& input_path) {
    fc::LoadedModel model = fc::load_model(model_path);
    std::vector<fc::PlanePoint> points = fc::read_points_csv(input_path);
    fc::Vec3 p;
    if (model.kind == "planes")
        p = predict_with_planes(points);
    else if (model.kind == "pca")
        p = fc::predict_pca(model.pca, points);
    else
        p = fc::predict_ann(model.ann, points);
    std::cout << format_point(p) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_benchmark(const CommonOpts& opts, int trials_override) {
    fc::ToolConfig cfg = load_tool_config(opts.config_path);
    ensure_out_dir(opts.out_dir);
    fc::BenchmarkConfig bc = fc::make_benchmark_config(cfg);
    if (trials_override > 0) bc.n_trials = trials_override;

    std::vector<fc::ScalingPoint> points = fc::run_scaling_benchmark(bc, opts.seed);

    std::string csv_path = (fs::path(opts.out_dir) / "benchmark.csv").string();
    fc::write_text_file(csv_path, fc::scaling_csv_body(points));

    std::printf("%-8s %14s %10s %12s %14s %8s\n", "method", "n_measurements", "amortized",
                "sigma", "containment_68", "trials");
    for (const fc::ScalingPoint& p : points) {
        std::printf("%-8s %14llu %10llu %12s %14s %8d\n", p.method.c_str(),
                    static_cast<unsigned long long>(p.n_measurements),
                    static_cast<unsigned long long>(p.amortized_training_measurements),
                    format_console(p.sigma).c_str(), format_console(p.containment_68).c_str(),
                    p.n_trials);
    }
    std::cout << "benchmark CSV -> " << csv_path << " (seed " << opts.seed << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic stray-field compensation toolkit"};
    app.require_subcommand(1);

    CommonOpts gen_opts;
    CLI::App* gen = app.add_subcommand(
        "generate", "Draw a scenario family and write labelled compensation-run CSVs");
    add_common_options(gen, gen_opts);

    CommonOpts train_opts;
    std::string train_method;
    std::vector<std::string> train_runs;
    CLI::App* train = app.add_subcommand("train", "Fit a model from compensation-run CSVs");
    add_common_options(train, train_opts);
    train->add_option("--method", train_method, "Model family: planes | pca | ann9 | ann4")
        ->required()
        ->check(CLI::IsMember({"planes", "pca", "ann9", "ann4"}));
    train->add_option("runs", train_runs, "Run CSV files (each with its .meta.json sidecar)");

    std::string predict_model, predict_input;
    CLI::App* predict =
        app.add_subcommand("predict", "Apply a saved model to a measurement CSV");
    predict->add_option("--model", predict_model, "Model JSON file")->required();
    predict->add_option("--input", predict_input, "Measurement CSV (run_id,beam_id,px,py,pz)")
        ->required();

    CommonOpts bench_opts;
    int bench_trials = 0;
    CLI::App* bench = app.add_subcommand(
        "benchmark", "Compare method accuracy vs measurement budget on a scenario family");
    add_common_options(bench, bench_opts);
    bench->add_option("--trials", bench_trials, "Override the configured Monte Carlo trial count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_opts);
        if (train->parsed()) return cmd_train(train_opts, train_method, train_runs);
        if (predict->parsed()) return cmd_predict(predict_model, predict_input);
        if (bench->parsed()) return cmd_benchmark(bench_opts, bench_trials);
    } catch (const fc::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fc::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const fc::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
