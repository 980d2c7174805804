// aeromap command line: simulate, build-vocab, run, evaluate, plot-report.
#include "aeromap/io.hpp"
#include "aeromap/pipeline.hpp"
#include "plot_report.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace aeromap;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfigError = 2, kDatasetError = 3, kReconstructionError = 4 };

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

PipelineConfig pipeline_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                               const std::string& mode, const std::string& output_dir) {
    PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_pipeline_config(path);
    if (seed) {
        const std::string vocab_path = cfg.vocabulary.path;
        cfg.apply_seed(*seed);
        cfg.vocabulary.path = vocab_path;
    }
    if (!mode.empty()) cfg.mode = execution_mode_from_string(mode);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.validate();
    return cfg;
}

int cmd_simulate(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out_dir) {
    ScenarioConfig sc = config.empty() ? ScenarioConfig{} : load_scenario_config(config);
    if (!config.empty()) load_pipeline_config(config).validate();  // the rest of a shared file must be valid too
    if (seed) sc.seed = *seed;
    sc.validate();
    fs::create_directories(out_dir);
    SimulatedFrameSource source(sc);
    const std::size_t obs = write_dataset(join(out_dir, "dataset.bin"), source, true);
    write_ground_truth(join(out_dir, "truth.bin"), source.ground_truth());
    nlohmann::json summary{{"scenario", to_json(sc)},
                           {"frames", source.size()},
                           {"landmarks", source.scene().positions.size()},
                           {"observations", obs},
                           {"observations_per_frame", double(obs) / source.size()}};
    write_json(join(out_dir, "scenario.json"), summary);
    std::cout << "simulated " << source.size() << " frames, " << source.scene().positions.size() << " landmarks, "
              << obs << " observations -> " << out_dir << '\n';
    return kOk;
}

int cmd_build_vocab(const std::string& config, std::optional<std::uint64_t> seed,
                    const std::vector<std::string>& datasets, const std::string& output, std::optional<int> k,
                    std::optional<int> L) {
    PipelineConfig cfg = pipeline_config(config, seed, "", "");
    if (k) cfg.vocabulary.k = *k;
    if (L) cfg.vocabulary.L = *L;
    cfg.validate();
    // Several datasets are concatenated into one training source.
    std::vector<Frame> frames;
    std::optional<CameraIntrinsics> K;
    for (const auto& path : datasets) {
        FileFrameSource src(path);
        if (!K) K = src.intrinsics();
        for (std::size_t i = 0; i < src.size(); ++i) {
            Frame f = src.frame(i);
            f.id = static_cast<std::uint32_t>(frames.size());
            frames.push_back(std::move(f));
        }
    }
    if (frames.empty()) throw DatasetError("build-vocab: no frames in the given datasets");
    InMemoryFrameSource all(*K, std::move(frames));
    const auto tree = train_vocabulary(all, cfg.vocabulary);
    tree->save(output);
    std::cout << "vocabulary k=" << tree->branching() << " L=" << tree->depth() << " words=" << tree->num_words()
              << " -> " << output << '\n';
    return kOk;
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& mode,
            const std::string& out_dir, const std::string& dataset, const std::string& truth_path,
            const std::string& vocab_path) {
    PipelineConfig cfg = pipeline_config(config, seed, mode, out_dir);
    if (!vocab_path.empty()) cfg.vocabulary.path = vocab_path;
    FileFrameSource source(dataset);
    if (source.size() == 0) throw DatasetError(dataset + ": the dataset has no frames");
    std::optional<GroundTruth> truth;
    if (!truth_path.empty()) truth = read_ground_truth(truth_path);

    std::shared_ptr<const VocabularyTree> tree;
    if (cfg.loop_closure) {
        tree = cfg.vocabulary.path.empty()
                   ? std::shared_ptr<const VocabularyTree>(train_vocabulary(source, cfg.vocabulary))
                   : std::make_shared<const VocabularyTree>(VocabularyTree::load(cfg.vocabulary.path));
    }
    fs::create_directories(cfg.output_dir);
    EventLog builder_log(join(cfg.output_dir, "events_builder.jsonl"), "builder");
    EventLog alignment_log(join(cfg.output_dir, "events_alignment.jsonl"), "alignment");
    const RunResult run = run_pipeline(
        source, cfg, tree, [&](const nlohmann::json& e) { builder_log.write(e); },
        [&](const nlohmann::json& e) { alignment_log.write(e); });
    const nlohmann::json report = write_run_outputs(cfg.output_dir, run, cfg, source, truth);
    const auto& c = report["counts"];
    std::cout << "submaps " << c["submaps_completed"] << "/" << c["submaps_built"] << " completed, "
              << c["map_landmarks"] << " landmarks, " << c["trajectory_frames"] << " frames, "
              << report["alignment"]["loop_links"] << " loop links, " << run.total_seconds << " s\n";
    if (report.contains("evaluation") && report["evaluation"].contains("landmark_rmse")) {
        std::cout << "landmark RMSE " << report["evaluation"]["landmark_rmse"] << '\n';
    }
    return kOk;
}

int cmd_evaluate(const std::string& map_path, const std::string& trajectory_path, const std::string& truth_path,
                 const std::string& output) {
    const PlyCloud cloud = read_ply(map_path);
    const GroundTruth truth = read_ground_truth(truth_path);
    std::vector<EstimatedPose> poses;
    if (!trajectory_path.empty()) {
        for (const auto& e : read_trajectory(trajectory_path)) poses.push_back({e.frame_id, e.pose});
    }
    MapEvaluation ev;
    try {
        ev = evaluate_map(cloud.points, cloud.truth_ids, poses, truth);
    } catch (const PreconditionError& e) {
        throw DatasetError(e.what());
    }
    const nlohmann::json j = to_json(ev);
    if (!output.empty()) write_json(output, j);
    std::cout << j.dump(2) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Aerial submap reconstruction and alignment"};
    app.require_subcommand(1);

    std::string config, mode, out_dir;
    std::optional<std::uint64_t> seed;
    const auto common = [&](CLI::App* sub, bool with_mode) {
        sub->add_option("--config", config, "YAML configuration file");
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--output-dir", out_dir, "output directory");
        if (with_mode) {
            sub->add_option("--mode", mode, "execution mode")->check(CLI::IsMember({"two-worker", "single"}));
        }
    };

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset and its ground truth");
    common(simulate, false);

    auto* vocab = app.add_subcommand("build-vocab", "train a vocabulary tree from dataset descriptors");
    std::vector<std::string> vocab_datasets;
    std::string vocab_out = "vocabulary.bin";
    std::optional<int> vocab_k, vocab_L;
    common(vocab, false);
    vocab->add_option("datasets", vocab_datasets, "dataset files")->required()->check(CLI::ExistingFile);
    vocab->add_option("-o,--output", vocab_out, "vocabulary file");
    vocab->add_option("-k", vocab_k, "branching factor");
    vocab->add_option("-L", vocab_L, "depth");

    auto* run = app.add_subcommand("run", "reconstruct a dataset");
    std::string dataset, truth, vocab_path;
    common(run, true);
    run->add_option("--dataset", dataset, "dataset file")->required();
    run->add_option("--truth", truth, "ground truth file; adds an evaluation to the report");
    run->add_option("--vocabulary", vocab_path, "vocabulary file (default: train on the dataset)");

    auto* evaluate = app.add_subcommand("evaluate", "compare a map against ground truth");
    std::string map_path, traj_path, truth_path, metrics_out;
    evaluate->add_option("--map", map_path, "map PLY")->required();
    evaluate->add_option("--trajectory", traj_path, "trajectory file");
    evaluate->add_option("--truth", truth_path, "ground truth file")->required();
    evaluate->add_option("-o,--output", metrics_out, "metrics JSON file");

    auto* plot = app.add_subcommand("plot-report", "write CSV tables and SVG charts for a run");
    std::string run_dir;
    plot->add_option("run_dir", run_dir, "run output directory")->required();
    plot->add_option("--output-dir", out_dir, "chart directory (default: <run_dir>/plots)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*simulate) return cmd_simulate(config, seed, out_dir.empty() ? "data" : out_dir);
        if (*vocab) return cmd_build_vocab(config, seed, vocab_datasets, vocab_out, vocab_k, vocab_L);
        if (*run) return cmd_run(config, seed, mode, out_dir, dataset, truth, vocab_path);
        if (*evaluate) return cmd_evaluate(map_path, traj_path, truth_path, metrics_out);
        if (*plot) {
            const int n = tools::plot_report(run_dir, out_dir.empty() ? join(run_dir, "plots") : out_dir);
            std::cout << n << " charts written\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << '\n';
        return kDatasetError;
    } catch (const ReconstructionError& e) {
        std::cerr << "reconstruction failed: " << e.what() << '\n';
        return kReconstructionError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
