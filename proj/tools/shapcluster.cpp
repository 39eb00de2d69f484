#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "shapcluster/dataset.hpp"
#include "shapcluster/embed.hpp"
#include "shapcluster/errors.hpp"
#include "shapcluster/gbt.hpp"
#include "shapcluster/hdbscan.hpp"
#include "shapcluster/pipeline.hpp"
#include "shapcluster/shap.hpp"
#include "shapcluster/simgen.hpp"
#include "shapcluster/svg.hpp"
#include "shapcluster/waterfall.hpp"

namespace fs = std::filesystem;
using namespace shapcluster;

namespace {

struct CommonFlags {
    std::uint64_t seed = 0;
    int threads = 1;
};

void add_gbt_flags(CLI::App* cmd, GbtConfig& cfg) {
    cmd->add_option("--rounds", cfg.rounds, "Boosting rounds");
    cmd->add_option("--eta", cfg.eta, "Learning rate");
    cmd->add_option("--max-depth", cfg.max_depth, "Tree depth limit");
    cmd->add_option("--lambda", cfg.lambda, "L2 regularization");
    cmd->add_option("--gamma", cfg.gamma, "Split gain penalty");
    cmd->add_option("--min-child-weight", cfg.min_child_weight, "Minimum hessian per child");
}

int run(int argc, char** argv) {
    CLI::App app{"SHAP-based supervised clustering toolkit"};
    app.require_subcommand(1);

    // ---- simulate ----------------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "Generate the simulated experiment");
    std::size_t sim_n = 1500;
    std::uint64_t sim_seed = 0;
    std::string sim_out = "out";
    sim_cmd->add_option("--n", sim_n, "Sample count");
    sim_cmd->add_option("--seed", sim_seed, "Master seed");
    sim_cmd->add_option("--out", sim_out, "Output directory");

    // ---- train --------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Fit the boosted-tree model");
    std::string train_data, train_label = "label", model_out = "model.json", metrics_out;
    double train_test_fraction = 0.3;
    bool train_scale = false;
    GbtConfig train_cfg;
    std::uint64_t train_seed = 0;
    train_cmd->add_option("--data", train_data, "Input CSV")->required();
    train_cmd->add_option("--label", train_label, "Label column");
    train_cmd->add_flag("--scale", train_scale, "Min-max scale features");
    train_cmd->add_option("--test-fraction", train_test_fraction,
                          "Held-out fraction (0 trains on everything)");
    add_gbt_flags(train_cmd, train_cfg);
    train_cmd->add_option("--seed", train_seed, "Master seed");
    train_cmd->add_option("--model-out", model_out, "Model JSON path");
    train_cmd->add_option("--metrics-out", metrics_out, "Metrics text path");

    // ---- explain --------------------------------------------------------------
    auto* explain_cmd = app.add_subcommand("explain", "Out-of-fold SHAP tensor");
    std::string ex_data, ex_label = "label", ex_out = "out";
    bool ex_scale = false;
    GbtConfig ex_cfg;
    CvShapParams ex_params;
    std::uint64_t ex_seed = 0;
    explain_cmd->add_option("--data", ex_data, "Input CSV")->required();
    explain_cmd->add_option("--label", ex_label, "Label column");
    explain_cmd->add_flag("--scale", ex_scale, "Min-max scale features");
    explain_cmd->add_option("--folds", ex_params.folds, "Fold count");
    explain_cmd->add_option("--repeats", ex_params.repeats, "Protocol repeats");
    explain_cmd->add_option("--background", ex_params.background_cap, "Background row cap");
    add_gbt_flags(explain_cmd, ex_cfg);
    explain_cmd->add_option("--seed", ex_seed, "Master seed");
    explain_cmd->add_option("--threads", ex_params.threads, "Worker cap");
    explain_cmd->add_option("--out", ex_out, "Output directory");

    // ---- embed ------------------------------------------------------------------
    auto* embed_cmd = app.add_subcommand("embed", "2D embedding of a numeric CSV");
    std::string em_in, em_out = "coords.csv", em_method = "neighbor";
    NeighborEmbedConfig em_cfg;
    std::uint64_t em_seed = 0;
    embed_cmd->add_option("--input", em_in, "Numeric CSV")->required();
    embed_cmd->add_option("--method", em_method, "pca | neighbor");
    embed_cmd->add_option("--neighbors", em_cfg.neighbors, "k-NN size");
    embed_cmd->add_option("--min-dist", em_cfg.min_dist, "Minimum embedded distance");
    embed_cmd->add_option("--epochs", em_cfg.epochs, "SGD epochs");
    embed_cmd->add_option("--seed", em_seed, "Master seed");
    embed_cmd->add_option("--threads", em_cfg.threads, "Worker cap (k-NN pass)");
    embed_cmd->add_option("--out", em_out, "Coordinates CSV");

    // ---- cluster ------------------------------------------------------------------
    auto* cluster_cmd = app.add_subcommand("cluster", "HDBSCAN density clustering");
    std::string cl_in, cl_out = "clusters.csv", cl_selection = "eom", cl_on = "shap";
    HdbscanParams cl_params;
    cluster_cmd->add_option("--input", cl_in, "Matrix CSV, or pipeline output directory")
        ->required();
    cluster_cmd->add_option("--min-cluster-size", cl_params.min_cluster_size,
                            "Smallest cluster size");
    cluster_cmd->add_option("--min-samples", cl_params.min_samples, "Core distance rank");
    cluster_cmd->add_option("--selection", cl_selection, "eom | leaf");
    cluster_cmd->add_option("--cluster-on", cl_on,
                            "shap | embedding (when --input is a directory)");
    cluster_cmd->add_option("--threads", cl_params.threads, "Worker cap");
    cluster_cmd->add_option("--out", cl_out, "Labels CSV");

    // ---- waterfall -------------------------------------------------------------------
    auto* wf_cmd = app.add_subcommand("waterfall", "Cluster-mean waterfall paths");
    std::string wf_shap = "shap.csv", wf_base = "base_values.csv", wf_clusters = "clusters.csv";
    std::string wf_projection = "pca", wf_out = "out";
    std::size_t wf_top_m = 8;
    wf_cmd->add_option("--shap", wf_shap, "Flattened SHAP CSV");
    wf_cmd->add_option("--base", wf_base, "Base values CSV");
    wf_cmd->add_option("--clusters", wf_clusters, "Cluster labels CSV");
    wf_cmd->add_option("--projection", wf_projection, "pca | pair:A,B");
    wf_cmd->add_option("--top-m", wf_top_m, "Segments before aggregation");
    wf_cmd->add_option("--out", wf_out, "Output directory");

    // ---- report ---------------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "Re-render a pipeline output directory");
    std::string report_dir;
    report_cmd->add_option("--dir", report_dir, "Pipeline output directory")->required();

    // ---- pipeline ----------------------------------------------------------------------
    auto* pipe_cmd = app.add_subcommand("pipeline", "Run the full workflow");
    PipelineConfig pcfg;
    std::string pipe_config_file, pipe_preset, pipe_data, pipe_label;
    bool pipe_simulate = false, pipe_scale = false;
    std::vector<std::string> pipe_sets;
    std::uint64_t pipe_seed = 0;
    std::string pipe_out;
    int pipe_threads = 1;
    pipe_cmd->add_option("--config", pipe_config_file, "key=value config file");
    pipe_cmd->add_option("--preset", pipe_preset, "Named preset (sim-paper)");
    pipe_cmd->add_flag("--simulate", pipe_simulate, "Use the simulated experiment");
    pipe_cmd->add_option("--data", pipe_data, "Input CSV (sets data.source=csv)");
    pipe_cmd->add_option("--label", pipe_label, "Label column");
    pipe_cmd->add_flag("--scale", pipe_scale, "Min-max scale ingested features");
    pipe_cmd->add_option("--seed", pipe_seed, "Master seed");
    pipe_cmd->add_option("--threads", pipe_threads, "Worker cap");
    pipe_cmd->add_option("--out", pipe_out, "Output directory");
    pipe_cmd->add_option("--set", pipe_sets, "Override any config key (key=value), repeatable");

    CLI11_PARSE(app, argc, argv);

    if (sim_cmd->parsed()) {
        Simulation sim = simulate(sim_n, sim_seed);
        fs::create_directories(sim_out);
        save_csv(sim.data, fs::path(sim_out) / "data.csv");
        Matrix beta(2, 8);
        for (std::size_t j = 0; j < 8; ++j) {
            beta(0, j) = sim.model.beta1[j];
            beta(1, j) = sim.model.beta2[j];
        }
        std::vector<std::string> names;
        for (int j = 2; j < 10; ++j) names.push_back("Feature " + std::to_string(j));
        save_matrix_csv(beta, names, fs::path(sim_out) / "beta.csv");
        std::cout << "wrote " << sim_out << "/data.csv (" << sim.data.n() << " rows)\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        Dataset data = load_csv(train_data, train_label);
        if (train_scale) data = minmax_scale(data);
        const std::size_t n = data.n();
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        RngStream split_rng(train_seed, streams::train_split);
        split_rng.shuffle(std::span<int>(order));
        const std::size_t test_count = static_cast<std::size_t>(
            std::lround(train_test_fraction * static_cast<double>(n)));

        Dataset train_set;
        train_set.feature_names = data.feature_names;
        train_set.class_names = data.class_names;
        train_set.features = Matrix(n - test_count, data.p());
        std::vector<int> train_labels(n - test_count);
        for (std::size_t i = 0; i < n - test_count; ++i) {
            const int row = order[test_count + i];
            std::copy(data.features.row(row).begin(), data.features.row(row).end(),
                      train_set.features.row(i).begin());
            train_labels[i] = (*data.labels)[row];
        }
        train_set.labels = std::move(train_labels);

        const Ensemble model = fit(train_set, train_cfg);
        save_model(model, model_out);
        std::cout << "wrote " << model_out << "\n";
        if (test_count > 0) {
            std::vector<int> y_true, y_pred;
            for (std::size_t i = 0; i < test_count; ++i) {
                y_true.push_back((*data.labels)[order[i]]);
                y_pred.push_back(model.predict_class(data.features.row(order[i])));
            }
            const ClassificationReport report =
                classification_report(y_true, y_pred, data.k());
            const std::string table = report.to_table(data.class_names);
            std::cout << table;
            if (!metrics_out.empty()) {
                std::ofstream out(metrics_out);
                out << table;
            }
        }
        return 0;
    }

    if (explain_cmd->parsed()) {
        Dataset data = load_csv(ex_data, ex_label);
        if (ex_scale) data = minmax_scale(data);
        const CvShapResult result =
            cv_shap(data, ex_cfg, ex_params, RngStream(ex_seed, streams::shap));
        fs::create_directories(ex_out);
        save_matrix_csv(result.tensor.flatten(), result.tensor.flat_column_names(),
                        fs::path(ex_out) / "shap.csv");
        Matrix base(1, data.k());
        std::copy(result.tensor.base_values.begin(), result.tensor.base_values.end(),
                  base.row(0).begin());
        save_matrix_csv(base, data.class_names, fs::path(ex_out) / "base_values.csv");
        double worst = 0.0;
        for (double r : result.run_additivity_residual) worst = std::max(worst, r);
        std::cout << "wrote " << ex_out << "/shap.csv; max additivity residual " << worst
                  << "\n";
        return 0;
    }

    if (embed_cmd->parsed()) {
        const Matrix m = load_matrix_csv(em_in);
        Matrix coords;
        if (em_method == "pca") {
            coords = pca_embed(m).coords;
        } else if (em_method == "neighbor") {
            coords =
                neighbor_embed(m, em_cfg, RngStream(em_seed, streams::embed_shap)).coords;
        } else {
            throw config_error("embed: method must be pca or neighbor");
        }
        save_matrix_csv(coords, {"x", "y"}, em_out);
        std::cout << "wrote " << em_out << "\n";
        return 0;
    }

    if (cluster_cmd->parsed()) {
        if (cl_selection == "eom")
            cl_params.selection = Selection::eom;
        else if (cl_selection == "leaf")
            cl_params.selection = Selection::leaf;
        else
            throw config_error("cluster: selection must be eom or leaf");
        fs::path input(cl_in);
        if (fs::is_directory(input))
            input /= cl_on == "embedding" ? "coords_shap.csv" : "shap.csv";
        const Matrix m = load_matrix_csv(input);
        const HdbscanResult result = hdbscan(m, cl_params);
        save_labels_csv(result.labels, cl_out);
        std::cout << "wrote " << cl_out << " (" << result.labels.num_clusters()
                  << " clusters)\n";
        return 0;
    }

    if (wf_cmd->parsed()) {
        const ShapTensor tensor = load_shap_tensor(wf_shap, wf_base);
        const ClusterLabels labels = load_labels_csv(wf_clusters);
        PipelineConfig cfg;
        cfg.projection = wf_projection;
        cfg.top_m = wf_top_m;
        cfg.validate();
        fs::create_directories(wf_out);
        Dataset shell; // names only; waterfall files need no raw features
        shell.feature_names = tensor.feature_names;
        shell.class_names = tensor.class_names;
        const std::vector<WaterfallPath> paths =
            labels.num_clusters() > 0
                ? cluster_mean_paths(tensor, labels, wf_top_m)
                : std::vector<WaterfallPath>{};
        std::vector<ProjectedPath> projected;
        if (!paths.empty()) {
            if (wf_projection == "pca") {
                projected = project_pca(paths);
            } else {
                const auto comma = wf_projection.find(',');
                const std::size_t a = std::stoul(wf_projection.substr(5, comma - 5));
                const std::size_t b = std::stoul(wf_projection.substr(comma + 1));
                for (const auto& p : paths)
                    projected.push_back(project_pairwise(p, a, b, tensor.class_names));
            }
        }
        render_paths_svg(projected, "Cluster waterfall paths",
                         fs::path(wf_out) / "waterfall.svg", tensor.class_names);
        std::cout << "wrote " << wf_out << "/waterfall.svg (" << paths.size()
                  << " paths)\n";
        return 0;
    }

    if (report_cmd->parsed()) {
        run_report(report_dir);
        std::cout << "re-rendered " << report_dir << "\n";
        return 0;
    }

    if (pipe_cmd->parsed()) {
        if (!pipe_preset.empty()) {
            if (pipe_preset != "sim-paper")
                throw config_error("pipeline: unknown preset '" + pipe_preset + "'");
            pcfg = PipelineConfig::preset_sim_paper();
        }
        if (!pipe_config_file.empty()) {
            PipelineConfig file_cfg = PipelineConfig::from_file(pipe_config_file);
            if (!pipe_preset.empty())
                throw config_error("pipeline: --preset and --config are exclusive");
            pcfg = file_cfg;
        }
        if (pipe_simulate) pcfg.source = "simulate";
        if (!pipe_data.empty()) {
            pcfg.source = "csv";
            pcfg.data_path = pipe_data;
        }
        if (!pipe_label.empty()) pcfg.label_column = pipe_label;
        if (pipe_scale) pcfg.scale = true;
        for (const std::string& kv : pipe_sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw config_error("pipeline: --set expects key=value, got '" + kv + "'");
            pcfg.apply_kv(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (pipe_cmd->count("--seed")) pcfg.seed = pipe_seed;
        if (pipe_cmd->count("--threads")) pcfg.threads = pipe_threads;
        if (pipe_cmd->count("--out")) pcfg.out_dir = pipe_out;
        const PipelineResult result = run_pipeline(pcfg);
        std::cout << "pipeline complete: " << result.out_dir.string() << " ("
                  << result.clustering.labels.num_clusters() << " clusters, accuracy "
                  << result.report.accuracy << ")\n";
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
