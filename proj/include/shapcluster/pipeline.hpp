#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "shapcluster/embed.hpp"
#include "shapcluster/gbt.hpp"
#include "shapcluster/hdbscan.hpp"
#include "shapcluster/shap.hpp"

namespace shapcluster {

// Seed of the bundled simulation preset; every acceptance check runs under it.
inline constexpr std::uint64_t kSimPaperSeed = 7;

// Flat key=value configuration with section prefixes (e.g. gbt.rounds=100).
// Unknown keys are rejected; flags override file values.
struct PipelineConfig {
    std::string source = "simulate"; // simulate | csv
    std::string data_path;
    std::string label_column = "label";
    bool scale = false;
    std::size_t sim_n = 1500;

    GbtConfig gbt;
    double test_fraction = 0.3;

    int shap_folds = 5;
    int shap_repeats = 5;
    std::size_t shap_background = 256;

    std::string embed_method = "neighbor"; // neighbor | pca
    NeighborEmbedConfig embed;

    HdbscanParams cluster;
    std::string cluster_on = "shap"; // shap | embedding

    std::size_t top_m = 8;
    std::string projection = "pca"; // pca | pair:A,B

    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "out";

    static PipelineConfig preset_sim_paper();
    static PipelineConfig from_file(const std::filesystem::path& path);

    // Applies one key=value pair; throws config_error on unknown keys or
    // malformed values.
    void apply_kv(const std::string& key, const std::string& value);

    // Result-determining parameters as sorted text pairs (out_dir and threads
    // are execution details and excluded, so re-runs compare equal).
    std::map<std::string, std::string> to_kv() const;

    void validate() const;
};

struct PipelineResult {
    std::filesystem::path out_dir;
    ClassificationReport report;
    CvShapResult shap;
    HdbscanResult clustering;
};

// Fig-style five-step workflow: data, model + held-out metrics, out-of-fold
// SHAP, embeddings, density clustering, waterfall paths, rendered report, and
// a manifest with content hashes of every output.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// SHA-256 of a file's bytes, hex encoded.
std::string file_sha256(const std::filesystem::path& path);

// Re-renders everything derivable from a pipeline output directory (metrics,
// waterfall files, all SVGs) using the manifest's recorded config and seed.
void run_report(const std::filesystem::path& dir);

} // namespace shapcluster
