#include "shapcluster/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "shapcluster/dataset.hpp"
#include "shapcluster/errors.hpp"
#include "shapcluster/simgen.hpp"
#include "shapcluster/svg.hpp"
#include "shapcluster/waterfall.hpp"

namespace shapcluster {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error("config: expected boolean for " + key + ", got '" + v + "'");
}

long parse_long(const std::string& v, const std::string& key) {
    long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw config_error("config: expected integer for " + key + ", got '" + v + "'");
    return out;
}

double parse_real(const std::string& v, const std::string& key) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw config_error("config: expected number for " + key + ", got '" + v + "'");
    return out;
}

} // namespace

PipelineConfig PipelineConfig::preset_sim_paper() {
    PipelineConfig cfg;
    cfg.source = "simulate";
    cfg.sim_n = 1500;
    cfg.seed = kSimPaperSeed;
    return cfg;
}

void PipelineConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "data.source") {
        if (value != "simulate" && value != "csv")
            throw config_error("config: data.source must be simulate or csv");
        source = value;
    } else if (key == "data.path") {
        data_path = value;
    } else if (key == "data.label") {
        label_column = value;
    } else if (key == "data.scale") {
        scale = parse_bool(value, key);
    } else if (key == "sim.n") {
        sim_n = static_cast<std::size_t>(parse_long(value, key));
    } else if (key == "gbt.rounds") {
        gbt.rounds = static_cast<int>(parse_long(value, key));
    } else if (key == "gbt.eta") {
        gbt.eta = parse_real(value, key);
    } else if (key == "gbt.max_depth") {
        gbt.max_depth = static_cast<int>(parse_long(value, key));
    } else if (key == "gbt.lambda") {
        gbt.lambda = parse_real(value, key);
    } else if (key == "gbt.gamma") {
        gbt.gamma = parse_real(value, key);
    } else if (key == "gbt.min_child_weight") {
        gbt.min_child_weight = parse_real(value, key);
    } else if (key == "split.test_fraction") {
        test_fraction = parse_real(value, key);
    } else if (key == "shap.folds") {
        shap_folds = static_cast<int>(parse_long(value, key));
    } else if (key == "shap.repeats") {
        shap_repeats = static_cast<int>(parse_long(value, key));
    } else if (key == "shap.background") {
        shap_background = static_cast<std::size_t>(parse_long(value, key));
    } else if (key == "embed.method") {
        if (value != "neighbor" && value != "pca")
            throw config_error("config: embed.method must be neighbor or pca");
        embed_method = value;
    } else if (key == "embed.neighbors") {
        embed.neighbors = static_cast<int>(parse_long(value, key));
    } else if (key == "embed.min_dist") {
        embed.min_dist = parse_real(value, key);
    } else if (key == "embed.epochs") {
        embed.epochs = static_cast<int>(parse_long(value, key));
    } else if (key == "cluster.min_cluster_size") {
        cluster.min_cluster_size = static_cast<int>(parse_long(value, key));
    } else if (key == "cluster.min_samples") {
        cluster.min_samples = static_cast<int>(parse_long(value, key));
    } else if (key == "cluster.selection") {
        if (value == "eom")
            cluster.selection = Selection::eom;
        else if (value == "leaf")
            cluster.selection = Selection::leaf;
        else
            throw config_error("config: cluster.selection must be eom or leaf");
    } else if (key == "cluster.on") {
        if (value != "shap" && value != "embedding")
            throw config_error("config: cluster.on must be shap or embedding");
        cluster_on = value;
    } else if (key == "waterfall.top_m") {
        top_m = static_cast<std::size_t>(parse_long(value, key));
    } else if (key == "waterfall.projection") {
        projection = value;
    } else if (key == "seed") {
        seed = static_cast<std::uint64_t>(parse_long(value, key));
    } else if (key == "threads") {
        threads = static_cast<int>(parse_long(value, key));
    } else if (key == "out") {
        out_dir = value;
    } else {
        throw config_error("config: unknown key '" + key + "'");
    }
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path.string());
    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config: line " + std::to_string(lineno) +
                               " is not key=value: '" + line + "'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        cfg.apply_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::map<std::string, std::string> PipelineConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["data.source"] = source;
    if (!data_path.empty()) kv["data.path"] = data_path;
    kv["data.label"] = label_column;
    kv["data.scale"] = scale ? "true" : "false";
    kv["sim.n"] = std::to_string(sim_n);
    kv["gbt.rounds"] = std::to_string(gbt.rounds);
    kv["gbt.eta"] = format_double(gbt.eta);
    kv["gbt.max_depth"] = std::to_string(gbt.max_depth);
    kv["gbt.lambda"] = format_double(gbt.lambda);
    kv["gbt.gamma"] = format_double(gbt.gamma);
    kv["gbt.min_child_weight"] = format_double(gbt.min_child_weight);
    kv["split.test_fraction"] = format_double(test_fraction);
    kv["shap.folds"] = std::to_string(shap_folds);
    kv["shap.repeats"] = std::to_string(shap_repeats);
    kv["shap.background"] = std::to_string(shap_background);
    kv["embed.method"] = embed_method;
    kv["embed.neighbors"] = std::to_string(embed.neighbors);
    kv["embed.min_dist"] = format_double(embed.min_dist);
    kv["embed.epochs"] = std::to_string(embed.epochs);
    kv["cluster.min_cluster_size"] = std::to_string(cluster.min_cluster_size);
    kv["cluster.min_samples"] = std::to_string(cluster.min_samples);
    kv["cluster.selection"] = cluster.selection == Selection::eom ? "eom" : "leaf";
    kv["cluster.on"] = cluster_on;
    kv["waterfall.top_m"] = std::to_string(top_m);
    kv["waterfall.projection"] = projection;
    kv["seed"] = std::to_string(seed);
    return kv;
}

void PipelineConfig::validate() const {
    gbt.validate();
    if (source == "csv" && data_path.empty())
        throw config_error("config: data.path required when data.source=csv");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw config_error("config: split.test_fraction must be in [0, 1)");
    if (projection != "pca" && projection.rfind("pair:", 0) != 0)
        throw config_error("config: waterfall.projection must be pca or pair:A,B");
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot hash missing file: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[65536];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        char b[3];
        std::snprintf(b, sizeof b, "%02x", digest[i]);
        hex += b;
    }
    return hex;
}

namespace {

struct StageGuard {
    const char* name;
    template <typename F>
    auto run(F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const config_error& e) {
            throw config_error(std::string("stage ") + name + ": " + e.what());
        } catch (const numeric_error& e) {
            throw numeric_error(std::string("stage ") + name + ": " + e.what());
        } catch (const data_error& e) {
            throw data_error(std::string("stage ") + name + ": " + e.what());
        }
    }
};

std::pair<std::size_t, std::size_t> parse_pair_projection(const std::string& spec,
                                                          std::size_t k) {
    // "pair:A,B"
    const std::string body = spec.substr(5);
    const auto comma = body.find(',');
    if (comma == std::string::npos)
        throw config_error("config: pair projection must be pair:A,B");
    std::size_t a = 0, b = 0;
    try {
        a = std::stoul(body.substr(0, comma));
        b = std::stoul(body.substr(comma + 1));
    } catch (...) {
        throw config_error("config: pair projection must name two class indices");
    }
    if (a >= k || b >= k)
        throw config_error("config: pair projection class index out of range");
    return {a, b};
}

void write_paths_csv(std::span<const WaterfallPath> paths,
                     std::span<const std::string> class_names,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path.string());
    out << "tag,step,feature";
    for (const auto& c : class_names) out << ",delta|" << c;
    for (const auto& c : class_names) out << ",vertex|" << c;
    out << '\n';
    for (const WaterfallPath& p : paths) {
        out << p.tag << ",0,anchor";
        for (std::size_t c = 0; c < class_names.size(); ++c) out << ",0";
        for (double v : p.anchor) out << ',' << format_double(v);
        out << '\n';
        for (std::size_t s = 0; s < p.segments.size(); ++s) {
            out << p.tag << ',' << (s + 1) << ',' << p.segments[s].feature;
            for (double v : p.segments[s].delta) out << ',' << format_double(v);
            for (double v : p.vertices[s + 1]) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

// waterfall + report renders shared by run_pipeline and run_report
void write_waterfall_files(const std::filesystem::path& dir, const PipelineConfig& cfg,
                           const Dataset& data, const ShapTensor& tensor,
                           const ClusterLabels& labels) {
    std::vector<WaterfallPath> paths;
    std::vector<ProjectedPath> projected;
    if (labels.num_clusters() > 0) {
        paths = cluster_mean_paths(tensor, labels, cfg.top_m);
        if (cfg.projection == "pca" && data.k() >= 2) {
            projected = project_pca(paths);
        } else if (cfg.projection.rfind("pair:", 0) == 0) {
            const auto [a, b] = parse_pair_projection(cfg.projection, data.k());
            for (const auto& p : paths)
                projected.push_back(project_pairwise(p, a, b, data.class_names));
        }
    }
    write_paths_csv(paths, data.class_names, dir / "paths.csv");
    render_paths_svg(projected, "Cluster waterfall paths", dir / "waterfall.svg",
                     data.class_names);
}

void write_report_files(const std::filesystem::path& dir, const PipelineConfig& cfg,
                        const Dataset& data, const ShapTensor& tensor,
                        const ClusterLabels& labels, const Matrix& coords_raw,
                        const Matrix& coords_shap) {
    render_bars_svg(mean_abs_shap(tensor), data.feature_names, data.class_names,
                    "Mean |SHAP| by feature and class", dir / "bars.svg");
    std::vector<std::string> cluster_names;
    for (int c = 0; c < labels.num_clusters(); ++c)
        cluster_names.push_back("Cluster " + std::to_string(c));
    if (labels.num_clusters() > 0) {
        render_heatmap_svg(heatmap_data(data, labels), cluster_names, data.feature_names,
                           "Cluster means of raw features", dir / "heatmap.svg");
    } else {
        render_heatmap_svg(Matrix(), {}, {}, "Cluster means of raw features (no clusters)",
                           dir / "heatmap.svg");
    }
    render_scatter_svg(coords_raw, labels.labels, cluster_names,
                       "Raw data (" + cfg.embed_method + " embedding)",
                       dir / "scatter_raw.svg");
    render_scatter_svg(coords_shap, labels.labels, cluster_names,
                       "SHAP values (" + cfg.embed_method + " embedding)",
                       dir / "scatter_shap.svg");
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    PipelineResult result;
    result.out_dir = dir;
    std::vector<std::string> outputs;
    auto track = [&](const std::string& name) { outputs.push_back(name); };

    // ---- data ------------------------------------------------------------
    Dataset data = StageGuard{"data"}.run([&] {
        if (cfg.source == "simulate") {
            Simulation sim = simulate(cfg.sim_n, cfg.seed);
            save_csv(sim.data, dir / "data.csv");
            track("data.csv");
            Matrix beta(2, 8);
            for (std::size_t j = 0; j < 8; ++j) {
                beta(0, j) = sim.model.beta1[j];
                beta(1, j) = sim.model.beta2[j];
            }
            std::vector<std::string> beta_names;
            for (int j = 2; j < 10; ++j) beta_names.push_back("Feature " + std::to_string(j));
            save_matrix_csv(beta, beta_names, dir / "beta.csv");
            track("beta.csv");
            return std::move(sim.data);
        }
        Dataset d = load_csv(cfg.data_path, cfg.label_column);
        if (!d.labels) throw data_error("pipeline: dataset has no label column");
        if (cfg.scale) d = minmax_scale(d);
        return d;
    });
    const std::size_t n = data.n();

    // ---- train + held-out metrics -----------------------------------------
    Ensemble model = StageGuard{"train"}.run([&] {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        RngStream split_rng(cfg.seed, streams::train_split);
        split_rng.shuffle(std::span<int>(order));
        const std::size_t test_count =
            static_cast<std::size_t>(std::lround(cfg.test_fraction * static_cast<double>(n)));

        auto subset = [&](std::size_t from, std::size_t count) {
            Dataset out;
            out.features = Matrix(count, data.p());
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                const int row = order[from + i];
                std::copy(data.features.row(row).begin(), data.features.row(row).end(),
                          out.features.row(i).begin());
                labels[i] = (*data.labels)[row];
            }
            out.labels = std::move(labels);
            out.feature_names = data.feature_names;
            out.class_names = data.class_names;
            return out;
        };

        Ensemble m;
        ClassificationReport report;
        bool trained = false;
        if (test_count >= 1 && n - test_count >= 2) {
            const Dataset train = subset(test_count, n - test_count);
            const Dataset test = subset(0, test_count);
            try {
                m = fit(train, cfg.gbt);
                std::vector<int> pred(test.n());
                for (std::size_t i = 0; i < test.n(); ++i)
                    pred[i] = m.predict_class(test.features.row(i));
                report = classification_report(*test.labels, pred, data.k());
                trained = true;
            } catch (const data_error&) {
                // fall through to in-sample training on tiny/degenerate splits
            }
        }
        if (!trained) {
            m = fit(data, cfg.gbt);
            std::vector<int> pred(n);
            for (std::size_t i = 0; i < n; ++i) pred[i] = m.predict_class(data.features.row(i));
            report = classification_report(*data.labels, pred, data.k());
        }
        save_model(m, dir / "model.json");
        track("model.json");
        std::ofstream metrics(dir / "metrics.txt");
        metrics << report.to_table(data.class_names);
        track("metrics.txt");
        result.report = report;
        return m;
    });

    // ---- out-of-fold SHAP --------------------------------------------------
    StageGuard{"explain"}.run([&] {
        CvShapParams params{cfg.shap_folds, cfg.shap_repeats, cfg.shap_background,
                            cfg.threads};
        RngStream rng(cfg.seed, streams::shap);
        try {
            result.shap = cv_shap(data, cfg.gbt, params, rng);
        } catch (const data_error&) {
            // datasets too small for the fold protocol fall back to in-sample
            // explanation with the trained model
            ShapTensor& t = result.shap.tensor;
            t.n = n;
            t.p = data.p();
            t.k = data.k();
            t.feature_names = data.feature_names;
            t.class_names = data.class_names;
            t.values.assign(n * t.p * t.k, 0.0);
            std::vector<int> all(n);
            std::iota(all.begin(), all.end(), 0);
            const BackgroundSet bg =
                BackgroundSet::sample(data.features, all, cfg.shap_background, rng.derive(1));
            t.base_values.assign(t.k, 0.0);
            for (std::size_t r = 0; r < bg.rows.rows(); ++r) {
                const auto m = model.predict_margins(bg.rows.row(r));
                for (std::size_t c = 0; c < t.k; ++c) t.base_values[c] += m[c] / bg.rows.rows();
            }
            double residual = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const Matrix phi = shap_single(model, data.features.row(s), bg);
                for (std::size_t i = 0; i < t.p; ++i)
                    for (std::size_t c = 0; c < t.k; ++c) t.at(s, i, c) = phi(i, c);
                const auto margins = model.predict_margins(data.features.row(s));
                for (std::size_t c = 0; c < t.k; ++c) {
                    double total = 0.0;
                    for (std::size_t i = 0; i < t.p; ++i) total += phi(i, c);
                    residual = std::max(residual,
                                        std::abs(total - (margins[c] - t.base_values[c])));
                }
            }
            result.shap.run_additivity_residual = {residual};
        }
        save_matrix_csv(result.shap.tensor.flatten(), result.shap.tensor.flat_column_names(),
                        dir / "shap.csv");
        track("shap.csv");
        Matrix base(1, data.k());
        std::copy(result.shap.tensor.base_values.begin(),
                  result.shap.tensor.base_values.end(), base.row(0).begin());
        save_matrix_csv(base, data.class_names, dir / "base_values.csv");
        track("base_values.csv");
        return 0;
    });
    const Matrix flat = result.shap.tensor.flatten();

    // ---- embeddings ---------------------------------------------------------
    Matrix coords_raw, coords_shap;
    StageGuard{"embed"}.run([&] {
        auto embed_matrix = [&](const Matrix& m, std::uint64_t stream) {
            try {
                if (cfg.embed_method == "pca") return pca_embed(m).coords;
                NeighborEmbedConfig ec = cfg.embed;
                ec.threads = cfg.threads;
                // neighbor count cannot reach the sample count; degrade before
                // erroring
                ec.neighbors = std::min<int>(ec.neighbors, static_cast<int>(m.rows()) - 1);
                if (ec.neighbors < 2) return pca_embed(m).coords;
                return neighbor_embed(m, ec, RngStream(cfg.seed, stream)).coords;
            } catch (const data_error&) {
                // rank-0 or too-tiny inputs still get (degenerate) coordinates
                return Matrix(m.rows(), 2);
            }
        };
        coords_raw = embed_matrix(data.features, streams::embed_raw);
        coords_shap = embed_matrix(flat, streams::embed_shap);
        save_matrix_csv(coords_raw, {"x", "y"}, dir / "coords_raw.csv");
        track("coords_raw.csv");
        save_matrix_csv(coords_shap, {"x", "y"}, dir / "coords_shap.csv");
        track("coords_shap.csv");
        return 0;
    });

    // ---- clustering ---------------------------------------------------------
    StageGuard{"cluster"}.run([&] {
        HdbscanParams params = cfg.cluster;
        params.threads = cfg.threads;
        params.min_samples = std::min<int>(params.min_samples, static_cast<int>(n) - 1);
        const Matrix& target = cfg.cluster_on == "embedding" ? coords_shap : flat;
        result.clustering = hdbscan(target, params);
        save_labels_csv(result.clustering.labels, dir / "clusters.csv");
        track("clusters.csv");
        return 0;
    });
    const ClusterLabels& labels = result.clustering.labels;

    // ---- waterfall paths ------------------------------------------------------
    StageGuard{"waterfall"}.run([&] {
        write_waterfall_files(dir, cfg, data, result.shap.tensor, labels);
        track("paths.csv");
        track("waterfall.svg");
        return 0;
    });

    // ---- report renders ----------------------------------------------------
    StageGuard{"report"}.run([&] {
        write_report_files(dir, cfg, data, result.shap.tensor, labels, coords_raw,
                           coords_shap);
        track("bars.svg");
        track("heatmap.svg");
        track("scatter_raw.svg");
        track("scatter_shap.svg");
        return 0;
    });

    // ---- manifest -----------------------------------------------------------
    StageGuard{"manifest"}.run([&] {
        nlohmann::json j;
        j["seed"] = cfg.seed;
        nlohmann::json conf;
        for (const auto& [key, value] : cfg.to_kv()) conf[key] = value;
        j["config"] = std::move(conf);
        j["diagnostics"] = {
            {"shap_additivity_residual_per_run", result.shap.run_additivity_residual},
            {"clusters", labels.num_clusters()},
        };
        nlohmann::json outs;
        std::sort(outputs.begin(), outputs.end());
        for (const std::string& name : outputs)
            outs[name] = "sha256:" + file_sha256(dir / name);
        j["outputs"] = std::move(outs);
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        if (!out) throw data_error("cannot write manifest");
        out << j.dump(1) << '\n';
        return 0;
    });

    return result;
}

void run_report(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(dir / "manifest.json");
    if (!in) throw data_error("report: no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("report: manifest.json is not valid JSON: " + std::string(ex.what()));
    }
    PipelineConfig cfg;
    for (const auto& [key, value] : j.at("config").items())
        cfg.apply_kv(key, value.get<std::string>());

    Dataset data;
    if (cfg.source == "simulate") {
        data = load_csv(dir / "data.csv", std::string("label"));
        // ingestion assigns class indices by first appearance; realign to the
        // canonical simulation order so labels match the stored model
        const std::vector<std::string> canonical = {"Class 0", "Class 1", "Class 2"};
        std::vector<int> remap(data.class_names.size(), 0);
        for (std::size_t c = 0; c < data.class_names.size(); ++c) {
            const auto it =
                std::find(canonical.begin(), canonical.end(), data.class_names[c]);
            if (it == canonical.end())
                throw data_error("report: unexpected class name " + data.class_names[c]);
            remap[c] = static_cast<int>(it - canonical.begin());
        }
        for (int& y : *data.labels) y = remap[y];
        data.class_names = canonical;
    } else {
        data = load_csv(cfg.data_path, cfg.label_column);
        if (cfg.scale) data = minmax_scale(data);
    }

    const ShapTensor tensor = load_shap_tensor(dir / "shap.csv", dir / "base_values.csv");
    const ClusterLabels labels = load_labels_csv(dir / "clusters.csv");
    const Matrix coords_raw = load_matrix_csv(dir / "coords_raw.csv");
    const Matrix coords_shap = load_matrix_csv(dir / "coords_shap.csv");

    // metrics from the stored model and the seed-derived split
    const Ensemble model = load_model(dir / "model.json");
    const std::size_t n = data.n();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream split_rng(cfg.seed, streams::train_split);
    split_rng.shuffle(std::span<int>(order));
    const std::size_t test_count =
        static_cast<std::size_t>(std::lround(cfg.test_fraction * static_cast<double>(n)));
    std::vector<int> y_true, y_pred;
    if (test_count >= 1 && n - test_count >= 2) {
        for (std::size_t i = 0; i < test_count; ++i) {
            y_true.push_back((*data.labels)[order[i]]);
            y_pred.push_back(model.predict_class(data.features.row(order[i])));
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            y_true.push_back((*data.labels)[i]);
            y_pred.push_back(model.predict_class(data.features.row(i)));
        }
    }
    const ClassificationReport report = classification_report(y_true, y_pred, data.k());
    std::ofstream metrics(dir / "metrics.txt");
    metrics << report.to_table(data.class_names);

    write_waterfall_files(dir, cfg, data, tensor, labels);
    write_report_files(dir, cfg, data, tensor, labels, coords_raw, coords_shap);
}

} // namespace shapcluster
