#pragma once

// Run orchestration and artifact output. A run directory is self-describing:
// manifest.json (config snapshot + seed + paths + code version, written
// before round 1), rounds.csv (one row per round per client, fixed columns,
// no wall times so reruns are byte-identical), summary.json, per-client and
// global final ensembles in the binary wire format, and reliability bin CSVs.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedwba/config.hpp"
#include "fedwba/data.hpp"
#include "fedwba/federation.hpp"
#include "fedwba/metrics.hpp"
#include "fedwba/wire.hpp"

namespace fedwba {

inline constexpr const char* kCodeVersion = "fedwba 0.1.0";
inline constexpr const char* kCsvColumns =
    "round,client_id,scheduled,accuracy,ece,w2_to_global,global_accuracy";

struct RunSummary {
    double final_mean_acc = 0.0;
    double final_mean_ece = 0.0;
    double final_mean_scheduled_acc = 0.0;
    double final_mean_w2 = 0.0;
    std::size_t rounds = 0;
    std::uint64_t comm_bytes_total = 0;
    std::uint64_t messages = 0;
    double wall_ms_total = 0.0;
    std::vector<RoundReport> reports;
};

// Builds the dataset named by the config. MNIST paths may point at a
// train pair plus an optional second (test) pair that gets concatenated
// before partitioning.
inline Dataset build_dataset(const DataConfig& data, std::uint64_t seed) {
    if (data.source == "synth") {
        Rng rng = Rng(seed).split(rng_tag::partition + 7);
        return synth_blobs(static_cast<int>(data.classes), data.per_class, data.dim,
                           data.spread, rng);
    }
    Dataset d = head(load_idx(data.mnist_images, data.mnist_labels), data.limit);
    if (!data.mnist_test_images.empty()) {
        const Dataset extra =
            head(load_idx(data.mnist_test_images, data.mnist_test_labels), data.test_limit);
        d = concat(d, extra);
    }
    return d;
}

inline std::vector<ClientShard> build_shards(const ExperimentConfig& cfg) {
    const Dataset data = build_dataset(cfg.data, cfg.fed.seed);
    Rng rng = Rng(cfg.fed.seed).split(rng_tag::partition);
    return partition_label_skew(data, cfg.fed.num_clients, cfg.data.labels_per_client,
                                cfg.data.test_fraction, rng);
}

inline std::string timestamp_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    require(static_cast<bool>(f), "write_text_file: cannot open " + path);
    f << text;
}

inline void write_partition_manifest(std::span<const ClientShard> shards,
                                     const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : shards) {
        j.push_back({{"client_id", s.client_id},
                     {"label_set", s.label_set},
                     {"train_count", s.train.size()},
                     {"test_count", s.test.size()}});
    }
    write_text_file(path, j.dump(2) + "\n");
}

// Executes the configured experiment; when out_dir is nonempty all artifacts
// are written there.
inline RunSummary run_experiment_to_dir(const ExperimentConfig& cfg,
                                        const std::string& out_dir) {
    cfg.validate();
    const bool writing = !out_dir.empty();
    namespace fs = std::filesystem;
    if (writing) fs::create_directories(out_dir);

    const auto shards = build_shards(cfg);
    auto [server, clients] = init_run(cfg.fed, shards);

    std::ofstream csv;
    nlohmann::json manifest;
    if (writing) {
        write_partition_manifest(shards, out_dir + "/partition.json");
        manifest["code_version"] = kCodeVersion;
        manifest["seed"] = cfg.fed.seed;
        manifest["csv_version"] = 1;
        manifest["csv_columns"] = kCsvColumns;
        manifest["started_at"] = timestamp_now();
        manifest["config"] = config_to_text(cfg);
        manifest["artifacts"] = {{"rounds_csv", "rounds.csv"},
                                 {"summary", "summary.json"},
                                 {"partition", "partition.json"},
                                 {"ensembles", "ensemble_*.bin"},
                                 {"reliability", "reliability_client_*.csv"}};
        write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
        csv.open(out_dir + "/rounds.csv");
        require(static_cast<bool>(csv), "run_experiment: cannot open rounds.csv");
        csv << kCsvColumns << "\n";
    }

    RunSummary summary;
    Rng schedule_rng = Rng(cfg.fed.seed).split(rng_tag::schedule);
    char buf[256];
    for (std::size_t r = 0; r < cfg.fed.rounds; ++r) {
        RoundReport report = run_round(server, clients, cfg.fed, r, schedule_rng);
        summary.wall_ms_total += report.wall_ms;
        if (writing) {
            for (std::size_t k = 0; k < clients.size(); ++k) {
                const bool sched =
                    std::find(report.scheduled.begin(), report.scheduled.end(),
                              static_cast<int>(k)) != report.scheduled.end();
                std::snprintf(buf, sizeof(buf), "%zu,%zu,%d,%.10g,%.10g,%.10g,", r, k,
                              sched ? 1 : 0, report.per_client_accuracy[k],
                              report.per_client_ece[k], report.mean_w2_client_to_global);
                csv << buf;
                if (cfg.fed.global_eval) {
                    std::snprintf(buf, sizeof(buf), "%.10g",
                                  report.per_client_global_accuracy[k]);
                    csv << buf;
                }
                csv << "\n";
            }
        }
        summary.reports.push_back(std::move(report));
    }
    csv.close();

    const RoundReport& last = summary.reports.back();
    summary.final_mean_acc = last.mean_accuracy();
    summary.final_mean_ece = last.mean_ece();
    summary.final_mean_scheduled_acc = last.mean_scheduled_accuracy();
    summary.final_mean_w2 = last.mean_w2_client_to_global;
    summary.rounds = cfg.fed.rounds;
    summary.comm_bytes_total = server.comm_bytes;
    summary.messages = server.messages;

    if (writing) {
        // final ensembles, binary wire format
        const auto save = [&](const Matrix& particles, std::uint32_t id,
                              const std::string& name) {
            const ParticleMsg msg{static_cast<std::uint32_t>(cfg.fed.rounds), id, particles};
            const auto bytes = encode_message(msg);
            write_bytes(out_dir + "/" + name, bytes);
        };
        save(server.global_particles, kBroadcastClientId, "ensemble_global.bin");
        for (const auto& c : clients)
            save(c.particles, static_cast<std::uint32_t>(c.id),
                 "ensemble_client_" + std::to_string(c.id) + ".bin");

        for (const auto& c : clients) {
            const auto eval = evaluate_ensemble(c.particles, server.shape, c.shard.test);
            write_reliability_csv(eval.bins, out_dir + "/reliability_client_" +
                                                 std::to_string(c.id) + ".csv");
        }

        nlohmann::json js;
        js["final_mean_acc"] = summary.final_mean_acc;
        js["final_mean_ece"] = summary.final_mean_ece;
        js["final_mean_scheduled_acc"] = summary.final_mean_scheduled_acc;
        js["final_mean_w2_client_to_global"] = summary.final_mean_w2;
        js["rounds"] = summary.rounds;
        js["comm_bytes_total"] = summary.comm_bytes_total;
        js["messages"] = summary.messages;
        js["wall_ms_total"] = summary.wall_ms_total;
        write_text_file(out_dir + "/summary.json", js.dump(2) + "\n");

        manifest["finished_at"] = timestamp_now();
        write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    }
    return summary;
}

// --- ablation grids ---------------------------------------------------------

inline std::vector<std::string> ablation_axes() {
    return {"kernel",       "svgd_iters", "bandwidth", "particles",     "schedule_ratio",
            "labels_per_client", "eta",   "lambda",    "kde_bandwidth", "aggregation"};
}

inline std::vector<std::string> default_grid(const std::string& axis) {
    if (axis == "kernel") return {"rbf", "laplacian", "polynomial", "sigmoid"};
    if (axis == "svgd_iters") return {"20", "30", "40"};
    if (axis == "bandwidth") return {"med", "1", "12"};
    if (axis == "particles") return {"5", "10", "20"};
    if (axis == "schedule_ratio") return {"0.1", "0.2", "0.5"};
    if (axis == "labels_per_client") return {"2", "5", "10"};
    if (axis == "eta") return {"0.01", "0.02", "0.03"};
    if (axis == "lambda") return {"1e-7", "1e-8", "1e-9", "1e-10"};
    if (axis == "kde_bandwidth") return {"0.30", "0.55", "0.70"};
    if (axis == "aggregation") return {"wba", "param-avg"};
    throw ConfigError("ablate: unknown axis '" + axis + "'");
}

inline std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = detail::trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

inline ExperimentConfig apply_axis_value(ExperimentConfig cfg, const std::string& axis,
                                         const std::string& value) {
    if (axis == "kernel") apply_setting(cfg, "svgd.kernel", value);
    else if (axis == "svgd_iters") apply_setting(cfg, "svgd.iterations", value);
    else if (axis == "bandwidth") apply_setting(cfg, "svgd.bandwidth", value);
    else if (axis == "particles") apply_setting(cfg, "federation.particles", value);
    else if (axis == "schedule_ratio") {
        const double ratio = detail::parse_number<double>("ablate.schedule_ratio", value);
        const auto z = static_cast<std::size_t>(
            std::max(1.0, std::round(ratio * static_cast<double>(cfg.fed.num_clients))));
        cfg.fed.sample_size = std::min(z, cfg.fed.num_clients);
    }
    else if (axis == "labels_per_client") apply_setting(cfg, "data.labels_per_client", value);
    else if (axis == "eta") apply_setting(cfg, "svgd.eta", value);
    else if (axis == "lambda") apply_setting(cfg, "svgd.lambda", value);
    else if (axis == "kde_bandwidth") apply_setting(cfg, "federation.kde_bandwidth", value);
    else if (axis == "aggregation") apply_setting(cfg, "federation.aggregation", value);
    else throw ConfigError("ablate: unknown axis '" + axis + "'");
    return cfg;
}

// One experiment per grid cell; a summary CSV row per cell. Cells share the
// base config's seed, so axes like `aggregation` produce paired runs.
inline void run_ablation(const std::string& axis, const ExperimentConfig& base,
                         const std::string& out_dir) {
    const auto grid = base.ablate_grids.count(axis)
                          ? split_csv_list(base.ablate_grids.at(axis))
                          : default_grid(axis);
    require(!grid.empty(), "ablate: empty grid for axis " + axis);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir + "/ablate_" + axis + ".csv");
    require(static_cast<bool>(csv), "ablate: cannot open output CSV");
    csv << "axis,value,seed,final_mean_acc,final_mean_ece,comm_bytes_total,"
           "comm_bytes_per_round\n";
    char buf[256];
    for (const auto& value : grid) {
        const ExperimentConfig cfg = apply_axis_value(base, axis, value);
        const RunSummary s = run_experiment_to_dir(cfg, "");
        std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%.10g,%.10g,%llu,%.10g\n", axis.c_str(),
                      value.c_str(), static_cast<unsigned long long>(cfg.fed.seed),
                      s.final_mean_acc, s.final_mean_ece,
                      static_cast<unsigned long long>(s.comm_bytes_total),
                      static_cast<double>(s.comm_bytes_total) /
                          static_cast<double>(s.rounds));
        csv << buf;
    }
}

}  // namespace fedwba
