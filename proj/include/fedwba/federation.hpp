#pragma once

// The simulated client-server protocol: client sampling, broadcast, local
// SVGD against the KDE-rebuilt prior, upload, and server aggregation. Every
// particle transfer goes through the wire codec so the message format is
// exercised even in-process. Clients keep their local ensembles across
// rounds (personalization); only the prior is refreshed by broadcasts.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedwba/barycenter.hpp"
#include "fedwba/data.hpp"
#include "fedwba/kde.hpp"
#include "fedwba/metrics.hpp"
#include "fedwba/model.hpp"
#include "fedwba/numerics.hpp"
#include "fedwba/ot.hpp"
#include "fedwba/svgd.hpp"
#include "fedwba/wire.hpp"

namespace fedwba {

enum class AggregationMode { Wba, ParamAvg };

inline std::string aggregation_name(AggregationMode m) {
    return m == AggregationMode::Wba ? "wba" : "param-avg";
}

struct FederationConfig {
    std::size_t num_clients = 10;   // K
    std::size_t sample_size = 2;    // Z, scheduled per round
    std::size_t rounds = 50;
    std::size_t particles = 10;     // N
    SvgdConfig svgd;
    AggregationConfig aggregation;
    double kde_bandwidth = 0.55;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 100;
    AggregationMode mode = AggregationMode::Wba;
    bool use_prior = true;      // false = no-prior local-training baseline
    bool global_eval = false;   // also score the global ensemble on each test shard
    std::size_t workers = 0;    // 0 = hardware concurrency

    void validate() const {
        require(num_clients >= 1, "FederationConfig: num_clients must be >= 1");
        require(sample_size >= 1 && sample_size <= num_clients,
                "FederationConfig: sample_size must be in [1, num_clients]");
        require(rounds >= 1, "FederationConfig: rounds must be >= 1");
        require(particles >= 1, "FederationConfig: particles must be >= 1");
        require(kde_bandwidth > 0.0, "FederationConfig: kde_bandwidth must be positive");
        require(init_scale >= 0.0, "FederationConfig: init_scale must be >= 0");
        require(hidden_dim >= 1, "FederationConfig: hidden_dim must be >= 1");
        svgd.validate();
    }
};

struct BroadcastMsg {
    std::uint32_t round = 0;
    Matrix particles;
};

struct UploadMsg {
    std::uint32_t round = 0;
    std::uint32_t client_id = 0;
    Matrix particles;
};

struct RoundReport {
    std::size_t round = 0;
    std::vector<int> scheduled;
    std::vector<double> per_client_accuracy;
    std::vector<double> per_client_ece;
    std::vector<double> per_client_global_accuracy;  // filled when global_eval
    double mean_w2_client_to_global = 0.0;
    double wall_ms = 0.0;

    double mean_accuracy() const {
        double s = 0.0;
        for (double a : per_client_accuracy) s += a;
        return s / static_cast<double>(per_client_accuracy.size());
    }
    double mean_ece() const {
        double s = 0.0;
        for (double e : per_client_ece) s += e;
        return s / static_cast<double>(per_client_ece.size());
    }
    double mean_scheduled_accuracy() const {
        double s = 0.0;
        for (int id : scheduled) s += per_client_accuracy[static_cast<std::size_t>(id)];
        return s / static_cast<double>(scheduled.size());
    }
};

struct ClientState {
    int id = 0;
    ClientShard shard;
    Matrix particles;  // local posterior ensemble, persists across rounds
};

struct ServerState {
    MlpShape shape;
    Matrix global_particles;
    std::uint64_t comm_bytes = 0;
    std::uint64_t messages = 0;
};

// RNG stream tags; children are derived from (config.seed, tag)
namespace rng_tag {
inline constexpr std::uint64_t global_init = 1;
inline constexpr std::uint64_t client_init_base = 1000;
inline constexpr std::uint64_t schedule = 2;
inline constexpr std::uint64_t minibatch_base = 1u << 20;
inline constexpr std::uint64_t partition = 3;
}  // namespace rng_tag

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

// Draws the initial global and per-client ensembles i.i.d. N(0, init_scale^2 I)
// from deterministic child streams of the run seed.
inline std::pair<ServerState, std::vector<ClientState>> init_run(
    const FederationConfig& config, std::span<const ClientShard> shards) {
    config.validate();
    require(shards.size() == config.num_clients,
            "init_run: shard count does not match num_clients");
    const std::size_t input_dim = shards[0].train.features.cols;
    const int classes = shards[0].train.classes;
    for (const auto& s : shards) {
        require(s.train.features.cols == input_dim && s.test.features.cols == input_dim,
                "init_run: inconsistent shard feature dimensions");
        require(s.train.classes == classes, "init_run: inconsistent shard class counts");
    }

    ServerState server;
    server.shape = MlpShape{input_dim, config.hidden_dim, static_cast<std::size_t>(classes)};
    server.shape.validate();
    const std::size_t m = server.shape.flat_len();

    const Rng base(config.seed);
    Rng ginit = base.split(rng_tag::global_init);
    server.global_particles = gaussian_matrix(config.particles, m, config.init_scale, ginit);

    std::vector<ClientState> clients(config.num_clients);
    for (std::size_t k = 0; k < config.num_clients; ++k) {
        clients[k].id = static_cast<int>(k);
        clients[k].shard = shards[k];
        Rng cinit = base.split(rng_tag::client_init_base + k);
        clients[k].particles = gaussian_matrix(config.particles, m, config.init_scale, cinit);
    }
    return {std::move(server), std::move(clients)};
}

// Local update against a decoded broadcast: rebuild the KDE prior, run SVGD
// from the client's current ensemble on grad log prior + grad log likelihood.
inline Matrix client_local_update(const ClientState& client, const Matrix& prior_particles,
                                  const FederationConfig& config, std::size_t round) {
    const MlpShape shape{client.shard.train.features.cols, config.hidden_dim,
                         static_cast<std::size_t>(client.shard.train.classes)};
    const GlobalPrior prior{prior_particles, config.kde_bandwidth};
    const Matrix& x = client.shard.train.features;
    const std::span<const int> y(client.shard.train.labels);
    const std::size_t data_size = client.shard.train.size();
    const std::size_t batch =
        config.svgd.minibatch == 0 ? 0 : std::min(config.svgd.minibatch, data_size);
    const double scale =
        batch == 0 ? 1.0 : static_cast<double>(data_size) / static_cast<double>(batch);

    std::vector<std::size_t> batch_idx;
    IterationSetup setup = nullptr;
    if (batch > 0) {
        setup = [&, batch](std::size_t, Rng& rng) {
            batch_idx = rng.sample_without_replacement(data_size, batch);
        };
    }
    TargetGrad target = [&](std::size_t, std::span<const double> theta,
                            std::span<double> grad) {
        grad_log_likelihood(shape, theta, x, y, grad, batch_idx, scale);
        if (config.use_prior) add_grad_log_density(prior, theta, grad);
    };

    Rng rng = Rng(config.seed).split(rng_tag::minibatch_base +
                                     round * config.num_clients +
                                     static_cast<std::size_t>(client.id));
    SvgdConfig svgd_cfg = config.svgd;
    svgd_cfg.workers = config.workers == 0 ? hardware_workers() : config.workers;
    return run_svgd(client.particles, target, svgd_cfg, rng, nullptr, setup);
}

// One communication round. `fail_ids` marks clients whose uploads go
// missing; the server aggregates over the received subset (at least one
// upload required). Metrics cover every client with its own current local
// ensemble; unscheduled clients are scored with their stale ensembles.
inline RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                             const FederationConfig& config, std::size_t round, Rng& rng,
                             const std::set<int>& fail_ids = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    RoundReport report;
    report.round = round;

    auto picked = rng.sample_without_replacement(clients.size(), config.sample_size);
    std::sort(picked.begin(), picked.end());
    for (std::size_t p : picked) report.scheduled.push_back(static_cast<int>(p));

    // broadcast -> local SVGD -> upload, one serialized hop each way
    std::vector<Matrix> uploads;
    for (std::size_t p : picked) {
        ClientState& client = clients[p];
        const ParticleMsg broadcast{static_cast<std::uint32_t>(round), kBroadcastClientId,
                                    server.global_particles};
        const auto down = encode_message(broadcast);
        server.comm_bytes += down.size();
        ++server.messages;
        const ParticleMsg received = decode_message(down);

        client.particles = client_local_update(client, received.particles, config, round);

        if (fail_ids.count(client.id)) continue;  // marked-missing upload
        const ParticleMsg upload{static_cast<std::uint32_t>(round),
                                 static_cast<std::uint32_t>(client.id), client.particles};
        const auto up = encode_message(upload);
        server.comm_bytes += up.size();
        ++server.messages;
        uploads.push_back(decode_message(up).particles);
    }
    require(!uploads.empty(), "run_round: no uploads received");

    if (config.mode == AggregationMode::Wba) {
        server.global_particles =
            aggregate(server.global_particles, uploads, config.aggregation);
    } else {
        server.global_particles = param_average(uploads);
    }

    // per-client metrics on held-out shards
    double w2_sum = 0.0;
    report.per_client_accuracy.resize(clients.size());
    report.per_client_ece.resize(clients.size());
    if (config.global_eval) report.per_client_global_accuracy.resize(clients.size());
    for (std::size_t k = 0; k < clients.size(); ++k) {
        const auto eval =
            evaluate_ensemble(clients[k].particles, server.shape, clients[k].shard.test);
        report.per_client_accuracy[k] = eval.accuracy;
        report.per_client_ece[k] = eval.ece;
        if (config.global_eval)
            report.per_client_global_accuracy[k] =
                evaluate_ensemble(server.global_particles, server.shape, clients[k].shard.test)
                    .accuracy;
        w2_sum += w2_distance(clients[k].particles, server.global_particles);
    }
    report.mean_w2_client_to_global = w2_sum / static_cast<double>(clients.size());
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return report;
}

// All rounds; reports come back in order. The scheduling stream is one child
// of the run seed consumed sequentially across rounds.
inline std::vector<RoundReport> run_experiment(ServerState& server,
                                               std::vector<ClientState>& clients,
                                               const FederationConfig& config) {
    Rng schedule_rng = Rng(config.seed).split(rng_tag::schedule);
    std::vector<RoundReport> reports;
    reports.reserve(config.rounds);
    for (std::size_t r = 0; r < config.rounds; ++r)
        reports.push_back(run_round(server, clients, config, r, schedule_rng));
    return reports;
}

}  // namespace fedwba
