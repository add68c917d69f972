// Acceptance suite: one pass/fail line per criterion.
//
//   acceptance                 run all criteria
//   acceptance --criterion N   run a single criterion
//
// Criterion 7 needs the four MNIST IDX files; it looks in $MNIST_DIR, then
// ./data/mnist, and reports [SKIP] when the data is not supplied.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fedwba/config.hpp"
#include "fedwba/experiment.hpp"
#include "fedwba/kde.hpp"
#include "fedwba/model.hpp"
#include "fedwba/validate.hpp"

using namespace fedwba;

namespace {

enum class Status { Pass, Fail, Skip };

struct CriterionResult {
    Status status = Status::Fail;
    std::string detail;
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// 1. OT oracle equivalence: 200 random instances, N in {2..6}, M in {1,2,5},
//    assignment objective == N!-enumeration minimum within 1e-9. < 10 s.
CriterionResult criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = ot_oracle_suite(7, 200, 1e-9);
    const double secs = elapsed_s(t0);
    const bool ok = r.pass && secs < 10.0;
    return {ok ? Status::Pass : Status::Fail, fmt("%s (%.2fs)", r.detail.c_str(), secs)};
}

// 2. SVGD Gaussian recovery: 1D N(0,1) target, 50 particles from N(5,1),
//    500 iterations, median RBF; mean within 0.05, std within 10%, 10 seeds. < 5 s.
CriterionResult criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    TargetGrad score = [](std::size_t, std::span<const double> theta,
                          std::span<double> grad) { grad[0] = -theta[0]; };
    double worst_mean = 0.0, worst_std_err = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng init_rng = Rng(100).split(seed);
        Matrix init(50, 1);
        for (double& v : init.data) v = 5.0 + init_rng.normal();
        SvgdConfig config;
        config.iterations = 500;
        config.step_eta = 0.05;
        Rng rng = Rng(200).split(seed);
        const Matrix out = run_svgd(init, score, config, rng);

        double mean = 0.0;
        for (double v : out.data) mean += v;
        mean /= 50.0;
        double var = 0.0;
        for (double v : out.data) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / 49.0);
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_std_err = std::max(worst_std_err, std::abs(sd - 1.0));
        if (std::abs(mean) > 0.05 || std::abs(sd - 1.0) > 0.1) ok = false;
    }
    const double secs = elapsed_s(t0);
    if (secs >= 5.0) ok = false;
    return {ok ? Status::Pass : Status::Fail,
            fmt("worst |mean| = %.4f (<= 0.05), worst |std-1| = %.4f (<= 0.1) over 10 seeds "
                "(%.2fs)",
                worst_mean, worst_std_err, secs)};
}

// 3. Local convergence check: conjugate 2D Gaussian, Gaussian-fit KL
//    nonincreasing in >= 95% of post-burn-in iterations, final < 0.05 x initial,
//    10 seeds. < 30 s.
CriterionResult criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = kl_monotonicity_suite();
    const double secs = elapsed_s(t0);
    const bool ok = r.pass && secs < 30.0;
    return {ok ? Status::Pass : Status::Fail, fmt("%s (%.2fs)", r.detail.c_str(), secs)};
}

// 4. Global convergence check: K=5, 1D Gaussian-mean model, analytic posteriors
//    sampled as 10-particle ensembles; median W2 to the true mean strictly
//    decreasing across s in {10,100,1000}, 10 seeds. < 30 s.
CriterionResult criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = barycenter_contraction_suite();
    const double secs = elapsed_s(t0);
    const bool ok = r.pass && secs < 30.0;
    return {ok ? Status::Pass : Status::Fail, fmt("%s (%.2fs)", r.detail.c_str(), secs)};
}

// 5. Barycenter closed-form optimality: 50 random instances, 100 random
//    perturbations never decrease objective_value (tolerance 1e-10). < 10 s.
CriterionResult criterion_5() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(500);
    std::size_t violations = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 2 + rng.uniform_index(4);
        const std::size_t m = 1 + rng.uniform_index(3);
        const std::size_t k = 1 + rng.uniform_index(4);
        auto cloud = [&] {
            Matrix c(n, m);
            for (double& v : c.data) v = 2.0 * rng.normal();
            return c;
        };
        const Matrix global = cloud();
        std::vector<Matrix> clients;
        for (std::size_t c = 0; c < k; ++c) clients.push_back(cloud());
        std::vector<TransportPlan> plans;
        for (const Matrix& c : clients)
            plans.push_back(solve_exact(cost_matrix(global, c)).plan);
        const Matrix out = aggregate(global, clients, AggregationConfig{});
        const double base = objective_value(out, clients, plans);
        for (int t = 0; t < 100; ++t) {
            Matrix moved = out;
            for (double& v : moved.data) v += 1e-3 * rng.normal();
            if (objective_value(moved, clients, plans) < base - 1e-10) ++violations;
        }
    }
    const double secs = elapsed_s(t0);
    const bool ok = violations == 0 && secs < 10.0;
    return {ok ? Status::Pass : Status::Fail,
            fmt("%zu decreasing perturbations out of 5000 (%.2fs)", violations, secs)};
}

// 6. Gradient correctness: model and KDE gradients vs central finite
//    differences on 20 random instances each, per the module invariants. < 10 s.
CriterionResult criterion_6() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(600);

    bool model_ok = true;
    for (int inst = 0; inst < 20; ++inst) {
        const MlpShape shape{3 + rng.uniform_index(3), 3 + rng.uniform_index(3),
                             2 + rng.uniform_index(3)};
        std::vector<double> theta(shape.flat_len());
        for (double& v : theta) v = 0.5 * rng.normal();
        Matrix x(3, shape.input_dim);
        for (double& v : x.data) v = rng.uniform();
        std::vector<int> y(3);
        for (int& l : y) l = static_cast<int>(rng.uniform_index(shape.classes));

        std::vector<double> grad(shape.flat_len());
        grad_log_likelihood(shape, theta, x, y, grad);
        std::size_t good = 0;
        const double eps = 1e-5;
        for (std::size_t d = 0; d < shape.flat_len(); ++d) {
            auto tp = theta, tm = theta;
            tp[d] += eps;
            tm[d] -= eps;
            const double fd = (log_likelihood(shape, tp, x, y) -
                               log_likelihood(shape, tm, x, y)) /
                              (2.0 * eps);
            const double denom = std::max(std::abs(fd), std::abs(grad[d]));
            if (denom < 1e-12 || std::abs(fd - grad[d]) / denom <= 1e-5 ||
                std::abs(fd - grad[d]) <= 1e-7)
                ++good;
        }
        if (static_cast<double>(good) < 0.99 * static_cast<double>(shape.flat_len()))
            model_ok = false;
    }

    bool kde_ok = true;
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t n = 2 + rng.uniform_index(4), m = 2 + rng.uniform_index(3);
        Matrix particles(n, m);
        for (double& v : particles.data) v = 2.0 * rng.normal();
        const GlobalPrior prior{particles, 0.55};
        std::vector<double> theta(m);
        for (double& v : theta) v = rng.normal();
        const auto g = grad_log_density(prior, theta);
        const double eps = 1e-6;
        for (std::size_t d = 0; d < m; ++d) {
            auto tp = theta, tm = theta;
            tp[d] += eps;
            tm[d] -= eps;
            const double fd = (log_density(prior, tp) - log_density(prior, tm)) / (2.0 * eps);
            const double denom = std::max({std::abs(fd), std::abs(g[d]), 1e-9});
            if (std::abs(fd - g[d]) / denom > 1e-6 && std::abs(fd - g[d]) > 1e-9)
                kde_ok = false;
        }
    }
    const double secs = elapsed_s(t0);
    const bool ok = model_ok && kde_ok && secs < 10.0;
    return {ok ? Status::Pass : Status::Fail,
            fmt("model FD %s, kde FD %s over 20 instances each (%.2fs)",
                model_ok ? "ok" : "FAILED", kde_ok ? "ok" : "FAILED", secs)};
}

std::string find_mnist_dir() {
    std::vector<std::string> candidates;
    if (const char* env = std::getenv("MNIST_DIR")) candidates.push_back(env);
    candidates.push_back("data/mnist");
    candidates.push_back("../data/mnist");
    for (const auto& dir : candidates) {
        if (std::filesystem::exists(dir + "/train-images-idx3-ubyte") &&
            std::filesystem::exists(dir + "/train-labels-idx1-ubyte") &&
            std::filesystem::exists(dir + "/t10k-images-idx3-ubyte") &&
            std::filesystem::exists(dir + "/t10k-labels-idx1-ubyte"))
            return dir;
    }
    return "";
}

// 7. Desk-scale end-to-end: MNIST 5,000 train / 1,000 test, K=10, Z=2, N=10,
//    784-100-10 MLP, 30 SVGD iterations/round, 50 rounds; final mean
//    per-client accuracy >= 0.90 and mean ECE <= 0.05; wall < 30 min.
CriterionResult criterion_7() {
    const std::string dir = find_mnist_dir();
    if (dir.empty())
        return {Status::Skip,
                "MNIST IDX files not found; set MNIST_DIR to a directory holding "
                "train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte, "
                "t10k-labels-idx1-ubyte"};

    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg;
    cfg.data.source = "mnist";
    cfg.data.mnist_images = dir + "/train-images-idx3-ubyte";
    cfg.data.mnist_labels = dir + "/train-labels-idx1-ubyte";
    cfg.data.mnist_test_images = dir + "/t10k-images-idx3-ubyte";
    cfg.data.mnist_test_labels = dir + "/t10k-labels-idx1-ubyte";
    cfg.data.limit = 5000;
    cfg.data.test_limit = 1000;
    cfg.data.labels_per_client = 5;
    cfg.data.test_fraction = 1.0 / 6.0;  // ~1,000 held out of the 6,000 pooled images
    cfg.fed.num_clients = 10;
    cfg.fed.sample_size = 2;
    cfg.fed.particles = 10;
    cfg.fed.hidden_dim = 100;
    cfg.fed.rounds = 50;
    cfg.fed.svgd.iterations = 30;
    cfg.fed.seed = 7;

    const RunSummary s = run_experiment_to_dir(cfg, "");
    const double secs = elapsed_s(t0);
    const bool ok = s.final_mean_acc >= 0.90 && s.final_mean_ece <= 0.05 && secs < 1800.0;
    return {ok ? Status::Pass : Status::Fail,
            fmt("final mean acc = %.4f (>= 0.90), mean ece = %.4f (<= 0.05), wall = %.0fs "
                "(< 1800s)",
                s.final_mean_acc, s.final_mean_ece, secs)};
}

// 8. Aggregation comparison on skewed synth blobs (10 classes, dim 20) under
//    criterion-7's protocol: mean final accuracy of wba >= param-avg over 5
//    paired seeds.
CriterionResult criterion_8() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig base;
    base.data.source = "synth";
    base.data.classes = 10;
    base.data.dim = 20;
    base.data.per_class = 80;
    base.data.spread = 0.25;
    base.data.labels_per_client = 5;
    base.fed.num_clients = 10;
    base.fed.sample_size = 2;
    base.fed.particles = 10;
    base.fed.hidden_dim = 100;
    base.fed.rounds = 50;
    base.fed.svgd.iterations = 30;

    double wba_sum = 0.0, avg_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExperimentConfig wba = base;
        wba.fed.seed = seed;
        wba.fed.mode = AggregationMode::Wba;
        wba_sum += run_experiment_to_dir(wba, "").final_mean_acc;

        ExperimentConfig avg = base;
        avg.fed.seed = seed;
        avg.fed.mode = AggregationMode::ParamAvg;
        avg_sum += run_experiment_to_dir(avg, "").final_mean_acc;
    }
    const double wba_mean = wba_sum / 5.0, avg_mean = avg_sum / 5.0;
    const double secs = elapsed_s(t0);
    return {wba_mean >= avg_mean ? Status::Pass : Status::Fail,
            fmt("mean final acc: wba = %.4f vs param-avg = %.4f over 5 paired seeds (%.0fs)",
                wba_mean, avg_mean, secs)};
}

// 9. Determinism: two executions of the same config produce byte-identical
//    per-round CSVs and final ensemble files.
CriterionResult criterion_9() {
    namespace fs = std::filesystem;
    const auto root = fs::temp_directory_path() / "fedwba_acceptance_det";
    fs::remove_all(root);

    ExperimentConfig cfg;
    cfg.data.source = "synth";
    cfg.data.classes = 4;
    cfg.data.dim = 6;
    cfg.data.per_class = 40;
    cfg.data.labels_per_client = 2;
    cfg.fed.num_clients = 4;
    cfg.fed.sample_size = 2;
    cfg.fed.particles = 4;
    cfg.fed.hidden_dim = 6;
    cfg.fed.rounds = 3;
    cfg.fed.svgd.iterations = 8;
    cfg.fed.seed = 99;

    const std::string a = (root / "a").string(), b = (root / "b").string();
    run_experiment_to_dir(cfg, a);
    run_experiment_to_dir(cfg, b);

    auto same_bytes = [](const std::string& x, const std::string& y) {
        return read_bytes(x) == read_bytes(y);
    };
    bool ok = same_bytes(a + "/rounds.csv", b + "/rounds.csv");
    ok = ok && same_bytes(a + "/ensemble_global.bin", b + "/ensemble_global.bin");
    for (std::size_t k = 0; k < cfg.fed.num_clients && ok; ++k) {
        const std::string name = "/ensemble_client_" + std::to_string(k) + ".bin";
        ok = same_bytes(a + name, b + name);
    }
    return {ok ? Status::Pass : Status::Fail,
            ok ? "rounds.csv and all final ensembles byte-identical across two runs"
               : "artifact bytes differ between identically seeded runs"};
}

// 10. Communication accounting: comm_bytes_total matches the closed-form
//     wire arithmetic for N in {5, 10, 20}.
CriterionResult criterion_10() {
    ExperimentConfig base;
    base.data.source = "synth";
    base.data.classes = 4;
    base.data.dim = 6;
    base.data.per_class = 40;
    base.data.labels_per_client = 2;
    base.fed.num_clients = 4;
    base.fed.sample_size = 2;
    base.fed.hidden_dim = 5;
    base.fed.rounds = 2;
    base.fed.svgd.iterations = 4;
    base.fed.seed = 5;

    const MlpShape shape{6, 5, 4};
    const std::size_t m = shape.flat_len();
    std::string detail;
    for (const std::size_t n : {std::size_t(5), std::size_t(10), std::size_t(20)}) {
        ExperimentConfig cfg = base;
        cfg.fed.particles = n;
        const RunSummary s = run_experiment_to_dir(cfg, "");
        const std::uint64_t expected =
            std::uint64_t(cfg.fed.rounds) * cfg.fed.sample_size * 2 * message_size(n, m);
        detail += fmt("N=%zu: %llu bytes (expected %llu); ", n,
                      static_cast<unsigned long long>(s.comm_bytes_total),
                      static_cast<unsigned long long>(expected));
        if (s.comm_bytes_total != expected) return {Status::Fail, detail};
    }
    return {Status::Pass, detail};
}

struct Criterion {
    int number;
    const char* title;
    std::function<CriterionResult()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {1, "OT oracle equivalence", criterion_1},
        {2, "SVGD Gaussian recovery", criterion_2},
        {3, "local convergence (KL monotonicity)", criterion_3},
        {4, "global convergence (barycenter contraction)", criterion_4},
        {5, "barycenter closed-form optimality", criterion_5},
        {6, "gradient correctness vs finite differences", criterion_6},
        {7, "desk-scale MNIST end-to-end", criterion_7},
        {8, "wba vs param-avg aggregation", criterion_8},
        {9, "determinism of artifacts", criterion_9},
        {10, "communication accounting", criterion_10},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    int selected = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            selected = std::atoi(argv[++i]);
    }

    bool any_fail = false;
    for (const auto& c : criteria()) {
        if (selected != 0 && c.number != selected) continue;
        const CriterionResult r = c.run();
        const char* tag = r.status == Status::Pass ? "PASS"
                          : r.status == Status::Skip ? "SKIP"
                                                     : "FAIL";
        std::printf("[%s] criterion %d: %s — %s\n", tag, c.number, c.title,
                    r.detail.c_str());
        std::fflush(stdout);
        if (r.status == Status::Fail) any_fail = true;
    }
    return any_fail ? 1 : 0;
}
