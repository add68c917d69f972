#pragma once

// Experiment configuration: a flat human-readable key-value file with
// [section] headers mirroring the module configs. Every default lives here
// and is printed by `--print-defaults`; a parsed snapshot round-trips to an
// identical run.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fedwba/federation.hpp"
#include "fedwba/numerics.hpp"

namespace fedwba {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    std::string source = "synth";  // synth | mnist
    // synth
    std::size_t classes = 10;
    std::size_t dim = 20;
    std::size_t per_class = 120;
    double spread = 0.25;
    // mnist
    std::string mnist_images;
    std::string mnist_labels;
    std::string mnist_test_images;  // optional second file pair, concatenated
    std::string mnist_test_labels;
    std::size_t limit = 0;       // 0 = all; cap on the first file pair
    std::size_t test_limit = 0;  // cap on the second pair
    // partition
    std::size_t labels_per_client = 5;
    double test_fraction = 0.2;

    void validate() const {
        if (source != "synth" && source != "mnist")
            throw ConfigError("data.source must be 'synth' or 'mnist', got '" + source + "'");
        if (source == "mnist" && (mnist_images.empty() || mnist_labels.empty()))
            throw ConfigError("data.mnist_images and data.mnist_labels are required "
                              "when data.source = mnist");
        if (test_fraction < 0.0 || test_fraction >= 1.0)
            throw ConfigError("data.test_fraction must be in [0, 1)");
    }
};

struct ExperimentConfig {
    FederationConfig fed;
    DataConfig data;
    std::map<std::string, std::string> ablate_grids;  // axis -> comma list override

    void validate() const {
        try {
            fed.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        data.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out;
    in >> out;
    if (in.fail())
        throw ConfigError("config: field '" + key + "' has invalid value '" + value + "'");
    std::string rest;
    in >> rest;
    if (!rest.empty())
        throw ConfigError("config: field '" + key + "' has trailing junk '" + rest + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: field '" + key + "' must be true/false, got '" + value + "'");
}

inline KernelKind parse_kernel(const std::string& key, const std::string& value) {
    if (value == "rbf") return KernelKind::Rbf;
    if (value == "laplacian") return KernelKind::Laplacian;
    if (value == "polynomial") return KernelKind::Polynomial;
    if (value == "sigmoid") return KernelKind::Sigmoid;
    throw ConfigError("config: field '" + key +
                      "' must be rbf|laplacian|polynomial|sigmoid, got '" + value + "'");
}

}  // namespace detail

// Applies one `section.key = value` setting; throws ConfigError naming the
// field on anything unknown or malformed.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key,
                          const std::string& value) {
    using detail::parse_bool;
    using detail::parse_kernel;
    using detail::parse_number;
    auto& fed = cfg.fed;
    auto& svgd = fed.svgd;
    auto& data = cfg.data;

    if (key == "federation.clients") fed.num_clients = parse_number<std::size_t>(key, value);
    else if (key == "federation.sample_size") fed.sample_size = parse_number<std::size_t>(key, value);
    else if (key == "federation.rounds") fed.rounds = parse_number<std::size_t>(key, value);
    else if (key == "federation.particles") fed.particles = parse_number<std::size_t>(key, value);
    else if (key == "federation.seed") fed.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "federation.init_scale") fed.init_scale = parse_number<double>(key, value);
    else if (key == "federation.kde_bandwidth") fed.kde_bandwidth = parse_number<double>(key, value);
    else if (key == "federation.hidden_dim") fed.hidden_dim = parse_number<std::size_t>(key, value);
    else if (key == "federation.workers") fed.workers = parse_number<std::size_t>(key, value);
    else if (key == "federation.use_prior") fed.use_prior = parse_bool(key, value);
    else if (key == "federation.global_eval") fed.global_eval = parse_bool(key, value);
    else if (key == "federation.aggregation") {
        if (value == "wba") fed.mode = AggregationMode::Wba;
        else if (value == "param-avg") fed.mode = AggregationMode::ParamAvg;
        else throw ConfigError("config: field '" + key + "' must be wba|param-avg, got '" +
                               value + "'");
    }
    else if (key == "svgd.iterations") svgd.iterations = parse_number<std::size_t>(key, value);
    else if (key == "svgd.eta") svgd.step_eta = parse_number<double>(key, value);
    else if (key == "svgd.lambda") svgd.adagrad_lambda = parse_number<double>(key, value);
    else if (key == "svgd.momentum") svgd.momentum = parse_number<double>(key, value);
    else if (key == "svgd.minibatch") svgd.minibatch = parse_number<std::size_t>(key, value);
    else if (key == "svgd.kernel") svgd.kernel.kind = parse_kernel(key, value);
    else if (key == "svgd.bandwidth") {
        if (value == "med") svgd.kernel.bandwidth = 0.0;
        else svgd.kernel.bandwidth = parse_number<double>(key, value);
    }
    else if (key == "svgd.poly_degree") svgd.kernel.poly_degree = parse_number<double>(key, value);
    else if (key == "svgd.sigmoid_alpha") svgd.kernel.sigmoid_alpha = parse_number<double>(key, value);
    else if (key == "svgd.sigmoid_bias") svgd.kernel.sigmoid_bias = parse_number<double>(key, value);
    else if (key == "aggregation.fixed_point_iters")
        fed.aggregation.fixed_point_iters = parse_number<std::size_t>(key, value);
    else if (key == "data.source") data.source = value;
    else if (key == "data.classes") data.classes = parse_number<std::size_t>(key, value);
    else if (key == "data.dim") data.dim = parse_number<std::size_t>(key, value);
    else if (key == "data.per_class") data.per_class = parse_number<std::size_t>(key, value);
    else if (key == "data.spread") data.spread = parse_number<double>(key, value);
    else if (key == "data.mnist_images") data.mnist_images = value;
    else if (key == "data.mnist_labels") data.mnist_labels = value;
    else if (key == "data.mnist_test_images") data.mnist_test_images = value;
    else if (key == "data.mnist_test_labels") data.mnist_test_labels = value;
    else if (key == "data.limit") data.limit = parse_number<std::size_t>(key, value);
    else if (key == "data.test_limit") data.test_limit = parse_number<std::size_t>(key, value);
    else if (key == "data.labels_per_client")
        data.labels_per_client = parse_number<std::size_t>(key, value);
    else if (key == "data.test_fraction") data.test_fraction = parse_number<double>(key, value);
    else if (key.rfind("ablate.", 0) == 0) cfg.ablate_grids[key.substr(7)] = value;
    else throw ConfigError("config: unknown field '" + key + "'");
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        apply_setting(cfg, section.empty() ? key : section + "." + key, value);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config file not found: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

// Full snapshot; parsing this text reproduces the config exactly.
inline std::string config_to_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        // shortest rendering that parses back to the same double
        for (int prec = 6; prec <= 17; ++prec) {
            std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
            if (std::strtod(buf, nullptr) == v) break;
        }
        return std::string(buf);
    };
    out << "[federation]\n";
    out << "clients = " << cfg.fed.num_clients << "\n";
    out << "sample_size = " << cfg.fed.sample_size << "\n";
    out << "rounds = " << cfg.fed.rounds << "\n";
    out << "particles = " << cfg.fed.particles << "\n";
    out << "seed = " << cfg.fed.seed << "\n";
    out << "init_scale = " << num(cfg.fed.init_scale) << "\n";
    out << "kde_bandwidth = " << num(cfg.fed.kde_bandwidth) << "\n";
    out << "hidden_dim = " << cfg.fed.hidden_dim << "\n";
    out << "workers = " << cfg.fed.workers << "\n";
    out << "aggregation = " << aggregation_name(cfg.fed.mode) << "\n";
    out << "use_prior = " << (cfg.fed.use_prior ? "true" : "false") << "\n";
    out << "global_eval = " << (cfg.fed.global_eval ? "true" : "false") << "\n";
    out << "\n[svgd]\n";
    out << "iterations = " << cfg.fed.svgd.iterations << "\n";
    out << "eta = " << num(cfg.fed.svgd.step_eta) << "\n";
    out << "lambda = " << num(cfg.fed.svgd.adagrad_lambda) << "\n";
    out << "momentum = " << num(cfg.fed.svgd.momentum) << "\n";
    out << "minibatch = " << cfg.fed.svgd.minibatch << "\n";
    out << "kernel = " << kernel_name(cfg.fed.svgd.kernel.kind) << "\n";
    out << "bandwidth = " << num(cfg.fed.svgd.kernel.bandwidth) << "  # 0 = median heuristic\n";
    out << "poly_degree = " << num(cfg.fed.svgd.kernel.poly_degree) << "\n";
    out << "sigmoid_alpha = " << num(cfg.fed.svgd.kernel.sigmoid_alpha) << "\n";
    out << "sigmoid_bias = " << num(cfg.fed.svgd.kernel.sigmoid_bias) << "\n";
    out << "\n[aggregation]\n";
    out << "fixed_point_iters = " << cfg.fed.aggregation.fixed_point_iters << "\n";
    out << "\n[data]\n";
    out << "source = " << cfg.data.source << "\n";
    out << "classes = " << cfg.data.classes << "\n";
    out << "dim = " << cfg.data.dim << "\n";
    out << "per_class = " << cfg.data.per_class << "\n";
    out << "spread = " << num(cfg.data.spread) << "\n";
    out << "mnist_images = " << cfg.data.mnist_images << "\n";
    out << "mnist_labels = " << cfg.data.mnist_labels << "\n";
    out << "mnist_test_images = " << cfg.data.mnist_test_images << "\n";
    out << "mnist_test_labels = " << cfg.data.mnist_test_labels << "\n";
    out << "limit = " << cfg.data.limit << "\n";
    out << "test_limit = " << cfg.data.test_limit << "\n";
    out << "labels_per_client = " << cfg.data.labels_per_client << "\n";
    out << "test_fraction = " << num(cfg.data.test_fraction) << "\n";
    if (!cfg.ablate_grids.empty()) {
        out << "\n[ablate]\n";
        for (const auto& [k, v] : cfg.ablate_grids) out << k << " = " << v << "\n";
    }
    return out.str();
}

inline std::string default_config_text() { return config_to_text(ExperimentConfig{}); }

}  // namespace fedwba
