#include <catch2/catch.hpp>

#include "fedwba/config.hpp"
#include "fedwba/experiment.hpp"

using namespace fedwba;

TEST_CASE("defaults match the documented values") {
    const ExperimentConfig cfg;
    CHECK(cfg.fed.particles == 10);
    CHECK(cfg.fed.kde_bandwidth == 0.55);
    CHECK(cfg.fed.svgd.step_eta == 0.01);
    CHECK(cfg.fed.svgd.adagrad_lambda == 1e-8);
    CHECK(cfg.fed.svgd.momentum == 0.9);
    CHECK(cfg.fed.svgd.kernel.kind == KernelKind::Rbf);
    CHECK(cfg.fed.svgd.kernel.bandwidth == 0.0);  // median heuristic
    CHECK(cfg.fed.svgd.kernel.poly_degree == 2.0);
    CHECK(cfg.fed.svgd.kernel.sigmoid_alpha == 1.0);
    CHECK(cfg.fed.svgd.kernel.sigmoid_bias == 0.0);
    CHECK(cfg.fed.init_scale == 0.1);
    CHECK(cfg.fed.hidden_dim == 100);
    CHECK(cfg.fed.aggregation.fixed_point_iters == 1);
    CHECK(cfg.data.labels_per_client == 5);
    CHECK(cfg.data.test_fraction == 0.2);
}

TEST_CASE("config snapshot round-trips to an identical rendering") {
    ExperimentConfig cfg;
    cfg.fed.seed = 1234;
    cfg.fed.svgd.kernel.kind = KernelKind::Laplacian;
    cfg.fed.mode = AggregationMode::ParamAvg;
    cfg.data.spread = 0.17;
    cfg.ablate_grids["particles"] = "5,10,20";

    const std::string text = config_to_text(cfg);
    const ExperimentConfig back = parse_config_text(text);
    CHECK(config_to_text(back) == text);
    CHECK(back.fed.seed == 1234);
    CHECK(back.fed.svgd.kernel.kind == KernelKind::Laplacian);
    CHECK(back.fed.mode == AggregationMode::ParamAvg);
    CHECK(back.ablate_grids.at("particles") == "5,10,20");
}

TEST_CASE("unknown and malformed fields raise field-level errors") {
    CHECK_THROWS_WITH(parse_config_text("[federation]\nbogus = 1\n"),
                      Catch::Contains("federation.bogus"));
    CHECK_THROWS_WITH(parse_config_text("[svgd]\neta = banana\n"),
                      Catch::Contains("svgd.eta"));
    CHECK_THROWS_WITH(parse_config_text("[svgd]\nkernel = triangular\n"),
                      Catch::Contains("kernel"));
    CHECK_THROWS_WITH(parse_config_text("[federation]\naggregation = median\n"),
                      Catch::Contains("aggregation"));
    CHECK_THROWS_AS(parse_config_text("no equals sign here\n"), ConfigError);
}

TEST_CASE("invalid combinations fail validation with a named field") {
    CHECK_THROWS_WITH(
        parse_config_text("[federation]\nclients = 3\nsample_size = 4\n"),
        Catch::Contains("sample_size"));
    CHECK_THROWS_WITH(parse_config_text("[data]\nsource = csv\n"),
                      Catch::Contains("data.source"));
    CHECK_THROWS_WITH(parse_config_text("[data]\nsource = mnist\n"),
                      Catch::Contains("mnist_images"));
}

TEST_CASE("bandwidth accepts 'med' as the median heuristic") {
    const auto cfg = parse_config_text("[svgd]\nbandwidth = med\n");
    CHECK(cfg.fed.svgd.kernel.bandwidth == 0.0);
    const auto fixed = parse_config_text("[svgd]\nbandwidth = 7.5\n");
    CHECK(fixed.fed.svgd.kernel.bandwidth == 7.5);
}

TEST_CASE("missing config file raises a ConfigError naming the path") {
    CHECK_THROWS_WITH(load_config_file("/no/such/config.ini"),
                      Catch::Contains("/no/such/config.ini"));
}

TEST_CASE("ablation axes and grids") {
    const auto axes = ablation_axes();
    CHECK(axes.size() == 10);
    for (const auto& axis : axes) CHECK_FALSE(default_grid(axis).empty());
    CHECK(default_grid("kernel").size() == 4);
    CHECK(default_grid("aggregation") == std::vector<std::string>{"wba", "param-avg"});
    CHECK_THROWS_AS(default_grid("flux"), ConfigError);

    ExperimentConfig base;
    const auto with_particles = apply_axis_value(base, "particles", "20");
    CHECK(with_particles.fed.particles == 20);
    const auto with_ratio = apply_axis_value(base, "schedule_ratio", "0.5");
    CHECK(with_ratio.fed.sample_size == 5);  // 0.5 * 10 clients
    const auto with_med = apply_axis_value(base, "bandwidth", "med");
    CHECK(with_med.fed.svgd.kernel.bandwidth == 0.0);
}
