#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "relsyn/pipeline.hpp"

#define CHECK_NEAR(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE(std::fabs((a) - (b)) <= (tol))

using namespace relsyn;

namespace {

ScenarioConfig small_config() {
    ScenarioConfig cfg = default_config();
    cfg.cells = {6, 6, 6, 6};
    cfg.input_levels = 3;
    cfg.runs = 60;
    cfg.max_steps = 40;
    cfg.sample_trajectories = 3;
    cfg.seed = 99;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("pipeline composes the three compensators over one grid") {
    ScenarioConfig cfg = small_config();
    PipelineArtifacts art = run_pipeline(cfg);

    CHECK(art.stage_log.size() == 5);
    CHECK(art.abs.num_states() == 6 * 6 * 6 * 6);
    CHECK(art.abs.num_inputs() == 3);
    CHECK(art.result.converged);

    // Reduction and ambiguity carry no output slack, so the chain slack is
    // the discretization slack alone.
    CHECK(art.mor.epsilon == 0.0);
    CHECK(art.mor.delta_sup() == 0.0);
    CHECK(art.ambiguity.epsilon == 0.0);
    CHECK_NEAR(art.chain.epsilon, art.discretization.epsilon, 1e-15);
    CHECK(art.label_margin_used == art.chain.epsilon);

    REQUIRE(art.chain.delta.size() == static_cast<size_t>(art.abs.num_states()));
    REQUIRE(art.ambiguity.delta.size() == art.chain.delta.size());
    double d3 = art.discretization.delta_sup();
    for (size_t i = 0; i < art.chain.delta.size(); i += 97) {
        double expect = std::min(1.0, art.ambiguity.delta[i] + d3);
        CHECK_NEAR(art.chain.delta[i], expect, 1e-15);
        CHECK(art.chain.delta[i] >= art.ambiguity.delta[i]);
    }

    // The relation lands concrete 9D states on the 4D grid coordinates.
    CHECK(art.chain.relation.map.rows == 4);
    CHECK(art.chain.relation.map.cols == 9);
    std::vector<double> probe = {0.1, 1.25, 2.5, 0.0, 0.0, 0.0, 3.0, 4.0, 0.2};
    std::vector<double> lifted = art.chain.relation.map.apply(probe);
    CHECK(lifted == std::vector<double>({1.25, 2.5, 3.0, 4.0}));

    SUBCASE("initial cells and their bounds") {
        for (const auto& init : art.cfg.initial_states) {
            int cell = art.initial_cell(init);
            REQUIRE(cell >= 0);
            double v = art.result.initial_value(cell, art.dfa, art.cell_labels);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(art.initial_cell({-1.0, 0.0, 1.0, 0.0}) == -1);
    }

    SUBCASE("rerun is bit-identical") {
        PipelineArtifacts again = run_pipeline(cfg);
        CHECK(again.result.value == art.result.value);
        CHECK(again.result.policy == art.result.policy);
        CHECK(again.chain.delta == art.chain.delta);
        CHECK(again.cell_labels == art.cell_labels);
    }

    SUBCASE("stage failures carry the stage tag") {
        // 17 atoms pass config validation but overflow the automaton alphabet.
        ScenarioConfig bad = cfg;
        bad.formula = "";
        for (int i = 0; i < 17; ++i) {
            std::string name = "a" + std::to_string(i);
            bad.formula += (i ? " | " : "") + name;
            bad.labels.add(name, Box({0.0, 0.0, 0.75, 0.0}, {3.0, 3.5, 3.75, 5.5}));
        }
        CHECK_THROWS_WITH_AS(run_pipeline(bad), doctest::Contains("synthesis:"),
                             std::runtime_error);
    }
}

TEST_CASE("single-cell grid degenerates to a vacuous bound") {
    ScenarioConfig cfg = small_config();
    cfg.cells = {1, 1, 1, 1};
    PipelineArtifacts art = run_pipeline(cfg);
    // One cell spans the whole space: the deviation hull is maximal and no
    // positive atom survives the label margin, so the bound collapses.
    CHECK(art.discretization.delta_sup() > 0.9);
    for (const auto& init : art.cfg.initial_states) {
        int cell = art.initial_cell(init);
        REQUIRE(cell == 0);
        CHECK(art.result.initial_value(cell, art.dfa, art.cell_labels) <= 1e-12);
    }
}

TEST_CASE("validation verdicts follow the formula and the region of validity") {
    SUBCASE("tautology satisfies immediately") {
        ScenarioConfig cfg = small_config();
        cfg.formula = "true";
        cfg.runs = 40;
        PipelineArtifacts art = run_pipeline(cfg);
        McSummary s = monte_carlo(art, {2.0, 1.0, 2.0, 1.0});
        CHECK(s.satisfied == 40);
        CHECK(s.discarded == 0);
        CHECK(s.p_defined);
        CHECK(s.p_hat == 1.0);
        for (const auto& r : s.records) CHECK(r.exit_step == 0);
    }

    SUBCASE("unreachable goal never satisfies") {
        ScenarioConfig cfg = small_config();
        cfg.formula = "safe U beyond";
        cfg.labels.add("beyond", Box({0.0, 0.0, 0.75, 6.0}, {3.0, 3.5, 3.75, 7.0}));
        cfg.runs = 30;
        cfg.max_steps = 25;
        PipelineArtifacts art = run_pipeline(cfg);
        McSummary s = monte_carlo(art, {2.0, 1.0, 2.2, 1.0});
        CHECK(s.satisfied == 0);
        if (s.p_defined) CHECK(s.p_hat == 0.0);
        CHECK(s.runs == 30);
        CHECK(s.satisfied + s.violated + s.discarded + s.censored == s.runs);
    }

    SUBCASE("starting near the validity edge discards often") {
        ScenarioConfig cfg = small_config();
        cfg.runs = 50;
        cfg.max_steps = 30;
        PipelineArtifacts art = run_pipeline(cfg);
        McSummary s = monte_carlo(art, {2.0, 1.0, 0.80, 1.0});
        CHECK(s.discarded > 0);
        CHECK(s.satisfied + s.violated + s.discarded + s.censored == s.runs);
        if (s.p_defined)
            CHECK_NEAR(s.p_hat,
                       static_cast<double>(s.satisfied) / (s.runs - s.discarded), 1e-15);
    }

    SUBCASE("per-run seeds make worker count irrelevant") {
        ScenarioConfig cfg = small_config();
        cfg.runs = 40;
        cfg.max_steps = 30;
        PipelineArtifacts art1 = run_pipeline(cfg);
        McSummary s1 = monte_carlo(art1, {2.0, 1.0, 2.2, 1.0});
        cfg.workers = 3;
        PipelineArtifacts art3 = run_pipeline(cfg);
        McSummary s3 = monte_carlo(art3, {2.0, 1.0, 2.2, 1.0});
        REQUIRE(s1.records.size() == s3.records.size());
        for (size_t i = 0; i < s1.records.size(); ++i) {
            CHECK(s1.records[i].verdict == s3.records[i].verdict);
            CHECK(s1.records[i].exit_step == s3.records[i].exit_step);
        }
        CHECK(s1.p_hat == s3.p_hat);
    }

    SUBCASE("recorded traces are consistent with their verdicts") {
        ScenarioConfig cfg = small_config();
        cfg.runs = 12;
        cfg.sample_trajectories = 12;
        cfg.max_steps = 30;
        PipelineArtifacts art = run_pipeline(cfg);
        McSummary s = monte_carlo(art, {2.9, 1.3, 2.2, 0.1});
        for (const auto& r : s.records) {
            REQUIRE(!r.states.empty());
            if (r.verdict == RolloutRecord::Verdict::discarded_rov) {
                std::vector<double> xe(r.states.back().begin() + 3, r.states.back().end());
                CHECK_FALSE(art.study.environment.state_space.contains(xe));
            } else {
                CHECK(r.letters.size() == r.states.size());
                // Replay the automaton over the recorded letters.
                int q = art.dfa.initial;
                for (uint32_t l : r.letters) q = art.dfa.step(q, l);
                if (r.verdict == RolloutRecord::Verdict::satisfied)
                    CHECK(art.dfa.accepting[q]);
                if (r.verdict == RolloutRecord::Verdict::violated) CHECK(art.dfa.rejecting[q]);
                if (r.verdict == RolloutRecord::Verdict::censored_horizon) {
                    CHECK_FALSE(art.dfa.accepting[q]);
                    CHECK_FALSE(art.dfa.rejecting[q]);
                    CHECK(r.exit_step == cfg.max_steps);
                }
            }
        }
    }
}

TEST_CASE("summaries count verdicts without simulating") {
    std::vector<RolloutRecord> recs(10);
    for (int i = 0; i < 4; ++i) recs[i].verdict = RolloutRecord::Verdict::satisfied;
    for (int i = 4; i < 6; ++i) recs[i].verdict = RolloutRecord::Verdict::violated;
    for (int i = 6; i < 9; ++i) recs[i].verdict = RolloutRecord::Verdict::discarded_rov;
    recs[9].verdict = RolloutRecord::Verdict::censored_horizon;
    McSummary s = summarize(recs);
    CHECK(s.satisfied == 4);
    CHECK(s.violated == 2);
    CHECK(s.discarded == 3);
    CHECK(s.censored == 1);
    REQUIRE(s.p_defined);
    CHECK_NEAR(s.p_hat, 4.0 / 7.0, 1e-15);
    BinomialInterval ci = clopper_pearson(4, 7, 0.95);
    CHECK(s.ci_lo == ci.lo);
    CHECK(s.ci_hi == ci.hi);

    std::vector<RolloutRecord> all_gone(5);
    for (auto& r : all_gone) r.verdict = RolloutRecord::Verdict::discarded_rov;
    McSummary undefined = summarize(all_gone);
    CHECK_FALSE(undefined.p_defined);
    CHECK(undefined.discarded == 5);
}

TEST_CASE("corner enumeration and the default validation parameters") {
    Box tb({0.79, 0.79}, {0.81, 0.81});
    auto corners = theta_corners(tb);
    REQUIRE(corners.size() == 4);
    CHECK(corners[0] == std::vector<double>({0.79, 0.79}));
    CHECK(corners[3] == std::vector<double>({0.81, 0.81}));
    Box flat({0.8, 0.79}, {0.8, 0.81});
    CHECK(theta_corners(flat).size() == 2);

    ScenarioConfig cfg = small_config();
    cfg.runs = 8;
    cfg.max_steps = 10;
    PipelineArtifacts art = run_pipeline(cfg);
    std::vector<double> th = default_theta_true(art);
    REQUIRE(th.size() == 2);
    CHECK(art.study.theta_box.contains(th));

    CHECK_THROWS_AS(monte_carlo(art, {2.0, 1.0, 2.0, 1.0}, {0.5, 0.8}),
                    std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo(art, {2.0, 1.0}), std::invalid_argument);

    SUBCASE("sweeping visits every corner per initial state") {
        ScenarioConfig sweep = cfg;
        sweep.sweep_theta_corners = true;
        sweep.runs = 5;
        sweep.initial_states = {{2.0, 1.0, 2.2, 1.0}};
        PipelineArtifacts art2 = run_pipeline(sweep);
        std::vector<McRun> validation = run_validation(art2);
        REQUIRE(validation.size() == 4);
        for (size_t i = 0; i < 4; ++i) {
            CHECK(validation[i].theta == corners[i]);
            CHECK(validation[i].initial_cell >= 0);
            CHECK(validation[i].summary.runs == 5);
        }
    }
}

TEST_CASE("emitted files are complete and reproducible") {
    namespace fs = std::filesystem;
    ScenarioConfig cfg = small_config();
    cfg.runs = 10;
    cfg.max_steps = 20;
    cfg.sample_trajectories = 2;
    cfg.initial_states = {{2.9, 1.3, 2.2, 0.1}};
    cfg.situation_weights = {1.0};
    PipelineArtifacts art = run_pipeline(cfg);
    std::vector<McRun> validation = run_validation(art);

    fs::path base = fs::temp_directory_path() / "relsyn_emit_test";
    fs::remove_all(base);
    EmittedFiles a = emit_results(art, validation, (base / "a").string());
    EmittedFiles b = emit_results(art, validation, (base / "b").string());
    CHECK(a.content_hash == b.content_hash);
    REQUIRE(a.paths.size() == b.paths.size());
    for (size_t i = 0; i < a.paths.size(); ++i) CHECK(slurp(a.paths[i]) == slurp(b.paths[i]));

    std::string value_csv = slurp((base / "a" / "value_field.csv").string());
    CHECK(count_lines(value_csv) == 6 * 6 + 1);
    CHECK(value_csv.rfind("s_agent,s_env,robust_value\n", 0) == 0);

    std::string manifest = slurp((base / "a" / "manifest.txt").string());
    CHECK(manifest.find("stage model-order-reduction") != std::string::npos);
    CHECK(manifest.find("composed_epsilon") != std::string::npos);
    CHECK(manifest.find("p_robust") != std::string::npos);
    CHECK(manifest.find("situational_bound") != std::string::npos);
    CHECK(manifest.find("content_hash") != std::string::npos);

    std::string rollout = slurp((base / "a" / "rollout_00_000.csv").string());
    CHECK(rollout.find(",dfa_state,atoms") != std::string::npos);
    CHECK(rollout.find("# verdict ") != std::string::npos);

    std::string delta2 = slurp((base / "a" / "delta2_field.csv").string());
    CHECK(count_lines(delta2) == 64 * 64 + 1);

    fs::remove_all(base);
}

TEST_CASE("config parsing accepts overrides and rejects junk") {
    ScenarioConfig cfg = config_from_json_text(R"({
        "cells": [5, 5, 5, 5],
        "input_levels": 3,
        "runs": 7,
        "seed": 42,
        "norm_mode": "unweighted",
        "theta_true": [0.8, 0.8],
        "initial_states": [[1.0, 1.0, 2.0, 2.0]],
        "labels": {
            "safe": {"lo": [0, 0, 0.75, 0], "hi": [3, 3.5, 3.75, 5.5]},
            "crash": {"lo": [0, 1.5, 0.75, 1.5], "hi": [3, 2.5, 3.75, 2.5]},
            "target": {"lo": [0, 2.5, 0.75, 0], "hi": [3, 3.5, 3.75, 5.5]}
        }
    })");
    CHECK(cfg.cells == std::vector<int>({5, 5, 5, 5}));
    CHECK(cfg.runs == 7);
    CHECK(cfg.seed == 42);
    CHECK(cfg.norm_mode == NormMode::unweighted);
    CHECK(cfg.theta_true == std::vector<double>({0.8, 0.8}));
    REQUIRE(cfg.initial_states.size() == 1);

    CHECK_THROWS_WITH_AS(config_from_json_text(R"({"cels": [4,4,4,4]})"),
                         doctest::Contains("unknown key"), std::runtime_error);
    CHECK_THROWS_AS(config_from_json_text(R"({"runs": 0})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json_text(R"({"norm_mode": "manhattan"})"), std::runtime_error);
    CHECK_THROWS_AS(config_from_json_text(R"({"formula": "safe U nowhere"})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json_text("not json"), std::runtime_error);
}
