#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relsyn/pipeline.hpp"

using namespace relsyn;

namespace {

ScenarioConfig load_config(const std::string& path) {
    if (path.empty()) return default_config();
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return config_from_json_text(ss.str());
}

NormMode parse_norm(const std::string& name) {
    if (name == "weighted") return NormMode::weighted;
    if (name == "unweighted") return NormMode::unweighted;
    throw std::runtime_error("norm must be weighted or unweighted");
}

void print_stages(const PipelineArtifacts& art) {
    for (const std::string& line : art.stage_log) std::printf("stage %s\n", line.c_str());
    std::printf("composed epsilon=%.6g delta_sup=%.6g\n", art.chain.epsilon,
                art.chain.delta_sup());
}

void print_bounds(const PipelineArtifacts& art) {
    for (const auto& init : art.cfg.initial_states) {
        int cell = art.initial_cell(init);
        double v = cell >= 0 ? art.result.initial_value(cell, art.dfa, art.cell_labels) : 0.0;
        std::printf("initial (%.4g, %.4g, %.4g, %.4g) cell=%d p_robust=%.6g\n", init[0],
                    init[1], init[2], init[3], cell, v);
    }
}

void print_validation(const std::vector<McRun>& validation) {
    for (const McRun& r : validation) {
        std::printf("theta=(%.4g, %.4g) cell=%d p_robust=%.6g", r.theta[0], r.theta[1],
                    r.initial_cell, r.p_robust);
        const McSummary& s = r.summary;
        if (s.p_defined)
            std::printf(" p_hat=%.6g ci=[%.6g, %.6g]", s.p_hat, s.ci_lo, s.ci_hi);
        else
            std::printf(" p_hat=undefined");
        std::printf(" satisfied=%d violated=%d discarded=%d censored=%d\n", s.satisfied,
                    s.violated, s.discarded, s.censored);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified reach-avoid synthesis against a simulator-backed surrogate"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", norm, dump_path, out_file = "delta2_field.csv";
    std::vector<int> cells;
    int runs = 0, workers = 0, input_levels = 0, max_steps = 0, nx = 64, ny = 64;
    long long seed = -1;
    bool sweep = false;

    auto add_common = [&](CLI::App* sub, bool with_mc) {
        sub->add_option("--config", config_path, "scenario JSON file");
        sub->add_option("--cells", cells, "grid cell counts per dimension")->expected(4);
        sub->add_option("--input-levels", input_levels, "input levels per dimension");
        sub->add_option("--norm", norm, "deviation norm: weighted or unweighted");
        sub->add_option("--workers", workers, "worker threads");
        if (with_mc) {
            sub->add_option("--runs", runs, "rollouts per validation batch");
            sub->add_option("--max-steps", max_steps, "rollout horizon cap");
            sub->add_option("--seed", seed, "base seed for derived per-run seeds");
            sub->add_flag("--sweep-theta", sweep, "validate at every parameter corner");
        }
    };

    CLI::App* certify = app.add_subcommand("certify", "compute the certificate chain");
    add_common(certify, false);
    CLI::App* abstract_cmd =
        app.add_subcommand("abstract", "grid the nominal product and certify the grid");
    add_common(abstract_cmd, false);
    abstract_cmd->add_option("--dump", dump_path, "write the finite model (small grids)");
    CLI::App* synth = app.add_subcommand("synthesize", "run the pipeline through synthesis");
    add_common(synth, false);
    synth->add_option("--out", out_dir, "output directory");
    CLI::App* simulate = app.add_subcommand("simulate", "synthesize and validate by rollout");
    add_common(simulate, true);
    simulate->add_option("--out", out_dir, "output directory");
    CLI::App* pipeline =
        app.add_subcommand("pipeline", "full run: certify, abstract, synthesize, validate");
    add_common(pipeline, true);
    pipeline->add_option("--out", out_dir, "output directory");
    CLI::App* field_cmd =
        app.add_subcommand("delta2-field", "ambiguity deviation field over the velocities");
    field_cmd->add_option("--out", out_file, "output CSV path");
    field_cmd->add_option("--norm", norm, "deviation norm: weighted or unweighted");
    field_cmd->add_option("--nx", nx, "agent-velocity sample count");
    field_cmd->add_option("--ny", ny, "environment-velocity sample count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (field_cmd->parsed()) {
            NormMode mode = norm.empty() ? NormMode::weighted : parse_norm(norm);
            ScalarField2d field = case_study_delta2_field(mode, nx, ny);
            std::ofstream f(out_file, std::ios::binary);
            if (!f) throw std::runtime_error("cannot write " + out_file);
            f << field_to_csv(field, "v_agent", "v_env", "delta2");
            std::printf("wrote %s (max %.6g)\n", out_file.c_str(), field.max_value);
            return 0;
        }

        ScenarioConfig cfg = load_config(config_path);
        if (!cells.empty()) cfg.cells = cells;
        if (input_levels > 0) cfg.input_levels = input_levels;
        if (!norm.empty()) cfg.norm_mode = parse_norm(norm);
        if (workers > 0) cfg.workers = workers;
        if (runs > 0) cfg.runs = runs;
        if (max_steps > 0) cfg.max_steps = max_steps;
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        if (sweep) cfg.sweep_theta_corners = true;
        cfg.validate();

        if (abstract_cmd->parsed()) {
            CaseStudy cs = builtin_case_study();
            GmdpModel nominal = compose_nominal_product(cs.reduced_agent, cs.simulator);
            GridSpec grid;
            grid.domain = nominal.state_space;
            grid.cells = cfg.cells;
            grid.input_levels =
                GridSpec::uniform_levels(nominal.input_space, cfg.input_levels);
            FiniteAbstraction fab = build_abstraction(nominal, grid);
            if (cfg.norm_mode != NormMode::weighted)
                fab.cert = discretization_certificate(nominal, fab, cfg.norm_mode);
            std::printf("cells=%d inputs=%d epsilon=%.6g delta=%.6g\n", fab.num_states(),
                        fab.num_inputs(), fab.cert.epsilon, fab.cert.delta_sup());
            if (!dump_path.empty()) {
                std::ofstream f(dump_path, std::ios::binary);
                if (!f) throw std::runtime_error("cannot write " + dump_path);
                f << to_columnar(fab.to_finite());
                std::printf("wrote %s\n", dump_path.c_str());
            }
            return 0;
        }

        PipelineArtifacts art = run_pipeline(cfg);
        if (certify->parsed()) {
            print_stages(art);
            return 0;
        }
        if (synth->parsed()) {
            print_stages(art);
            print_bounds(art);
            EmittedFiles files = emit_results(art, {}, out_dir);
            std::printf("wrote %zu files to %s\n", files.paths.size(), out_dir.c_str());
            return 0;
        }
        // simulate and pipeline: full validation and emission.
        print_stages(art);
        print_bounds(art);
        std::vector<McRun> validation = run_validation(art);
        print_validation(validation);
        EmittedFiles files = emit_results(art, validation, out_dir);
        std::printf("wrote %zu files to %s\n", files.paths.size(), out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
