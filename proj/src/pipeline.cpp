#include "relsyn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace relsyn {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_vec(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += " ";
        out += fmt(v[i]);
    }
    return out;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(name) + ": " + e.what());
    }
}

LabelingMap case_study_labels() {
    LabelingMap map;
    map.add("safe", Box({0.0, 0.0, 0.75, 0.0}, {3.0, 3.5, 3.75, 5.5}));
    map.add("crash", Box({0.0, 1.5, 0.75, 1.5}, {3.0, 2.5, 3.75, 2.5}));
    map.add("target", Box({0.0, 2.5, 0.75, 0.0}, {3.0, 3.5, 3.75, 5.5}));
    return map;
}

}  // namespace

void ScenarioConfig::validate() const {
    if (model != "case-study")
        throw std::invalid_argument("config: unknown model '" + model + "'");
    if (cells.size() != 4) throw std::invalid_argument("config: grid needs four cell counts");
    for (int c : cells)
        if (c < 1) throw std::invalid_argument("config: cell counts must be positive");
    if (input_levels < 1) throw std::invalid_argument("config: need at least one input level");
    if (runs < 1) throw std::invalid_argument("config: runs must be at least 1");
    if (max_steps < 1) throw std::invalid_argument("config: horizon must be at least 1");
    if (workers < 1) throw std::invalid_argument("config: workers must be at least 1");
    if (sample_trajectories < 0)
        throw std::invalid_argument("config: sampled trajectory count must be nonnegative");
    if (!theta_true.empty() && theta_true.size() != 2)
        throw std::invalid_argument("config: theta_true needs one entry per block");
    if (!slice_velocities.empty() && slice_velocities.size() != 2)
        throw std::invalid_argument("config: slice velocities are (agent, environment)");
    for (const auto& s : initial_states)
        if (s.size() != 4)
            throw std::invalid_argument("config: initial states live in the 4D product space");
    if (!situation_weights.empty() && situation_weights.size() != initial_states.size())
        throw std::invalid_argument("config: situation weights must pair with initial states");
    if (!labels.names.empty()) {
        ScltlFormula f = parse_scltl(formula);
        for (const std::string& atom : f.atoms)
            if (!labels.region(atom))
                throw std::invalid_argument("config: atom '" + atom + "' has no region");
    }
}

ScenarioConfig default_config() {
    ScenarioConfig cfg;
    cfg.labels = case_study_labels();
    cfg.initial_states = {{2.960, 1.387, 2.296, 0.014}, {1.122, 0.794, 3.520, 1.065}};
    cfg.slice_velocities = {2.960, 2.296};
    return cfg;
}

ScenarioConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }
    static const std::vector<std::string> known = {
        "model",         "cells",           "input_levels",     "formula",
        "labels",        "theta_hat",       "adversary_nominal", "runs",
        "max_steps",     "seed",            "situation_weights", "norm_mode",
        "workers",       "label_margin",    "theta_true",        "sweep_theta_corners",
        "initial_states", "sample_trajectories", "slice_velocities"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::runtime_error("config: unknown key '" + it.key() + "'");

    ScenarioConfig cfg = default_config();
    if (j.contains("model")) cfg.model = j["model"].get<std::string>();
    if (j.contains("cells")) cfg.cells = j["cells"].get<std::vector<int>>();
    if (j.contains("input_levels")) cfg.input_levels = j["input_levels"].get<int>();
    if (j.contains("formula")) cfg.formula = j["formula"].get<std::string>();
    if (j.contains("labels")) {
        cfg.labels = LabelingMap{};
        for (auto it = j["labels"].begin(); it != j["labels"].end(); ++it) {
            const auto& r = it.value();
            cfg.labels.add(it.key(), Box(r.at("lo").get<std::vector<double>>(),
                                         r.at("hi").get<std::vector<double>>()));
        }
    }
    if (j.contains("theta_hat")) cfg.theta_hat = j["theta_hat"].get<std::vector<double>>();
    if (j.contains("adversary_nominal"))
        cfg.adversary_nominal = j["adversary_nominal"].get<std::vector<double>>();
    if (j.contains("runs")) cfg.runs = j["runs"].get<int>();
    if (j.contains("max_steps")) cfg.max_steps = j["max_steps"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("situation_weights"))
        cfg.situation_weights = j["situation_weights"].get<std::vector<double>>();
    if (j.contains("norm_mode")) {
        std::string m = j["norm_mode"].get<std::string>();
        if (m == "weighted")
            cfg.norm_mode = NormMode::weighted;
        else if (m == "unweighted")
            cfg.norm_mode = NormMode::unweighted;
        else
            throw std::runtime_error("config: norm_mode must be weighted or unweighted");
    }
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("label_margin")) cfg.label_margin = j["label_margin"].get<double>();
    if (j.contains("theta_true")) cfg.theta_true = j["theta_true"].get<std::vector<double>>();
    if (j.contains("sweep_theta_corners"))
        cfg.sweep_theta_corners = j["sweep_theta_corners"].get<bool>();
    if (j.contains("initial_states"))
        cfg.initial_states = j["initial_states"].get<std::vector<std::vector<double>>>();
    if (j.contains("sample_trajectories"))
        cfg.sample_trajectories = j["sample_trajectories"].get<int>();
    if (j.contains("slice_velocities"))
        cfg.slice_velocities = j["slice_velocities"].get<std::vector<double>>();
    cfg.validate();
    return cfg;
}

ConcreteController PipelineArtifacts::make_controller() const {
    return refine_controller(result, chain, abs, dfa, formula, cfg.labels);
}

int PipelineArtifacts::initial_cell(const std::vector<double>& product_state) const {
    return abs.grid.locate(product_state);
}

PipelineArtifacts run_pipeline(const ScenarioConfig& raw) {
    PipelineArtifacts art;
    art.cfg = raw;
    if (art.cfg.labels.names.empty()) art.cfg.labels = case_study_labels();
    if (art.cfg.initial_states.empty())
        art.cfg.initial_states = default_config().initial_states;
    if (art.cfg.slice_velocities.empty())
        art.cfg.slice_velocities = {art.cfg.initial_states[0][0], art.cfg.initial_states[0][2]};
    art.cfg.validate();
    const ScenarioConfig& cfg = art.cfg;

    art.study = builtin_case_study();
    if (!cfg.theta_hat.empty()) {
        if (cfg.theta_hat.size() != 2)
            throw std::invalid_argument("config: theta_hat needs one entry per block");
        art.study.agent.theta_hat = {cfg.theta_hat[0]};
        art.study.reduced_agent.theta_hat = {cfg.theta_hat[0]};
        art.study.simulator.theta_hat = {cfg.theta_hat[1]};
        art.study.environment.theta_hat = {cfg.theta_hat[1]};
        art.study.agent.validate();
        art.study.simulator.validate();
    }
    if (!cfg.adversary_nominal.empty()) {
        if (cfg.adversary_nominal.size() != art.study.adversaries.nominal_params.size())
            throw std::invalid_argument("config: adversary nominal has the wrong arity");
        if (!art.study.adversaries.param_box.contains(cfg.adversary_nominal))
            throw std::invalid_argument("config: adversary nominal outside the family");
        art.study.adversaries.nominal_params = cfg.adversary_nominal;
        art.study.simulator.adversary.nominal_params = cfg.adversary_nominal;
    }
    const CaseStudy& cs = art.study;

    stage("model-order-reduction", [&] {
        MorSpec ms;
        ms.F_map = cs.F;
        SimRelationCert agent_cert =
            partial_mor_certificate(cs.agent, cs.reduced_agent, ms, cs.agent.theta_box,
                                    cs.adversaries);
        // The surrogate block is shared verbatim by both products, so the
        // certificate lifts to the product with the same slack and deficit.
        SimRelationCert lifted = agent_cert;
        lifted.relation.map =
            block_diag(agent_cert.relation.map, Matrix::identity(cs.simulator.state_dim()));
        BiAssumption premise;
        premise.P = cs.P;
        premise.F = cs.F;
        premise.description = "surrogate with adversary menu covers the single-track car";
        art.mor = apply_proxy_theorem(lifted, premise, cs.agent.state_dim());
        return 0;
    });
    art.stage_log.push_back("model-order-reduction: epsilon=" + fmt(art.mor.epsilon) +
                            " delta_sup=" + fmt(art.mor.delta_sup()));

    stage("ambiguity", [&] {
        art.parametrized = compose_parametrized_product(cs.reduced_agent, cs.simulator);
        EvalGrid eg;
        eg.domain = art.parametrized.state_space;
        eg.cells = cfg.cells;
        art.ambiguity = ambiguity_certificate(art.parametrized, eg, cfg.norm_mode);
        return 0;
    });
    art.stage_log.push_back("ambiguity: epsilon=0 delta_sup=" + fmt(art.ambiguity.delta_sup()));

    stage("discretization", [&] {
        art.nominal = compose_nominal_product(cs.reduced_agent, cs.simulator);
        GridSpec grid;
        grid.domain = art.nominal.state_space;
        grid.cells = cfg.cells;
        grid.input_levels = GridSpec::uniform_levels(art.nominal.input_space, cfg.input_levels);
        art.abs = build_abstraction(art.nominal, grid);
        if (cfg.norm_mode != NormMode::weighted)
            art.abs.cert = discretization_certificate(art.nominal, art.abs, cfg.norm_mode);
        art.discretization = art.abs.cert;
        return 0;
    });
    art.stage_log.push_back("discretization: epsilon=" + fmt(art.discretization.epsilon) +
                            " delta=" + fmt(art.discretization.delta_sup()));

    stage("composition", [&] {
        art.chain = compose_transitive({art.discretization, art.ambiguity, art.mor});
        if (art.chain.delta.size() != static_cast<size_t>(art.abs.num_states()))
            throw std::logic_error("composed deficit field misaligned with the grid");
        return 0;
    });
    art.stage_log.push_back("composition: epsilon=" + fmt(art.chain.epsilon) +
                            " delta_sup=" + fmt(art.chain.delta_sup()));

    stage("synthesis", [&] {
        art.formula = parse_scltl(cfg.formula);
        art.dfa = to_dfa(art.formula);
        art.label_margin_used = cfg.label_margin >= 0.0 ? cfg.label_margin : art.chain.epsilon;
        std::vector<std::vector<double>> outputs(art.abs.num_states());
        for (int x = 0; x < art.abs.num_states(); ++x)
            outputs[x] = art.abs.output_map.apply(art.abs.representative(x));
        art.cell_labels = robust_labeling(art.formula, cfg.labels, outputs, art.label_margin_used);
        DeltaField field;
        field.per_cell = art.chain.delta;
        SynthesisOptions opt;
        opt.workers = cfg.workers;
        art.result = robust_value_iteration(art.abs, art.dfa, art.cell_labels, field, opt);
        art.result.epsilon_used = art.label_margin_used;
        if (!art.result.converged)
            throw std::runtime_error("value iteration did not converge within the sweep budget");
        return 0;
    });
    art.stage_log.push_back(
        "synthesis: iterations=" + std::to_string(art.result.iterations) +
        " delta_sup=" + fmt(art.result.delta_used) + " label_margin=" +
        fmt(art.label_margin_used));
    return art;
}

std::vector<std::vector<double>> theta_corners(const Box& box) {
    std::vector<std::vector<double>> corners = {{}};
    for (size_t d = 0; d < box.dim(); ++d) {
        std::vector<std::vector<double>> next;
        for (const auto& c : corners) {
            std::vector<double> lo = c;
            lo.push_back(box.lo[d]);
            next.push_back(std::move(lo));
            if (box.hi[d] > box.lo[d]) {
                std::vector<double> hi = c;
                hi.push_back(box.hi[d]);
                next.push_back(std::move(hi));
            }
        }
        corners = std::move(next);
    }
    return corners;
}

std::vector<double> default_theta_true(const PipelineArtifacts& art) {
    // Worst one-step deviation bound at the fastest product state; symmetric
    // parameter boxes tie and resolve to the first corner.
    const Box& tb = art.study.theta_box;
    std::vector<double> hat = {art.study.reduced_agent.theta_hat[0],
                               art.study.simulator.theta_hat[0]};
    std::vector<std::vector<double>> corners = theta_corners(tb);
    std::vector<double> best = corners.front();
    double best_dev = -1.0;
    for (const auto& c : corners) {
        std::vector<double> shift = {(c[0] - hat[0]) * art.nominal.state_space.hi[0], 0.0,
                                     (c[1] - hat[1]) * art.nominal.state_space.hi[2], 0.0};
        double dev = coupling_deficiency(shift, art.nominal.noise.var, art.cfg.norm_mode);
        if (dev > best_dev + 1e-15) {
            best_dev = dev;
            best = c;
        }
    }
    return best;
}

namespace {

RolloutRecord simulate_rollout(const PipelineArtifacts& art, ConcreteController& ctl,
                               const std::vector<double>& init4,
                               const std::vector<double>& theta, int max_steps, Rng& rng,
                               bool keep_trace) {
    const GmdpModel& agent = art.study.agent;
    const GmdpModel& env = art.study.environment;
    std::vector<double> xa = {0.0, init4[0], init4[1]};
    std::vector<double> xe = {0.0, 0.0, 0.0, init4[2], init4[3], 0.0};
    const std::vector<double> th_a = {theta[0]}, th_e = {theta[1]};

    ctl.reset();
    RolloutRecord rec;
    for (int t = 0; t <= max_steps; ++t) {
        std::vector<double> x9 = xa;
        x9.insert(x9.end(), xe.begin(), xe.end());
        if (!env.state_space.contains(xe)) {
            // Region-of-validity exit: the contract is void, stop and discard.
            rec.verdict = RolloutRecord::Verdict::discarded_rov;
            rec.exit_step = t;
            if (keep_trace) rec.states.push_back(std::move(x9));
            rec.left_grid = ctl.outside_seen;
            return rec;
        }
        std::vector<double> y = art.study.F.apply(xa);
        std::vector<double> ye = art.study.P.apply(xe);
        y.insert(y.end(), ye.begin(), ye.end());
        std::vector<double> u = ctl.act(x9, y);
        if (keep_trace) {
            rec.letters.push_back(robust_labeling(art.formula, art.cfg.labels, {y}, 0.0)[0]);
            rec.states.push_back(std::move(x9));
            rec.outputs.push_back(y);
            rec.inputs.push_back(u);
            rec.dfa_trace.push_back(ctl.dfa_state);
        }
        if (ctl.accepted() || ctl.rejected()) {
            rec.verdict = ctl.accepted() ? RolloutRecord::Verdict::satisfied
                                         : RolloutRecord::Verdict::violated;
            rec.exit_step = t;
            rec.left_grid = ctl.outside_seen;
            return rec;
        }
        if (t == max_steps) break;

        std::vector<double> obs = xa;  // environment sees the agent state pre-update
        xa = add(drift_eval(agent, xa, u, {}, th_a), sample(agent.noise, rng));
        xe = add(drift_eval(env, xe, {}, obs, th_e), sample(env.noise, rng));
    }
    rec.verdict = RolloutRecord::Verdict::censored_horizon;
    rec.exit_step = max_steps;
    rec.left_grid = ctl.outside_seen;
    return rec;
}

}  // namespace

McSummary summarize(std::vector<RolloutRecord> records, double confidence) {
    McSummary s;
    s.runs = static_cast<int>(records.size());
    for (const RolloutRecord& r : records) {
        switch (r.verdict) {
            case RolloutRecord::Verdict::satisfied: ++s.satisfied; break;
            case RolloutRecord::Verdict::violated: ++s.violated; break;
            case RolloutRecord::Verdict::discarded_rov: ++s.discarded; break;
            case RolloutRecord::Verdict::censored_horizon: ++s.censored; break;
        }
    }
    int undiscarded = s.runs - s.discarded;
    if (undiscarded > 0) {
        s.p_defined = true;
        s.p_hat = static_cast<double>(s.satisfied) / undiscarded;
        BinomialInterval ci = clopper_pearson(s.satisfied, undiscarded, confidence);
        s.ci_lo = ci.lo;
        s.ci_hi = ci.hi;
    }
    s.records = std::move(records);
    return s;
}

McSummary monte_carlo(const PipelineArtifacts& art, const std::vector<double>& initial4,
                      std::vector<double> theta_true) {
    if (initial4.size() != 4)
        throw std::invalid_argument("validation: initial state lives in the 4D product space");
    if (theta_true.empty())
        theta_true = art.cfg.theta_true.empty() ? default_theta_true(art) : art.cfg.theta_true;
    if (!art.study.theta_box.contains(theta_true, 1e-12))
        throw std::invalid_argument("validation: true parameters outside the uncertainty box");

    const int runs = art.cfg.runs;
    std::vector<RolloutRecord> records(runs);
    auto work = [&](int begin, int end) {
        ConcreteController ctl = art.make_controller();
        for (int r = begin; r < end; ++r) {
            Rng rng(derive_seed(art.cfg.seed, static_cast<uint64_t>(r)));
            records[r] = simulate_rollout(art, ctl, initial4, theta_true, art.cfg.max_steps,
                                          rng, r < art.cfg.sample_trajectories);
        }
    };
    int workers = std::min(art.cfg.workers, runs);
    if (workers <= 1) {
        work(0, runs);
    } else {
        std::vector<std::thread> pool;
        int chunk = (runs + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            int lo = w * chunk, hi = std::min(runs, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& t : pool) t.join();
    }
    return summarize(std::move(records));
}

std::vector<McRun> run_validation(const PipelineArtifacts& art) {
    std::vector<std::vector<double>> thetas;
    if (art.cfg.sweep_theta_corners)
        thetas = theta_corners(art.study.theta_box);
    else
        thetas = {art.cfg.theta_true.empty() ? default_theta_true(art) : art.cfg.theta_true};

    std::vector<McRun> out;
    for (const auto& init : art.cfg.initial_states)
        for (const auto& th : thetas) {
            McRun run;
            run.initial = init;
            run.theta = th;
            run.initial_cell = art.initial_cell(init);
            run.p_robust = run.initial_cell >= 0
                               ? art.result.initial_value(run.initial_cell, art.dfa,
                                                          art.cell_labels)
                               : 0.0;
            run.summary = monte_carlo(art, init, th);
            out.push_back(std::move(run));
        }
    return out;
}

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

int cell_index_along(const GridSpec& grid, int dim, double v) {
    double lo = grid.domain.lo[dim], hi = grid.domain.hi[dim];
    int idx = static_cast<int>((v - lo) / (hi - lo) * grid.cells[dim]);
    return std::min(std::max(idx, 0), grid.cells[dim] - 1);
}

std::string value_field_csv(const PipelineArtifacts& art) {
    const GridSpec& grid = art.abs.grid;
    int iv_a = cell_index_along(grid, 0, art.cfg.slice_velocities[0]);
    int iv_e = cell_index_along(grid, 2, art.cfg.slice_velocities[1]);
    std::string out = "s_agent,s_env,robust_value\n";
    for (int i = 0; i < grid.cells[1]; ++i)
        for (int j = 0; j < grid.cells[3]; ++j) {
            int cell = grid.encode({iv_a, i, iv_e, j});
            std::vector<double> rep = grid.representative(cell);
            out += fmt(rep[1]) + "," + fmt(rep[3]) + "," +
                   fmt(art.result.initial_value(cell, art.dfa, art.cell_labels)) + "\n";
        }
    return out;
}

std::string atoms_of(const ScltlFormula& f, uint32_t letter) {
    std::string out;
    for (size_t i = 0; i < f.atoms.size(); ++i)
        if (letter & (uint32_t{1} << i)) {
            if (!out.empty()) out += "|";
            out += f.atoms[i];
        }
    return out.empty() ? "-" : out;
}

const char* verdict_name(RolloutRecord::Verdict v) {
    switch (v) {
        case RolloutRecord::Verdict::satisfied: return "satisfied";
        case RolloutRecord::Verdict::violated: return "violated";
        case RolloutRecord::Verdict::discarded_rov: return "discarded-rov";
        case RolloutRecord::Verdict::censored_horizon: return "censored-horizon";
    }
    return "?";
}

std::string rollout_csv(const PipelineArtifacts& art, const RolloutRecord& rec) {
    std::ostringstream out;
    out << "# verdict " << verdict_name(rec.verdict) << " exit_step " << rec.exit_step
        << " left_grid " << (rec.left_grid ? 1 : 0) << "\n";
    size_t sd = rec.states.empty() ? 0 : rec.states[0].size();
    size_t ud = rec.inputs.empty() ? 0 : rec.inputs[0].size();
    size_t yd = rec.outputs.empty() ? 0 : rec.outputs[0].size();
    out << "step";
    for (size_t i = 0; i < sd; ++i) out << ",x" << i;
    for (size_t i = 0; i < ud; ++i) out << ",u" << i;
    for (size_t i = 0; i < yd; ++i) out << ",y" << i;
    out << ",dfa_state,atoms\n";
    for (size_t t = 0; t < rec.states.size(); ++t) {
        out << t;
        for (double v : rec.states[t]) out << "," << fmt(v);
        for (size_t i = 0; i < ud; ++i)
            out << "," << (t < rec.inputs.size() ? fmt(rec.inputs[t][i]) : "");
        for (size_t i = 0; i < yd; ++i)
            out << "," << (t < rec.outputs.size() ? fmt(rec.outputs[t][i]) : "");
        if (t < rec.dfa_trace.size())
            out << "," << rec.dfa_trace[t] << "," << atoms_of(art.formula, rec.letters[t]);
        else
            out << ",,";
        out << "\n";
    }
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace

std::string manifest_text(const PipelineArtifacts& art, const std::vector<McRun>& validation,
                          uint64_t content_hash) {
    const ScenarioConfig& cfg = art.cfg;
    std::ostringstream m;
    m << "scenario: " << cfg.model << "\n";
    m << "formula: " << cfg.formula << "\n";
    m << "grid:";
    for (int c : cfg.cells) m << " " << c;
    m << "\n";
    m << "input_levels: " << art.abs.num_inputs() << "\n";
    m << "norm_mode: " << (cfg.norm_mode == NormMode::weighted ? "weighted" : "unweighted")
      << "\n";
    m << "seed: " << cfg.seed << "\n";
    m << "runs: " << cfg.runs << "\n";
    m << "max_steps: " << cfg.max_steps << "\n";
    // Worker count is an execution resource, not a scenario parameter; results
    // are identical at any count, so the manifest must be too.
    for (const std::string& line : art.stage_log) m << "stage " << line << "\n";
    m << "composed_epsilon: " << fmt(art.chain.epsilon) << "\n";
    m << "composed_delta_sup: " << fmt(art.chain.delta_sup()) << "\n";
    m << "label_margin: " << fmt(art.label_margin_used) << "\n";
    m << "cells: " << art.abs.num_states() << "\n";
    m << "dfa_states: " << art.dfa.num_states << "\n";
    m << "iterations: " << art.result.iterations << "\n";

    std::vector<double> bounds;
    for (const McRun& r : validation) {
        m << "validation initial=(" << fmt_vec(r.initial) << ") theta=(" << fmt_vec(r.theta)
          << ") cell=" << r.initial_cell << " p_robust=" << fmt(r.p_robust);
        const McSummary& s = r.summary;
        m << " runs=" << s.runs << " satisfied=" << s.satisfied << " violated=" << s.violated
          << " discarded=" << s.discarded << " censored=" << s.censored;
        if (s.p_defined)
            m << " p_hat=" << fmt(s.p_hat) << " ci=[" << fmt(s.ci_lo) << "," << fmt(s.ci_hi)
              << "]";
        else
            m << " p_hat=undefined";
        m << "\n";
        bounds.push_back(r.p_robust);
    }
    if (!cfg.situation_weights.empty() && validation.size() == cfg.situation_weights.size())
        m << "situational_bound: " << fmt(combine_situations(cfg.situation_weights, bounds))
          << "\n";
    m << "content_hash: " << std::hex << content_hash << std::dec << "\n";
    return m.str();
}

EmittedFiles emit_results(const PipelineArtifacts& art, const std::vector<McRun>& validation,
                          const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());

    // (relative name, content) pairs hashed in emission order.
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("value_field.csv", value_field_csv(art));
    ScalarField2d field = case_study_delta2_field(art.cfg.norm_mode);
    files.emplace_back("delta2_field.csv", field_to_csv(field, "v_agent", "v_env", "delta2"));
    for (size_t b = 0; b < validation.size(); ++b) {
        const auto& recs = validation[b].summary.records;
        for (size_t r = 0; r < recs.size() && !recs[r].states.empty(); ++r) {
            char name[64];
            std::snprintf(name, sizeof(name), "rollout_%02zu_%03zu.csv", b, r);
            files.emplace_back(name, rollout_csv(art, recs[r]));
        }
    }

    std::string hashed;
    for (const auto& [name, content] : files) hashed += name + "\n" + content;
    uint64_t hash = fnv1a(hashed);

    EmittedFiles out;
    out.content_hash = hash;
    for (const auto& [name, content] : files) {
        std::string path = (fs::path(out_dir) / name).string();
        write_file(path, content);
        out.paths.push_back(path);
    }
    std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
    write_file(manifest_path, manifest_text(art, validation, hash));
    out.paths.push_back(manifest_path);
    return out;
}

}  // namespace relsyn
