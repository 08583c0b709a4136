#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relsyn/abstraction.hpp"
#include "relsyn/compensators.hpp"
#include "relsyn/gmdp.hpp"
#include "relsyn/relations.hpp"
#include "relsyn/scltl.hpp"
#include "relsyn/synthesis.hpp"

namespace relsyn {

// Everything one end-to-end run needs. Unset collection fields fall back to
// the built-in driving-scenario defaults (default_config fills them in).
struct ScenarioConfig {
    std::string model = "case-study";
    std::vector<int> cells = {16, 16, 16, 16};
    int input_levels = 5;  // per input dimension, endpoints included
    std::string formula = "(safe & !crash) U target";
    LabelingMap labels;
    std::vector<double> theta_hat;          // empty = model nominal
    std::vector<double> adversary_nominal;  // empty = family nominal
    int runs = 1000;
    int max_steps = 200;
    uint64_t seed = 1;
    std::vector<double> situation_weights;  // optional, pairs with initial_states
    NormMode norm_mode = NormMode::weighted;
    int workers = 1;
    double label_margin = -1.0;  // negative = composed output slack
    // The validation theta is not pinned by the scenario; the default is the
    // parameter corner with the largest one-step deviation bound (first corner
    // on ties), and sweep_theta_corners visits every corner instead.
    std::vector<double> theta_true;
    bool sweep_theta_corners = false;
    std::vector<std::vector<double>> initial_states;  // (v_a, s_a, v_e, s_e)
    int sample_trajectories = 5;            // rollout CSVs kept per validation
    std::vector<double> slice_velocities;   // value-field slice; empty = first initial state

    void validate() const;
};

ScenarioConfig default_config();
ScenarioConfig config_from_json_text(const std::string& text);

// Output of the certification + abstraction + synthesis stages, plus the
// models needed to validate the closed loop afterwards.
struct PipelineArtifacts {
    ScenarioConfig cfg;
    CaseStudy study;
    GmdpModel nominal;        // 4D product with nominal theta and adversary
    GmdpModel parametrized;   // same product keeping theta slots and adversary
    SimRelationCert mor;            // reduced agent vs full agent, proxied to the env
    SimRelationCert ambiguity;      // nominal vs parametrized, per-cell field
    SimRelationCert discretization; // finite vs nominal
    SimRelationCert chain;          // composed, relates grid cells to concrete states
    FiniteAbstraction abs;
    ScltlFormula formula;
    Dfa dfa;
    std::vector<uint32_t> cell_labels;
    double label_margin_used = 0.0;
    SynthesisResult result;
    std::vector<std::string> stage_log;  // one line per stage with its (epsilon, delta)

    ConcreteController make_controller() const;
    int initial_cell(const std::vector<double>& product_state) const;
};

// certify -> abstract -> synthesize. Any stage failure rethrows with the
// stage name prefixed.
PipelineArtifacts run_pipeline(const ScenarioConfig& cfg);

struct RolloutRecord {
    enum class Verdict { satisfied, violated, discarded_rov, censored_horizon };
    Verdict verdict = Verdict::censored_horizon;
    int exit_step = 0;
    bool left_grid = false;  // controller fell back at least once
    // Traces are kept only for the first sample_trajectories runs; counting
    // fields above are always filled.
    std::vector<std::vector<double>> states;   // concrete agent ++ environment
    std::vector<std::vector<double>> outputs;  // interconnection outputs
    std::vector<std::vector<double>> inputs;
    std::vector<int> dfa_trace;
    std::vector<uint32_t> letters;  // active-atom bitmask per step
};

struct McSummary {
    int runs = 0;
    int satisfied = 0;
    int violated = 0;
    int discarded = 0;
    int censored = 0;
    bool p_defined = false;  // false when every run was discarded
    double p_hat = 0.0;      // satisfied / (runs - discarded)
    double ci_lo = 0.0;
    double ci_hi = 1.0;      // 95% Clopper-Pearson
    std::vector<RolloutRecord> records;
};

// One validation batch with its bookkeeping for the manifest.
struct McRun {
    std::vector<double> initial;  // product coordinates
    std::vector<double> theta;
    int initial_cell = -1;
    double p_robust = 0.0;
    McSummary summary;
};

// Counts verdicts and forms the interval; pure so the discard accounting can
// be tested without simulating.
McSummary summarize(std::vector<RolloutRecord> records, double confidence = 0.95);

// Closed-loop rollouts of controller x full agent x environment from the
// given product-coordinate initial state (agent internal state starts at 0,
// environment attitude states start at 0). The adversary is realized by the
// environment simulation itself. Runs use per-index derived seeds, so the
// result is identical at any worker count. theta_true empty = default corner.
McSummary monte_carlo(const PipelineArtifacts& art, const std::vector<double>& initial4,
                      std::vector<double> theta_true = {});

// Corners of the product parameter box, lowest index first.
std::vector<std::vector<double>> theta_corners(const Box& theta_box);
std::vector<double> default_theta_true(const PipelineArtifacts& art);

// monte_carlo for every configured initial state (times every theta corner
// when sweeping).
std::vector<McRun> run_validation(const PipelineArtifacts& art);

// Writes value_field.csv (positions at the configured slice velocities),
// delta2_field.csv, rollout CSVs, and manifest.txt into out_dir. Returns the
// paths written plus the combined content hash recorded in the manifest.
struct EmittedFiles {
    std::vector<std::string> paths;
    uint64_t content_hash = 0;
};
EmittedFiles emit_results(const PipelineArtifacts& art, const std::vector<McRun>& validation,
                          const std::string& out_dir);

std::string manifest_text(const PipelineArtifacts& art, const std::vector<McRun>& validation,
                          uint64_t content_hash);

uint64_t fnv1a(const std::string& bytes);

}  // namespace relsyn
