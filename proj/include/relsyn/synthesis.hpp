#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relsyn/abstraction.hpp"
#include "relsyn/scltl.hpp"

namespace relsyn {

struct LabelingMap {
    std::vector<std::string> names;
    std::vector<Box> regions;

    const Box* region(const std::string& name) const;
    void add(const std::string& name, Box region);
};

// Letters for a batch of output points under an output deviation budget.
// Atoms occurring positively are granted only if the epsilon ball fits inside
// the region; atoms occurring negated are granted on intersection. An atom
// with both polarities has no sound robustification and is refused.
std::vector<uint32_t> robust_labeling(const ScltlFormula& formula, const LabelingMap& map,
                                      const std::vector<std::vector<double>>& outputs,
                                      double epsilon);

// Per-step coupling deficit, additively split into a constant, a per-cell
// component, and a per-input component.
struct DeltaField {
    double constant = 0.0;
    std::vector<double> per_cell;
    std::vector<double> per_input;

    double at(int cell, int input) const {
        double d = constant;
        if (!per_cell.empty()) d += per_cell[cell];
        if (!per_input.empty()) d += per_input[input];
        return d;
    }
    void validate(int num_states, int num_inputs) const;
    double max_value() const;
};

struct SynthesisOptions {
    double tol = 1e-6;
    int horizon = -1;  // when >= 0, run exactly this many sweeps instead
    int max_sweeps = 5000;
    int workers = 1;
    enum class Backend { automatic, dense, factored } backend = Backend::automatic;
};

struct SynthesisResult {
    int num_cells = 0;
    int num_dfa = 0;
    int num_inputs = 0;
    std::vector<double> value;  // [q * num_cells + cell]
    std::vector<int> policy;    // same layout, argmax input index
    double epsilon_used = 0.0;
    double delta_used = 0.0;
    int iterations = 0;
    bool converged = false;

    double value_at(int cell, int q) const { return value[static_cast<size_t>(q) * num_cells + cell]; }
    int policy_at(int cell, int q) const { return policy[static_cast<size_t>(q) * num_cells + cell]; }
    // Bound for starting in `cell`: the automaton reads the cell's own letter
    // first, then the value field applies.
    double initial_value(int cell, const Dfa& dfa, const std::vector<uint32_t>& labels) const;
};

// Bellman recursion on the abstraction x DFA product with per-step delta
// subtraction, clamped to [0,1]. Deterministic for any worker count.
SynthesisResult robust_value_iteration(const FiniteAbstraction& fab, const Dfa& dfa,
                                       const std::vector<uint32_t>& labels, const DeltaField& delta,
                                       const SynthesisOptions& options = {});

// Synthesized policy pulled back to the concrete state space through the
// certificate chain's relation map, with runtime automaton tracking on the
// concrete (un-robustified) output labels.
struct ConcreteController {
    FiniteAbstraction fab;
    Dfa dfa;
    SynthesisResult result;
    LabelingMap labels;
    ScltlFormula formula;
    Matrix lift;  // concrete state -> abstract coordinates
    InterfaceDescriptor interface;
    std::vector<double> fallback_input;

    int dfa_state = -1;
    bool started = false;
    bool outside_seen = false;

    void reset();
    std::vector<double> act(const std::vector<double>& concrete_state,
                            const std::vector<double>& concrete_output);
    bool accepted() const { return started && dfa.accepting[dfa_state]; }
    bool rejected() const { return started && dfa.rejecting[dfa_state]; }
};

ConcreteController refine_controller(const SynthesisResult& result, const SimRelationCert& chain,
                                     const FiniteAbstraction& fab, const Dfa& dfa,
                                     const ScltlFormula& formula, const LabelingMap& labels,
                                     std::vector<double> fallback_input = {});

}  // namespace relsyn
