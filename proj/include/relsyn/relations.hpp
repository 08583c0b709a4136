#pragma once

#include <string>
#include <vector>

#include "relsyn/gmdp.hpp"

namespace relsyn {

// Finite-state model with per-(state, input) sub-probability transition rows.
// Row deficits represent mass leaving the modeled domain.
struct FiniteGmdp {
    int num_states = 0;
    int num_inputs = 1;
    std::vector<std::vector<std::vector<double>>> transition;  // [x][u] -> row over x'
    std::vector<std::vector<double>> outputs;                  // per-state output vector
    std::vector<int> initial;

    void validate() const;
    double row_total(int x, int u) const;
};

// Dense membership table for a relation between an abstract and a concrete
// finite state space. Small instances only; the continuous pipeline never
// materializes relations.
struct FiniteRelation {
    int abstract_count = 0;
    int concrete_count = 0;
    std::vector<char> pairs;  // row-major [abstract][concrete]

    FiniteRelation() = default;
    FiniteRelation(int na, int nc)
        : abstract_count(na), concrete_count(nc),
          pairs(static_cast<size_t>(na) * nc, 0) {}

    static FiniteRelation identity(int n);
    static FiniteRelation full(int na, int nc);

    bool related(int a, int c) const {
        return pairs[static_cast<size_t>(a) * concrete_count + c] != 0;
    }
    void set(int a, int c, bool v) {
        pairs[static_cast<size_t>(a) * concrete_count + c] = v ? 1 : 0;
    }
};

// Joint sub-probability table over (abstract successor, concrete successor)
// proposed as a coupling witness for one (x_hat, x, u_hat) triple.
struct CouplingWitness {
    std::vector<std::vector<double>> joint;
};

struct CouplingReport {
    bool pass = false;
    double total_mass = 0.0;
    double mass_on_relation = 0.0;
    std::vector<std::string> violations;
};

// Checks the three sub-probability coupling conditions plus the mass floor:
// support on the relation, column marginals below p, row marginals below
// p_hat, and total mass >= 1 - delta.
CouplingReport verify_coupling(const CouplingWitness& witness, const std::vector<double>& p_hat,
                               const std::vector<double>& p, const FiniteRelation& relation,
                               double delta);

// Largest total mass of any coupling of p_hat and p supported on the
// relation; exact via bipartite max-flow (source -> abstract atoms ->
// related concrete atoms -> sink).
double max_coupling_mass(const std::vector<double>& p_hat, const std::vector<double>& p,
                         const FiniteRelation& relation);

struct SsrReport {
    bool pass = false;
    std::string violation;        // empty when pass
    double worst_deficit = 0.0;   // max over pairs/inputs of 1 - coupling mass
    double worst_output_gap = 0.0;
};

// One-step simulation check on finite models: every concrete initial state
// has a related abstract initial state; per related pair and abstract input
// the transition rows admit a coupling of mass >= 1 - delta on the relation;
// outputs on related pairs differ by at most epsilon.
SsrReport verify_ssr_finite(const FiniteGmdp& abstract_model, const FiniteGmdp& concrete_model,
                            const FiniteRelation& relation, const std::vector<int>& interface_map,
                            double epsilon, double delta);

// Surrogate whose kernel the adversary steers: one row per (state,
// observation, menu choice).
struct FiniteSurrogate {
    int num_states = 0;
    int num_obs = 1;
    int num_choices = 1;
    // rows[x][o][c] -> distribution over surrogate states
    std::vector<std::vector<std::vector<std::vector<double>>>> rows;
    std::vector<std::vector<double>> outputs;
    std::vector<int> initial;
};

struct BiReport {
    bool pass = false;
    std::string violation;
};

// Behavioral inclusion of the concrete model in the surrogate via the state
// lumping p_map: initial sets correspond, for every (state, observation) some
// menu choice reproduces the pushforward of the concrete row exactly (1e-9),
// and outputs agree through the lumping. Concrete inputs index observations.
BiReport verify_behavioral_inclusion_finite(const FiniteSurrogate& surrogate,
                                            const FiniteGmdp& concrete,
                                            const std::vector<int>& p_map,
                                            const std::vector<int>& obs_map);

struct RelationDescriptor {
    enum class Kind { equality_under_map, weighted_ball };
    Kind kind = Kind::equality_under_map;
    Matrix map;                   // abstract = map * concrete (or error map for the ball)
    std::vector<double> weights;  // diagonal ball weight
    double radius = 0.0;          // ball radius
};

struct InterfaceDescriptor {
    enum class Kind { identity, affine };
    Kind kind = Kind::identity;
    Matrix M;                    // u = M u_hat + offset
    std::vector<double> offset;
};

// Certificate of an approximate simulation step: output slack epsilon and a
// deviation-probability field delta (a single entry means a scalar bound).
struct SimRelationCert {
    double epsilon = 0.0;
    std::vector<double> delta = {0.0};
    RelationDescriptor relation;
    InterfaceDescriptor interface;
    std::vector<std::string> provenance;
    bool uniform_over_adversaries = false;

    double delta_sup() const;
};

// Chains certificates: epsilons add, delta fields add pointwise (scalars
// broadcast) with clipping into [0,1], provenance concatenates, interfaces
// compose. Mismatched non-scalar field sizes are rejected.
SimRelationCert compose_transitive(const std::vector<SimRelationCert>& certs);

// Declared premise that the surrogate subsumes the concrete model through the
// maps P (state) and F (observation). Asserted, not derived.
struct BiAssumption {
    Matrix P;
    Matrix F;
    std::string description;
};

// Turns a certificate against the surrogate-coupled product into one against
// the concrete product: (epsilon, delta) carry over unchanged, the relation
// is rebased through P, and the premise is recorded in provenance. Requires
// the antecedent to hold uniformly over the adversary family.
SimRelationCert apply_proxy_theorem(const SimRelationCert& antecedent,
                                    const BiAssumption& assumption, int agent_dim);

// Convex combination of per-situation satisfaction bounds.
double combine_situations(const std::vector<double>& weights, const std::vector<double>& bounds);

// Transition table as "state input next probability" lines (plus a header
// carrying the shape). Outputs and initial states are not serialized.
std::string to_columnar(const FiniteGmdp& model);
FiniteGmdp finite_gmdp_from_columnar(const std::string& text);

}  // namespace relsyn
