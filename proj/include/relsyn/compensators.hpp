#pragma once

#include <string>
#include <vector>

#include "relsyn/gmdp.hpp"
#include "relsyn/measures.hpp"
#include "relsyn/relations.hpp"

namespace relsyn {

// Strategy for sup-norm evaluation of deviation terms over boxes. Corner
// enumeration is exact for multilinear terms; the interval strategy is the
// conservative catch-all.
enum class SupStrategy { corner_enumeration, interval };

// Description of a model-order-reduction relation candidate.
struct MorSpec {
    Matrix F_map;                  // partial: reduced = F x; full order: lift x ~ F' x_r
    std::vector<double> D_r;       // diagonal metric weights for the ball (empty = identity)
    InterfaceDescriptor interface; // identity unless stated
    Box gamma_box;                 // noise-coupling bound for the full-order check
    double radius = 0.0;           // candidate ball radius for the full-order check
    // Confinement intervals for the dropped coordinates (partial order). An
    // empty box means unconfined: the kernels live on the whole space and the
    // relation never constrains the dropped coordinate, so no escape deficit
    // accrues.
    Box confinement;
    // Monte Carlo budget for the coupling estimate when dropped coordinates
    // feed the retained block.
    int mc_samples = 100000;
    uint64_t mc_seed = 0x6d6f72;
};

// Certificate for dropping state coordinates: checks that the reduced model
// is the exact restriction of the full one onto the retained coordinates,
// then bounds the deviation probability. With no feedthrough from dropped to
// retained coordinates, the deviation reduces to the dropped coordinates'
// escape probability from their confinement (zero when unconfined). With
// feedthrough, the deviation is estimated by Monte Carlo at the worst corner
// and reported as a one-sided 99% binomial upper bound.
SimRelationCert partial_mor_certificate(const GmdpModel& full, const GmdpModel& reduced,
                                        const MorSpec& spec, const Box& theta_box,
                                        const AdversaryFamily& adversary);

// Certificate for replacing the dynamics wholesale at equal state dimension:
// verifies one-step controlled invariance of the radius ball for the error
// state by interval propagation, then sets the deviation probability from
// the worst noise-coupling offset in gamma_box (plus the truncation deficit
// when the reduced noise is unbounded).
SimRelationCert full_mor_certificate(const GmdpModel& full, const GmdpModel& reduced,
                                     const MorSpec& spec);

// Rectangular evaluation grid: domain split into per-dimension uniform cells.
struct EvalGrid {
    Box domain;
    std::vector<int> cells;

    int total_cells() const;
    Box cell_box(int flat_index) const;
};

// Worst coupling distance over one state cell, the parameter box, and the
// adversary menu of the parametrized model, mapped to a deviation
// probability. The weighted mode divides per-row shifts by the noise
// standard deviation; the unweighted mode reproduces the summed scalar
// deviation. Exact by corner enumeration (all terms are multilinear).
double ambiguity_delta_cell(const GmdpModel& parametrized, const Box& cell, NormMode mode);

// Certificate against the nominal instance of a parametrized model: zero
// output slack, identity interface, and a per-cell deviation-probability
// field over the grid.
SimRelationCert ambiguity_certificate(const GmdpModel& parametrized, const EvalGrid& grid,
                                      NormMode mode);

struct ScalarField2d {
    std::vector<double> x;      // first-axis coordinates
    std::vector<double> y;      // second-axis coordinates
    std::vector<double> value;  // row-major [x][y]
    double max_value = 0.0;
};

// Pointwise deviation-probability field of the built-in case study over the
// two velocities (positions never enter the deviation terms).
ScalarField2d case_study_delta2_field(NormMode mode, int nx = 64, int ny = 64, double v_agent_max = 3.0,
                                      double v_sim_max = 3.75);

std::string field_to_csv(const ScalarField2d& field, const std::string& x_name,
                         const std::string& y_name, const std::string& value_name);

}  // namespace relsyn
