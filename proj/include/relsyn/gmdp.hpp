#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relsyn/box.hpp"
#include "relsyn/measures.hpp"
#include "relsyn/rng.hpp"

namespace relsyn {

// Dense row-major matrix. Small fixed shapes only (system matrices, output
// projections); no linear algebra beyond apply().
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows*cols, row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    Matrix(int r, int c, std::initializer_list<double> vals);

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    std::vector<double> apply(const std::vector<double>& x) const;

    static Matrix identity(int n);
    // Picks the given coordinates of an n-vector, in order.
    static Matrix projection(int n, const std::vector<int>& coords);
};

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> sub(const std::vector<double>& a, const std::vector<double>& b);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix block_diag(const Matrix& a, const Matrix& b);

// One uncertain entry of a linear drift: theta[theta_index] * x[col] added to
// row `row` of the successor mean. The fixed part of the matrix keeps a zero
// at that position.
struct ThetaSlot {
    int theta_index = 0;
    int row = 0;
    int col = 0;
};

// Closed-form drift registry. Interval analysis downstream needs symbolic
// structure, so drifts are named forms rather than callbacks.
struct DriftForm {
    enum class Kind { linear, bicycle };
    Kind kind = Kind::linear;

    // kind == linear: f(x,u,o;theta) = A x + B u + C o + sum_slots theta[i] x[col] e_row
    Matrix A;  // state_dim x state_dim
    Matrix B;  // state_dim x input_dim (empty if no input)
    Matrix C;  // state_dim x obs_dim (empty if no observation feedthrough)
    std::vector<ThetaSlot> slots;

    // kind == bicycle: single-track lateral/longitudinal car model, state
    // (beta, dpsi, psi, v, s_x, s_y), no control input, observation (xi, v, s)
    // feeding through a4/a5 on the v and s_x rows. theta[theta_index] scales v.
    struct BicycleParams {
        double tau = 0.5;
        double cornering = 1.0;   // C
        double gravity = 9.81;    // g
        double friction = 0.9;    // mu
        double wheelbase = 2.579; // l
        double mass = 1093.0;     // m
        double inertia = 1792.0;  // I_z
        double a4 = 0.0;          // obs gain on v row
        double a5 = 0.0;          // obs gain on s_x row
        int theta_index = 0;
    };
    BicycleParams bicycle;
};

// Deterministic disturbance family g(x, o; p), p ranging over param_box.
// The nominal member is g(.,.; nominal_params).
struct AdversaryFamily {
    enum class Kind { none, bilinear_cosine };
    Kind kind = Kind::none;

    // kind == bilinear_cosine: g(x,o;p) = gain * x[vel_index] * cos(p0 + p1)
    // on output row out_row, zero elsewhere. out_dim rows total.
    int out_dim = 0;
    int out_row = 0;
    int vel_index = 0;
    double gain = 0.0;
    Box param_box;
    std::vector<double> nominal_params;

    std::vector<double> eval(const std::vector<double>& x, const std::vector<double>& o,
                             const std::vector<double>& params) const;
    std::vector<double> eval_nominal(const std::vector<double>& x,
                                     const std::vector<double>& o) const;
};

// Parametrized stochastic system: successor = drift(x,u,o;theta) + d + w,
// w ~ noise, d supplied by an adversary (or zero). Output y = output_map x.
struct GmdpModel {
    std::string name;

    Box state_space;        // also the region of validity
    Box initial_set;
    Box input_space;        // dim 0 if uncontrolled
    Box observation_space;  // dim 0 if unobserved
    Box disturbance_space;  // dim 0 if no disturbance channel

    DriftForm drift;
    GaussianMeasure noise;  // zero-mean; support = truncation box if any
    Matrix output_map;      // y = output_map * x
    std::vector<double> output_weights;  // output-metric weights (L2); empty = 1

    Box theta_box;                   // dim 0 if not parametrized
    std::vector<double> theta_hat;

    AdversaryFamily adversary;       // kind none if absent

    int state_dim() const { return state_space.dim(); }
    int input_dim() const { return input_space.dim(); }
    int obs_dim() const { return observation_space.dim(); }
    void validate() const;
};

// Observation wiring between two models. For x the models exchange full
// states (o_left = x_right, o_right = x_left); for x_a the right model sees
// F(x_left) instead.
struct Interconnection {
    enum class Wiring { full, abstracted };
    Wiring wiring = Wiring::full;
    GmdpModel left;
    GmdpModel right;
    Matrix state_map_F;  // o_right = F x_left (abstracted wiring)
    Matrix state_map_P;  // relates concrete to reduced states downstream
};

std::vector<double> drift_eval(const GmdpModel& model, const std::vector<double>& x,
                               const std::vector<double>& u, const std::vector<double>& o,
                               const std::vector<double>& theta);

// drift + disturbance + sampled noise. Throws std::invalid_argument when x or
// u leaves its domain; callers decide what leaving the region of validity
// means for a run.
std::vector<double> step(const GmdpModel& model, const std::vector<double>& x,
                         const std::vector<double>& u, const std::vector<double>& o,
                         const std::vector<double>& theta,
                         const std::vector<double>& disturbance, Rng& rng);

// Axis-aligned over-approximation of {g(x,o;p) - g(x,o;nominal) : p in
// param_box, x in x_box, o in o_box}. Interval arithmetic, with the cosine
// range taken exactly over the summed parameter interval.
Box adversary_disturbance_hull(const AdversaryFamily& fam, const Box& x_box, const Box& o_box);

struct CaseStudy {
    GmdpModel agent;          // 3D longitudinal model with internal state xi
    GmdpModel environment;    // 6D single-track car
    GmdpModel simulator;      // 2D longitudinal surrogate driven by the adversary
    GmdpModel reduced_agent;  // 2D model-order-reduced agent
    Box theta_box;            // (theta_A, theta_E)
    AdversaryFamily adversaries;
    Matrix F;  // agent state -> (v, s), observation map for abstracted wiring
    Matrix P;  // environment state -> simulator state
};

// The built-in autonomous-driving instance used throughout the tests.
CaseStudy builtin_case_study();

// Nominal 4D product of the reduced agent and the simulator under the nominal
// adversary: block-diagonal linear system with the agent input as its input.
GmdpModel compose_nominal_product(const GmdpModel& reduced_agent, const GmdpModel& simulator);

// Same product but keeping the uncertainty: theta slots of both blocks are
// carried over (agent thetas first), and the simulator's adversary family is
// re-indexed into product coordinates instead of being fixed at its nominal.
GmdpModel compose_parametrized_product(const GmdpModel& reduced_agent, const GmdpModel& simulator);

// Parse one model from the scenario-file JSON schema (field names tau,
// theta_box, sigma, rov; see docs/scenario format). Throws std::runtime_error
// on malformed input.
GmdpModel model_from_json_text(const std::string& text);

}  // namespace relsyn
