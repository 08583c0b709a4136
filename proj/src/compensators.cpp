#include "relsyn/compensators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace relsyn {

namespace {

// Decodes the reduction map as a coordinate selection; throws when it is
// anything else.
std::vector<int> selected_coordinates(const Matrix& F, int full_dim) {
    if (F.cols != full_dim)
        throw std::invalid_argument("reduction map must act on the full state");
    std::vector<int> retained;
    std::vector<char> used(full_dim, 0);
    for (int i = 0; i < F.rows; ++i) {
        int hit = -1;
        for (int j = 0; j < F.cols; ++j) {
            double v = F.at(i, j);
            if (v == 0.0) continue;
            if (v != 1.0 || hit >= 0)
                throw std::invalid_argument("reduction map must select distinct state coordinates");
            hit = j;
        }
        if (hit < 0 || used[hit])
            throw std::invalid_argument("reduction map must select distinct state coordinates");
        used[hit] = 1;
        retained.push_back(hit);
    }
    return retained;
}

Interval support_slice(const GmdpModel& m, int dim) {
    if (!m.noise.support) return {-kInf, kInf};
    return m.noise.support->axis(dim);
}

// Enumerates the corners of a list of intervals, invoking fn with the corner
// values. Degenerate intervals cost nothing extra.
template <typename Fn>
void for_each_corner(const std::vector<Interval>& axes, Fn&& fn) {
    size_t k = axes.size();
    if (k > 20) throw std::invalid_argument("corner enumeration dimension too large");
    std::vector<double> point(k);
    size_t combos = size_t{1} << k;
    for (size_t mask = 0; mask < combos; ++mask) {
        bool fresh = true;
        for (size_t d = 0; d < k; ++d) {
            double v = (mask >> d & 1) ? axes[d].hi : axes[d].lo;
            if ((mask >> d & 1) && axes[d].hi == axes[d].lo) {
                fresh = false;  // degenerate axis: skip the duplicate corner
                break;
            }
            point[d] = v;
        }
        if (fresh) fn(point);
    }
}

double output_mismatch_sup(const GmdpModel& full, const GmdpModel& reduced, const Matrix& F) {
    Matrix diff = matmul(reduced.output_map, F);
    if (diff.rows != full.output_map.rows)
        throw std::invalid_argument("output dimensions of the model pair differ");
    bool zero = true;
    for (int i = 0; i < diff.rows; ++i)
        for (int j = 0; j < diff.cols; ++j) {
            diff.at(i, j) -= full.output_map.at(i, j);
            if (diff.at(i, j) != 0.0) zero = false;
        }
    if (zero) return 0.0;
    double sq = 0.0;
    for (int i = 0; i < diff.rows; ++i) {
        Interval row{0.0, 0.0};
        for (int j = 0; j < diff.cols; ++j) row = row + full.state_space.axis(j) * diff.at(i, j);
        sq += row.mag() * row.mag();
    }
    return std::sqrt(sq);
}

struct CornerVar {
    enum class Kind { dropped, retained, input, theta } kind;
    int index;  // coordinate index within its kind
};

}  // namespace

SimRelationCert partial_mor_certificate(const GmdpModel& full, const GmdpModel& reduced,
                                        const MorSpec& spec, const Box& theta_box,
                                        const AdversaryFamily& /*adversary*/) {
    full.validate();
    reduced.validate();
    if (full.drift.kind != DriftForm::Kind::linear || reduced.drift.kind != DriftForm::Kind::linear)
        throw std::invalid_argument("coordinate-dropping certificate needs linear drift");

    const int n = full.state_dim();
    std::vector<int> retained = selected_coordinates(spec.F_map, n);
    if (static_cast<int>(retained.size()) != reduced.state_dim())
        throw std::invalid_argument("reduced state dimension must match the reduction map");
    std::vector<int> dropped;
    {
        std::vector<char> keep(n, 0);
        for (int r : retained) keep[r] = 1;
        for (int j = 0; j < n; ++j)
            if (!keep[j]) dropped.push_back(j);
    }
    std::vector<int> position(n, -1);
    for (size_t i = 0; i < retained.size(); ++i) position[retained[i]] = static_cast<int>(i);

    // The reduced block must be the exact restriction of the full drift.
    for (size_t i = 0; i < retained.size(); ++i)
        for (size_t j = 0; j < retained.size(); ++j)
            if (reduced.drift.A.at(static_cast<int>(i), static_cast<int>(j)) !=
                full.drift.A.at(retained[i], retained[j]))
                throw std::invalid_argument("reduced drift is not the restriction of the full drift");
    if (full.input_dim() != reduced.input_dim())
        throw std::invalid_argument("reduced input space must match the full input space");
    for (size_t i = 0; i < retained.size(); ++i)
        for (int j = 0; j < full.input_dim(); ++j)
            if (reduced.drift.B.at(static_cast<int>(i), j) != full.drift.B.at(retained[i], j))
                throw std::invalid_argument("reduced drift is not the restriction of the full drift");
    for (size_t i = 0; i < retained.size(); ++i) {
        if (reduced.noise.var[i] != full.noise.var[retained[i]])
            throw std::invalid_argument("reduced noise must share the retained noise coordinates");
        Interval sf = support_slice(full, retained[i]);
        Interval sr = support_slice(reduced, static_cast<int>(i));
        if (sf.lo != sr.lo || sf.hi != sr.hi)
            throw std::invalid_argument("reduced noise must share the retained noise coordinates");
    }
    // Slot correspondence on the retained block.
    std::vector<ThetaSlot> feedthrough_slots;  // retained row, dropped column
    {
        std::vector<char> matched(reduced.drift.slots.size(), 0);
        for (const auto& s : full.drift.slots) {
            bool row_ret = position[s.row] >= 0, col_ret = position[s.col] >= 0;
            if (row_ret && col_ret) {
                bool found = false;
                for (size_t k = 0; k < reduced.drift.slots.size(); ++k) {
                    const auto& rs = reduced.drift.slots[k];
                    if (!matched[k] && rs.theta_index == s.theta_index &&
                        rs.row == position[s.row] && rs.col == position[s.col]) {
                        matched[k] = found = true;
                        break;
                    }
                }
                if (!found)
                    throw std::invalid_argument(
                        "reduced drift is not the restriction of the full drift");
            } else if (row_ret) {
                feedthrough_slots.push_back(s);
            }
        }
        for (char m : matched)
            if (!m) throw std::invalid_argument("reduced drift carries a term the full drift lacks");
    }

    SimRelationCert cert;
    cert.epsilon = output_mismatch_sup(full, reduced, spec.F_map);
    cert.relation.kind = cert.epsilon == 0.0 ? RelationDescriptor::Kind::equality_under_map
                                             : RelationDescriptor::Kind::weighted_ball;
    cert.relation.map = spec.F_map;
    cert.relation.weights = spec.D_r;
    cert.relation.radius = cert.epsilon;
    cert.interface = spec.interface;
    cert.provenance = {"model-order-reduction"};
    cert.uniform_over_adversaries = true;  // shared surrogate kernel on the paired block

    const bool confined = spec.confinement.dim() > 0;
    if (confined && spec.confinement.dim() != dropped.size())
        throw std::invalid_argument("confinement must cover exactly the dropped coordinates");

    // Feedthrough from dropped to retained coordinates.
    bool has_feedthrough = !feedthrough_slots.empty();
    for (int r : retained)
        for (int d : dropped)
            if (full.drift.A.at(r, d) != 0.0) has_feedthrough = true;

    // Escape deficit of the dropped coordinates from their confinement.
    double delta_escape = 0.0;
    if (confined) {
        std::vector<Interval> axes;
        std::vector<CornerVar> vars;
        for (size_t d = 0; d < dropped.size(); ++d) {
            axes.push_back(spec.confinement.axis(d));
            vars.push_back({CornerVar::Kind::dropped, static_cast<int>(d)});
        }
        bool needs_retained = false, needs_input = false;
        std::vector<char> needs_theta(theta_box.dim(), 0);
        for (int gd : dropped) {
            for (int r : retained)
                if (full.drift.A.at(gd, r) != 0.0) needs_retained = true;
            for (int j = 0; j < full.input_dim(); ++j)
                if (full.drift.B.at(gd, j) != 0.0) needs_input = true;
        }
        for (const auto& s : full.drift.slots)
            if (position[s.row] < 0) needs_theta[s.theta_index] = 1;
        if (needs_retained)
            for (size_t i = 0; i < retained.size(); ++i) {
                axes.push_back(reduced.state_space.axis(i));
                vars.push_back({CornerVar::Kind::retained, static_cast<int>(i)});
            }
        if (needs_input)
            for (int j = 0; j < full.input_dim(); ++j) {
                axes.push_back(full.input_space.axis(j));
                vars.push_back({CornerVar::Kind::input, j});
            }
        for (size_t t = 0; t < needs_theta.size(); ++t)
            if (needs_theta[t]) {
                axes.push_back(theta_box.axis(t));
                vars.push_back({CornerVar::Kind::theta, static_cast<int>(t)});
            }
        for (const Interval& ax : axes)
            if (!ax.bounded())
                throw std::invalid_argument("escape analysis needs bounded domains");

        for_each_corner(axes, [&](const std::vector<double>& corner) {
            std::vector<double> xi(dropped.size()), xr(retained.size(), 0.0),
                u(full.input_dim(), 0.0), theta(theta_box.dim(), 0.0);
            for (size_t v = 0; v < vars.size(); ++v) {
                switch (vars[v].kind) {
                    case CornerVar::Kind::dropped: xi[vars[v].index] = corner[v]; break;
                    case CornerVar::Kind::retained: xr[vars[v].index] = corner[v]; break;
                    case CornerVar::Kind::input: u[vars[v].index] = corner[v]; break;
                    case CornerVar::Kind::theta: theta[vars[v].index] = corner[v]; break;
                }
            }
            double retention = 1.0;
            for (size_t d = 0; d < dropped.size(); ++d) {
                int gd = dropped[d];
                double mean = 0.0;
                for (size_t k = 0; k < dropped.size(); ++k) mean += full.drift.A.at(gd, dropped[k]) * xi[k];
                for (size_t k = 0; k < retained.size(); ++k)
                    mean += full.drift.A.at(gd, retained[k]) * xr[k];
                for (int j = 0; j < full.input_dim(); ++j) mean += full.drift.B.at(gd, j) * u[j];
                for (const auto& s : full.drift.slots)
                    if (s.row == gd) {
                        double xc = position[s.col] >= 0 ? xr[position[s.col]] : 0.0;
                        for (size_t k = 0; k < dropped.size(); ++k)
                            if (dropped[k] == s.col) xc = xi[k];
                        mean += theta[s.theta_index] * xc;
                    }
                GaussianMeasure g;
                g.mean = {mean};
                g.var = {full.noise.var[gd]};
                Interval w = support_slice(full, gd);
                if (w.bounded()) g.support = Box({mean + w.lo}, {mean + w.hi});
                Box conf({spec.confinement.lo[d]}, {spec.confinement.hi[d]});
                retention *= cell_mass(g, conf);
            }
            delta_escape = std::max(delta_escape, 1.0 - retention);
        });
    }

    if (!has_feedthrough) {
        cert.delta = {delta_escape};
        return cert;
    }

    // Dropped coordinates shift the retained kernel; estimate the coupling
    // failure rate at the analytically worst corner.
    if (!confined)
        throw std::invalid_argument("coupling estimate requires bounded confinement");
    for (size_t i = 0; i < retained.size(); ++i)
        if (support_slice(full, retained[i]).bounded())
            throw std::invalid_argument("coupling estimate requires untruncated retained noise");

    std::vector<Interval> axes;
    for (size_t d = 0; d < dropped.size(); ++d) axes.push_back(spec.confinement.axis(d));
    size_t theta_base = axes.size();
    std::vector<int> theta_used;
    for (const auto& s : feedthrough_slots)
        if (std::find(theta_used.begin(), theta_used.end(), s.theta_index) == theta_used.end())
            theta_used.push_back(s.theta_index);
    for (int t : theta_used) axes.push_back(theta_box.axis(t));

    double worst_distance = -1.0;
    std::vector<double> worst_shift(retained.size(), 0.0);
    for_each_corner(axes, [&](const std::vector<double>& corner) {
        std::vector<double> shift(retained.size(), 0.0);
        for (size_t i = 0; i < retained.size(); ++i) {
            for (size_t d = 0; d < dropped.size(); ++d)
                shift[i] += full.drift.A.at(retained[i], dropped[d]) * corner[d];
        }
        for (const auto& s : feedthrough_slots) {
            double theta = 0.0;
            for (size_t t = 0; t < theta_used.size(); ++t)
                if (theta_used[t] == s.theta_index) theta = corner[theta_base + t];
            for (size_t d = 0; d < dropped.size(); ++d)
                if (dropped[d] == s.col) shift[position[s.row]] += theta * corner[d];
        }
        double dist = 0.0;
        for (size_t i = 0; i < retained.size(); ++i)
            dist += shift[i] * shift[i] / full.noise.var[retained[i]];
        if (dist > worst_distance) {
            worst_distance = dist;
            worst_shift = shift;
        }
    });

    Rng rng(spec.mc_seed);
    int failures = 0;
    const int nsamp = spec.mc_samples;
    for (int trial = 0; trial < nsamp; ++trial) {
        double log_ratio = 0.0;
        for (size_t i = 0; i < retained.size(); ++i) {
            double sd = std::sqrt(full.noise.var[retained[i]]);
            double q = sd * rng.normal();
            double s = worst_shift[i];
            log_ratio += (q * q - (q - s) * (q - s)) / (2.0 * full.noise.var[retained[i]]);
        }
        if (std::log(rng.uniform() + 1e-300) > log_ratio) ++failures;
    }
    // Two-sided 98% interval makes the upper endpoint a one-sided 99% bound.
    double delta_mc = clopper_pearson(failures, nsamp, 0.98).hi;
    cert.delta = {std::min(1.0, delta_escape + delta_mc)};
    cert.provenance.push_back("coupling failure rate estimated by sampling (99% upper bound)");
    return cert;
}

SimRelationCert full_mor_certificate(const GmdpModel& full, const GmdpModel& reduced,
                                     const MorSpec& spec) {
    full.validate();
    reduced.validate();
    if (full.drift.kind != DriftForm::Kind::linear || reduced.drift.kind != DriftForm::Kind::linear)
        throw std::invalid_argument("full-order certificate needs linear drift");
    if (!full.drift.slots.empty() || !reduced.drift.slots.empty())
        throw std::invalid_argument("full-order certificate expects fixed dynamics; substitute nominal parameters first");
    const int n = full.state_dim();
    if (reduced.state_dim() != n)
        throw std::invalid_argument("full-order certificate requires equal state dimensions");
    Matrix Fp = spec.F_map.rows > 0 ? spec.F_map : Matrix::identity(n);
    if (Fp.rows != n || Fp.cols != n)
        throw std::invalid_argument("lift map must be square at the shared dimension");
    if (spec.gamma_box.dim() != static_cast<size_t>(n) || !spec.gamma_box.bounded())
        throw std::invalid_argument("noise-coupling box must be a bounded box of state dimension");
    if (!reduced.state_space.bounded())
        throw std::invalid_argument("full-order certificate needs a bounded reduced domain");

    // Reduced-noise box for the propagation; unbounded noise is clipped at
    // six standard deviations and the clipped mass charged to delta.
    double delta_trunc = 0.0;
    std::vector<Interval> w_box(n);
    for (int d = 0; d < n; ++d) {
        Interval s = support_slice(reduced, d);
        if (s.bounded()) {
            w_box[d] = s;
        } else {
            double sd = std::sqrt(reduced.noise.var[d]);
            w_box[d] = {-6.0 * sd, 6.0 * sd};
            delta_trunc += 2.0 * std_normal_cdf(-6.0);
        }
    }

    std::vector<double> weights = spec.D_r.empty() ? std::vector<double>(n, 1.0) : spec.D_r;
    if (static_cast<int>(weights.size()) != n)
        throw std::invalid_argument("metric weights must match the state dimension");

    // Error recursion terms: e+ = A e + (A F' - F' A_r) x_r + (B - F' B_r) u
    //                             + gamma + (I - F') w_r.
    Matrix xr_term = matmul(full.drift.A, Fp);
    Matrix FpAr = matmul(Fp, reduced.drift.A);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) xr_term.at(i, j) -= FpAr.at(i, j);
    Matrix u_term = full.drift.B;
    if (full.input_dim() != reduced.input_dim())
        throw std::invalid_argument("full-order certificate expects a shared input space");
    if (full.input_dim() > 0) {
        Matrix FpBr = matmul(Fp, reduced.drift.B);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < full.input_dim(); ++j) u_term.at(i, j) -= FpBr.at(i, j);
    }
    Matrix w_term = Matrix::identity(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w_term.at(i, j) -= Fp.at(i, j);

    double norm_sq = 0.0;
    int worst_dim = 0;
    double worst_mag = 0.0;
    for (int i = 0; i < n; ++i) {
        Interval acc{0.0, 0.0};
        for (int j = 0; j < n; ++j) {
            Interval ball{-spec.radius / std::sqrt(weights[j]), spec.radius / std::sqrt(weights[j])};
            acc = acc + ball * full.drift.A.at(i, j);
            acc = acc + reduced.state_space.axis(j) * xr_term.at(i, j);
            acc = acc + w_box[j] * w_term.at(i, j);
        }
        for (int j = 0; j < full.input_dim(); ++j)
            acc = acc + full.input_space.axis(j) * u_term.at(i, j);
        acc = acc + spec.gamma_box.axis(i);
        double mag = acc.mag();
        norm_sq += weights[i] * mag * mag;
        if (mag > worst_mag) {
            worst_mag = mag;
            worst_dim = i;
        }
    }
    if (std::sqrt(norm_sq) > spec.radius + 1e-12) {
        std::ostringstream msg;
        msg << "invariance of the radius-" << spec.radius << " ball fails: error reach "
            << std::sqrt(norm_sq) << ", largest along dimension " << worst_dim;
        throw std::invalid_argument(msg.str());
    }

    double dist_sq = 0.0;
    for (int d = 0; d < n; ++d) {
        double m = spec.gamma_box.axis(d).mag();
        dist_sq += m * m;
    }
    SimRelationCert cert;
    cert.epsilon = spec.radius;
    cert.delta = {std::min(1.0, deficiency_from_distance(std::sqrt(dist_sq)) + delta_trunc)};
    cert.relation.kind = RelationDescriptor::Kind::weighted_ball;
    cert.relation.map = Fp;
    cert.relation.weights = weights;
    cert.relation.radius = spec.radius;
    cert.interface = spec.interface;
    cert.provenance = {"model-order-reduction (full order)"};
    cert.uniform_over_adversaries = true;
    return cert;
}

int EvalGrid::total_cells() const {
    int total = 1;
    for (int c : cells) {
        if (c < 1) throw std::invalid_argument("grid needs at least one cell per dimension");
        total *= c;
    }
    return total;
}

Box EvalGrid::cell_box(int flat_index) const {
    size_t d = domain.dim();
    if (cells.size() != d) throw std::invalid_argument("grid shape mismatch");
    std::vector<double> lo(d), hi(d);
    int rest = flat_index;
    for (int k = static_cast<int>(d) - 1; k >= 0; --k) {
        int idx = rest % cells[k];
        rest /= cells[k];
        double width = (domain.hi[k] - domain.lo[k]) / cells[k];
        lo[k] = domain.lo[k] + idx * width;
        hi[k] = idx + 1 == cells[k] ? domain.hi[k] : domain.lo[k] + (idx + 1) * width;
    }
    return Box(lo, hi);
}

namespace {

struct DeviationTerm {
    int theta_index;  // -1 for the adversary term
    int row;
    int col;
};

std::vector<DeviationTerm> deviation_terms(const GmdpModel& m) {
    std::vector<DeviationTerm> terms;
    if (m.drift.kind == DriftForm::Kind::linear) {
        for (const auto& s : m.drift.slots) terms.push_back({s.theta_index, s.row, s.col});
    } else {
        terms.push_back({m.drift.bicycle.theta_index, 3, 3});
    }
    return terms;
}

}  // namespace

double ambiguity_delta_cell(const GmdpModel& parametrized, const Box& cell, NormMode mode) {
    if (cell.dim() != static_cast<size_t>(parametrized.state_dim()))
        throw std::invalid_argument("cell dimension must match the state");
    const std::vector<DeviationTerm> terms = deviation_terms(parametrized);
    const AdversaryFamily& adv = parametrized.adversary;
    const bool has_adv = adv.kind == AdversaryFamily::Kind::bilinear_cosine;

    // Corner axes: each referenced state coordinate, each referenced theta,
    // and the adversary parameters.
    std::vector<int> state_cols, theta_idx;
    for (const auto& t : terms) {
        if (std::find(state_cols.begin(), state_cols.end(), t.col) == state_cols.end())
            state_cols.push_back(t.col);
        if (std::find(theta_idx.begin(), theta_idx.end(), t.theta_index) == theta_idx.end())
            theta_idx.push_back(t.theta_index);
    }
    if (has_adv && std::find(state_cols.begin(), state_cols.end(), adv.vel_index) == state_cols.end())
        state_cols.push_back(adv.vel_index);

    std::vector<Interval> axes;
    for (int c : state_cols) axes.push_back(cell.axis(c));
    size_t theta_base = axes.size();
    for (int t : theta_idx) axes.push_back(parametrized.theta_box.axis(t));
    size_t adv_base = axes.size();
    if (has_adv) {
        // The shift is linear in cos(p0+p1), so the exact cosine range is the
        // right corner axis; parameter corners would miss interior extrema.
        Interval sum = adv.param_box.axis(0) + adv.param_box.axis(1);
        axes.push_back(hull_cos(sum));
    }
    for (const Interval& ax : axes)
        if (!ax.bounded()) throw std::invalid_argument("deviation sup needs bounded ranges");

    auto col_pos = [&](int col) {
        return static_cast<size_t>(std::find(state_cols.begin(), state_cols.end(), col) -
                                   state_cols.begin());
    };
    auto theta_pos = [&](int t) {
        return theta_base + static_cast<size_t>(std::find(theta_idx.begin(), theta_idx.end(), t) -
                                                theta_idx.begin());
    };
    double nominal_cos =
        has_adv ? std::cos(adv.nominal_params[0] + adv.nominal_params[1]) : 0.0;

    double worst = 0.0;
    for_each_corner(axes, [&](const std::vector<double>& corner) {
        std::vector<double> shift(parametrized.state_dim(), 0.0);
        for (const auto& t : terms)
            shift[t.row] +=
                (corner[theta_pos(t.theta_index)] - parametrized.theta_hat[t.theta_index]) *
                corner[col_pos(t.col)];
        if (has_adv)
            shift[adv.out_row] +=
                adv.gain * corner[col_pos(adv.vel_index)] * (corner[adv_base] - nominal_cos);
        double c;
        if (mode == NormMode::weighted) {
            double sq = 0.0;
            for (int d = 0; d < parametrized.state_dim(); ++d)
                sq += shift[d] * shift[d] / parametrized.noise.var[d];
            c = std::sqrt(sq);
        } else {
            double sum = 0.0;
            for (double s : shift) sum += s;
            c = std::fabs(sum);
        }
        worst = std::max(worst, c);
    });
    return deficiency_from_distance(worst);
}

SimRelationCert ambiguity_certificate(const GmdpModel& parametrized, const EvalGrid& grid,
                                      NormMode mode) {
    if (grid.domain.dim() != static_cast<size_t>(parametrized.state_dim()))
        throw std::invalid_argument("evaluation grid must cover the state space");
    SimRelationCert cert;
    cert.epsilon = 0.0;
    cert.relation.kind = RelationDescriptor::Kind::equality_under_map;
    cert.interface.kind = InterfaceDescriptor::Kind::identity;
    cert.provenance = {"ambiguity"};
    cert.uniform_over_adversaries = true;
    int total = grid.total_cells();
    cert.delta.assign(total, 0.0);
    for (int i = 0; i < total; ++i)
        cert.delta[i] = ambiguity_delta_cell(parametrized, grid.cell_box(i), mode);
    return cert;
}

ScalarField2d case_study_delta2_field(NormMode mode, int nx, int ny, double v_agent_max,
                                      double v_sim_max) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("field needs at least two points per axis");
    CaseStudy cs = builtin_case_study();
    GmdpModel prod = compose_parametrized_product(cs.reduced_agent, cs.simulator);

    ScalarField2d field;
    field.x.resize(nx);
    field.y.resize(ny);
    field.value.resize(static_cast<size_t>(nx) * ny);
    for (int i = 0; i < nx; ++i) field.x[i] = v_agent_max * i / (nx - 1);
    for (int j = 0; j < ny; ++j) field.y[j] = v_sim_max * j / (ny - 1);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            // Point evaluation: positions do not enter the deviation terms.
            Box point({field.x[i], 0.0, field.y[j], 0.0}, {field.x[i], 0.0, field.y[j], 0.0});
            double d = ambiguity_delta_cell(prod, point, mode);
            field.value[static_cast<size_t>(i) * ny + j] = d;
            field.max_value = std::max(field.max_value, d);
        }
    return field;
}

std::string field_to_csv(const ScalarField2d& field, const std::string& x_name,
                         const std::string& y_name, const std::string& value_name) {
    std::ostringstream out;
    out << x_name << "," << y_name << "," << value_name << "\n";
    char buf[96];
    for (size_t i = 0; i < field.x.size(); ++i)
        for (size_t j = 0; j < field.y.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g", field.x[i], field.y[j],
                          field.value[i * field.y.size() + j]);
            out << buf << "\n";
        }
    return out.str();
}

}  // namespace relsyn
