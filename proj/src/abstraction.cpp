#include "relsyn/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relsyn {

int GridSpec::total_cells() const {
    if (cells.size() != domain.dim()) throw std::invalid_argument("grid shape mismatch");
    int total = 1;
    for (int c : cells) {
        if (c < 1) throw std::invalid_argument("grid needs at least one cell per dimension");
        total *= c;
    }
    return total;
}

std::vector<int> GridSpec::decode(int flat_index) const {
    std::vector<int> idx(cells.size());
    for (int d = static_cast<int>(cells.size()) - 1; d >= 0; --d) {
        idx[d] = flat_index % cells[d];
        flat_index /= cells[d];
    }
    return idx;
}

int GridSpec::encode(const std::vector<int>& idx) const {
    int flat = 0;
    for (size_t d = 0; d < cells.size(); ++d) flat = flat * cells[d] + idx[d];
    return flat;
}

Box GridSpec::cell_box(int flat_index) const {
    std::vector<int> idx = decode(flat_index);
    size_t n = domain.dim();
    std::vector<double> lo(n), hi(n);
    for (size_t d = 0; d < n; ++d) {
        double width = (domain.hi[d] - domain.lo[d]) / cells[d];
        lo[d] = domain.lo[d] + idx[d] * width;
        hi[d] = idx[d] + 1 == cells[d] ? domain.hi[d] : domain.lo[d] + (idx[d] + 1) * width;
    }
    return Box(lo, hi);
}

std::vector<double> GridSpec::representative(int flat_index) const {
    std::vector<int> idx = decode(flat_index);
    std::vector<double> rep(domain.dim());
    for (size_t d = 0; d < rep.size(); ++d) {
        double width = (domain.hi[d] - domain.lo[d]) / cells[d];
        rep[d] = domain.lo[d] + (idx[d] + 0.5) * width;
    }
    return rep;
}

std::vector<double> GridSpec::half_widths() const {
    std::vector<double> hw(domain.dim());
    for (size_t d = 0; d < hw.size(); ++d) hw[d] = (domain.hi[d] - domain.lo[d]) / cells[d] / 2.0;
    return hw;
}

int GridSpec::locate(const std::vector<double>& x) const {
    if (x.size() != domain.dim()) throw std::invalid_argument("point dimension mismatch");
    std::vector<int> idx(cells.size());
    for (size_t d = 0; d < cells.size(); ++d) {
        if (x[d] < domain.lo[d] || x[d] > domain.hi[d]) return -1;
        double t = (x[d] - domain.lo[d]) / (domain.hi[d] - domain.lo[d]);
        idx[d] = std::min(cells[d] - 1, static_cast<int>(t * cells[d]));
    }
    return encode(idx);
}

std::vector<std::vector<double>> GridSpec::uniform_levels(const Box& input_space, int per_dim) {
    if (per_dim < 1) throw std::invalid_argument("need at least one input level per dimension");
    size_t m = input_space.dim();
    if (m == 0) return {{}};
    if (!input_space.bounded()) throw std::invalid_argument("input space must be bounded");
    std::vector<std::vector<double>> axis(m);
    for (size_t d = 0; d < m; ++d) {
        if (per_dim == 1) {
            axis[d] = {0.5 * (input_space.lo[d] + input_space.hi[d])};
        } else {
            for (int i = 0; i < per_dim; ++i)
                axis[d].push_back(input_space.lo[d] +
                                  (input_space.hi[d] - input_space.lo[d]) * i / (per_dim - 1));
        }
    }
    std::vector<std::vector<double>> levels;
    std::vector<int> idx(m, 0);
    for (;;) {
        std::vector<double> u(m);
        for (size_t d = 0; d < m; ++d) u[d] = axis[d][idx[d]];
        levels.push_back(u);
        int d = static_cast<int>(m) - 1;
        while (d >= 0 && ++idx[d] == per_dim) idx[d--] = 0;
        if (d < 0) break;
    }
    return levels;
}

namespace {

// Drift matrix with nominal parameters and the nominal adversary folded in.
Matrix nominal_matrix(const GmdpModel& m) {
    Matrix A = m.drift.A;
    for (const auto& s : m.drift.slots) A.at(s.row, s.col) += m.theta_hat[s.theta_index];
    if (m.adversary.kind == AdversaryFamily::Kind::bilinear_cosine) {
        double c = std::cos(m.adversary.nominal_params[0] + m.adversary.nominal_params[1]);
        A.at(m.adversary.out_row, m.adversary.vel_index) += m.adversary.gain * c;
    }
    return A;
}

Interval noise_support_slice(const GmdpModel& m, int dim) {
    if (!m.noise.support) return {-kInf, kInf};
    return m.noise.support->axis(dim);
}

SimRelationCert grid_certificate(const GmdpModel& nominal, const GridSpec& grid, NormMode mode) {
    Matrix A = nominal_matrix(nominal);
    std::vector<double> hw = grid.half_widths();
    const int n = nominal.state_dim();

    std::vector<double> drift_dev(n, 0.0);
    for (int d = 0; d < n; ++d)
        for (int j = 0; j < n; ++j) drift_dev[d] += std::fabs(A.at(d, j)) * hw[j];
    double delta = coupling_deficiency(drift_dev, nominal.noise.var, mode);

    double eps_sq = 0.0;
    for (int i = 0; i < nominal.output_map.rows; ++i) {
        double dev = 0.0;
        for (int j = 0; j < n; ++j) dev += std::fabs(nominal.output_map.at(i, j)) * hw[j];
        double w = nominal.output_weights.empty() ? 1.0 : nominal.output_weights[i];
        eps_sq += w * dev * dev;
    }

    SimRelationCert cert;
    cert.epsilon = std::sqrt(eps_sq);
    cert.delta = {delta};
    cert.relation.kind = RelationDescriptor::Kind::weighted_ball;
    cert.relation.map = Matrix::identity(n);
    cert.relation.radius = cert.epsilon;
    cert.interface.kind = InterfaceDescriptor::Kind::identity;
    cert.provenance = {"discretization"};
    cert.uniform_over_adversaries = true;
    return cert;
}

}  // namespace

std::vector<double> FiniteAbstraction::row(int cell, int input) const {
    std::vector<int> idx = grid.decode(cell);
    size_t n = kernels.size();
    // Per-dimension mass vectors for this (cell, input).
    std::vector<const double*> line(n);
    for (size_t d = 0; d < n; ++d) {
        const DimKernel& k = kernels[d];
        int joint = 0;
        for (int dep : k.deps) joint = joint * grid.cells[dep] + idx[dep];
        line[d] = &k.mass[(static_cast<size_t>(input) * k.dep_count + joint) * k.next_count];
    }
    std::vector<double> out(static_cast<size_t>(num_states()), 1.0);
    // Expand the product, last dimension fastest to match flat encoding.
    size_t stride = out.size();
    for (size_t d = 0; d < n; ++d) {
        stride /= grid.cells[d];
        for (size_t f = 0; f < out.size(); ++f) out[f] *= line[d][(f / stride) % grid.cells[d]];
    }
    return out;
}

double FiniteAbstraction::row_mass(int cell, int input) const {
    std::vector<int> idx = grid.decode(cell);
    double total = 1.0;
    for (const DimKernel& k : kernels) {
        int joint = 0;
        for (int dep : k.deps) joint = joint * grid.cells[dep] + idx[dep];
        double s = 0.0;
        for (int next = 0; next < k.next_count; ++next) s += k.at(input, joint, next);
        total *= s;
    }
    return total;
}

FiniteGmdp FiniteAbstraction::to_finite(int max_states) const {
    if (num_states() > max_states)
        throw std::invalid_argument("grid too large to materialize densely");
    FiniteGmdp f;
    f.num_states = num_states();
    f.num_inputs = num_inputs();
    f.transition.resize(f.num_states);
    f.outputs.resize(f.num_states);
    for (int x = 0; x < f.num_states; ++x) {
        f.transition[x].resize(f.num_inputs);
        for (int u = 0; u < f.num_inputs; ++u) f.transition[x][u] = row(x, u);
        f.outputs[x] = output_map.apply(representative(x));
        if (initial_set.dim() > 0 && initial_set.contains(representative(x), 1e-12))
            f.initial.push_back(x);
    }
    f.validate();
    return f;
}

FiniteAbstraction build_abstraction(const GmdpModel& nominal, const GridSpec& grid) {
    nominal.validate();
    if (nominal.drift.kind != DriftForm::Kind::linear)
        throw std::invalid_argument("gridding needs linear drift");
    const int n = nominal.state_dim();
    if (grid.domain.dim() != static_cast<size_t>(n))
        throw std::invalid_argument("grid domain must match the state space");
    if (!grid.domain.bounded()) throw std::invalid_argument("grid domain must be bounded");
    grid.total_cells();  // validates shape

    std::vector<std::vector<double>> levels = grid.input_levels;
    if (levels.empty() && nominal.input_dim() == 0) levels = {{}};
    if (levels.empty()) throw std::invalid_argument("need at least one input level");
    for (const auto& u : levels) {
        if (static_cast<int>(u.size()) != nominal.input_dim())
            throw std::invalid_argument("input level dimension mismatch");
        if (nominal.input_dim() > 0 && !nominal.input_space.contains(u, 1e-9))
            throw std::invalid_argument("input level outside the input space");
    }

    Matrix A = nominal_matrix(nominal);
    FiniteAbstraction fab;
    fab.grid = grid;
    fab.grid.input_levels = levels;
    fab.cell_radius = grid.half_widths();
    fab.output_map = nominal.output_map;
    fab.output_weights = nominal.output_weights;
    fab.initial_set = nominal.initial_set;

    for (int d = 0; d < n; ++d) {
        DimKernel k;
        k.dim = d;
        for (int j = 0; j < n; ++j)
            if (A.at(d, j) != 0.0) k.deps.push_back(j);
        k.dep_count = 1;
        for (int dep : k.deps) k.dep_count *= grid.cells[dep];
        k.next_count = grid.cells[d];
        if (static_cast<double>(k.dep_count) * k.next_count * levels.size() > 5e7)
            throw std::invalid_argument("dependency structure too dense to factor");
        k.mass.assign(static_cast<size_t>(levels.size()) * k.dep_count * k.next_count, 0.0);

        double width = (grid.domain.hi[d] - grid.domain.lo[d]) / grid.cells[d];
        Interval w_slice = noise_support_slice(nominal, d);
        for (size_t ui = 0; ui < levels.size(); ++ui) {
            double input_part = 0.0;
            for (int j = 0; j < nominal.input_dim(); ++j)
                input_part += nominal.drift.B.at(d, j) * levels[ui][j];
            for (int joint = 0; joint < k.dep_count; ++joint) {
                double drift = input_part;
                int rest = joint;
                for (int di = static_cast<int>(k.deps.size()) - 1; di >= 0; --di) {
                    int dep = k.deps[di];
                    int ci = rest % grid.cells[dep];
                    rest /= grid.cells[dep];
                    double dep_width = (grid.domain.hi[dep] - grid.domain.lo[dep]) / grid.cells[dep];
                    drift += A.at(d, dep) * (grid.domain.lo[dep] + (ci + 0.5) * dep_width);
                }
                GaussianMeasure g;
                g.mean = {drift + nominal.noise.mean[d]};
                g.var = {nominal.noise.var[d]};
                if (nominal.noise.support)
                    g.support = Box({drift + w_slice.lo}, {drift + w_slice.hi});
                for (int next = 0; next < k.next_count; ++next) {
                    double lo = grid.domain.lo[d] + next * width;
                    double hi = next + 1 == k.next_count ? grid.domain.hi[d]
                                                         : grid.domain.lo[d] + (next + 1) * width;
                    k.mass[(ui * k.dep_count + joint) * k.next_count + next] =
                        cell_mass(g, Box({lo}, {hi}));
                }
            }
        }
        fab.kernels.push_back(std::move(k));
    }
    fab.cert = grid_certificate(nominal, fab.grid, NormMode::weighted);
    return fab;
}

SimRelationCert discretization_certificate(const GmdpModel& nominal, const FiniteAbstraction& fab,
                                           NormMode mode) {
    if (nominal.drift.kind != DriftForm::Kind::linear)
        throw std::invalid_argument("gridding needs linear drift");
    return grid_certificate(nominal, fab.grid, mode);
}

}  // namespace relsyn
