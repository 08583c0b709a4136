#include "relsyn/gmdp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace relsyn {

using nlohmann::json;

Matrix::Matrix(int r, int c, std::initializer_list<double> vals) : Matrix(r, c) {
    if (static_cast<int>(vals.size()) != r * c)
        throw std::invalid_argument("Matrix: initializer size mismatch");
    std::copy(vals.begin(), vals.end(), data.begin());
}

std::vector<double> Matrix::apply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols) throw std::invalid_argument("Matrix::apply: dim mismatch");
    std::vector<double> y(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) s += at(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::projection(int n, const std::vector<int>& coords) {
    Matrix m(static_cast<int>(coords.size()), n);
    for (size_t i = 0; i < coords.size(); ++i) {
        if (coords[i] < 0 || coords[i] >= n) throw std::invalid_argument("projection: coord out of range");
        m.at(static_cast<int>(i), coords[i]) = 1.0;
    }
    return m;
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: dim mismatch");
    std::vector<double> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

std::vector<double> sub(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sub: dim mismatch");
    std::vector<double> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: dim mismatch");
    Matrix r(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            double v = a.at(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) r.at(i, j) += v * b.at(k, j);
        }
    return r;
}

Matrix block_diag(const Matrix& a, const Matrix& b) {
    Matrix r(a.rows + b.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) r.at(i, j) = a.at(i, j);
    for (int i = 0; i < b.rows; ++i)
        for (int j = 0; j < b.cols; ++j) r.at(a.rows + i, a.cols + j) = b.at(i, j);
    return r;
}

std::vector<double> AdversaryFamily::eval(const std::vector<double>& x,
                                          const std::vector<double>& /*o*/,
                                          const std::vector<double>& params) const {
    if (kind == Kind::none) return {};
    std::vector<double> d(out_dim, 0.0);
    d[out_row] = gain * x[vel_index] * std::cos(params[0] + params[1]);
    return d;
}

std::vector<double> AdversaryFamily::eval_nominal(const std::vector<double>& x,
                                                  const std::vector<double>& o) const {
    return eval(x, o, nominal_params);
}

void GmdpModel::validate() const {
    if (noise.dim() != static_cast<size_t>(state_dim()))
        throw std::invalid_argument(name + ": noise dimension must match state dimension");
    if (output_map.cols != state_dim())
        throw std::invalid_argument(name + ": output map must act on the state");
    if (!output_weights.empty() && static_cast<int>(output_weights.size()) != output_map.rows)
        throw std::invalid_argument(name + ": output weights must match output dimension");
    if (theta_box.dim() != theta_hat.size())
        throw std::invalid_argument(name + ": nominal theta must live in the parameter box");
    if (!theta_hat.empty() && !theta_box.contains(theta_hat, 1e-12))
        throw std::invalid_argument(name + ": nominal theta outside parameter box");
    if (drift.kind == DriftForm::Kind::linear) {
        if (drift.A.rows != state_dim() || drift.A.cols != state_dim())
            throw std::invalid_argument(name + ": A must be state_dim x state_dim");
        if (input_dim() > 0 && (drift.B.rows != state_dim() || drift.B.cols != input_dim()))
            throw std::invalid_argument(name + ": B must be state_dim x input_dim");
        if (obs_dim() > 0 && drift.C.rows > 0 &&
            (drift.C.rows != state_dim() || drift.C.cols != obs_dim()))
            throw std::invalid_argument(name + ": C must be state_dim x obs_dim");
        for (const auto& s : drift.slots) {
            if (s.row < 0 || s.row >= state_dim() || s.col < 0 || s.col >= state_dim())
                throw std::invalid_argument(name + ": theta slot out of range");
            if (s.theta_index < 0 || s.theta_index >= static_cast<int>(theta_hat.size()))
                throw std::invalid_argument(name + ": theta slot index out of range");
        }
    } else {
        if (state_dim() != 6) throw std::invalid_argument(name + ": car model is 6-dimensional");
    }
}

namespace {

std::vector<double> bicycle_drift(const DriftForm::BicycleParams& p, const std::vector<double>& x,
                                  const std::vector<double>& o, const std::vector<double>& theta) {
    const double beta = x[0], dpsi = x[1], psi = x[2], v = x[3], sx = x[4], sy = x[5];
    if (v == 0.0) throw std::invalid_argument("car drift: velocity must be nonzero");
    const double beta_dot = -p.cornering * p.gravity * p.friction * beta / v - dpsi;
    const double psi_ddot = -p.cornering * p.gravity * p.wheelbase * p.friction * p.mass * dpsi /
                            (p.inertia * v);
    const double th = theta[p.theta_index];
    const double xi = o.empty() ? 0.0 : o[0];
    return {beta + p.tau * beta_dot,
            dpsi + p.tau * psi_ddot,
            psi + p.tau * dpsi,
            th * v + p.a4 * xi,
            sx + p.tau * v * std::cos(beta + psi) + p.a5 * xi,
            sy + p.tau * v * std::sin(beta + psi)};
}

}  // namespace

std::vector<double> drift_eval(const GmdpModel& model, const std::vector<double>& x,
                               const std::vector<double>& u, const std::vector<double>& o,
                               const std::vector<double>& theta) {
    if (static_cast<int>(x.size()) != model.state_dim())
        throw std::invalid_argument(model.name + ": state dimension mismatch");
    if (static_cast<int>(u.size()) != model.input_dim())
        throw std::invalid_argument(model.name + ": input dimension mismatch");
    if (model.drift.kind == DriftForm::Kind::bicycle)
        return bicycle_drift(model.drift.bicycle, x, o, theta);

    std::vector<double> next = model.drift.A.apply(x);
    if (model.input_dim() > 0) next = add(next, model.drift.B.apply(u));
    if (model.drift.C.rows > 0 && !o.empty()) next = add(next, model.drift.C.apply(o));
    for (const auto& s : model.drift.slots) next[s.row] += theta[s.theta_index] * x[s.col];
    return next;
}

std::vector<double> step(const GmdpModel& model, const std::vector<double>& x,
                         const std::vector<double>& u, const std::vector<double>& o,
                         const std::vector<double>& theta,
                         const std::vector<double>& disturbance, Rng& rng) {
    if (!model.state_space.contains(x, 1e-9))
        throw std::invalid_argument(model.name + ": state outside domain");
    if (model.input_dim() > 0 && !model.input_space.contains(u, 1e-9))
        throw std::invalid_argument(model.name + ": input outside domain");
    if (!model.theta_hat.empty() && !model.theta_box.contains(theta, 1e-9))
        throw std::invalid_argument(model.name + ": parameter outside box");

    std::vector<double> next = drift_eval(model, x, u, o, theta);
    if (!disturbance.empty()) next = add(next, disturbance);
    return add(next, sample(model.noise, rng));
}

Box adversary_disturbance_hull(const AdversaryFamily& fam, const Box& x_box, const Box& /*o_box*/) {
    if (fam.kind == AdversaryFamily::Kind::none)
        return Box(std::vector<double>(fam.out_dim, 0.0), std::vector<double>(fam.out_dim, 0.0));
    if (!fam.param_box.bounded())
        throw std::invalid_argument("adversary hull: parameter box must be bounded");
    Interval vel = x_box.axis(fam.vel_index);
    if (!vel.bounded()) throw std::invalid_argument("adversary hull: velocity range must be bounded");

    Interval angle = fam.param_box.axis(0) + fam.param_box.axis(1);
    double nominal_cos = std::cos(fam.nominal_params[0] + fam.nominal_params[1]);
    Interval cs = hull_cos(angle);
    // Deviation factor cos(angle) - cos(nominal angle); exact since hull_cos is
    // exact and the product with vel enumerates interval corners.
    Interval dev = (cs - Interval{nominal_cos, nominal_cos}) * vel * fam.gain;

    std::vector<double> lo(fam.out_dim, 0.0), hi(fam.out_dim, 0.0);
    lo[fam.out_row] = dev.lo;
    hi[fam.out_row] = dev.hi;
    return Box(std::move(lo), std::move(hi));
}

CaseStudy builtin_case_study() {
    const double tau = 0.5;
    const double a1 = 0.2, b = 0.001;
    CaseStudy cs;

    GmdpModel& agent = cs.agent;
    agent.name = "agent";
    agent.state_space = Box({-0.05, 0.0, 0.0}, {0.05, 3.0, 3.5});
    agent.initial_set = agent.state_space;
    agent.input_space = Box({-5.0}, {5.0});
    agent.drift.kind = DriftForm::Kind::linear;
    agent.drift.A = Matrix(3, 3, {a1, 0, 0, 0, 0, 0, 0, tau, 1});
    agent.drift.B = Matrix(3, 1, {b, tau, 0});
    agent.drift.slots = {{0, 1, 1}};  // theta_A scales v
    agent.noise.mean = {0.0, 0.0, 0.0};
    agent.noise.var = {1e-3, 0.2, 0.1};
    agent.output_map = Matrix::projection(3, {1, 2});  // y = (v, s)
    agent.theta_box = Box({0.79}, {0.81});
    agent.theta_hat = {0.8};
    agent.validate();

    GmdpModel& red = cs.reduced_agent;
    red.name = "reduced_agent";
    red.state_space = Box({0.0, 0.0}, {3.0, 3.5});
    red.initial_set = red.state_space;
    red.input_space = Box({-5.0}, {5.0});
    red.drift.kind = DriftForm::Kind::linear;
    red.drift.A = Matrix(2, 2, {0, 0, tau, 1});
    red.drift.B = Matrix(2, 1, {tau, 0});
    red.drift.slots = {{0, 0, 0}};
    red.noise.mean = {0.0, 0.0};
    red.noise.var = {0.2, 0.1};
    red.output_map = Matrix::identity(2);
    red.theta_box = Box({0.79}, {0.81});
    red.theta_hat = {0.8};
    red.validate();

    GmdpModel& sim = cs.simulator;
    sim.name = "simulator";
    sim.state_space = Box({0.75, 0.0}, {3.75, 5.5});
    sim.initial_set = sim.state_space;
    sim.observation_space = agent.state_space;
    sim.disturbance_space = Box({0.0, 0.0}, {0.0, tau * 3.75});
    sim.drift.kind = DriftForm::Kind::linear;
    sim.drift.A = Matrix(2, 2, {0, 0, 0, 1});  // velocity row carried by theta_E slot
    sim.drift.C = Matrix(2, 3);                // a4 = a5 = 0
    sim.drift.slots = {{0, 0, 0}};
    sim.noise.mean = {0.0, 0.0};
    sim.noise.var = {0.2, 0.1};
    sim.noise.support = Box({-1e3, -1e3}, {1e3, 1e3});
    sim.output_map = Matrix::identity(2);
    sim.theta_box = Box({0.79}, {0.81});
    sim.theta_hat = {0.8};
    sim.adversary.kind = AdversaryFamily::Kind::bilinear_cosine;
    sim.adversary.out_dim = 2;
    sim.adversary.out_row = 1;
    sim.adversary.vel_index = 0;
    sim.adversary.gain = tau;
    sim.adversary.param_box = Box({-0.05, -0.05}, {0.05, 0.05});
    sim.adversary.nominal_params = {0.0, 0.0};
    sim.validate();

    GmdpModel& env = cs.environment;
    env.name = "environment";
    env.state_space = Box({-0.05, -0.05, -0.05, 0.75, 0.0, -0.5},
                          {0.05, 0.05, 0.05, 3.75, 5.5, 0.5});
    env.initial_set = env.state_space;
    env.observation_space = agent.state_space;
    env.drift.kind = DriftForm::Kind::bicycle;
    env.drift.bicycle.tau = tau;
    env.noise.mean = std::vector<double>(6, 0.0);
    env.noise.var = {0.01, 0.01, 0.01, 0.2, 0.1, 0.01};
    env.noise.support = Box({-0.05, -0.05, -0.05, -1e3, -1e3, -0.5},
                            {0.05, 0.05, 0.05, 1e3, 1e3, 0.5});
    env.output_map = Matrix::projection(6, {3, 4});  // y = (v, s_x)
    env.theta_box = Box({0.79}, {0.81});
    env.theta_hat = {0.8};
    env.validate();

    cs.theta_box = Box({0.79, 0.79}, {0.81, 0.81});
    cs.adversaries = sim.adversary;
    cs.F = Matrix::projection(3, {1, 2});
    cs.P = Matrix::projection(6, {3, 4});
    return cs;
}

GmdpModel compose_nominal_product(const GmdpModel& reduced_agent, const GmdpModel& simulator) {
    const int na = reduced_agent.state_dim();
    const int ns = simulator.state_dim();
    const int n = na + ns;

    GmdpModel prod;
    prod.name = "nominal_product";

    std::vector<double> lo(n), hi(n), var(n), slo(n), shi(n);
    for (int i = 0; i < na; ++i) {
        lo[i] = reduced_agent.state_space.lo[i];
        hi[i] = reduced_agent.state_space.hi[i];
    }
    for (int i = 0; i < ns; ++i) {
        lo[na + i] = simulator.state_space.lo[i];
        hi[na + i] = simulator.state_space.hi[i];
    }
    prod.state_space = Box(lo, hi);
    prod.initial_set = prod.state_space;
    prod.input_space = reduced_agent.input_space;

    prod.drift.kind = DriftForm::Kind::linear;
    Matrix A(n, n);
    auto fill_block = [&](const GmdpModel& m, int off) {
        for (int i = 0; i < m.state_dim(); ++i)
            for (int j = 0; j < m.state_dim(); ++j) A.at(off + i, off + j) = m.drift.A.at(i, j);
        for (const auto& s : m.drift.slots)
            A.at(off + s.row, off + s.col) += m.theta_hat[s.theta_index];
    };
    fill_block(reduced_agent, 0);
    fill_block(simulator, na);
    // Nominal adversary [0, gain*v]^T is linear in the simulator state.
    const AdversaryFamily& adv = simulator.adversary;
    if (adv.kind == AdversaryFamily::Kind::bilinear_cosine) {
        double c = std::cos(adv.nominal_params[0] + adv.nominal_params[1]);
        A.at(na + adv.out_row, na + adv.vel_index) += adv.gain * c;
    }
    prod.drift.A = A;
    Matrix B(n, reduced_agent.input_dim());
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < reduced_agent.input_dim(); ++j) B.at(i, j) = reduced_agent.drift.B.at(i, j);
    prod.drift.B = B;

    prod.noise.mean = std::vector<double>(n, 0.0);
    for (int i = 0; i < na; ++i) {
        var[i] = reduced_agent.noise.var[i];
        slo[i] = reduced_agent.noise.support ? reduced_agent.noise.support->lo[i] : -kInf;
        shi[i] = reduced_agent.noise.support ? reduced_agent.noise.support->hi[i] : kInf;
    }
    for (int i = 0; i < ns; ++i) {
        var[na + i] = simulator.noise.var[i];
        slo[na + i] = simulator.noise.support ? simulator.noise.support->lo[i] : -kInf;
        shi[na + i] = simulator.noise.support ? simulator.noise.support->hi[i] : kInf;
    }
    prod.noise.var = var;
    bool any_support = reduced_agent.noise.support.has_value() || simulator.noise.support.has_value();
    if (any_support) prod.noise.support = Box(slo, shi);

    prod.output_map = Matrix::identity(n);
    prod.validate();
    return prod;
}

GmdpModel compose_parametrized_product(const GmdpModel& reduced_agent, const GmdpModel& simulator) {
    const int na = reduced_agent.state_dim();
    GmdpModel prod = compose_nominal_product(reduced_agent, simulator);
    prod.name = "parametrized_product";

    // Undo the nominal substitutions and carry the slots instead.
    Matrix& A = prod.drift.A;
    for (const auto& s : reduced_agent.drift.slots) {
        A.at(s.row, s.col) -= reduced_agent.theta_hat[s.theta_index];
        prod.drift.slots.push_back({s.theta_index, s.row, s.col});
    }
    const int agent_thetas = static_cast<int>(reduced_agent.theta_hat.size());
    for (const auto& s : simulator.drift.slots) {
        A.at(na + s.row, na + s.col) -= simulator.theta_hat[s.theta_index];
        prod.drift.slots.push_back({agent_thetas + s.theta_index, na + s.row, na + s.col});
    }

    std::vector<double> tlo, thi, that;
    for (size_t i = 0; i < reduced_agent.theta_hat.size(); ++i) {
        tlo.push_back(reduced_agent.theta_box.lo[i]);
        thi.push_back(reduced_agent.theta_box.hi[i]);
        that.push_back(reduced_agent.theta_hat[i]);
    }
    for (size_t i = 0; i < simulator.theta_hat.size(); ++i) {
        tlo.push_back(simulator.theta_box.lo[i]);
        thi.push_back(simulator.theta_box.hi[i]);
        that.push_back(simulator.theta_hat[i]);
    }
    prod.theta_box = Box(tlo, thi);
    prod.theta_hat = that;

    const AdversaryFamily& adv = simulator.adversary;
    if (adv.kind == AdversaryFamily::Kind::bilinear_cosine) {
        double c = std::cos(adv.nominal_params[0] + adv.nominal_params[1]);
        A.at(na + adv.out_row, na + adv.vel_index) -= adv.gain * c;
        prod.adversary = adv;
        prod.adversary.out_dim = prod.state_dim();
        prod.adversary.out_row = na + adv.out_row;
        prod.adversary.vel_index = na + adv.vel_index;
    }
    prod.validate();
    return prod;
}

namespace {

double json_endpoint(const json& v, double sign) {
    if (v.is_null()) return sign * kInf;
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        throw std::runtime_error("scenario: bad interval endpoint '" + s + "'");
    }
    return v.get<double>();
}

Box box_from_json(const json& j) {
    std::vector<double> lo, hi;
    for (const auto& pair : j) {
        if (!pair.is_array() || pair.size() != 2)
            throw std::runtime_error("scenario: box entries must be [lo, hi] pairs");
        lo.push_back(json_endpoint(pair[0], -1.0));
        hi.push_back(json_endpoint(pair[1], 1.0));
    }
    return Box(std::move(lo), std::move(hi));
}

Matrix matrix_from_json(const json& j) {
    int rows = static_cast<int>(j.size());
    int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw std::runtime_error("scenario: ragged matrix");
        for (int c = 0; c < cols; ++c) m.at(i, c) = j[i][c].get<double>();
    }
    return m;
}

}  // namespace

GmdpModel model_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("scenario: invalid JSON: ") + e.what());
    }

    GmdpModel m;
    m.name = j.value("name", "model");
    if (!j.contains("rov")) throw std::runtime_error("scenario: model needs 'rov'");
    m.state_space = box_from_json(j.at("rov"));
    m.initial_set = j.contains("initial") ? box_from_json(j.at("initial")) : m.state_space;
    if (j.contains("input")) m.input_space = box_from_json(j.at("input"));
    if (j.contains("observation")) m.observation_space = box_from_json(j.at("observation"));
    if (j.contains("disturbance")) m.disturbance_space = box_from_json(j.at("disturbance"));

    const json& dj = j.at("drift");
    const std::string kind = dj.at("kind").get<std::string>();
    if (kind == "linear") {
        m.drift.kind = DriftForm::Kind::linear;
        m.drift.A = matrix_from_json(dj.at("A"));
        if (dj.contains("B")) m.drift.B = matrix_from_json(dj.at("B"));
        if (dj.contains("C")) m.drift.C = matrix_from_json(dj.at("C"));
        if (dj.contains("theta_slots"))
            for (const auto& s : dj.at("theta_slots"))
                m.drift.slots.push_back({s.at("theta_index").get<int>(), s.at("row").get<int>(),
                                         s.at("col").get<int>()});
    } else if (kind == "bicycle") {
        m.drift.kind = DriftForm::Kind::bicycle;
        auto& p = m.drift.bicycle;
        p.tau = dj.value("tau", p.tau);
        p.cornering = dj.value("C", p.cornering);
        p.gravity = dj.value("g", p.gravity);
        p.friction = dj.value("mu", p.friction);
        p.wheelbase = dj.value("l", p.wheelbase);
        p.mass = dj.value("m", p.mass);
        p.inertia = dj.value("I_z", p.inertia);
        p.a4 = dj.value("a4", p.a4);
        p.a5 = dj.value("a5", p.a5);
        p.theta_index = dj.value("theta_index", 0);
    } else {
        throw std::runtime_error("scenario: unknown drift kind '" + kind + "'");
    }

    const auto sigma = j.at("sigma").get<std::vector<double>>();
    m.noise.mean = std::vector<double>(sigma.size(), 0.0);
    m.noise.var = sigma;
    if (j.contains("noise_support")) m.noise.support = box_from_json(j.at("noise_support"));

    if (j.contains("output")) {
        const json& oj = j.at("output");
        if (!oj.empty() && oj[0].is_array()) m.output_map = matrix_from_json(oj);
        else m.output_map = Matrix::projection(m.state_dim(), oj.get<std::vector<int>>());
    } else {
        m.output_map = Matrix::identity(m.state_dim());
    }
    if (j.contains("output_weights")) m.output_weights = j.at("output_weights").get<std::vector<double>>();

    if (j.contains("theta_box")) {
        m.theta_box = box_from_json(j.at("theta_box"));
        m.theta_hat = j.at("theta_hat").get<std::vector<double>>();
    }

    if (j.contains("adversary")) {
        const json& aj = j.at("adversary");
        const std::string akind = aj.at("kind").get<std::string>();
        if (akind == "bilinear_cosine") {
            m.adversary.kind = AdversaryFamily::Kind::bilinear_cosine;
            m.adversary.out_dim = aj.at("out_dim").get<int>();
            m.adversary.out_row = aj.at("out_row").get<int>();
            m.adversary.vel_index = aj.at("vel_index").get<int>();
            m.adversary.gain = aj.at("gain").get<double>();
            m.adversary.param_box = box_from_json(aj.at("param_box"));
            m.adversary.nominal_params = aj.at("nominal").get<std::vector<double>>();
        } else if (akind != "none") {
            throw std::runtime_error("scenario: unknown adversary kind '" + akind + "'");
        }
    }

    m.validate();
    return m;
}

}  // namespace relsyn
