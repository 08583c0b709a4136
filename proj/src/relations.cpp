#include "relsyn/relations.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace relsyn {

void FiniteGmdp::validate() const {
    if (static_cast<int>(transition.size()) != num_states)
        throw std::invalid_argument("finite model: transition table size mismatch");
    for (int x = 0; x < num_states; ++x) {
        if (static_cast<int>(transition[x].size()) != num_inputs)
            throw std::invalid_argument("finite model: input count mismatch");
        for (int u = 0; u < num_inputs; ++u) {
            double total = 0.0;
            for (double p : transition[x][u]) {
                if (p < -1e-12) throw std::invalid_argument("finite model: negative probability");
                total += p;
            }
            if (total > 1.0 + 1e-9)
                throw std::invalid_argument("finite model: row mass exceeds 1");
        }
    }
    if (!outputs.empty() && static_cast<int>(outputs.size()) != num_states)
        throw std::invalid_argument("finite model: outputs size mismatch");
    for (int x0 : initial)
        if (x0 < 0 || x0 >= num_states)
            throw std::invalid_argument("finite model: initial state out of range");
}

double FiniteGmdp::row_total(int x, int u) const {
    double total = 0.0;
    for (double p : transition[x][u]) total += p;
    return total;
}

FiniteRelation FiniteRelation::identity(int n) {
    FiniteRelation r(n, n);
    for (int i = 0; i < n; ++i) r.set(i, i, true);
    return r;
}

FiniteRelation FiniteRelation::full(int na, int nc) {
    FiniteRelation r(na, nc);
    std::fill(r.pairs.begin(), r.pairs.end(), 1);
    return r;
}

CouplingReport verify_coupling(const CouplingWitness& witness, const std::vector<double>& p_hat,
                               const std::vector<double>& p, const FiniteRelation& relation,
                               double delta) {
    const double tol = 1e-9;
    CouplingReport report;
    const size_t m = p_hat.size(), n = p.size();
    if (witness.joint.size() != m)
        throw std::invalid_argument("coupling witness: row count must match p_hat");
    std::vector<double> row_marginal(m, 0.0), col_marginal(n, 0.0);
    for (size_t i = 0; i < m; ++i) {
        if (witness.joint[i].size() != n)
            throw std::invalid_argument("coupling witness: column count must match p");
        for (size_t j = 0; j < n; ++j) {
            double v = witness.joint[i][j];
            if (v < -1e-15) report.violations.push_back("negative mass in witness");
            report.total_mass += v;
            if (relation.related(static_cast<int>(i), static_cast<int>(j)))
                report.mass_on_relation += v;
            row_marginal[i] += v;
            col_marginal[j] += v;
        }
    }
    if (report.total_mass - report.mass_on_relation > tol)
        report.violations.push_back("mass off the relation");
    for (size_t i = 0; i < m; ++i)
        if (row_marginal[i] > p_hat[i] + tol) {
            report.violations.push_back("row marginal exceeds p_hat at state " + std::to_string(i));
            break;
        }
    for (size_t j = 0; j < n; ++j)
        if (col_marginal[j] > p[j] + tol) {
            report.violations.push_back("column marginal exceeds p at state " + std::to_string(j));
            break;
        }
    if (report.total_mass < 1.0 - delta - tol)
        report.violations.push_back("total mass below 1 - delta");
    report.pass = report.violations.empty();
    return report;
}

double max_coupling_mass(const std::vector<double>& p_hat, const std::vector<double>& p,
                         const FiniteRelation& relation) {
    const int m = static_cast<int>(p_hat.size());
    const int n = static_cast<int>(p.size());
    if (relation.abstract_count != m || relation.concrete_count != n)
        throw std::invalid_argument("max coupling: relation shape mismatch");
    const int N = m + n + 2, S = 0, T = N - 1;
    std::vector<std::vector<double>> cap(N, std::vector<double>(N, 0.0));
    for (int i = 0; i < m; ++i) cap[S][1 + i] = p_hat[i];
    for (int j = 0; j < n; ++j) cap[1 + m + j][T] = p[j];
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            if (relation.related(i, j)) cap[1 + i][1 + m + j] = 2.0;  // above any probability

    double flow = 0.0;
    for (;;) {
        std::vector<int> prev(N, -1);
        prev[S] = S;
        std::deque<int> queue{S};
        while (!queue.empty() && prev[T] < 0) {
            int v = queue.front();
            queue.pop_front();
            for (int w = 0; w < N; ++w)
                if (prev[w] < 0 && cap[v][w] > 1e-12) {
                    prev[w] = v;
                    queue.push_back(w);
                }
        }
        if (prev[T] < 0) break;
        double bottleneck = kInf;
        for (int v = T; v != S; v = prev[v]) bottleneck = std::min(bottleneck, cap[prev[v]][v]);
        for (int v = T; v != S; v = prev[v]) {
            cap[prev[v]][v] -= bottleneck;
            cap[v][prev[v]] += bottleneck;
        }
        flow += bottleneck;
    }
    return flow;
}

namespace {

double output_gap(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("output dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

SsrReport verify_ssr_finite(const FiniteGmdp& abstract_model, const FiniteGmdp& concrete_model,
                            const FiniteRelation& relation, const std::vector<int>& interface_map,
                            double epsilon, double delta) {
    abstract_model.validate();
    concrete_model.validate();
    if (relation.abstract_count != abstract_model.num_states ||
        relation.concrete_count != concrete_model.num_states)
        throw std::invalid_argument("ssr: relation shape mismatch");
    if (static_cast<int>(interface_map.size()) != abstract_model.num_inputs)
        throw std::invalid_argument("ssr: interface must map every abstract input");

    SsrReport report;
    for (int xc : concrete_model.initial) {
        bool found = false;
        for (int xa : abstract_model.initial)
            if (relation.related(xa, xc)) {
                found = true;
                break;
            }
        if (!found) {
            report.violation =
                "initial state " + std::to_string(xc) + " has no related abstract initial state";
            return report;
        }
    }

    FiniteRelation successor_relation = relation;
    for (int xa = 0; xa < abstract_model.num_states; ++xa)
        for (int xc = 0; xc < concrete_model.num_states; ++xc) {
            if (!relation.related(xa, xc)) continue;
            double gap = output_gap(abstract_model.outputs[xa], concrete_model.outputs[xc]);
            report.worst_output_gap = std::max(report.worst_output_gap, gap);
            if (gap > epsilon + 1e-9) {
                report.violation = "output gap " + std::to_string(gap) + " exceeds epsilon on pair (" +
                                   std::to_string(xa) + ", " + std::to_string(xc) + ")";
                return report;
            }
            for (int u_hat = 0; u_hat < abstract_model.num_inputs; ++u_hat) {
                int u = interface_map[u_hat];
                if (u < 0 || u >= concrete_model.num_inputs)
                    throw std::invalid_argument("ssr: interface image out of range");
                double mass = max_coupling_mass(abstract_model.transition[xa][u_hat],
                                                concrete_model.transition[xc][u], successor_relation);
                report.worst_deficit = std::max(report.worst_deficit, 1.0 - mass);
                if (mass < 1.0 - delta - 1e-9) {
                    report.violation = "coupling mass " + std::to_string(mass) + " below 1 - delta on pair (" +
                                       std::to_string(xa) + ", " + std::to_string(xc) + "), input " +
                                       std::to_string(u_hat);
                    return report;
                }
            }
        }
    report.pass = true;
    return report;
}

BiReport verify_behavioral_inclusion_finite(const FiniteSurrogate& surrogate,
                                            const FiniteGmdp& concrete,
                                            const std::vector<int>& p_map,
                                            const std::vector<int>& obs_map) {
    const double tol = 1e-9;
    BiReport report;
    if (static_cast<int>(p_map.size()) != concrete.num_states)
        throw std::invalid_argument("behavioral inclusion: p_map must cover concrete states");
    if (static_cast<int>(obs_map.size()) != concrete.num_inputs)
        throw std::invalid_argument("behavioral inclusion: obs_map must cover observations");

    std::set<int> surrogate_initial(surrogate.initial.begin(), surrogate.initial.end());
    std::set<int> mapped_initial;
    for (int x0 : concrete.initial) mapped_initial.insert(p_map[x0]);
    if (surrogate_initial != mapped_initial) {
        report.violation = "initial sets do not correspond under the lumping";
        return report;
    }

    for (int x = 0; x < concrete.num_states; ++x) {
        int xs = p_map[x];
        if (output_gap(concrete.outputs[x], surrogate.outputs[xs]) > tol) {
            report.violation = "outputs differ through the lumping at state " + std::to_string(x);
            return report;
        }
        for (int o = 0; o < concrete.num_inputs; ++o) {
            std::vector<double> pushforward(surrogate.num_states, 0.0);
            for (int xn = 0; xn < concrete.num_states; ++xn)
                pushforward[p_map[xn]] += concrete.transition[x][o][xn];
            bool matched = false;
            for (int c = 0; c < surrogate.num_choices && !matched; ++c) {
                const std::vector<double>& row = surrogate.rows[xs][obs_map[o]][c];
                double worst = 0.0;
                for (int q = 0; q < surrogate.num_states; ++q)
                    worst = std::max(worst, std::fabs(row[q] - pushforward[q]));
                matched = worst <= tol;
            }
            if (!matched) {
                report.violation = "no menu choice reproduces the pushforward at state " +
                                   std::to_string(x) + ", observation " + std::to_string(o);
                return report;
            }
        }
    }
    report.pass = true;
    return report;
}

double SimRelationCert::delta_sup() const {
    double s = 0.0;
    for (double d : delta) s = std::max(s, d);
    return s;
}

namespace {

// Treats an empty matrix as the identity of whatever dimension its partner
// needs; returns left * right otherwise.
Matrix compose_maps(const Matrix& left, const Matrix& right) {
    if (left.rows == 0) return right;
    if (right.rows == 0) return left;
    return matmul(left, right);
}

}  // namespace

SimRelationCert compose_transitive(const std::vector<SimRelationCert>& certs) {
    if (certs.empty()) throw std::invalid_argument("compose: need at least one certificate");
    SimRelationCert out = certs[0];
    for (size_t k = 1; k < certs.size(); ++k) {
        const SimRelationCert& c = certs[k];
        out.epsilon += c.epsilon;

        if (out.delta.size() == c.delta.size()) {
            for (size_t i = 0; i < out.delta.size(); ++i) out.delta[i] += c.delta[i];
        } else if (out.delta.size() == 1) {
            double scalar = out.delta[0];
            out.delta = c.delta;
            for (double& d : out.delta) d += scalar;
        } else if (c.delta.size() == 1) {
            for (double& d : out.delta) d += c.delta[0];
        } else {
            throw std::invalid_argument("compose: delta fields of different shapes");
        }
        for (double& d : out.delta) d = std::min(1.0, std::max(0.0, d));

        if (out.interface.kind == InterfaceDescriptor::Kind::identity) {
            out.interface = c.interface;
        } else if (c.interface.kind != InterfaceDescriptor::Kind::identity) {
            // u = M_c (M_out u_hat + b_out) + b_c
            Matrix M = compose_maps(c.interface.M, out.interface.M);
            std::vector<double> offset = c.interface.M.rows > 0 && !out.interface.offset.empty()
                                             ? c.interface.M.apply(out.interface.offset)
                                             : out.interface.offset;
            if (!c.interface.offset.empty())
                offset = offset.empty() ? c.interface.offset : add(offset, c.interface.offset);
            out.interface.M = M;
            out.interface.offset = offset;
        }

        bool both_equality = out.relation.kind == RelationDescriptor::Kind::equality_under_map &&
                             c.relation.kind == RelationDescriptor::Kind::equality_under_map;
        Matrix chained = compose_maps(out.relation.map, c.relation.map);
        out.relation.map = chained;
        if (!both_equality) {
            out.relation.kind = RelationDescriptor::Kind::weighted_ball;
            if (out.relation.weights.empty()) out.relation.weights = c.relation.weights;
            out.relation.radius = out.epsilon;
        }

        out.uniform_over_adversaries = out.uniform_over_adversaries && c.uniform_over_adversaries;
        out.provenance.insert(out.provenance.end(), c.provenance.begin(), c.provenance.end());
    }
    return out;
}

SimRelationCert apply_proxy_theorem(const SimRelationCert& antecedent,
                                    const BiAssumption& assumption, int agent_dim) {
    if (!antecedent.uniform_over_adversaries)
        throw std::invalid_argument(
            "proxy composition requires a certificate uniform over the adversary family");
    SimRelationCert out = antecedent;
    Matrix rebase = block_diag(Matrix::identity(agent_dim), assumption.P);
    if (out.relation.map.rows > 0) {
        if (out.relation.map.cols != rebase.rows)
            throw std::invalid_argument("proxy composition: relation does not chain through P");
        out.relation.map = matmul(out.relation.map, rebase);
    } else {
        out.relation.map = rebase;
    }
    out.provenance.push_back("behavioral-inclusion premise (asserted): " + assumption.description);
    return out;
}

double combine_situations(const std::vector<double>& weights, const std::vector<double>& bounds) {
    if (weights.size() != bounds.size())
        throw std::invalid_argument("situations: weights and bounds must pair up");
    double total = 0.0;
    for (double w : weights) {
        if (w < -1e-12) throw std::invalid_argument("situations: negative weight");
        total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("situations: weights must sum to 1");
    double combined = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        if (bounds[i] < -1e-12 || bounds[i] > 1.0 + 1e-12)
            throw std::invalid_argument("situations: bound outside [0,1]");
        combined += weights[i] * bounds[i];
    }
    return combined;
}

std::string to_columnar(const FiniteGmdp& model) {
    std::ostringstream out;
    out << "# finite-gmdp states " << model.num_states << " inputs " << model.num_inputs << "\n";
    char buf[64];
    for (int x = 0; x < model.num_states; ++x)
        for (int u = 0; u < model.num_inputs; ++u)
            for (int xn = 0; xn < model.num_states; ++xn) {
                double p = model.transition[x][u][xn];
                if (p == 0.0) continue;
                std::snprintf(buf, sizeof(buf), "%.17g", p);
                out << x << " " << u << " " << xn << " " << buf << "\n";
            }
    return out.str();
}

FiniteGmdp finite_gmdp_from_columnar(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    FiniteGmdp model;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream h(line);
            std::string hash, tag, states_word, inputs_word;
            int n = 0, k = 0;
            h >> hash >> tag >> states_word >> n >> inputs_word >> k;
            if (tag != "finite-gmdp" || states_word != "states" || inputs_word != "inputs" || h.fail())
                throw std::runtime_error("columnar: bad header");
            model.num_states = n;
            model.num_inputs = k;
            model.transition.assign(n, std::vector<std::vector<double>>(
                                           k, std::vector<double>(n, 0.0)));
            model.outputs.assign(n, {});
            have_header = true;
            continue;
        }
        if (!have_header) throw std::runtime_error("columnar: missing header");
        std::istringstream row(line);
        int x, u, xn;
        double p;
        row >> x >> u >> xn >> p;
        if (row.fail() || x < 0 || x >= model.num_states || u < 0 || u >= model.num_inputs ||
            xn < 0 || xn >= model.num_states)
            throw std::runtime_error("columnar: bad transition line: " + line);
        model.transition[x][u][xn] = p;
    }
    if (!have_header) throw std::runtime_error("columnar: empty input");
    return model;
}

}  // namespace relsyn
