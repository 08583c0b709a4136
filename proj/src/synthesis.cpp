#include "relsyn/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <thread>

namespace relsyn {

const Box* LabelingMap::region(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return &regions[i];
    return nullptr;
}

void LabelingMap::add(const std::string& name, Box region) {
    names.push_back(name);
    regions.push_back(std::move(region));
}

namespace {

void collect_polarity(const ScltlFormula& f, int node, std::vector<char>& pos,
                      std::vector<char>& neg) {
    const auto& n = f.nodes[node];
    if (n.kind == ScltlFormula::Kind::atom) pos[n.atom] = 1;
    if (n.kind == ScltlFormula::Kind::natom) neg[n.atom] = 1;
    for (int k : n.kids) collect_polarity(f, k, pos, neg);
}

}  // namespace

std::vector<uint32_t> robust_labeling(const ScltlFormula& formula, const LabelingMap& map,
                                      const std::vector<std::vector<double>>& outputs,
                                      double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("deviation budget must be nonnegative");
    const size_t na = formula.atoms.size();
    std::vector<char> pos(na, 0), neg(na, 0);
    if (formula.root >= 0) collect_polarity(formula, formula.root, pos, neg);
    std::vector<const Box*> regions(na);
    for (size_t i = 0; i < na; ++i) {
        if (pos[i] && neg[i])
            throw std::invalid_argument("atom '" + formula.atoms[i] +
                                        "' occurs with mixed polarity; robust labeling undefined");
        regions[i] = map.region(formula.atoms[i]);
        if (!regions[i])
            throw std::invalid_argument("atom '" + formula.atoms[i] + "' has no region");
    }

    std::vector<uint32_t> letters(outputs.size(), 0);
    for (size_t s = 0; s < outputs.size(); ++s) {
        const std::vector<double>& y = outputs[s];
        for (size_t i = 0; i < na; ++i) {
            const Box& r = *regions[i];
            if (r.dim() != y.size()) throw std::invalid_argument("region dimension mismatch");
            bool hold;
            if (neg[i]) {
                hold = r.distance(y) <= epsilon;  // ball intersects the region
            } else {
                hold = true;  // ball inside the region
                for (size_t d = 0; d < y.size(); ++d)
                    hold = hold && y[d] - epsilon >= r.lo[d] && y[d] + epsilon <= r.hi[d];
            }
            if (hold) letters[s] |= uint32_t{1} << i;
        }
    }
    return letters;
}

void DeltaField::validate(int num_states, int num_inputs) const {
    if (!per_cell.empty() && static_cast<int>(per_cell.size()) != num_states)
        throw std::invalid_argument("per-cell deficit field misaligned with the abstraction");
    if (!per_input.empty() && static_cast<int>(per_input.size()) != num_inputs)
        throw std::invalid_argument("per-input deficit field misaligned with the input menu");
}

double DeltaField::max_value() const {
    double d = constant;
    double c = 0.0, u = 0.0;
    for (double v : per_cell) c = std::max(c, v);
    for (double v : per_input) u = std::max(u, v);
    return d + c + u;
}

namespace {

// C (r x c) = A (r x k) * B (k x c), output rows striped over workers; the
// inner order is fixed, so results are byte-identical for any worker count.
void matmul_rows(const double* A, const double* B, double* C, int r, int k, int c, int workers) {
    auto run = [&](int row_begin, int row_end) {
        for (int i = row_begin; i < row_end; ++i) {
            double* out = C + static_cast<size_t>(i) * c;
            std::memset(out, 0, sizeof(double) * c);
            const double* arow = A + static_cast<size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                double a = arow[kk];
                if (a == 0.0) continue;
                const double* brow = B + static_cast<size_t>(kk) * c;
                for (int j = 0; j < c; ++j) out[j] += a * brow[j];
            }
        }
    };
    if (workers <= 1 || r < 2 * workers) {
        run(0, r);
        return;
    }
    std::vector<std::thread> pool;
    int chunk = (r + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int lo = w * chunk, hi = std::min(r, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(run, lo, hi);
    }
    for (auto& t : pool) t.join();
}

// One contraction factor of the transition tensor: the joint next-cell
// distribution of a contiguous block of dimensions given the block's current
// joint cell (and the input when the block's drift sees it).
struct Stage {
    int cur = 0;
    int next = 0;
    bool per_input = false;
    std::vector<std::vector<double>> mat;  // [input or 0][cur * next]
};

bool kernel_input_dependent(const DimKernel& k, int num_inputs) {
    size_t slice = static_cast<size_t>(k.dep_count) * k.next_count;
    for (int u = 1; u < num_inputs; ++u)
        if (std::memcmp(k.mass.data(), k.mass.data() + u * slice, slice * sizeof(double)) != 0)
            return true;
    return false;
}

std::vector<Stage> build_stages(const FiniteAbstraction& fab, SynthesisOptions::Backend backend) {
    const int n = fab.num_states();
    const int m = fab.num_inputs();
    const int dims = static_cast<int>(fab.kernels.size());

    bool dense = backend == SynthesisOptions::Backend::dense;
    std::vector<std::vector<int>> blocks;
    if (!dense) {
        // Union-find over dimensions through the dependency sets.
        std::vector<int> parent(dims);
        for (int d = 0; d < dims; ++d) parent[d] = d;
        std::function<int(int)> find = [&](int x) {
            return parent[x] == x ? x : parent[x] = find(parent[x]);
        };
        for (int d = 0; d < dims; ++d)
            for (int dep : fab.kernels[d].deps) parent[find(d)] = find(dep);
        std::vector<std::vector<int>> grouped(dims);
        for (int d = 0; d < dims; ++d) grouped[find(d)].push_back(d);
        for (auto& g : grouped)
            if (!g.empty()) blocks.push_back(g);
        bool contiguous = true;
        for (const auto& b : blocks)
            contiguous = contiguous && b.back() - b.front() + 1 == static_cast<int>(b.size());
        if (!contiguous || backend == SynthesisOptions::Backend::automatic) {
            bool want_dense = !contiguous || n <= 1024;
            if (want_dense && n > 2048)
                throw std::invalid_argument(
                    "kernel dependency blocks must cover contiguous dimension ranges");
            dense = want_dense;
        }
    }

    std::vector<Stage> stages;
    if (dense) {
        if (n > 2048) throw std::invalid_argument("state space too large for the dense backend");
        Stage s;
        s.cur = s.next = n;
        s.per_input = m > 1;
        s.mat.resize(s.per_input ? m : 1);
        for (int u = 0; u < (s.per_input ? m : 1); ++u) {
            s.mat[u].resize(static_cast<size_t>(n) * n);
            for (int x = 0; x < n; ++x) {
                std::vector<double> row = fab.row(x, u);
                std::copy(row.begin(), row.end(), s.mat[u].begin() + static_cast<size_t>(x) * n);
            }
        }
        stages.push_back(std::move(s));
        return stages;
    }

    for (const auto& block : blocks) {
        Stage s;
        int size = 1;
        for (int d : block) size *= fab.grid.cells[d];
        s.cur = s.next = size;
        for (int d : block) s.per_input = s.per_input || kernel_input_dependent(fab.kernels[d], m);
        int variants = s.per_input ? m : 1;
        s.mat.resize(variants);
        std::vector<int> idx(block.size());
        for (int u = 0; u < variants; ++u) {
            s.mat[u].assign(static_cast<size_t>(size) * size, 0.0);
            for (int cur = 0; cur < size; ++cur) {
                int rest = cur;
                for (int bi = static_cast<int>(block.size()) - 1; bi >= 0; --bi) {
                    idx[bi] = rest % fab.grid.cells[block[bi]];
                    rest /= fab.grid.cells[block[bi]];
                }
                // Kernel rows for this block-local current cell.
                std::vector<const double*> line(block.size());
                for (size_t bi = 0; bi < block.size(); ++bi) {
                    const DimKernel& k = fab.kernels[block[bi]];
                    int joint = 0;
                    for (int dep : k.deps) {
                        int pos = static_cast<int>(std::find(block.begin(), block.end(), dep) -
                                                   block.begin());
                        joint = joint * fab.grid.cells[dep] + idx[pos];
                    }
                    line[bi] = &k.mass[(static_cast<size_t>(u) * k.dep_count + joint) *
                                       k.next_count];
                }
                double* out = &s.mat[u][static_cast<size_t>(cur) * size];
                for (int nx = 0; nx < size; ++nx) {
                    double p = 1.0;
                    int r = nx;
                    for (int bi = static_cast<int>(block.size()) - 1; bi >= 0; --bi) {
                        p *= line[bi][r % fab.grid.cells[block[bi]]];
                        r /= fab.grid.cells[block[bi]];
                    }
                    out[nx] = p;
                }
            }
        }
        stages.push_back(std::move(s));
    }
    return stages;
}

}  // namespace

double SynthesisResult::initial_value(int cell, const Dfa& dfa,
                                      const std::vector<uint32_t>& labels) const {
    return value_at(cell, dfa.step(dfa.initial, labels[cell]));
}

SynthesisResult robust_value_iteration(const FiniteAbstraction& fab, const Dfa& dfa,
                                       const std::vector<uint32_t>& labels,
                                       const DeltaField& delta, const SynthesisOptions& options) {
    const int n = fab.num_states();
    const int m = fab.num_inputs();
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("labels misaligned with the abstraction");
    for (uint32_t l : labels)
        if (l >= static_cast<uint32_t>(dfa.num_letters()))
            throw std::invalid_argument("label letter outside the automaton alphabet");
    delta.validate(n, m);

    std::vector<Stage> stages = build_stages(fab, options.backend);

    SynthesisResult res;
    res.num_cells = n;
    res.num_dfa = dfa.num_states;
    res.num_inputs = m;
    res.delta_used = delta.max_value();
    res.value.assign(static_cast<size_t>(dfa.num_states) * n, 0.0);
    res.policy.assign(res.value.size(), 0);
    for (int q = 0; q < dfa.num_states; ++q)
        if (dfa.accepting[q])
            std::fill(res.value.begin() + static_cast<size_t>(q) * n,
                      res.value.begin() + static_cast<size_t>(q + 1) * n, 1.0);

    std::vector<double> old_value;
    std::vector<double> gather(n);
    // Scratch tensors for the staged contraction, shared then per input.
    std::vector<double> shared_buf[2];
    std::vector<std::vector<double>> per_u(m);

    const int sweeps_wanted = options.horizon >= 0 ? options.horizon : options.max_sweeps;
    for (int sweep = 0; sweep < sweeps_wanted; ++sweep) {
        old_value = res.value;
        double worst_change = 0.0;
        for (int q = 0; q < dfa.num_states; ++q) {
            if (dfa.accepting[q] || dfa.rejecting[q]) continue;
            for (int x = 0; x < n; ++x)
                gather[x] = old_value[static_cast<size_t>(dfa.next[q][labels[x]]) * n + x];

            // Contract stages from the last block to the first; the tensor
            // keeps shape (next of earlier blocks) x (current of later ones).
            const double* shared = gather.data();
            int pre = n;  // product of the not-yet-contracted next extents
            int post = 1;
            bool split = false;
            int flip = 0;
            for (int s = static_cast<int>(stages.size()) - 1; s >= 0; --s) {
                Stage& st = stages[s];
                pre /= st.next;
                if (!split && !st.per_input) {
                    // out[pre][cur][post] = sum_k st.mat[cur][k] * in[pre][k][post]
                    std::vector<double>& out = shared_buf[flip];
                    out.resize(static_cast<size_t>(pre) * st.cur * post);
                    for (int p = 0; p < pre; ++p)
                        matmul_rows(st.mat[0].data(),
                                    shared + static_cast<size_t>(p) * st.next * post,
                                    out.data() + static_cast<size_t>(p) * st.cur * post, st.cur,
                                    st.next, post, options.workers);
                    shared = out.data();
                    flip ^= 1;
                } else {
                    for (int u = 0; u < m; ++u) {
                        const double* in =
                            split ? per_u[u].data() : shared;  // per_u reused below
                        std::vector<double> out(static_cast<size_t>(pre) * st.cur * post);
                        const std::vector<double>& mat = st.mat[st.per_input ? u : 0];
                        for (int p = 0; p < pre; ++p)
                            matmul_rows(mat.data(), in + static_cast<size_t>(p) * st.next * post,
                                        out.data() + static_cast<size_t>(p) * st.cur * post,
                                        st.cur, st.next, post, options.workers);
                        per_u[u] = std::move(out);
                    }
                    split = true;
                }
                post *= st.cur;
            }

            double* vrow = &res.value[static_cast<size_t>(q) * n];
            int* prow = &res.policy[static_cast<size_t>(q) * n];
            const double* orow = &old_value[static_cast<size_t>(q) * n];
            for (int x = 0; x < n; ++x) {
                double best = -1.0;
                int arg = 0;
                for (int u = 0; u < m; ++u) {
                    double expect = split ? per_u[u][x] : shared[x];
                    double v = expect - delta.at(x, u);
                    if (v > best) {
                        best = v;
                        arg = u;
                    }
                }
                best = std::min(1.0, std::max(0.0, best));
                if (best < orow[x] - 1e-12)
                    throw std::logic_error("value iteration lost monotonicity");
                worst_change = std::max(worst_change, best - orow[x]);
                vrow[x] = best;
                prow[x] = arg;
            }
        }
        res.iterations = sweep + 1;
        if (options.horizon < 0 && worst_change <= options.tol) {
            res.converged = true;
            break;
        }
    }
    if (options.horizon >= 0) res.converged = true;
    return res;
}

void ConcreteController::reset() {
    dfa_state = -1;
    started = false;
    outside_seen = false;
}

std::vector<double> ConcreteController::act(const std::vector<double>& concrete_state,
                                            const std::vector<double>& concrete_output) {
    uint32_t letter = robust_labeling(formula, labels, {concrete_output}, 0.0)[0];
    dfa_state = dfa.step(started ? dfa_state : dfa.initial, letter);
    started = true;

    std::vector<double> abstract = lift.apply(concrete_state);
    int cell = fab.grid.locate(abstract);
    std::vector<double> input;
    if (cell < 0) {
        outside_seen = true;
        input = fallback_input;
    } else {
        input = fab.grid.input_levels[result.policy_at(cell, dfa_state)];
    }
    if (interface.kind == InterfaceDescriptor::Kind::affine) {
        std::vector<double> mapped = interface.M.apply(input);
        for (size_t i = 0; i < mapped.size(); ++i) mapped[i] += interface.offset[i];
        return mapped;
    }
    return input;
}

ConcreteController refine_controller(const SynthesisResult& result, const SimRelationCert& chain,
                                     const FiniteAbstraction& fab, const Dfa& dfa,
                                     const ScltlFormula& formula, const LabelingMap& labels,
                                     std::vector<double> fallback_input) {
    if (chain.relation.map.rows != static_cast<int>(fab.grid.domain.dim()))
        throw std::invalid_argument("certificate chain does not land in the gridded space");
    if (result.num_cells != fab.num_states() || result.num_dfa != dfa.num_states)
        throw std::invalid_argument("synthesis result does not match abstraction and automaton");
    ConcreteController c;
    c.fab = fab;
    c.dfa = dfa;
    c.result = result;
    c.labels = labels;
    c.formula = formula;
    c.lift = chain.relation.map;
    c.interface = chain.interface;
    c.fallback_input =
        fallback_input.empty() && !fab.grid.input_levels.empty()
            ? std::vector<double>(fab.grid.input_levels[0].size(), 0.0)
            : std::move(fallback_input);
    c.reset();
    return c;
}

}  // namespace relsyn
