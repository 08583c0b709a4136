#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "relsyn/pipeline.hpp"

namespace py = pybind11;
using namespace relsyn;

namespace {

NormMode parse_mode(const std::string& name) {
    if (name == "weighted") return NormMode::weighted;
    if (name == "unweighted") return NormMode::unweighted;
    throw std::invalid_argument("mode must be 'weighted' or 'unweighted'");
}

ScenarioConfig config_from(const std::string& json_text) {
    return json_text.empty() ? default_config() : config_from_json_text(json_text);
}

py::dict stage_summary(const PipelineArtifacts& art) {
    py::dict d;
    d["stages"] = art.stage_log;
    d["composed_epsilon"] = art.chain.epsilon;
    d["composed_delta_sup"] = art.chain.delta_sup();
    d["label_margin"] = art.label_margin_used;
    d["cells"] = art.abs.num_states();
    d["dfa_states"] = art.dfa.num_states;
    d["iterations"] = art.result.iterations;
    d["converged"] = art.result.converged;
    py::list bounds;
    for (const auto& init : art.cfg.initial_states) {
        int cell = art.initial_cell(init);
        py::dict b;
        b["initial"] = init;
        b["cell"] = cell;
        b["p_robust"] =
            cell >= 0 ? art.result.initial_value(cell, art.dfa, art.cell_labels) : 0.0;
        bounds.append(b);
    }
    d["bounds"] = bounds;
    return d;
}

py::dict validation_entry(const McRun& r) {
    py::dict v;
    v["initial"] = r.initial;
    v["theta"] = r.theta;
    v["cell"] = r.initial_cell;
    v["p_robust"] = r.p_robust;
    const McSummary& s = r.summary;
    v["runs"] = s.runs;
    v["satisfied"] = s.satisfied;
    v["violated"] = s.violated;
    v["discarded"] = s.discarded;
    v["censored"] = s.censored;
    if (s.p_defined) {
        v["p_hat"] = s.p_hat;
        v["ci"] = py::make_tuple(s.ci_lo, s.ci_hi);
    } else {
        v["p_hat"] = py::none();
        v["ci"] = py::none();
    }
    return v;
}

}  // namespace

PYBIND11_MODULE(_relsyn, m) {
    m.doc() = "certified reach-avoid synthesis against a simulator-backed surrogate";

    m.def("deficiency_from_distance", &deficiency_from_distance, py::arg("c"),
          "1 - 2*Phi(-c/2): coupling deficiency of two equal-covariance Gaussians whose "
          "means are c apart in the scaled metric");
    m.def(
        "coupling_deficiency",
        [](const std::vector<double>& shift, const std::vector<double>& var,
           const std::string& mode) { return coupling_deficiency(shift, var, parse_mode(mode)); },
        py::arg("shift"), py::arg("var"), py::arg("mode") = "weighted",
        "Deviation probability for a mean offset under shared diagonal covariance");
    m.def(
        "max_coupling_mass",
        [](const std::vector<double>& p, const std::vector<double>& q) {
            if (p.size() != q.size())
                throw std::invalid_argument("distributions must have equal support size");
            return max_coupling_mass(p, q, FiniteRelation::identity(static_cast<int>(p.size())));
        },
        py::arg("p"), py::arg("q"),
        "Largest coupling mass of two finite distributions under the identity relation "
        "(equals 1 - total variation)");
    m.def(
        "clopper_pearson",
        [](long k, long n, double conf) {
            BinomialInterval ci = clopper_pearson(k, n, conf);
            return py::make_tuple(ci.lo, ci.hi);
        },
        py::arg("successes"), py::arg("trials"), py::arg("confidence") = 0.95);
    m.def("combine_situations", &combine_situations, py::arg("weights"), py::arg("bounds"),
          "Convex combination of per-situation satisfaction bounds");
    m.def(
        "compose_chain",
        [](const std::vector<std::pair<double, double>>& links) {
            std::vector<SimRelationCert> certs;
            for (const auto& [eps, delta] : links) {
                SimRelationCert c;
                c.epsilon = eps;
                c.delta = {delta};
                certs.push_back(std::move(c));
            }
            SimRelationCert out = compose_transitive(certs);
            return py::make_tuple(out.epsilon, out.delta_sup());
        },
        py::arg("links"),
        "Chain (epsilon, delta) certificate pairs: epsilons add, deltas add with clipping");
    m.def(
        "dfa_info",
        [](const std::string& formula) {
            Dfa dfa = to_dfa(parse_scltl(formula));
            py::dict d;
            d["states"] = dfa.num_states;
            d["atoms"] = dfa.atoms;
            d["initial"] = dfa.initial;
            return d;
        },
        py::arg("formula"), "Compile a co-safe formula and report the automaton shape");
    m.def(
        "delta2_field",
        [](const std::string& mode, int nx, int ny) {
            ScalarField2d f = case_study_delta2_field(parse_mode(mode), nx, ny);
            py::dict d;
            d["v_agent"] = f.x;
            d["v_env"] = f.y;
            py::list rows;
            for (size_t i = 0; i < f.x.size(); ++i) {
                py::list row;
                for (size_t j = 0; j < f.y.size(); ++j)
                    row.append(f.value[i * f.y.size() + j]);
                rows.append(row);
            }
            d["value"] = rows;
            d["max"] = f.max_value;
            return d;
        },
        py::arg("mode") = "weighted", py::arg("nx") = 64, py::arg("ny") = 64,
        "Ambiguity deviation field of the built-in scenario over the two velocities");
    m.def(
        "certify",
        [](const std::string& config_json) { return stage_summary(run_pipeline(config_from(config_json))); },
        py::arg("config_json") = "",
        "Run the certification and synthesis stages; empty config uses the built-in scenario");
    m.def(
        "run_scenario",
        [](const std::string& config_json, const std::string& out_dir) {
            PipelineArtifacts art = run_pipeline(config_from(config_json));
            std::vector<McRun> validation = run_validation(art);
            py::dict d = stage_summary(art);
            py::list val;
            for (const McRun& r : validation) val.append(validation_entry(r));
            d["validation"] = val;
            if (!out_dir.empty()) {
                EmittedFiles files = emit_results(art, validation, out_dir);
                d["files"] = files.paths;
                char hex[17];
                std::snprintf(hex, sizeof hex, "%016llx",
                              static_cast<unsigned long long>(files.content_hash));
                d["content_hash"] = std::string(hex);
            }
            return d;
        },
        py::arg("config_json") = "", py::arg("out_dir") = "",
        "Full run: certify, abstract, synthesize, validate by rollout, and optionally "
        "emit the CSVs and manifest");
}
