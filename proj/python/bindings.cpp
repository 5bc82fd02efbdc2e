#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robustkd/augment.hpp"
#include "robustkd/cli.hpp"
#include "robustkd/distill.hpp"
#include "robustkd/dmu.hpp"
#include "robustkd/eval.hpp"

namespace py = pybind11;
using namespace rkd;

namespace {

CorrectnessVector correctness(const std::vector<std::string>& ids, const std::vector<bool>& correct) {
    CorrectnessVector v;
    v.ids = ids;
    v.correct = correct;
    return v;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Distillation kernels, significance testing and the robustkd command line";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "sq_distill_loss", [](const Probs& p, const Probs& q) { return sq_distill_loss(p, q).loss; }, py::arg("p"),
        py::arg("q"));
    m.def(
        "cross_entropy", [](const Probs& p, int gold) { return cross_entropy(p, gold).loss; }, py::arg("p"),
        py::arg("gold"));
    m.def(
        "ensemble_target", [](const std::vector<Probs>& qs) { return ensemble_target(qs); }, py::arg("teachers"));
    m.def(
        "smooth_teacher", [](const Probs& q, double power) { return smooth_teacher(q, power); }, py::arg("q"),
        py::arg("power") = 0.9);
    m.def(
        "gate",
        [](int gold, const Probs& p, const Probs& q) {
            auto d = gate(gold, p, q);
            return py::make_tuple(d.include, std::string(to_string(d.reason)));
        },
        py::arg("gold"), py::arg("p"), py::arg("q"));

    m.def(
        "bootstrap_pvalue",
        [](const std::vector<std::string>& ids, const std::vector<bool>& a, const std::vector<bool>& b,
           std::size_t resamples, std::uint64_t seed) {
            auto r = bootstrap_pvalue(correctness(ids, a), correctness(ids, b), resamples, seed);
            return py::dict(py::arg("p_value") = r.p_value, py::arg("mean_diff") = r.mean_diff,
                            py::arg("resamples") = r.resamples, py::arg("seed") = r.seed);
        },
        py::arg("ids"), py::arg("a"), py::arg("b"), py::arg("resamples") = kDefaultResamples, py::arg("seed") = 0);
    m.def("format_p_value", &format_p_value, py::arg("p"));

    m.def(
        "premise_prompt", [](const std::string& domain, std::size_t round) { return build_premise_prompt(domain, round).text; },
        py::arg("domain"), py::arg("round") = 0);
    m.def(
        "filter_premise", [](const std::string& reply) { return filter_premise(reply); }, py::arg("reply"));

    m.def(
        "build_manifest",
        [](const std::vector<std::string>& ids, const std::vector<std::string>& minority, std::size_t factor) {
            MinoritySet s;
            s.ids.insert(minority.begin(), minority.end());
            return build_manifest(ids, s, factor).order;
        },
        py::arg("ids"), py::arg("minority"), py::arg("factor"));

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "robustkd");
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            py::gil_scoped_release release;
            return cli::dispatch(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"));
}
