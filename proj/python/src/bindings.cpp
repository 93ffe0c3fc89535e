#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kkl/diagnostics.hpp"
#include "kkl/dynamics.hpp"
#include "kkl/error.hpp"
#include "kkl/ingest.hpp"
#include "kkl/lifting.hpp"
#include "kkl/linalg.hpp"
#include "kkl/pipeline.hpp"
#include "kkl/reduction.hpp"

namespace py = pybind11;
using kkl::Matrix;
using kkl::Vector;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& a) {
    if (a.ndim() == 1) return Matrix(static_cast<std::size_t>(a.shape(0)), 1, Vector(a.data(), a.data() + a.size()));
    if (a.ndim() != 2) throw kkl::ValidationError("expected a 1-D or 2-D array");
    return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  Vector(a.data(), a.data() + a.size()));
}

Vector to_vector(const DoubleArray& a) {
    if (a.ndim() != 1) throw kkl::ValidationError("expected a 1-D array");
    return Vector(a.data(), a.data() + a.size());
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::array_t<double> from_vector(const Vector& v) {
    py::array_t<double> out(v.size());
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

kkl::OregonatorParams params(double epsilon, double delta, double f, double q) {
    kkl::OregonatorParams p;
    p.epsilon = epsilon;
    p.delta = delta;
    p.f = f;
    p.q = q;
    return p;
}

using Observer = std::shared_ptr<kkl::ObserverConfig>;

py::dict alignment_dict(const kkl::AffineAlignment& a) {
    py::dict d;
    d["weights"] = from_matrix(a.weights);
    d["offset"] = from_vector(a.offset);
    d["r2"] = from_vector(a.r2);
    d["rmse"] = from_vector(a.rmse);
    d["nrmse"] = from_vector(a.nrmse);
    d["samples"] = a.samples;
    return d;
}

py::dict pipeline_dict(const kkl::PipelineResult& r) {
    py::dict d;
    d["times"] = from_vector(r.reduction.series.times);
    d["components"] = from_matrix(r.reduction.series.components);
    d["fit_begin"] = r.reduction.fit_begin;
    d["fit_end"] = r.reduction.fit_end;
    d["spectrum"] = from_vector(r.reduction.model.spectrum);
    if (r.truth) d["truth"] = from_matrix(r.truth->states());
    d["report"] = kkl::report_to_json(r.report).dump();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Observer-based state recovery from high-dimensional measurements.";

    auto base = py::register_exception<kkl::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<kkl::ValidationError>(m, "ValidationError", PyExc_ValueError);
    auto numerical = py::register_exception<kkl::NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<kkl::DegenerateDataError>(m, "DegenerateDataError", numerical.ptr());
    auto io = py::register_exception<kkl::IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<kkl::ParseError>(m, "ParseError", io.ptr());

    const kkl::OregonatorParams d;
    m.def(
        "oregonator_rhs",
        [](const DoubleArray& x, double epsilon, double delta, double f, double q) {
            const auto v = to_vector(x);
            const auto r = kkl::oregonator_rhs(v, params(epsilon, delta, f, q));
            return from_vector(Vector(r.begin(), r.end()));
        },
        py::arg("x"), py::arg("epsilon") = d.epsilon, py::arg("delta") = d.delta, py::arg("f") = d.f,
        py::arg("q") = d.q);
    m.def(
        "oregonator_equilibrium",
        [](double epsilon, double delta, double f, double q) {
            const auto r = kkl::oregonator_equilibrium(params(epsilon, delta, f, q));
            return from_vector(Vector(r.begin(), r.end()));
        },
        py::arg("epsilon") = d.epsilon, py::arg("delta") = d.delta, py::arg("f") = d.f, py::arg("q") = d.q);
    m.def(
        "simulate",
        [](const DoubleArray& x0, double horizon, double dt, double epsilon, double delta, double f, double q,
           double rtol, double atol) {
            kkl::IntegratorConfig cfg;
            cfg.rtol = rtol;
            cfg.atol = atol;
            const auto v = to_vector(x0);
            const auto traj = kkl::sample_uniform(
                kkl::integrate(kkl::oregonator_field(params(epsilon, delta, f, q)), v, 0.0, horizon, cfg), dt);
            return py::make_tuple(from_vector(traj.times()), from_matrix(traj.states()));
        },
        py::arg("x0"), py::arg("horizon"), py::arg("dt"), py::arg("epsilon") = d.epsilon, py::arg("delta") = d.delta,
        py::arg("f") = d.f, py::arg("q") = d.q, py::arg("rtol") = 1e-6, py::arg("atol") = 1e-9);

    py::class_<kkl::ObserverConfig, Observer>(m, "Observer")
        .def_property_readonly("rates", [](const kkl::ObserverConfig& o) { return from_vector(o.rates); })
        .def_property_readonly("input", [](const kkl::ObserverConfig& o) { return from_matrix(o.input); })
        .def_property_readonly("order", &kkl::ObserverConfig::order)
        .def_readonly("seed", &kkl::ObserverConfig::seed)
        .def("to_json", [](const kkl::ObserverConfig& o) { return kkl::observer_to_json(o).dump(); });
    m.def(
        "make_observer",
        [](std::size_t state_dim, std::size_t output_dim, double rate_min, double rate_max, std::uint64_t seed,
           std::optional<std::size_t> order) {
            return std::make_shared<kkl::ObserverConfig>(
                kkl::make_observer(state_dim, output_dim, rate_min, rate_max, seed, order));
        },
        py::arg("state_dim"), py::arg("output_dim"), py::arg("rate_min") = 1.0, py::arg("rate_max") = 50.0,
        py::arg("seed") = 0, py::arg("order") = py::none());
    m.def(
        "lift",
        [](const DoubleArray& times, const DoubleArray& y, const Observer& observer, std::optional<DoubleArray> z0) {
            const Vector init = z0 ? to_vector(*z0) : Vector{};
            const auto lifted = kkl::lift(kkl::OutputSeries(to_vector(times), to_matrix(y)), observer, init);
            return from_matrix(lifted.states);
        },
        py::arg("times"), py::arg("y"), py::arg("observer"), py::arg("z0") = py::none());
    m.def(
        "solve_sylvester",
        [](const DoubleArray& f, const DoubleArray& h, const DoubleArray& a, const DoubleArray& b) {
            const auto s = kkl::solve_sylvester(to_matrix(f), to_matrix(h), to_matrix(a), to_matrix(b));
            return py::make_tuple(from_matrix(s.transform), s.residual);
        },
        py::arg("f"), py::arg("h"), py::arg("a"), py::arg("b"));

    m.def(
        "sym_eig",
        [](const DoubleArray& s) {
            const auto r = kkl::sym_eig(to_matrix(s));
            return py::make_tuple(from_vector(r.eigenvalues), from_matrix(r.eigenvectors));
        },
        py::arg("s"));

    py::class_<kkl::PcaModel>(m, "PcaModel")
        .def_readonly("target_dim", &kkl::PcaModel::target_dim)
        .def_readonly("explained_ratio", &kkl::PcaModel::explained_ratio)
        .def_readonly("fit_samples", &kkl::PcaModel::fit_samples)
        .def_property_readonly("eigenvalues", [](const kkl::PcaModel& p) { return from_vector(p.eigenvalues); })
        .def_property_readonly("spectrum", [](const kkl::PcaModel& p) { return from_vector(p.spectrum); })
        .def_property_readonly("basis", [](const kkl::PcaModel& p) { return from_matrix(p.basis); })
        .def_property_readonly("q_matrix", [](const kkl::PcaModel& p) { return from_matrix(p.q_matrix); })
        .def_property_readonly("q_offset", [](const kkl::PcaModel& p) { return from_vector(p.q_offset); })
        .def("project", [](const kkl::PcaModel& p, const DoubleArray& z) { return from_matrix(p.project_rows(to_matrix(z))); },
             py::arg("z"))
        .def("to_json", [](const kkl::PcaModel& p) { return kkl::pca_to_json(p).dump(); });
    m.def(
        "fit_pca",
        [](const DoubleArray& z, std::size_t target_dim) {
            const Matrix zm = to_matrix(z);
            return kkl::fit_pca(zm, kkl::fit_whiten(zm), target_dim);
        },
        py::arg("z"), py::arg("target_dim"));

    m.def(
        "align_affine",
        [](const DoubleArray& components, const DoubleArray& truth) {
            return alignment_dict(kkl::align_affine(to_matrix(components), to_matrix(truth)));
        },
        py::arg("components"), py::arg("truth"));
    m.def(
        "estimate_period",
        [](const DoubleArray& values, double dt, std::optional<double> min_lag, std::optional<double> max_lag) {
            const auto e = kkl::estimate_period(to_vector(values), dt, min_lag, max_lag);
            return py::make_tuple(e.period, e.peak, e.valid);
        },
        py::arg("values"), py::arg("dt"), py::arg("min_lag") = py::none(), py::arg("max_lag") = py::none());
    m.def(
        "recurrence_error",
        [](const DoubleArray& times, const DoubleArray& states, double period, double t_from) {
            return kkl::recurrence_error(to_vector(times), to_matrix(states), period, t_from);
        },
        py::arg("times"), py::arg("states"), py::arg("period"), py::arg("t_from") = 0.0);

    m.def(
        "decode_ppm",
        [](const py::bytes& data, const std::string& name) {
            const auto img = kkl::decode_ppm(std::string(data), name);
            py::array_t<std::uint8_t> out({img.height, img.width, std::size_t{3}});
            std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
            return out;
        },
        py::arg("data"), py::arg("name") = "<bytes>");
    m.def(
        "encode_ppm",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& rgb) {
            if (rgb.ndim() != 3 || rgb.shape(2) != 3) throw kkl::ValidationError("expected an H x W x 3 array");
            kkl::Image img(static_cast<std::size_t>(rgb.shape(1)), static_cast<std::size_t>(rgb.shape(0)));
            std::copy(rgb.data(), rgb.data() + rgb.size(), img.rgb.begin());
            return py::bytes(kkl::encode_ppm(img));
        },
        py::arg("rgb"));

    m.def(
        "run_pipeline",
        [](const std::string& config_json, std::optional<std::filesystem::path> output_dir) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(config_json);
            } catch (const nlohmann::json::exception& e) {
                throw kkl::ValidationError(std::string("config: ") + e.what());
            }
            const auto cfg = kkl::config_from_json(doc);
            kkl::PipelineResult r;
            {
                py::gil_scoped_release release;
                r = output_dir ? kkl::run_pipeline(cfg, *output_dir) : kkl::run_pipeline_in_memory(cfg);
            }
            return pipeline_dict(r);
        },
        py::arg("config_json"), py::arg("output_dir") = py::none());
    m.def("default_config", [] { return kkl::config_to_json(kkl::PipelineConfig{}).dump(); });
    m.attr("__version__") = KKL_VERSION_STRING;
}
