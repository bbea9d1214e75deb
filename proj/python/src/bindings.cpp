#include "wbmorph/admm.hpp"
#include "wbmorph/error.hpp"
#include "wbmorph/io.hpp"
#include "wbmorph/morph.hpp"
#include "wbmorph/projector.hpp"
#include "wbmorph/sparse.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace wbmorph;

namespace {

using Image = py::array_t<double, py::array::c_style | py::array::forcecast>;

GridMeasure measure_from_image(const Image& img)
{
    if (img.ndim() != 2) {
        throw Error(ErrorCode::InvalidArgument, "image must be a 2-D array");
    }
    const GridShape shape(static_cast<std::size_t>(img.shape(0)), static_cast<std::size_t>(img.shape(1)));
    return normalize_to_measure(std::span<const double>(img.data(), shape.size()), shape);
}

py::array_t<double> measure_image(const GridMeasure& m)
{
    py::array_t<double> out({m.shape().rows(), m.shape().cols()});
    std::copy(m.mass().data(), m.mass().data() + m.mass().size(), out.mutable_data());
    return out;
}

py::dict report_dict(const TransitionReport& r)
{
    py::dict d;
    d["regularity"] = r.regularity;
    d["total_distance"] = r.total_distance;
    d["manifold_distance"] = r.manifold_distance;
    d["per_step_distances"] = r.per_step_distances;
    d["all_converged"] = r.all_converged;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Constrained Wasserstein barycenters and image morphing";

    static PyObject* error_type = PyErr_NewException("wbmorph.WbmorphError", PyExc_RuntimeError, nullptr);
    m.add_object("WbmorphError", py::handle(error_type));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    py::class_<GridShape>(m, "GridShape")
        .def(py::init<std::size_t, std::size_t>(), py::arg("rows"), py::arg("cols"))
        .def_property_readonly("rows", &GridShape::rows)
        .def_property_readonly("cols", &GridShape::cols)
        .def_property_readonly("size", &GridShape::size)
        .def(py::self == py::self)
        .def("__repr__", [](const GridShape& s) {
            return "GridShape(" + std::to_string(s.rows()) + ", " + std::to_string(s.cols()) + ")";
        });

    py::class_<GridMeasure>(m, "GridMeasure")
        .def(py::init<GridShape, Vector>(), py::arg("shape"), py::arg("mass"))
        .def_static("from_image", &measure_from_image, py::arg("image"),
                    "Floors tiny and negative pixels, then rescales to unit mass.")
        .def_static("dirac", &GridMeasure::dirac, py::arg("shape"), py::arg("index"))
        .def_static("uniform", &GridMeasure::uniform, py::arg("shape"))
        .def_property_readonly("shape", &GridMeasure::shape)
        .def_property_readonly("mass", &GridMeasure::mass)
        .def_property_readonly("image", &measure_image)
        .def("mean_row", &GridMeasure::mean_row)
        .def("mean_col", &GridMeasure::mean_col)
        .def("__len__", &GridMeasure::size);

    py::class_<GroundCost>(m, "GroundCost")
        .def(py::init<GridShape, double>(), py::arg("shape"), py::arg("epsilon") = kDefaultEpsilon)
        .def_property_readonly("shape", &GroundCost::shape)
        .def_property_readonly("epsilon", &GroundCost::epsilon)
        .def("__call__", &GroundCost::operator(), py::arg("i"), py::arg("j"));

    m.def("total_variation", py::overload_cast<const GridMeasure&, const GridMeasure&>(&total_variation));

    py::class_<TransportResult>(m, "TransportResult")
        .def_readonly("cost", &TransportResult::cost)
        .def_readonly("regularized_cost", &TransportResult::regularized_cost)
        .def_readonly("marginal_error", &TransportResult::marginal_error)
        .def_property_readonly("converged", [](const TransportResult& r) { return r.potentials.converged; })
        .def_property_readonly("iterations", [](const TransportResult& r) { return r.potentials.iterations; })
        .def_property_readonly("f", [](const TransportResult& r) { return r.potentials.f; })
        .def_property_readonly("g", [](const TransportResult& r) { return r.potentials.g; });

    m.def("sinkhorn",
          py::overload_cast<const GridMeasure&, const GridMeasure&, const GroundCost&, int, double>(&sinkhorn),
          py::arg("p"), py::arg("q"), py::arg("cost"), py::arg("max_iters") = kDefaultSinkhornIters,
          py::arg("tol") = kDefaultSinkhornTol, py::call_guard<py::gil_scoped_release>());
    m.def("exact_lp_transport", &exact_lp_transport, py::arg("p"), py::arg("q"), py::arg("cost"));

    m.def(
        "entropic_barycenter",
        [](const std::vector<GridMeasure>& inputs, std::vector<double> weights, const GroundCost& cost,
           int max_iters, double tol) {
            return entropic_barycenter(inputs, BarycenterWeights(std::move(weights)), cost, max_iters, tol);
        },
        py::arg("inputs"), py::arg("weights"), py::arg("cost"), py::arg("max_iters") = kDefaultBarycenterIters,
        py::arg("tol") = kDefaultBarycenterTol, py::call_guard<py::gil_scoped_release>());

    py::class_<Dictionary, std::shared_ptr<Dictionary>>(m, "Dictionary")
        .def(py::init<Matrix>(), py::arg("atoms"))
        .def_property_readonly("atoms", &Dictionary::atoms)
        .def_property_readonly("atom_dim", &Dictionary::atom_dim)
        .def_property_readonly("atom_count", &Dictionary::atom_count)
        .def("mutual_coherence", &Dictionary::mutual_coherence)
        .def("save", [](const Dictionary& d, const std::filesystem::path& p) { save_dictionary(d, p); })
        .def_static("load", [](const std::filesystem::path& p) {
            return std::make_shared<Dictionary>(load_dictionary(p));
        });

    py::class_<SparseCode>(m, "SparseCode")
        .def_readonly("support", &SparseCode::support)
        .def_readonly("coefficients", &SparseCode::coefficients)
        .def_readonly("residual_history", &SparseCode::residual_history)
        .def("reconstruct", &SparseCode::reconstruct, py::arg("dictionary"));

    m.def("omp", &omp, py::arg("y"), py::arg("dictionary"), py::arg("k"), py::arg("residual_tol") = 0.0);
    m.def(
        "learn_dictionary",
        [](const Matrix& samples, int atoms, int sparsity, int epochs, std::uint64_t seed) {
            return std::make_shared<Dictionary>(learn_dictionary(samples, atoms, sparsity, epochs, seed));
        },
        py::arg("samples"), py::arg("atoms"), py::arg("sparsity"), py::arg("epochs"), py::arg("seed") = 0,
        "Samples are the columns of `samples`.", py::call_guard<py::gil_scoped_release>());
    m.def("project_sparse", &project_sparse, py::arg("y"), py::arg("dictionary"), py::arg("k"),
          py::arg("mmse_passes") = 10, py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);

    py::class_<Projector>(m, "Projector")
        .def_property_readonly("description", &Projector::describe)
        .def("project_raw", &Projector::project_raw, py::arg("y"), py::arg("seed") = 0)
        .def("project", &Projector::project, py::arg("y"), py::arg("shape"), py::arg("seed") = 0);
    py::class_<IdentityProjector, Projector>(m, "IdentityProjector").def(py::init<>());
    py::class_<SparseProjector, Projector>(m, "SparseProjector")
        .def(py::init([](std::shared_ptr<Dictionary> dict, int sparsity, int mmse_passes, double noise_rel) {
                 return std::make_unique<SparseProjector>(std::move(dict),
                                                          SparseProjectorConfig{sparsity, mmse_passes, noise_rel});
             }),
             py::arg("dictionary"), py::arg("sparsity") = 12, py::arg("mmse_passes") = 10,
             py::arg("noise_rel") = 0.05);
    py::class_<ExternalProjector, Projector>(m, "ExternalProjector")
        .def(py::init([](std::string command, int timeout_ms) {
                 return std::make_unique<ExternalProjector>(std::move(command),
                                                            std::chrono::milliseconds(timeout_ms));
             }),
             py::arg("command"), py::arg("timeout_ms") = ExternalProjector::kDefaultTimeout.count());

    py::class_<AdmmConfig>(m, "AdmmConfig")
        .def(py::init<>())
        .def_readwrite("mu", &AdmmConfig::mu)
        .def_readwrite("stop_tol", &AdmmConfig::stop_tol)
        .def_readwrite("max_outer_iters", &AdmmConfig::max_outer_iters)
        .def_readwrite("fixed_iters", &AdmmConfig::fixed_iters)
        .def_readwrite("seed", &AdmmConfig::seed)
        .def_readwrite("initial_guess", &AdmmConfig::initial_guess);

    py::class_<AdmmResult>(m, "AdmmResult")
        .def_readonly("measure", &AdmmResult::measure)
        .def_property_readonly("outer_iter", [](const AdmmResult& r) { return r.state.outer_iter; })
        .def_property_readonly("converged", [](const AdmmResult& r) { return r.state.converged; })
        .def_property_readonly("residual_history", [](const AdmmResult& r) { return r.state.residual_history; })
        .def_property_readonly("dual", [](const AdmmResult& r) { return r.state.u; });

    m.def(
        "constrained_barycenter",
        [](const std::vector<GridMeasure>& inputs, std::vector<double> weights, const Projector& projector,
           const GroundCost& cost, const AdmmConfig& config) {
            return constrained_barycenter(inputs, BarycenterWeights(std::move(weights)), projector, cost, config);
        },
        py::arg("inputs"), py::arg("weights"), py::arg("projector"), py::arg("cost"),
        py::arg("config") = AdmmConfig{}, py::call_guard<py::gil_scoped_release>());

    m.def("morph_schedule", &morph_schedule, py::arg("n_frames"));
    m.def(
        "morph",
        [](const GridMeasure& a, const GridMeasure& b, int n_frames, const Projector& projector,
           const GroundCost& cost, const AdmmConfig& config, unsigned jobs) {
            return morph(a, b, n_frames, projector, cost, config, MorphOptions{false, jobs}).frames;
        },
        py::arg("a"), py::arg("b"), py::arg("n_frames"), py::arg("projector"), py::arg("cost"),
        py::arg("config") = AdmmConfig{}, py::arg("jobs") = 1u, py::call_guard<py::gil_scoped_release>(),
        "Frames from a to b, endpoints included.");
    m.def(
        "morph4",
        [](const std::array<GridMeasure, 4>& corners, int steps, const Projector& projector, const GroundCost& cost,
           const AdmmConfig& config, unsigned jobs) {
            return morph4(corners, steps, projector, cost, config, MorphOptions{false, jobs});
        },
        py::arg("corners"), py::arg("steps"), py::arg("projector"), py::arg("cost"),
        py::arg("config") = AdmmConfig{}, py::arg("jobs") = 1u, py::call_guard<py::gil_scoped_release>());
    m.def(
        "evaluate",
        [](const std::vector<GridMeasure>& frames, const GroundCost& cost, const Projector& projector,
           std::uint64_t seed) {
            TransitionReport r;
            {
                py::gil_scoped_release release;
                EvaluateOptions opts;
                opts.seed = seed;
                r = evaluate(frames, cost, projector, opts);
            }
            return report_dict(r);
        },
        py::arg("frames"), py::arg("cost"), py::arg("projector"), py::arg("seed") = 0);

    py::class_<IdxDataset>(m, "IdxDataset")
        .def_readonly("count", &IdxDataset::count)
        .def_readonly("shape", &IdxDataset::shape)
        .def("measure", &IdxDataset::measure, py::arg("index"))
        .def("image", [](const IdxDataset& d, std::size_t i) {
            if (i >= d.count) {
                throw Error(ErrorCode::IndexOutOfRange, "image index out of range");
            }
            py::array_t<std::uint8_t> out({d.shape.rows(), d.shape.cols()});
            std::copy_n(d.pixels.data() + i * d.shape.size(), d.shape.size(), out.mutable_data());
            return out;
        });
    m.def("load_idx", &load_idx, py::arg("path"));
    m.def("load_idx_labels", &load_idx_labels, py::arg("path"));
    m.def("write_pgm", &write_pgm, py::arg("measure"), py::arg("path"), py::arg("gamma") = 1.0);
    m.def(
        "read_pgm",
        [](const std::filesystem::path& path) {
            const GrayImage g = read_pgm(path);
            py::array_t<double> out({g.shape.rows(), g.shape.cols()});
            std::copy(g.pixels.begin(), g.pixels.end(), out.mutable_data());
            return out;
        },
        py::arg("path"));
}
