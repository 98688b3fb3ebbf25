#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/experiment.hpp"
#include "swarmlfa/factor_model.hpp"
#include "swarmlfa/hdi_data.hpp"
#include "swarmlfa/metrics.hpp"
#include "swarmlfa/refine.hpp"
#include "swarmlfa/swarm.hpp"
#include "swarmlfa/synthetic.hpp"
#include "swarmlfa/training.hpp"

namespace py = pybind11;
using namespace swarmlfa;

namespace {

/// Writable (rows, cols) view into model storage, kept alive by owner.
py::array_t<double> matrix_view(std::span<double> data, std::size_t rows, std::size_t cols, py::handle owner) {
    return py::array_t<double>({rows, cols}, {cols * sizeof(double), sizeof(double)}, data.data(), owner);
}

py::array_t<double> vector_view(std::span<double> data, py::handle owner) {
    return py::array_t<double>({data.size()}, {sizeof(double)}, data.data(), owner);
}

HdiMatrix from_arrays(std::size_t users, std::size_t items, py::array_t<std::int64_t, py::array::forcecast> u,
                      py::array_t<std::int64_t, py::array::forcecast> i, py::array_t<double, py::array::forcecast> r) {
    if (u.ndim() != 1 || i.ndim() != 1 || r.ndim() != 1 || u.size() != i.size() || u.size() != r.size()) {
        throw InputError("users, items and ratings must be 1-d arrays of equal length");
    }
    auto uu = u.unchecked<1>();
    auto ii = i.unchecked<1>();
    auto rr = r.unchecked<1>();
    std::vector<RatingEntry> entries;
    entries.reserve(static_cast<std::size_t>(u.size()));
    for (py::ssize_t k = 0; k < u.size(); ++k) {
        if (uu(k) < 0 || ii(k) < 0) throw InputError("negative index at position " + std::to_string(k));
        entries.push_back({static_cast<Index>(uu(k)), static_cast<Index>(ii(k)), rr(k)});
    }
    return HdiMatrix(users, items, std::move(entries));
}

py::tuple to_arrays(const HdiMatrix& m) {
    const std::size_t n = m.size();
    py::array_t<std::int64_t> u(n), i(n);
    py::array_t<double> r(n);
    auto uu = u.mutable_unchecked<1>();
    auto ii = i.mutable_unchecked<1>();
    auto rr = r.mutable_unchecked<1>();
    for (std::size_t k = 0; k < n; ++k) {
        const RatingEntry& e = m.entries()[k];
        uu(k) = e.user;
        ii(k) = e.item;
        rr(k) = e.rating;
    }
    return py::make_tuple(u, i, r);
}

std::vector<double> residual_vector(py::array_t<double, py::array::forcecast> a) {
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_swarmlfa, m) {
    m.doc() = "Swarm-refined latent factor analysis on sparse rating matrices";
    m.attr("__version__") = "0.1.0";

    static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<DivergenceError> divergence_error(m, "DivergenceError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InputError& e) {
            py::set_error(input_error, e.what());
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const DivergenceError& e) {
            py::set_error(divergence_error, e.what());
        }
    });

    py::enum_<FitnessKind>(m, "FitnessKind").value("RMSE", FitnessKind::Rmse).value("MAE", FitnessKind::Mae);
    py::enum_<UpdateRule>(m, "UpdateRule")
        .value("NEIGHBOR_COOPERATIVE", UpdateRule::NeighborCooperative)
        .value("STANDARD", UpdateRule::Standard);
    py::enum_<Gamma2Rule>(m, "Gamma2Rule")
        .value("INCREASING", Gamma2Rule::Increasing)
        .value("AS_PRINTED", Gamma2Rule::AsPrinted);

    py::class_<HdiMatrix>(m, "HdiMatrix")
        .def(py::init([](std::size_t users, std::size_t items, const std::vector<std::tuple<Index, Index, double>>& es) {
                 std::vector<RatingEntry> entries;
                 entries.reserve(es.size());
                 for (const auto& [u, i, r] : es) entries.push_back({u, i, r});
                 return HdiMatrix(users, items, std::move(entries));
             }),
             py::arg("user_count"), py::arg("item_count"), py::arg("entries"))
        .def_static("from_arrays", &from_arrays, py::arg("user_count"), py::arg("item_count"), py::arg("users"),
                    py::arg("items"), py::arg("ratings"))
        .def_property_readonly("user_count", &HdiMatrix::user_count)
        .def_property_readonly("item_count", &HdiMatrix::item_count)
        .def_property_readonly("density", &HdiMatrix::density)
        .def("__len__", &HdiMatrix::size)
        .def("to_arrays", &to_arrays, "(users, items, ratings) as numpy arrays")
        .def("row", [](const HdiMatrix& h, Index u) {
            std::vector<std::pair<Index, double>> out;
            for (const SliceEntry& e : h.row_slice(u)) out.emplace_back(e.other, e.rating);
            return out;
        })
        .def("column", [](const HdiMatrix& h, Index i) {
            std::vector<std::pair<Index, double>> out;
            for (const SliceEntry& e : h.col_slice(i)) out.emplace_back(e.other, e.rating);
            return out;
        });

    m.def(
        "parse_ratings",
        [](const std::string& text, const std::string& separator) {
            RatingFormat format;
            format.separator = parse_separator(separator);
            ParsedRatings p = parse_ratings(std::string_view(text), format);
            return py::make_tuple(std::move(p.matrix), p.users.labels, p.items.labels, p.duplicates);
        },
        py::arg("text"), py::arg("separator") = "::",
        "Returns (matrix, user_labels, item_labels, duplicates); labels[index] is the raw id.");

    py::class_<DataSplit>(m, "DataSplit")
        .def(py::init<>())
        .def_readwrite("train", &DataSplit::train)
        .def_readwrite("validation", &DataSplit::validation)
        .def_readwrite("test", &DataSplit::test)
        .def_readonly("seed", &DataSplit::seed);
    m.def("split", &split, py::arg("matrix"), py::arg("ratios") = std::array<double, 3>{0.7, 0.1, 0.2},
          py::arg("seed") = 42);

    m.def(
        "generate_synthetic",
        [](std::size_t users, std::size_t items, std::size_t rank, double density, double noise, std::uint64_t seed) {
            SynthSpec s;
            s.users = users;
            s.items = items;
            s.rank = rank;
            s.density = density;
            s.noise = noise;
            s.seed = seed;
            return generate_synthetic(s);
        },
        py::arg("users") = 200, py::arg("items") = 300, py::arg("rank") = 5, py::arg("density") = 0.05,
        py::arg("noise") = 0.1, py::arg("seed") = 1);

    py::class_<FactorModel>(m, "FactorModel")
        .def(py::init<std::size_t, std::size_t, std::size_t>(), py::arg("user_count"), py::arg("item_count"),
             py::arg("dim"))
        .def_property_readonly("user_count", &FactorModel::user_count)
        .def_property_readonly("item_count", &FactorModel::item_count)
        .def_property_readonly("dim", &FactorModel::dim)
        .def_property_readonly(
            "P", [](py::object self) {
                auto& fm = self.cast<FactorModel&>();
                return matrix_view(fm.P(), fm.user_count(), fm.dim(), self);
            })
        .def_property_readonly(
            "Q", [](py::object self) {
                auto& fm = self.cast<FactorModel&>();
                return matrix_view(fm.Q(), fm.item_count(), fm.dim(), self);
            })
        .def_property_readonly("user_bias",
                               [](py::object self) { return vector_view(self.cast<FactorModel&>().user_bias(), self); })
        .def_property_readonly("item_bias",
                               [](py::object self) { return vector_view(self.cast<FactorModel&>().item_bias(), self); })
        .def("predict", [](const FactorModel& fm, Index u, Index i) { return predict(fm, u, i); })
        .def("copy", [](const FactorModel& fm) { return FactorModel(fm); })
        .def("__eq__", [](const FactorModel& a, const FactorModel& b) { return a == b; });

    m.def("init_model", &init_model, py::arg("user_count"), py::arg("item_count"), py::arg("dim"), py::arg("seed"),
          py::arg("scale") = 0.1);
    m.def(
        "loss", [](const FactorModel& fm, const HdiMatrix& h, double lambda) { return loss(fm, h.entries(), lambda); },
        py::arg("model"), py::arg("matrix"), py::arg("lam"));
    m.def(
        "entry_gradient",
        [](const FactorModel& fm, Index u, Index i, double r, double lambda) {
            const EntryGradient g = entry_gradient(fm, {u, i, r}, lambda);
            py::dict d;
            d["p"] = g.g_p;
            d["q"] = g.g_q;
            d["b"] = g.g_b;
            d["c"] = g.g_c;
            return d;
        },
        py::arg("model"), py::arg("user"), py::arg("item"), py::arg("rating"), py::arg("lam"));
    m.def("rmse", py::overload_cast<const FactorModel&, const HdiMatrix&>(&rmse), py::arg("model"),
          py::arg("matrix"));
    m.def("mae", py::overload_cast<const FactorModel&, const HdiMatrix&>(&mae), py::arg("model"), py::arg("matrix"));
    m.def("rmse_of_residuals", [](py::array_t<double, py::array::forcecast> a) {
        return rmse_of_residuals(residual_vector(a));
    });
    m.def("mae_of_residuals", [](py::array_t<double, py::array::forcecast> a) {
        return mae_of_residuals(residual_vector(a));
    });
    m.def("save_model", [](const FactorModel& fm) {
        std::ostringstream out;
        save_model(out, fm);
        return out.str();
    });
    m.def("load_model", [](const std::string& text) {
        std::istringstream in(text);
        return load_model(in);
    });

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("model_name", &RunReport::model_name)
        .def_readonly("converged_at", &RunReport::converged_at)
        .def_readonly("test_rmse", &RunReport::test_rmse)
        .def_readonly("test_mae", &RunReport::test_mae)
        .def_readonly("seconds", &RunReport::seconds)
        .def_readonly("failed", &RunReport::failed)
        .def_readonly("config_snapshot", &RunReport::config_snapshot)
        .def_property_readonly("history", [](const RunReport& r) {
            std::vector<std::tuple<std::size_t, double, double>> out;
            for (const MetricPoint& p : r.history) out.emplace_back(p.epoch_or_round, p.rmse, p.mae);
            return out;
        });

    py::class_<SgdConfig>(m, "SgdConfig")
        .def(py::init<>())
        .def_readwrite("eta", &SgdConfig::eta)
        .def_readwrite("lam", &SgdConfig::lambda)
        .def_readwrite("max_epochs", &SgdConfig::max_epochs)
        .def_readwrite("convergence_tol", &SgdConfig::convergence_tol);

    m.def("sgd_epoch", &sgd_epoch, py::arg("model"), py::arg("train"), py::arg("config"), py::arg("epoch_seed"));
    m.def(
        "pretrain",
        [](const FactorModel& fm, const DataSplit& s, const SgdConfig& c, std::uint64_t seed) {
            TrainResult r = pretrain(fm, s, c, seed);
            return py::make_tuple(std::move(r.model), std::move(r.report));
        },
        py::arg("model"), py::arg("split"), py::arg("config") = SgdConfig{}, py::arg("seed") = 1,
        "Returns (best-validation model, report).");

    py::class_<ScheduleBounds>(m, "ScheduleBounds")
        .def(py::init<>())
        .def_readwrite("omega_max", &ScheduleBounds::omega_max)
        .def_readwrite("omega_min", &ScheduleBounds::omega_min)
        .def_readwrite("gamma_max", &ScheduleBounds::gamma_max)
        .def_readwrite("gamma_min", &ScheduleBounds::gamma_min)
        .def_readwrite("G", &ScheduleBounds::G)
        .def("midpoint_constant", &ScheduleBounds::midpoint_constant);
    m.def(
        "schedule_coefficients",
        [](std::size_t n, const ScheduleBounds& b, Gamma2Rule rule) {
            const Coefficients c = schedule_coefficients(n, b, rule);
            return py::make_tuple(c.omega, c.gamma1, c.gamma2);
        },
        py::arg("n"), py::arg("bounds") = ScheduleBounds{}, py::arg("rule") = Gamma2Rule::Increasing,
        "(omega, gamma1, gamma2) at iteration n.");

    py::class_<RefineConfig>(m, "RefineConfig")
        .def(py::init<>())
        .def_readwrite("K", &RefineConfig::K)
        .def_readwrite("N", &RefineConfig::N)
        .def_readwrite("M", &RefineConfig::M)
        .def_readwrite("schedule", &RefineConfig::schedule)
        .def_readwrite("gamma3", &RefineConfig::gamma3)
        .def_readwrite("beta_max", &RefineConfig::beta_max)
        .def_readwrite("beta_min", &RefineConfig::beta_min)
        .def_readwrite("lam", &RefineConfig::lambda)
        .def_readwrite("fitness_kind", &RefineConfig::fitness_kind)
        .def_readwrite("init_noise", &RefineConfig::init_noise)
        .def_readwrite("seed", &RefineConfig::seed)
        .def_readwrite("update_rule", &RefineConfig::update_rule)
        .def_readwrite("gamma2_rule", &RefineConfig::gamma2_rule)
        .def_readwrite("convergence_tol", &RefineConfig::convergence_tol)
        .def_readwrite("stall_iterations", &RefineConfig::stall_iterations)
        .def_readwrite("epsilon_floor", &RefineConfig::epsilon_floor)
        .def("validate", &RefineConfig::validate)
        .def("to_text", [](const RefineConfig& c) { return c.to_kv().str(); })
        .def_static("from_text", [](const std::string& text) { return RefineConfig::from_kv(KeyValues::parse(text)); });
    m.def("hpl_baseline", &hpl_baseline, py::arg("config"));

    m.def(
        "refine_model",
        [](const FactorModel& fm, const DataSplit& s, const RefineConfig& c, std::size_t threads) {
            RefineResult r = [&] {
                py::gil_scoped_release release;
                return refine_model(fm, s, c, {threads, false});
            }();
            return py::make_tuple(std::move(r.model), std::move(r.report));
        },
        py::arg("model"), py::arg("split"), py::arg("config") = RefineConfig{}, py::arg("threads") = 1,
        "Returns (refined model, report).");
}
