#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "epr/algebra.hpp"
#include "epr/cli.hpp"
#include "epr/doubles.hpp"
#include "epr/modular.hpp"
#include "epr/states.hpp"

namespace py = pybind11;
using namespace epr;

namespace {

py::list blocks(const BlockStructure& bs) {
  py::list out;
  for (const Block& b : bs.blocks) out.append(py::make_tuple(b.size, b.multiplicity));
  return out;
}

py::dict certificate(const DoubleCertificate& c) {
  py::dict d;
  d["residual_left"] = c.residual_left;
  d["residual_right"] = c.residual_right;
  d["residual_eq1"] = c.residual_eq1;
  d["verdict"] = c.verdict;
  d["eq1_verdict"] = c.eq1_verdict;
  d["eq1_bounds_hold"] = c.eq1_bounds_hold;
  return d;
}

MatrixAlgebra algebra_from(const std::vector<Matrix>& span, std::size_t dim, const Tolerance& tol) {
  return MatrixAlgebra::from_span(dim, span, tol);
}

}  // namespace

PYBIND11_MODULE(_epr, m) {
  m.doc() = "Perfect-correlation doubles for finite-dimensional matrix algebras";

  py::register_exception<Error>(m, "EprError", PyExc_RuntimeError);

  py::class_<Tolerance>(m, "Tolerance")
      .def(py::init([](double rank_tol, double residual_tol) {
             Tolerance t{rank_tol, residual_tol};
             t.validate();
             return t;
           }),
           py::arg("rank_tol") = 1e-9, py::arg("residual_tol") = 1e-8)
      .def_readwrite("rank_tol", &Tolerance::rank_tol)
      .def_readwrite("residual_tol", &Tolerance::residual_tol);

  py::class_<MatrixAlgebra>(m, "MatrixAlgebra")
      .def_static("from_span", &algebra_from, py::arg("span"), py::arg("dim"), py::arg("tol") = Tolerance())
      .def_static("full", &MatrixAlgebra::full)
      .def_static("scalars", &MatrixAlgebra::scalars)
      .def_static("left_factor", &MatrixAlgebra::left_factor, py::arg("dim_a"), py::arg("dim_b"))
      .def_static("right_factor", &MatrixAlgebra::right_factor, py::arg("dim_a"), py::arg("dim_b"))
      .def_property_readonly("ambient_dim", &MatrixAlgebra::ambient_dim)
      .def_property_readonly("dimension", &MatrixAlgebra::dimension)
      .def_property_readonly("basis", &MatrixAlgebra::basis)
      .def("contains", &MatrixAlgebra::contains, py::arg("x"), py::arg("tol") = Tolerance())
      .def("project", &MatrixAlgebra::project)
      .def("__len__", &MatrixAlgebra::dimension);

  m.def("generate_algebra",
        [](const std::vector<Matrix>& gens, std::size_t dim, const Tolerance& tol) {
          return generate_algebra(gens, dim, tol);
        },
        py::arg("generators"), py::arg("dim"), py::arg("tol") = Tolerance());
  m.def("commutant", &commutant, py::arg("alg"), py::arg("tol") = Tolerance());
  m.def("center", &center, py::arg("alg"), py::arg("tol") = Tolerance());
  m.def("centralizer", &centralizer, py::arg("alg"), py::arg("rho"), py::arg("tol") = Tolerance());
  m.def("intersect", &intersect, py::arg("a"), py::arg("b"), py::arg("tol") = Tolerance());
  m.def("span_equal", &span_equal, py::arg("a"), py::arg("b"), py::arg("tol") = Tolerance());
  m.def("block_decomposition",
        [](const MatrixAlgebra& alg, const Tolerance& tol) {
          const BlockStructure bs = block_decomposition(alg, tol);
          return py::make_tuple(blocks(bs), bs.conjugating_unitary);
        },
        py::arg("alg"), py::arg("tol") = Tolerance());

  m.def("schmidt",
        [](const Vector& psi, std::size_t dim_a, std::size_t dim_b, const Tolerance& tol) {
          const SchmidtData s = schmidt(BipartiteState::from_vector(dim_a, dim_b, psi, tol), tol);
          return py::make_tuple(s.coefficients, s.left_basis, s.right_basis);
        },
        py::arg("psi"), py::arg("dim_a"), py::arg("dim_b"), py::arg("tol") = Tolerance());
  m.def("reduced_density",
        [](const Vector& psi, std::size_t dim_a, std::size_t dim_b, const std::string& side) {
          const BipartiteState s = BipartiteState::from_vector(dim_a, dim_b, psi);
          return Matrix(reduced_density(s, side == "b" ? Side::B : Side::A).matrix());
        },
        py::arg("psi"), py::arg("dim_a"), py::arg("dim_b"), py::arg("side") = "a");

  m.def("modular_data",
        [](const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol) {
          const ModularData md = modular_data(alg, psi, tol);
          py::dict d;
          d["S"] = md.S.kernel();
          d["delta"] = md.delta;
          d["J"] = md.J.kernel();
          return d;
        },
        py::arg("alg"), py::arg("psi"), py::arg("tol") = Tolerance());
  m.def("modular_double",
        [](const Matrix& a, const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol) {
          return modular_double(a, modular_data(alg, psi, tol), tol);
        },
        py::arg("a"), py::arg("alg"), py::arg("psi"), py::arg("tol") = Tolerance());

  m.def("verify_double",
        [](const Matrix& rho, const Matrix& a, const Matrix& a_prime, const Tolerance& tol) {
          return certificate(verify_double(DensityOperator::from_matrix(rho, tol), a, a_prime, tol));
        },
        py::arg("rho"), py::arg("a"), py::arg("a_prime"), py::arg("tol") = Tolerance());
  m.def("solve_double",
        [](const Matrix& rho, const Matrix& a, const MatrixAlgebra& b, const Tolerance& tol) {
          const DoubleSolution s = solve_double(DensityOperator::from_matrix(rho, tol), a, b, tol);
          return py::make_tuple(s.double_op, s.solution_dim);
        },
        py::arg("rho"), py::arg("a"), py::arg("b"), py::arg("tol") = Tolerance());
  m.def("doubles_algebra",
        [](const MatrixAlgebra& a, const MatrixAlgebra& b, const Matrix& rho, const std::string& path,
           const Tolerance& tol) {
          const Path p = path == "modular" ? Path::Modular : path == "oracle" ? Path::Oracle : Path::Both;
          DoublesAlgebra d = doubles_algebra(a, b, DensityOperator::from_matrix(rho, tol), tol, p);
          return py::make_tuple(d.algebra, d.doubles, d.paths_agree);
        },
        py::arg("a"), py::arg("b"), py::arg("rho"), py::arg("path") = "both", py::arg("tol") = Tolerance());
  m.def("reduce",
        [](const MatrixAlgebra& a, const Vector& psi, const Tolerance& tol) {
          const ReductionData r = reduce(a, psi, tol);
          py::dict d;
          d["R"] = r.R;
          d["R_prime"] = r.R_prime;
          d["restricted_basis"] = r.restricted_basis;
          d["restricted_algebra"] = r.restricted_algebra;
          d["restricted_psi"] = r.restricted_psi;
          return d;
        },
        py::arg("a"), py::arg("psi"), py::arg("tol") = Tolerance());

  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "epr-doubles");
          std::vector<const char*> argv;
          for (const std::string& s : args) argv.push_back(s.c_str());
          return cli::run(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"));
}
