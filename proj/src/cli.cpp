#include "epr/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "epr/doubles.hpp"
#include "epr/modular.hpp"
#include "epr/random.hpp"
#include "epr/states.hpp"

namespace epr::cli {

namespace {

// Inputs are usually typed by hand or rounded on export; states within this
// distance of normalized are rescaled, anything further is rejected.
constexpr double kInputRounding = 1e-3;

[[noreturn]] void parse_error(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::ParseError, field + ": " + what);
}

[[noreturn]] void validation_error(const std::string& invariant, const std::string& what) {
  throw Error(ErrorKind::ValidationError, invariant + ": " + what);
}

const Json& require_field(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) parse_error(path.empty() ? "document" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) parse_error(path.empty() ? key : path + "." + key, "missing field '" + key + "'");
  return *it;
}

bool is_pair(const Json& j) { return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(); }

Complex parse_complex(const Json& j, const std::string& field) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (is_pair(j)) return {j[0].get<double>(), j[1].get<double>()};
  parse_error(field, "expected a number or a [re, im] pair");
}

Vector parse_vector(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) parse_error(field, "expected a non-empty list of amplitudes");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = parse_complex(j[i], field + "[" + std::to_string(i) + "]");
  return v;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

Matrix named_operator(const std::string& name, std::size_t dim, const std::string& field) {
  if (name == "I" || name == "1" || name == "id") return identity(dim);
  Matrix p(2, 2);
  if (name == "sx") {
    p << 0, 1, 1, 0;
  } else if (name == "sy") {
    p << 0, Complex(0, -1), Complex(0, 1), 0;
  } else if (name == "sz") {
    p << 1, 0, 0, -1;
  } else {
    const Json j = [&] {
      try {
        return Json::parse(name);
      } catch (const Json::parse_error&) {
        parse_error(field, "unknown operator '" + name + "'");
      }
    }();
    return parse_matrix(j, field);
  }
  if (dim != 2) validation_error("operator dimension", "'" + name + "' is 2x2 but the factor has dimension " + std::to_string(dim));
  return p;
}

void require_dim(const Matrix& m, std::size_t dim, const std::string& field) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
    std::ostringstream msg;
    msg << field << " is " << m.rows() << "x" << m.cols() << ", expected " << dim << "x" << dim;
    validation_error("operator dimension", msg.str());
  }
}

Matrix parse_operator_json(const Json& j, std::size_t dim_a, std::size_t dim_b, const std::string& field) {
  Matrix m = j.is_string() ? parse_observable(j.get<std::string>(), dim_a, dim_b) : parse_matrix(j, field);
  require_dim(m, dim_a * dim_b, field);
  return m;
}

// Rescales an almost-normalized state and rejects everything else.
Vector normalized_vector(Vector v) {
  if (!v.allFinite()) validation_error("finite amplitudes", "state vector has non-finite entries");
  const double n = v.norm();
  if (std::abs(n - 1.0) > kInputRounding) {
    std::ostringstream msg;
    msg << "state vector has norm " << n;
    validation_error("normalization", msg.str());
  }
  v /= n;
  return v;
}

Matrix normalized_density(Matrix rho, const Tolerance& tol) {
  if (rho.rows() != rho.cols()) validation_error("square shape", "density operator must be square");
  if (!rho.allFinite()) validation_error("finite entries", "density operator has non-finite entries");
  const double herm = (rho - rho.adjoint()).norm();
  if (herm > kInputRounding * std::max(rho.norm(), 1.0)) {
    std::ostringstream msg;
    msg << "density operator is not Hermitian (defect " << herm << ")";
    validation_error("hermiticity", msg.str());
  }
  rho = 0.5 * (rho + rho.adjoint());
  const double trace = rho.trace().real();
  if (std::abs(trace - 1.0) > kInputRounding) {
    std::ostringstream msg;
    msg << "density operator has trace " << trace;
    validation_error("trace", msg.str());
  }
  rho /= trace;
  if (auto defect = density_defect(rho, tol)) validation_error(*defect, "density operator is not a state");
  return rho;
}

DensityOperator density_of(const ProblemSpec& spec, const Tolerance& tol) {
  if (const auto* v = std::get_if<Vector>(&spec.state)) return DensityOperator::pure(*v, tol);
  return DensityOperator::from_matrix(std::get<Matrix>(spec.state), tol);
}

// A vector representing the state when it is pure (possibly given as a density).
std::optional<Vector> pure_vector(const ProblemSpec& spec, const Tolerance& tol) {
  if (const auto* v = std::get_if<Vector>(&spec.state)) return *v;
  const EigenDecomposition eig = hermitian_eig(std::get<Matrix>(spec.state), tol);
  if ((eig.values.array() > tol.rank_tol).count() != 1) return std::nullopt;
  return Vector(eig.vectors.col(eig.values.size() - 1));
}

// ---------------------------------------------------------------------------
// Report helpers

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

Json real_list(const RealVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json blocks_to_json(const BlockStructure& bs) {
  Json out = Json::array();
  for (const Block& b : bs.blocks) out.push_back(Json::array({b.size, b.multiplicity}));
  return out;
}

Json basis_to_json(const std::vector<Matrix>& basis) {
  Json out = Json::array();
  for (const Matrix& m : basis) out.push_back(matrix_to_json(m));
  return out;
}

// Block structure of the first-factor algebra when every element is X (x) 1.
std::optional<BlockStructure> factor_blocks(const MatrixAlgebra& alg, std::size_t dim_a, std::size_t dim_b,
                                            const Tolerance& tol) {
  std::vector<Matrix> factors;
  for (const Matrix& x : alg.basis()) {
    const Matrix f = partial_trace_second(x, dim_a, dim_b) / static_cast<double>(dim_b);
    if ((x - kron(f, identity(dim_b))).norm() > tol.residual_tol * std::max(x.norm(), 1.0)) return std::nullopt;
    factors.push_back(f);
  }
  return block_decomposition(MatrixAlgebra::from_span(dim_a, factors, tol), tol);
}

Json algebra_summary(const MatrixAlgebra& alg, const ProblemSpec& spec, const Tolerance& tol, bool with_basis) {
  Json out;
  out["dimension"] = alg.dimension();
  out["block_structure"] = blocks_to_json(block_decomposition(alg, tol));
  if (auto fb = factor_blocks(alg, spec.dim_a, spec.dim_b, tol)) out["factor_block_structure"] = blocks_to_json(*fb);
  if (with_basis) out["basis"] = basis_to_json(alg.basis());
  return out;
}

Json certificate_to_json(const DoubleCertificate& c) {
  Json out;
  out["residual_left"] = c.residual_left;
  out["residual_right"] = c.residual_right;
  out["residual_eq1"] = c.residual_eq1;
  out["verdict"] = c.verdict;
  out["eq1_verdict"] = c.eq1_verdict;
  out["eq1_bounds_hold"] = c.eq1_bounds_hold;
  return out;
}

void append_text(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object() && !j.empty()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      append_text(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), rows);
    return;
  }
  rows.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
}

std::string render(const Json& report, const std::string& format) {
  if (format == "json") return report.dump(2) + "\n";
  std::vector<std::pair<std::string, std::string>> rows;
  append_text(report, "", rows);
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::ostringstream out;
  for (const auto& [k, v] : rows) out << std::left << std::setw(static_cast<int>(width) + 2) << k << v << "\n";
  return out.str();
}

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream s;
    s << std::cin.rdbuf();
    return s.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot read file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Path parse_path(const std::string& s) {
  if (s == "modular") return Path::Modular;
  if (s == "oracle") return Path::Oracle;
  return Path::Both;
}

const char* path_name(Path p) {
  switch (p) {
    case Path::Modular:
      return "modular";
    case Path::Oracle:
      return "oracle";
    case Path::Both:
      break;
  }
  return "both";
}

struct Options {
  std::string input;
  std::string output;
  std::string format = "json";
  std::optional<double> tol;
  std::optional<double> rank_tol;
  std::string path = "both";
  std::string scenario_name;
  ScenarioParams params;
  std::optional<std::size_t> d;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::vector<double> coefficients;
  bool summary = false;
  // subcommand arguments
  std::string of = "a";
  std::string observable;
  std::string candidate;
  std::string pair;
};

struct Outcome {
  Json result;
  int code = 0;
};

// ---------------------------------------------------------------------------
// Subcommands

Outcome cmd_schmidt(const ProblemSpec& spec, const Tolerance& tol, const Options&) {
  const auto v = pure_vector(spec, tol);
  if (!v) throw Error(ErrorKind::InvalidState, "Schmidt decomposition needs a pure state");
  const BipartiteState psi = BipartiteState::from_vector(spec.dim_a, spec.dim_b, *v, tol);
  const SchmidtData s = schmidt(psi, tol);
  const EigenDecomposition eig = hermitian_eig(reduced_density(psi, Side::A).matrix(), tol);
  Outcome out;
  out.result["rank"] = s.rank;
  out.result["coefficients"] = real_list(s.coefficients);
  out.result["reduced_spectrum"] = real_list(eig.values.reverse());
  out.result["left_basis"] = matrix_to_json(s.left_basis);
  out.result["right_basis"] = matrix_to_json(s.right_basis);
  return out;
}

Outcome cmd_commutant(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  if (opt.of != "a" && opt.of != "b") throw Error(ErrorKind::ValidationError, "--of must be 'a' or 'b'");
  const MatrixAlgebra alg = opt.of == "a" ? algebra_a(spec, tol) : algebra_b(spec, tol);
  const MatrixAlgebra comm = commutant(alg, tol);
  Outcome out;
  out.result["algebra"] = opt.of;
  out.result["algebra_dimension"] = alg.dimension();
  out.result["commutant"] = algebra_summary(comm, spec, tol, !opt.summary);
  return out;
}

Outcome cmd_centralizer(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  const MatrixAlgebra a = algebra_a(spec, tol);
  const DensityOperator rho = density_of(spec, tol);
  Outcome out;
  out.result["algebra_dimension"] = a.dimension();
  out.result["centralizer"] = algebra_summary(centralizer(a, rho.matrix(), tol), spec, tol, !opt.summary);
  return out;
}

Outcome cmd_modular(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  const MatrixAlgebra a = algebra_a(spec, tol);
  Vector psi;
  std::size_t ancilla = 1;
  if (auto v = pure_vector(spec, tol)) {
    psi = *v;
  } else {
    psi = purify(density_of(spec, tol), tol).vector();
    ancilla = spec.dim();
  }
  const MatrixAlgebra aw = a.tensor_identity(ancilla);
  const ModularData md = modular_data(aw, psi, tol);
  const std::size_t n = aw.ambient_dim();

  Outcome out;
  out.result["ancilla_dim"] = ancilla;
  out.result["delta_spectrum"] = real_list(hermitian_eig(md.delta, tol).values);
  Json checks;
  checks["j_fixes_psi"] = (md.J.apply(psi) - psi).norm();
  checks["delta_fixes_psi"] = (md.delta * psi - psi).norm();
  checks["j_squared_minus_identity"] = (md.J.compose(md.J) - identity(n)).norm();
  checks["j_algebra_j_is_commutant"] =
      span_equal(conjugate_by_antiunitary(aw, md.J, false, tol), commutant(aw, tol), tol);
  out.result["checks"] = checks;
  if (!opt.summary) {
    out.result["delta"] = matrix_to_json(md.delta);
    out.result["j_kernel"] = matrix_to_json(md.J.kernel());
  }
  return out;
}

Outcome cmd_double(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  if (opt.observable.empty()) throw Error(ErrorKind::ValidationError, "double needs --observable");
  const MatrixAlgebra a = algebra_a(spec, tol);
  const MatrixAlgebra b = algebra_b(spec, tol);
  const DensityOperator rho = density_of(spec, tol);
  const Matrix obs = parse_observable(opt.observable, spec.dim_a, spec.dim_b);
  require_dim(obs, spec.dim(), "observable");
  if (!a.contains(obs, tol)) throw Error(ErrorKind::NotInAlgebra, "observable is not in the first algebra");

  const Path path = parse_path(opt.path);
  const DoublesAlgebra d = doubles_algebra(a, b, rho, tol, path, false);
  Outcome out;
  out.result["path"] = path_name(path);
  out.result["paths_agree"] = d.paths_agree;
  out.result["doubles_algebra_dimension"] = d.algebra.dimension();
  const bool member = d.algebra.contains(obs, tol);
  out.result["has_double"] = member;
  if (member) {
    const Vector c = d.algebra.coefficients(obs);
    Matrix a_prime = Matrix::Zero(obs.rows(), obs.cols());
    for (Eigen::Index i = 0; i < c.size(); ++i) a_prime += c(i) * d.doubles[static_cast<std::size_t>(i)];
    const DoubleCertificate cert = verify_double(rho, obs, a_prime, tol);
    out.result["A"] = matrix_to_json(obs);
    out.result["A_prime"] = matrix_to_json(a_prime);
    out.result["certificate"] = certificate_to_json(cert);
    if (!cert.verdict) out.code = 1;
  } else {
    out.code = 1;
  }
  const DoubleSolution sol = solve_double(rho, obs, b, tol);
  out.result["solver"]["feasible"] = sol.double_op.has_value();
  out.result["solver"]["solution_dim"] = sol.solution_dim;
  out.result["solver"]["residual"] = sol.residual;
  if (!d.paths_agree) out.code = 1;
  return out;
}

Outcome cmd_doubles_algebra(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  const MatrixAlgebra a = algebra_a(spec, tol);
  const MatrixAlgebra b = algebra_b(spec, tol);
  const DensityOperator rho = density_of(spec, tol);
  const Path path = parse_path(opt.path);
  const DoublesAlgebra d = doubles_algebra(a, b, rho, tol, path, false);

  Outcome out;
  out.result["centralizer"] = algebra_summary(centralizer(a, rho.matrix(), tol), spec, tol, false);
  Json da = algebra_summary(d.algebra, spec, tol, !opt.summary);
  if (!opt.summary) da["doubles"] = basis_to_json(d.doubles);
  out.result["doubles_algebra"] = da;
  out.result["path"] = path_name(path);
  out.result["paths_agree"] = d.paths_agree;
  out.result["double_discrepancy"] = d.double_discrepancy;

  Json certs = Json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < d.algebra.dimension(); ++i) {
    const DoubleCertificate c = verify_double(rho, d.algebra.basis()[i], d.doubles[i], tol);
    all_ok = all_ok && c.verdict;
    certs.push_back(certificate_to_json(c));
  }
  out.result["certificates"] = certs;
  if (d.modular) {
    const GeneralDoubles& g = *d.modular;
    out.result["modular"]["ancilla_dim"] = g.ancilla_dim;
    out.result["modular"]["restricted_dimension"] = g.reduction.restricted_basis.cols();
    out.result["modular"]["delta_spectrum"] = real_list(hermitian_eig(g.restricted_modular.delta, tol).values);
  }
  if (d.oracle) {
    Json dims = Json::array();
    for (std::size_t s : d.oracle->solution_dims) dims.push_back(s);
    out.result["oracle"]["dimension"] = d.oracle->algebra.dimension();
    out.result["oracle"]["solution_dims"] = dims;
  }
  if (!d.paths_agree || !all_ok) out.code = 1;
  return out;
}

Outcome cmd_reduce(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  const auto v = pure_vector(spec, tol);
  if (!v) throw Error(ErrorKind::InvalidState, "reduction needs a pure state");
  const MatrixAlgebra a = algebra_a(spec, tol);
  const ReductionData red = reduce(a, *v, tol);
  Outcome out;
  out.result["R_rank"] = numerical_rank(red.R, tol.rank_tol);
  out.result["R_prime_rank"] = numerical_rank(red.R_prime, tol.rank_tol);
  out.result["restricted_dimension"] = red.restricted_basis.cols();
  out.result["restricted_algebra_dimension"] = red.restricted_algebra.dimension();
  out.result["restricted_psi"] = vector_to_json(red.restricted_psi);
  out.result["cyclic"] = is_cyclic(red.restricted_algebra, red.restricted_psi, tol);
  out.result["separating"] = is_separating(red.restricted_algebra, red.restricted_psi, tol);
  if (!opt.summary) {
    out.result["R"] = matrix_to_json(red.R);
    out.result["R_prime"] = matrix_to_json(red.R_prime);
    out.result["restricted_basis"] = matrix_to_json(red.restricted_basis);
  }
  return out;
}

Outcome cmd_verify(const ProblemSpec& spec, const Tolerance& tol, const Options& opt) {
  Matrix a, a_prime;
  if (!opt.pair.empty()) {
    const std::string bytes = read_file(opt.pair);
    Json j;
    try {
      j = Json::parse(bytes);
    } catch (const Json::parse_error& e) {
      parse_error("pair", e.what());
    }
    a = parse_operator_json(require_field(j, "A", "pair"), spec.dim_a, spec.dim_b, "pair.A");
    a_prime = parse_operator_json(require_field(j, "A_prime", "pair"), spec.dim_a, spec.dim_b, "pair.A_prime");
  } else {
    if (opt.observable.empty() || opt.candidate.empty())
      throw Error(ErrorKind::ValidationError, "verify needs --pair or both --observable and --candidate");
    a = parse_observable(opt.observable, spec.dim_a, spec.dim_b);
    a_prime = parse_observable(opt.candidate, spec.dim_a, spec.dim_b);
    require_dim(a, spec.dim(), "observable");
    require_dim(a_prime, spec.dim(), "candidate");
  }
  const DoubleCertificate cert = verify_double(density_of(spec, tol), a, a_prime, tol);
  Outcome out;
  out.result["certificate"] = certificate_to_json(cert);
  out.code = cert.verdict ? 0 : 1;
  return out;
}

struct GlobalTolerance {
  explicit GlobalTolerance(const Tolerance& tol) : saved(Tolerance::global()) { Tolerance::set_global(tol); }
  ~GlobalTolerance() { Tolerance::set_global(saved); }
  GlobalTolerance(const GlobalTolerance&) = delete;
  GlobalTolerance& operator=(const GlobalTolerance&) = delete;
  Tolerance saved;
};

Json error_report(const std::string& command, const Error& e) {
  Json out;
  out["command"] = command;
  out["error"]["kind"] = to_string(e.kind());
  out["error"]["message"] = e.what();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Tolerance ProblemSpec::tolerance(const Tolerance& base) const {
  Tolerance t = base;
  if (rank_tol) t.rank_tol = *rank_tol;
  if (residual_tol) t.residual_tol = *residual_tol;
  return t;
}

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix parse_matrix(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) parse_error(field, "expected a non-empty matrix");
  const bool all_pairs = std::all_of(j.begin(), j.end(), is_pair);
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(j.size()))));
  // A flat list of k^2 pairs; two pairs read as a real 2x2 matrix instead.
  if (all_pairs && k * k == j.size() && j.size() != 2) {
    Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < j.size(); ++i)
      m(static_cast<Eigen::Index>(i / k), static_cast<Eigen::Index>(i % k)) =
          parse_complex(j[i], field + "[" + std::to_string(i) + "]");
    return m;
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) parse_error(field + "[0]", "expected a row");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) parse_error(rf, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_complex(j[r][c], rf + "[" + std::to_string(c) + "]");
  }
  return m;
}

Matrix parse_observable(const std::string& text, std::size_t dim_a, std::size_t dim_b) {
  const std::string s = trim(text);
  if (s.empty()) parse_error("observable", "empty expression");
  std::size_t pos = s.find("⊗");
  std::size_t width = std::string("⊗").size();
  if (pos == std::string::npos) {
    pos = s.find("(x)");
    width = 3;
  }
  if (pos == std::string::npos) {
    if (s == "I" || s == "1" || s == "id") return identity(dim_a * dim_b);
    Matrix m = named_operator(s, dim_a * dim_b, "observable");
    return m;
  }
  const std::string left = trim(s.substr(0, pos));
  const std::string right = trim(s.substr(pos + width));
  const Matrix l = named_operator(left, dim_a, "observable (first factor)");
  const Matrix r = named_operator(right, dim_b, "observable (second factor)");
  require_dim(l, dim_a, "first factor");
  require_dim(r, dim_b, "second factor");
  return kron(l, r);
}

ProblemSpec parse_problem(std::string_view bytes) {
  Json doc;
  try {
    doc = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, bytes.size());
    const auto line = 1 + std::count(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    parse_error("line " + std::to_string(line), e.what());
  }
  ProblemSpec spec;
  const Json& dims = require_field(doc, "dims", "");
  if (!dims.is_array() || dims.size() != 2 || !dims[0].is_number_integer() || !dims[1].is_number_integer())
    parse_error("dims", "expected two integers");
  if (dims[0].get<long long>() <= 0 || dims[1].get<long long>() <= 0)
    validation_error("dims", "factor dimensions must be positive");
  spec.dim_a = dims[0].get<std::size_t>();
  spec.dim_b = dims[1].get<std::size_t>();

  if (auto it = doc.find("tolerance"); it != doc.end()) {
    if (!it->is_object()) parse_error("tolerance", "expected an object");
    for (const char* key : {"rank_tol", "residual_tol"}) {
      auto f = it->find(key);
      if (f == it->end()) continue;
      if (!f->is_number()) parse_error(std::string("tolerance.") + key, "expected a number");
      const double v = f->get<double>();
      if (!(v > 0.0) || !std::isfinite(v)) validation_error("tolerance", std::string(key) + " must be positive");
      (std::string(key) == "rank_tol" ? spec.rank_tol : spec.residual_tol) = v;
    }
  }
  const Tolerance tol = spec.tolerance();

  const Json& state = require_field(doc, "state", "");
  if (!state.is_object()) parse_error("state", "expected an object with 'vector' or 'density'");
  if (auto v = state.find("vector"); v != state.end()) {
    Vector psi = parse_vector(*v, "state.vector");
    if (static_cast<std::size_t>(psi.size()) != spec.dim()) {
      std::ostringstream msg;
      msg << "state has " << psi.size() << " amplitudes, dims require " << spec.dim();
      validation_error("state dimension", msg.str());
    }
    spec.state = normalized_vector(std::move(psi));
  } else if (auto r = state.find("density"); r != state.end()) {
    Matrix rho = parse_matrix(*r, "state.density");
    require_dim(rho, spec.dim(), "state.density");
    spec.state = normalized_density(std::move(rho), tol);
  } else {
    parse_error("state", "missing field 'vector' or 'density'");
  }

  for (const char* key : {"algebra_a", "algebra_b"}) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) continue;
    if (!it->is_array() || it->empty()) parse_error(key, "expected a non-empty list of generators");
    std::vector<Matrix> gens;
    for (std::size_t i = 0; i < it->size(); ++i)
      gens.push_back(parse_operator_json((*it)[i], spec.dim_a, spec.dim_b,
                                         std::string(key) + "[" + std::to_string(i) + "]"));
    (std::string(key) == "algebra_a" ? spec.algebra_a : spec.algebra_b) = std::move(gens);
  }
  return spec;
}

Json problem_to_json(const ProblemSpec& spec) {
  Json out;
  out["dims"] = Json::array({spec.dim_a, spec.dim_b});
  if (const auto* v = std::get_if<Vector>(&spec.state))
    out["state"]["vector"] = vector_to_json(*v);
  else
    out["state"]["density"] = matrix_to_json(std::get<Matrix>(spec.state));
  if (spec.algebra_a) out["algebra_a"] = basis_to_json(*spec.algebra_a);
  if (spec.algebra_b) out["algebra_b"] = basis_to_json(*spec.algebra_b);
  if (spec.rank_tol) out["tolerance"]["rank_tol"] = *spec.rank_tol;
  if (spec.residual_tol) out["tolerance"]["residual_tol"] = *spec.residual_tol;
  return out;
}

MatrixAlgebra algebra_a(const ProblemSpec& spec, const Tolerance& tol) {
  if (!spec.algebra_a) return MatrixAlgebra::left_factor(spec.dim_a, spec.dim_b);
  return generate_algebra(*spec.algebra_a, spec.dim(), tol);
}

MatrixAlgebra algebra_b(const ProblemSpec& spec, const Tolerance& tol) {
  if (!spec.algebra_b) return MatrixAlgebra::right_factor(spec.dim_a, spec.dim_b);
  return generate_algebra(*spec.algebra_b, spec.dim(), tol);
}

ProblemSpec scenario(const std::string& name, const ScenarioParams& p) {
  auto need = [&](const std::optional<std::size_t>& v, const char* what, std::size_t lo, std::size_t hi) {
    if (!v) throw Error(ErrorKind::InvalidParams, name + " needs parameter '" + what + "'");
    if (*v < lo || *v > hi) {
      std::ostringstream msg;
      msg << name << ": '" << what << "' must lie in [" << lo << ", " << hi << "]";
      throw Error(ErrorKind::InvalidParams, msg.str());
    }
    return *v;
  };
  ProblemSpec spec;
  if (name == "max-entangled") {
    const std::size_t d = need(p.d, "d", 1, 64);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d * d));
    for (std::size_t i = 0; i < d; ++i) v(static_cast<Eigen::Index>(i * d + i)) = 1.0 / std::sqrt(double(d));
    spec.dim_a = spec.dim_b = d;
    spec.state = v;
  } else if (name == "schmidt") {
    if (p.coefficients.empty()) throw Error(ErrorKind::InvalidParams, "schmidt needs squared coefficients");
    double total = 0.0;
    for (double c : p.coefficients) {
      if (!(c > 0.0) || !std::isfinite(c))
        throw Error(ErrorKind::InvalidParams, "schmidt coefficients must be positive");
      total += c;
    }
    if (std::abs(total - 1.0) > kInputRounding)
      throw Error(ErrorKind::InvalidParams, "schmidt coefficients must sum to 1");
    const std::size_t d = p.coefficients.size();
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d * d));
    for (std::size_t i = 0; i < d; ++i) v(static_cast<Eigen::Index>(i * d + i)) = std::sqrt(p.coefficients[i] / total);
    spec.dim_a = spec.dim_b = d;
    spec.state = v;
  } else if (name == "qubit-pairs") {
    // n Bell pairs regrouped as sum_x |x>|x> / sqrt(2^n) on C^{2^n} (x) C^{2^n}.
    const std::size_t n = need(p.n, "n", 1, 5);
    const std::size_t d = std::size_t{1} << n;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d * d));
    for (std::size_t x = 0; x < d; ++x) v(static_cast<Eigen::Index>(x * d + x)) = 1.0 / std::sqrt(double(d));
    spec.dim_a = spec.dim_b = d;
    spec.state = v;
  } else if (name == "product-state") {
    const std::size_t d = p.d ? need(p.d, "d", 1, 64) : 2;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d * d));
    v(0) = 1.0;
    spec.dim_a = spec.dim_b = d;
    spec.state = v;
  } else if (name == "random-haar") {
    const std::size_t d = need(p.d, "d", 1, 64);
    if (!p.seed) throw Error(ErrorKind::InvalidParams, "random-haar needs parameter 'seed'");
    Rng rng(*p.seed);
    spec.dim_a = spec.dim_b = d;
    spec.state = rng.unit_vector(d * d);
  } else {
    throw Error(ErrorKind::UnknownScenario, "unknown scenario '" + name + "'");
  }
  return spec;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotInCentralizer:
    case ErrorKind::PathDisagreement:
      return 1;
    case ErrorKind::NumericalFailure:
    case ErrorKind::SingularOperator:
    case ErrorKind::NotInvolution:
      return 3;
    default:
      return 2;
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::NumericalFailure, "SHA-256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Perfect-correlation doubles of bipartite observables", "epr-doubles"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options opt;

  app.add_option("--input", opt.input, "Problem file (JSON), or - for standard input");
  app.add_option("--output", opt.output, "Write the report here instead of standard output");
  app.add_option("--format", opt.format, "Report format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--tol", opt.tol, "Residual tolerance")->check(CLI::PositiveNumber);
  app.add_option("--rank-tol", opt.rank_tol, "Relative rank tolerance")->check(CLI::PositiveNumber);
  app.add_option("--path", opt.path, "Doubles computation path")->check(CLI::IsMember({"modular", "oracle", "both"}));
  app.add_option("--scenario", opt.scenario_name, "Use a named scenario instead of --input");
  app.add_option("--d", opt.d, "Scenario dimension");
  app.add_option("--n", opt.n, "Scenario qubit-pair count");
  app.add_option("--seed", opt.seed, "Scenario seed");
  app.add_option("--coefficients", opt.coefficients, "Squared Schmidt coefficients")->delimiter(',');
  app.add_flag("--summary", opt.summary, "Omit bases and operator matrices from the report");

  auto* schmidt_cmd = app.add_subcommand("schmidt", "Schmidt decomposition of a pure state");
  auto* commutant_cmd = app.add_subcommand("commutant", "Commutant of one of the algebras");
  commutant_cmd->add_option("--of", opt.of, "Which algebra: a or b");
  auto* centralizer_cmd = app.add_subcommand("centralizer", "Centralizer of the first algebra in the state");
  auto* modular_cmd = app.add_subcommand("modular", "Modular operator and conjugation");
  auto* double_cmd = app.add_subcommand("double", "Double of one observable");
  double_cmd->add_option("--observable", opt.observable, "Observable, e.g. \"sz ⊗ I\"")->required();
  auto* algebra_cmd = app.add_subcommand("doubles-algebra", "Algebra of all observables with doubles");
  auto* reduce_cmd = app.add_subcommand("reduce", "Reduction to the cyclic and separating part");
  auto* verify_cmd = app.add_subcommand("verify", "Check a candidate pair for perfect correlation");
  verify_cmd->add_option("--pair", opt.pair, "JSON file with fields A and A_prime");
  verify_cmd->add_option("--observable", opt.observable, "Observable A");
  verify_cmd->add_option("--candidate", opt.candidate, "Candidate double A'");
  auto* scenario_cmd = app.add_subcommand("scenario", "Emit a named problem as JSON");
  std::string scenario_positional;
  scenario_cmd->add_option("name", scenario_positional, "Scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  auto emit = [&](const std::string& text) {
    if (opt.output.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream out(opt.output, std::ios::binary);
    out << text;
  };
  opt.params = ScenarioParams{opt.d, opt.n, opt.coefficients, opt.seed};

  const auto start = std::chrono::steady_clock::now();
  try {
    if (sub == scenario_cmd) {
      emit(problem_to_json(scenario(scenario_positional, opt.params)).dump(2) + "\n");
      return 0;
    }
    std::string digest;
    ProblemSpec spec;
    if (!opt.input.empty()) {
      const std::string bytes = read_file(opt.input);
      digest = sha256_hex(bytes);
      spec = parse_problem(bytes);
    } else if (!opt.scenario_name.empty()) {
      spec = scenario(opt.scenario_name, opt.params);
      digest = sha256_hex(problem_to_json(spec).dump());
    } else {
      throw Error(ErrorKind::ValidationError, "no problem given: pass --input FILE or --scenario NAME");
    }
    Tolerance tol = spec.tolerance(Tolerance{});
    if (opt.tol) tol.residual_tol = *opt.tol;
    if (opt.rank_tol) tol.rank_tol = *opt.rank_tol;
    tol.validate();
    // Scoped so repeated in-process runs do not leak overrides.
    const GlobalTolerance scoped(tol);

    Outcome outcome;
    if (sub == schmidt_cmd) outcome = cmd_schmidt(spec, tol, opt);
    else if (sub == commutant_cmd) outcome = cmd_commutant(spec, tol, opt);
    else if (sub == centralizer_cmd) outcome = cmd_centralizer(spec, tol, opt);
    else if (sub == modular_cmd) outcome = cmd_modular(spec, tol, opt);
    else if (sub == double_cmd) outcome = cmd_double(spec, tol, opt);
    else if (sub == algebra_cmd) outcome = cmd_doubles_algebra(spec, tol, opt);
    else if (sub == reduce_cmd) outcome = cmd_reduce(spec, tol, opt);
    else outcome = cmd_verify(spec, tol, opt);

    Json report;
    report["command"] = command;
    Json args = Json::array();
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    report["arguments"] = args;
    report["input_digest"] = digest;
    report["dims"] = Json::array({spec.dim_a, spec.dim_b});
    report["tolerance"] = {{"rank_tol", tol.rank_tol}, {"residual_tol", tol.residual_tol}};
    report["result"] = std::move(outcome.result);
    report["exit_code"] = outcome.code;
    report["timings"]["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit(render(report, opt.format));
    return outcome.code;
  } catch (const Error& e) {
    std::cerr << "epr-doubles: " << e.what() << "\n";
    Json report = error_report(command, e);
    report["exit_code"] = exit_code(e.kind());
    emit(render(report, opt.format));
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "epr-doubles: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace epr::cli
