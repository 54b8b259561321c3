#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "epr/algebra.hpp"
#include "epr/numerics.hpp"

namespace epr::cli {

using Json = nlohmann::ordered_json;

/// A bipartite problem on C^{dim_a} (x) C^{dim_b}. Generator lists act on the
/// composite space; an absent list means the default factor algebra.
struct ProblemSpec {
  std::size_t dim_a = 0;
  std::size_t dim_b = 0;
  std::variant<Vector, Matrix> state;  // unit vector or density operator
  std::optional<std::vector<Matrix>> algebra_a;
  std::optional<std::vector<Matrix>> algebra_b;
  std::optional<double> rank_tol;
  std::optional<double> residual_tol;

  std::size_t dim() const { return dim_a * dim_b; }
  bool is_pure() const { return std::holds_alternative<Vector>(state); }
  Tolerance tolerance(const Tolerance& base = Tolerance::global()) const;
};

/// Parses and validates a problem document. Throws ParseError naming the
/// offending field and ValidationError naming the violated invariant.
ProblemSpec parse_problem(std::string_view bytes);
Json problem_to_json(const ProblemSpec& spec);

/// Builds the algebras of a spec (generated closure or factor defaults).
MatrixAlgebra algebra_a(const ProblemSpec& spec, const Tolerance& tol = Tolerance::global());
MatrixAlgebra algebra_b(const ProblemSpec& spec, const Tolerance& tol = Tolerance::global());

struct ScenarioParams {
  std::optional<std::size_t> d;
  std::optional<std::size_t> n;
  std::vector<double> coefficients;
  std::optional<std::uint64_t> seed;
};

/// Named problem generators: max-entangled, schmidt, qubit-pairs,
/// product-state, random-haar. Throws UnknownScenario or InvalidParams.
ProblemSpec scenario(const std::string& name, const ScenarioParams& params);

/// Parses a matrix given as nested rows of [re, im] pairs or reals, or as a
/// flat row-major list of k^2 pairs.
Matrix parse_matrix(const Json& j, const std::string& field);
/// Observable syntax: a matrix, a named Pauli (sx, sy, sz) or identity (I),
/// or "X ⊗ I" / "I ⊗ X" with "(x)" accepted for the tensor sign.
Matrix parse_observable(const std::string& text, std::size_t dim_a, std::size_t dim_b);

Json complex_to_json(Complex z);
Json matrix_to_json(const Matrix& m);

/// Maps library errors to the exit-code contract: 1 for negative verdicts,
/// 2 for bad input, 3 for numerical failures.
int exit_code(ErrorKind kind);

/// Hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// Entry point of the command-line tool; argv[0] is the program name.
int run(int argc, const char* const* argv);

}  // namespace epr::cli
