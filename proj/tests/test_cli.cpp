#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "epr/cli.hpp"
#include "epr/error.hpp"
#include "epr/states.hpp"
#include "oracles.hpp"

using namespace epr;
using namespace epr::cli;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(EPR_FIXTURE_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "epr_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

struct RunResult {
  int code;
  Json report;
};

/// Runs the tool in-process with --output redirected to a scratch file.
RunResult run_cli(std::vector<std::string> args, const std::string& out_name = "report.json") {
  const fs::path out = scratch(out_name);
  fs::remove(out);
  args.insert(args.begin(), "epr-doubles");
  args.push_back("--output");
  args.push_back(out.string());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  const int code = run(static_cast<int>(argv.size()), argv.data());
  Json report;
  if (fs::exists(out)) report = Json::parse(slurp(out), nullptr, false);
  if (report.is_discarded()) report = nullptr;
  return {code, report};
}

Json without_timings(Json report) {
  report.erase("timings");
  return report;
}

ErrorKind kind_of_parse(const std::string& text) {
  try {
    parse_problem(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::NumericalFailure;
}

std::string message_of_parse(const std::string& text) {
  try {
    parse_problem(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

Matrix json_matrix(const Json& j) { return parse_matrix(j, "test"); }

}  // namespace

TEST_CASE("parse_problem examples") {
  const ProblemSpec spec = parse_problem(slurp(fixture("max.json")));
  CHECK(spec.dim_a == 2);
  CHECK(spec.dim_b == 2);
  REQUIRE(spec.is_pure());
  const Vector& v = std::get<Vector>(spec.state);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
  CHECK(std::abs(v(0) - 1 / std::sqrt(2.0)) <= 1e-12);
  CHECK(std::abs(v(3) - 1 / std::sqrt(2.0)) <= 1e-12);
  CHECK(span_equal(algebra_a(spec), MatrixAlgebra::left_factor(2, 2)));
  CHECK(span_equal(algebra_b(spec), MatrixAlgebra::right_factor(2, 2)));

  CHECK(kind_of_parse(slurp(fixture("missing_dims.json"))) == ErrorKind::ParseError);
  CHECK(message_of_parse(slurp(fixture("missing_dims.json"))).find("dims") != std::string::npos);
  CHECK(kind_of_parse(slurp(fixture("bad_trace.json"))) == ErrorKind::ValidationError);
  CHECK(message_of_parse(slurp(fixture("bad_trace.json"))).find("trace") != std::string::npos);
  CHECK(kind_of_parse(slurp(fixture("malformed.json"))) == ErrorKind::ParseError);
  CHECK(message_of_parse(slurp(fixture("malformed.json"))).find("line") != std::string::npos);
  CHECK(kind_of_parse(slurp(fixture("bad_generator.json"))) == ErrorKind::ValidationError);
  CHECK(kind_of_parse(slurp(fixture("unnormalized.json"))) == ErrorKind::ValidationError);
  CHECK(message_of_parse(slurp(fixture("unnormalized.json"))).find("normalization") != std::string::npos);
}

TEST_CASE("parse_problem field errors") {
  CHECK(kind_of_parse(R"({"dims":[2,2]})") == ErrorKind::ParseError);
  CHECK(message_of_parse(R"({"dims":[2,2]})").find("state") != std::string::npos);
  CHECK(kind_of_parse(R"({"dims":[2],"state":{"vector":[[1,0],[0,0]]}})") == ErrorKind::ParseError);
  CHECK(kind_of_parse(R"({"dims":[2,2],"state":{"vector":[[1,0]]}})") == ErrorKind::ValidationError);
  CHECK(kind_of_parse(R"({"dims":[2,2],"state":{"vector":"abc"}})") == ErrorKind::ParseError);
  CHECK(kind_of_parse("[1,2,3]") == ErrorKind::ParseError);
}

TEST_CASE("matrix and observable syntax") {
  const Matrix nested = json_matrix(Json::parse("[[[1,0],[0,2]],[[0,-2],[3,0]]]"));
  CHECK(nested(0, 1) == Complex(0, 2));
  CHECK(nested(1, 0) == Complex(0, -2));
  const Matrix real = json_matrix(Json::parse("[[1,2],[3,4]]"));
  CHECK(real(1, 0) == Complex(3, 0));
  const Matrix flat = json_matrix(Json::parse("[[1,0],[0,0],[0,0],[-1,0]]"));
  CHECK(flat.rows() == 2);
  CHECK(flat(1, 1) == Complex(-1, 0));

  const Matrix sz_i = parse_observable("[[1,0],[0,0],[0,0],[-1,0]] ⊗ I", 2, 2);
  Matrix sz(2, 2);
  sz << 1, 0, 0, -1;
  CHECK((sz_i - oracle::kron(sz, oracle::eye(2))).norm() == 0.0);
  CHECK((parse_observable("sz (x) I", 2, 2) - sz_i).norm() == 0.0);
  CHECK((parse_observable("I ⊗ sz", 2, 2) - oracle::kron(oracle::eye(2), sz)).norm() == 0.0);
  CHECK_THROWS_AS(parse_observable("sq ⊗ I", 2, 2), Error);
  CHECK_THROWS_AS(parse_observable("sz ⊗ I", 3, 3), Error);
}

TEST_CASE("scenario examples") {
  const ProblemSpec me = scenario("max-entangled", {2, {}, {}, {}});
  const ProblemSpec from_file = parse_problem(slurp(fixture("max.json")));
  CHECK((std::get<Vector>(me.state) - std::get<Vector>(from_file.state)).norm() <= 1e-12);

  const ProblemSpec qp = scenario("qubit-pairs", {{}, 3, {}, {}});
  CHECK(qp.dim_a == 8);
  CHECK(qp.dim_b == 8);
  const BipartiteState psi = BipartiteState::from_vector(8, 8, std::get<Vector>(qp.state));
  CHECK((reduced_density(psi, Side::A).matrix() - identity(8) / 8.0).norm() <= 1e-12);

  const ProblemSpec sc = scenario("schmidt", {{}, {}, {0.7, 0.3}, {}});
  const BipartiteState s = BipartiteState::from_vector(2, 2, std::get<Vector>(sc.state));
  const RealVector ev = hermitian_eig(reduced_density(s, Side::A).matrix()).values;
  CHECK(ev(0) == doctest::Approx(0.3));
  CHECK(ev(1) == doctest::Approx(0.7));

  const ProblemSpec r1 = scenario("random-haar", {3, {}, {}, 99});
  const ProblemSpec r2 = scenario("random-haar", {3, {}, {}, 99});
  CHECK(std::get<Vector>(r1.state) == std::get<Vector>(r2.state));

  auto kind = [](const std::string& name, const ScenarioParams& p) {
    try {
      scenario(name, p);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::NumericalFailure;
  };
  CHECK(kind("no-such", {}) == ErrorKind::UnknownScenario);
  CHECK(kind("random-haar", {3, {}, {}, {}}) == ErrorKind::InvalidParams);
  CHECK(kind("schmidt", {{}, {}, {0.7, 0.7}, {}}) == ErrorKind::InvalidParams);
  CHECK(kind("qubit-pairs", {{}, 0, {}, {}}) == ErrorKind::InvalidParams);
  CHECK(kind("max-entangled", {0, {}, {}, {}}) == ErrorKind::InvalidParams);
}

TEST_CASE("round trip of problem documents") {
  for (const ProblemSpec& spec :
       {parse_problem(slurp(fixture("schmidt07.json"))), parse_problem(slurp(fixture("mixed.json"))),
        parse_problem(slurp(fixture("noncommuting.json"))), scenario("random-haar", {3, {}, {}, 5})}) {
    const ProblemSpec back = parse_problem(problem_to_json(spec).dump());
    CHECK(back.dim_a == spec.dim_a);
    CHECK(back.dim_b == spec.dim_b);
    CHECK(back.is_pure() == spec.is_pure());
    if (spec.is_pure()) {
      CHECK((std::get<Vector>(back.state) - std::get<Vector>(spec.state)).norm() <= 1e-12);
    } else {
      CHECK((std::get<Matrix>(back.state) - std::get<Matrix>(spec.state)).norm() <= 1e-12);
    }
    CHECK(back.algebra_a.has_value() == spec.algebra_a.has_value());
    if (spec.algebra_a)
      for (std::size_t i = 0; i < spec.algebra_a->size(); ++i)
        CHECK(((*back.algebra_a)[i] - (*spec.algebra_a)[i]).norm() <= 1e-12);
  }
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::NotInCentralizer) == 1);
  CHECK(exit_code(ErrorKind::PathDisagreement) == 1);
  CHECK(exit_code(ErrorKind::ParseError) == 2);
  CHECK(exit_code(ErrorKind::ValidationError) == 2);
  CHECK(exit_code(ErrorKind::UnknownScenario) == 2);
  CHECK(exit_code(ErrorKind::NotCyclic) == 2);
  CHECK(exit_code(ErrorKind::NumericalFailure) == 3);
  CHECK(exit_code(ErrorKind::SingularOperator) == 3);
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("double on the maximally entangled state") {
  const RunResult r =
      run_cli({"double", "--input", fixture("max.json"), "--observable", "[[1,0],[0,0],[0,0],[-1,0]] ⊗ I"});
  CHECK(r.code == 0);
  const Json& res = r.report["result"];
  CHECK(res["has_double"] == true);
  CHECK(res["certificate"]["verdict"] == true);
  Matrix sz(2, 2);
  sz << 1, 0, 0, -1;
  CHECK((json_matrix(res["A_prime"]) - oracle::kron(oracle::eye(2), sz)).norm() <= 1e-8);
  CHECK(r.report["input_digest"] == sha256_hex(slurp(fixture("max.json"))));
}

TEST_CASE("doubles-algebra on Schmidt coefficients (0.7, 0.3)") {
  const RunResult r = run_cli({"doubles-algebra", "--input", fixture("schmidt07.json")});
  CHECK(r.code == 0);
  const Json& da = r.report["result"]["doubles_algebra"];
  CHECK(da["dimension"] == 2);
  CHECK(da["factor_block_structure"] == Json::parse("[[1,1],[1,1]]"));
  CHECK(r.report["result"]["paths_agree"] == true);
}

TEST_CASE("verify with a wrong pair") {
  const RunResult bad = run_cli({"verify", "--input", fixture("max.json"), "--pair", fixture("wrongpair.json")});
  CHECK(bad.code == 1);
  CHECK(bad.report["result"]["certificate"]["verdict"] == false);
  CHECK(bad.report["result"]["certificate"]["residual_left"].get<double>() > 0.5);
  const RunResult good = run_cli({"verify", "--input", fixture("max.json"), "--pair", fixture("goodpair.json")});
  CHECK(good.code == 0);
  const RunResult inline_pair = run_cli(
      {"verify", "--input", fixture("max.json"), "--observable", "sz ⊗ I", "--candidate", "I ⊗ sz"});
  CHECK(inline_pair.code == 0);
}

TEST_CASE("exit-code contract on fixtures") {
  struct Case {
    std::vector<std::string> args;
    int code;
    const char* kind;
  };
  const std::vector<Case> cases = {
      {{"doubles-algebra", "--input", fixture("missing_dims.json")}, 2, "ParseError"},
      {{"doubles-algebra", "--input", fixture("bad_trace.json")}, 2, "ValidationError"},
      {{"doubles-algebra", "--input", fixture("malformed.json")}, 2, "ParseError"},
      {{"doubles-algebra", "--input", fixture("bad_generator.json")}, 2, "ValidationError"},
      {{"doubles-algebra", "--input", fixture("noncommuting.json")}, 2, "NonCommutingAlgebras"},
      {{"modular", "--input", fixture("product.json")}, 2, "NotCyclic"},
      {{"schmidt", "--input", fixture("does_not_exist.json")}, 2, nullptr},
      {{"schmidt", "--scenario", "no-such"}, 2, "UnknownScenario"},
      {{"schmidt", "--scenario", "random-haar", "--d", "3"}, 2, "InvalidParams"},
      {{"double", "--input", fixture("schmidt07.json"), "--observable", "sx ⊗ I"}, 1, nullptr},
      {{"double", "--input", fixture("schmidt07.json"), "--observable", "I ⊗ sx"}, 2, "NotInAlgebra"},
      {{"verify", "--input", fixture("max.json"), "--pair", fixture("wrongpair.json")}, 1, nullptr},
      {{"schmidt", "--input", fixture("max.json"), "--tol", "2"}, 2, "ValidationError"},
  };
  for (const Case& c : cases) {
    const RunResult r = run_cli(c.args);
    INFO(c.args[0] << " " << c.args[c.args.size() - 1]);
    CHECK(r.code == c.code);
    CHECK(r.report["exit_code"] == c.code);
    if (c.kind) CHECK(r.report["error"]["kind"] == c.kind);
  }
}

TEST_CASE("every subcommand runs on the fixtures") {
  for (const char* cmd : {"schmidt", "commutant", "centralizer", "modular", "doubles-algebra", "reduce"}) {
    for (const char* input : {"max.json", "schmidt07.json", "mixed.json"}) {
      const RunResult r = run_cli({cmd, "--input", fixture(input)});
      INFO(cmd << " " << input);
      if (std::string(input) == "mixed.json") {
        // Schmidt data and the reduction need a vector state; the purified
        // mixed fixture is not faithful, so it is not cyclic either.
        if (std::string(cmd) == "schmidt" || std::string(cmd) == "reduce") {
          CHECK(r.code == 2);
          CHECK(r.report["error"]["kind"] == "InvalidState");
          continue;
        }
        if (std::string(cmd) == "modular") {
          CHECK(r.code == 2);
          CHECK(r.report["error"]["kind"] == "NotCyclic");
          continue;
        }
      }
      CHECK(r.code == 0);
      CHECK(r.report["command"] == cmd);
    }
  }
  const RunResult text = run_cli({"schmidt", "--input", fixture("max.json"), "--format", "text"});
  CHECK(text.code == 0);
  CHECK(text.report.is_null());  // not JSON
  const std::string body = slurp(scratch("report.json"));
  CHECK(body.find("result.rank") != std::string::npos);
}

TEST_CASE("reports are deterministic apart from timings") {
  const std::vector<std::vector<std::string>> runs = {
      {"doubles-algebra", "--input", fixture("schmidt07.json")},
      {"doubles-algebra", "--scenario", "random-haar", "--d", "3", "--seed", "7"},
      {"modular", "--scenario", "random-haar", "--d", "2", "--seed", "11"},
      {"reduce", "--input", fixture("product.json")},
  };
  for (const auto& args : runs) {
    const RunResult a = run_cli(args, "first.json");
    const RunResult b = run_cli(args, "first.json");
    CHECK(a.code == b.code);
    CHECK(without_timings(a.report).dump() == without_timings(b.report).dump());
  }
  // The emitted scenario document is byte-identical too.
  auto emit = [](const std::string& out) {
    std::vector<std::string> args = {"epr-doubles", "scenario", "random-haar", "--d", "3", "--seed", "3",
                                     "--output", out};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(emit(scratch("s1.json").string()) == 0);
  CHECK(emit(scratch("s2.json").string()) == 0);
  CHECK(slurp(scratch("s1.json")) == slurp(scratch("s2.json")));
}

TEST_CASE("tolerance overrides stay local to one run") {
  const Tolerance before = Tolerance::global();
  run_cli({"schmidt", "--input", fixture("max.json"), "--tol", "1e-6", "--rank-tol", "1e-7"});
  CHECK(Tolerance::global().residual_tol == before.residual_tol);
  CHECK(Tolerance::global().rank_tol == before.rank_tol);
  const RunResult r = run_cli({"schmidt", "--input", fixture("max.json"), "--tol", "1e-6"});
  CHECK(r.report["tolerance"]["residual_tol"] == 1e-6);
}

TEST_CASE("process exit status matches the report") {
  const std::string out = scratch("proc.json").string();
  const std::string base = std::string("\"") + EPR_CLI_PATH + "\" ";
  auto status = [](const std::string& cmd) {
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(base + "verify --input \"" + fixture("max.json") + "\" --pair \"" + fixture("wrongpair.json") +
               "\" --output \"" + out + "\" 2>/dev/null") == 1);
  CHECK(status(base + "doubles-algebra --input \"" + fixture("missing_dims.json") + "\" --output \"" + out +
               "\" 2>/dev/null") == 2);
  CHECK(status(base + "doubles-algebra --input \"" + fixture("schmidt07.json") + "\" --output \"" + out + "\"") ==
        0);
  CHECK(status(base + "--bogus-flag >/dev/null 2>&1") == 2);
  CHECK(status(base + "scenario qubit-pairs --n 2 | " + base + "centralizer --input - --output \"" + out + "\"") == 0);
  CHECK(Json::parse(slurp(out))["result"]["centralizer"]["dimension"] == 16);
}
