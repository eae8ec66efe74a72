#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "moogvcf/cli.hpp"
#include "moogvcf/io.hpp"

using namespace moogvcf;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const cli::Hooks& hooks = {}) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err, hooks);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      cells.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    rows.push_back(cells);
  }
  return rows;
}

double num(const std::string& s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  REQUIRE(ec == std::errc());
  REQUIRE(ptr == s.data() + s.size());
  return v;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("moogvcf_test_" + name); }

std::string write_temp(const std::string& name, const std::string& content) {
  const auto p = temp_file(name);
  std::ofstream(p) << content;
  return p.string();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const fs::path kGolden = fs::path(MOOGVCF_SOURCE_DIR) / "tests" / "golden";

}  // namespace

TEST_CASE("format_double round-trips") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(-2.0) == "-2");
  CHECK(io::format_double(0.0) == "0");
  CHECK(io::format_double(1e-300) == "1e-300");
  std::mt19937_64 rng(67);
  for (int i = 0; i < 20000; ++i) {
    double v;
    const std::uint64_t bits = rng();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(num(io::format_double(v)) == v);
  }
}

TEST_CASE("parse_grid") {
  CHECK(io::parse_grid("0:1:0.25") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  const auto g = io::parse_grid("0:1:0.02");
  CHECK(g.size() == 51);
  CHECK(g.back() == 1.0);
  const auto f = io::parse_grid("0.02:1:0.02");
  CHECK(f.size() == 50);
  CHECK(f.front() == 0.02);
  CHECK(f.back() == 1.0);
  CHECK(io::parse_grid("0.5:0.5:0.1") == std::vector<double>{0.5});
  CHECK(io::parse_grid(" 0 : 0.3 : 0.1 ").size() == 4);
  CHECK_THROWS_AS(io::parse_grid("1:0:0.1"), RangeError);
  CHECK_THROWS_AS(io::parse_grid("0:1:0"), RangeError);
  CHECK_THROWS_AS(io::parse_grid("0:1:-0.1"), RangeError);
  CHECK_THROWS_AS(io::parse_grid("0:1"), RangeError);
  CHECK_THROWS_AS(io::parse_grid("a:1:0.1"), RangeError);
  CHECK_THROWS_AS(io::parse_grid("0:1:0.1x"), RangeError);
}

TEST_CASE("small parsers") {
  CHECK(io::parse_vec4("1,-2.5, 3e-3,0") == Vector4d(1, -2.5, 3e-3, 0));
  CHECK_THROWS_AS(io::parse_vec4("1,2,3"), RangeError);
  CHECK_THROWS_AS(io::parse_vec4("1,2,3,nan"), RangeError);
  CHECK(io::parse_family("Bs") == MatrixFamily::Bs);
  CHECK_THROWS_AS(io::parse_family("bs"), RangeError);
  CHECK(io::parse_families("As,QsWorstCase").size() == 2);
  CHECK(io::parse_method("rk4") == Method::ExplicitRK4);
  CHECK(io::parse_method("dg") == Method::DiscreteGradient);
  CHECK_THROWS_AS(io::parse_method("euler"), RangeError);
  CHECK(io::parse_format("json") == io::OutputFormat::JSON);
  CHECK_THROWS_AS(io::parse_format("xml"), RangeError);
}

TEST_CASE("sweep spec JSON") {
  SUBCASE("minimal spec") {
    const auto spec = io::sweep_spec_from_json(io::Json::parse(
        R"({"r":[0.5],"omega0":[1],"families":["As"],"seed":1,"samples_per_point":1})"));
    CHECK(spec.r == std::vector<double>{0.5});
    CHECK(spec.families.size() == 1);
    CHECK(spec.method == Method::DiscreteGradient);
  }
  SUBCASE("grid strings and optional fields") {
    const auto spec = io::sweep_spec_from_json(io::Json::parse(
        R"({"schema_version":1,"r":"0.1:0.5:0.1","omega0":[1,10],"families":["Bs"],"seed":3,
            "samples_per_point":2,"method":"rk4","omega0_dt":0.01,"steps":7,"newton_tol":1e-11})"));
    CHECK(spec.r.size() == 5);
    CHECK(spec.method == Method::ExplicitRK4);
    CHECK(spec.steps == 7);
    CHECK(spec.omega0_dt == 0.01);
    const auto again = io::sweep_spec_from_json(io::to_json(spec));
    CHECK(again.r == spec.r);
    CHECK(again.omega0 == spec.omega0);
    CHECK(again.seed == spec.seed);
    CHECK(again.newton_tol == spec.newton_tol);
  }
  SUBCASE("errors carry field paths") {
    auto path_of = [](const char* text) {
      try {
        io::sweep_spec_from_json(io::Json::parse(text));
      } catch (const RangeError& e) {
        return e.field();
      }
      return std::string("<none>");
    };
    CHECK(path_of(R"({"r":[2],"omega0":[1],"families":["As"],"seed":1,"samples_per_point":1})") == "/r/0");
    CHECK(path_of(R"({"r":[0.5],"omega0":[1],"families":["Xs"],"seed":1,"samples_per_point":1})") ==
          "/families/0");
    CHECK(path_of(R"({"r":[0.5],"omega0":[1],"families":["As"],"samples_per_point":1})") == "/seed");
    CHECK(path_of(R"({"r":[0.5],"omega0":[1],"families":["As"],"seed":-1,"samples_per_point":1})") == "/seed");
    CHECK(path_of(R"({"r":[0.5,"x"],"omega0":[1],"families":["As"],"seed":1,"samples_per_point":1})") ==
          "/r/1");
    CHECK(path_of(R"({"r":[0.5],"families":["As"],"seed":1,"samples_per_point":1})") == "/omega0");
    CHECK(path_of(R"({"schema_version":2,"r":[0.5],"omega0":[1],"families":["As"],"seed":1,
                      "samples_per_point":1})") == "/schema_version");
    CHECK(path_of(R"([1,2])") == "/");
  }
}

TEST_CASE("cli eig") {
  SUBCASE("r = 0") {
    const auto r = run({"eig", "--omega0", "1", "--r", "0"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 11);
    CHECK(rows[0] == std::vector<std::string>{"source", "index", "re", "im"});
    for (int i = 1; i <= 8; ++i) {
      CHECK(num(rows[i][2]) == doctest::Approx(-1.0).epsilon(1e-12));
      CHECK(std::abs(num(rows[i][3])) <= 1e-12);
    }
    for (int i = 1; i <= 4; ++i) CHECK(rows[i][2] == "-1");
  }
  SUBCASE("r = 1") {
    const auto r = run({"eig", "--r", "1"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    const std::array<std::complex<double>, 4> expect{{{0, 1}, {-2, 1}, {-2, -1}, {0, -1}}};
    for (int i = 1; i <= 8; ++i) {
      const std::complex<double> z(num(rows[i][2]), num(rows[i][3]));
      CHECK(std::abs(z - expect[static_cast<std::size_t>((i - 1) % 4)]) <= 1e-12);
    }
    CHECK(rows[9][0] == "closed_max_real_part");
    CHECK(num(rows[9][2]) == 0.0);
  }
  SUBCASE("json") {
    const auto r = run({"eig", "--r", "0.3", "--omega0", "2", "--format", "json"});
    CHECK(r.code == 0);
    const auto j = io::Json::parse(r.out);
    CHECK(j["schema_version"] == 1);
    CHECK(j["closed"]["eigenvalues"].size() == 4);
    CHECK(j["numeric"]["max_real_part"].get<double>() < 0);
  }
  SUBCASE("out of range r") {
    const auto r = run({"eig", "--r", "1.5"});
    CHECK(r.code == 2);
    CHECK(r.err.find("r") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    CHECK(r.out.empty());
  }
  CHECK(run({"eig", "--r", "0.5", "--omega0", "-1"}).code == 2);
  CHECK(run({"eig", "--r", "abc"}).code == 2);
  CHECK(run({"eig"}).code == 2);
  CHECK(run({"eig", "--r", "0.5", "--format", "xml"}).code == 2);
}

TEST_CASE("cli certify") {
  SUBCASE("A_s threshold row") {
    const auto r = run({"certify", "--families", "As", "--r-grid", "0:1:0.01"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    CHECK(rows[0] == std::vector<std::string>{"kind", "family", "r", "omega0", "min_eig", "max_eig", "verdict"});
    REQUIRE(rows.size() == 1 + 101 + 1);
    CHECK(rows.back()[0] == "threshold");
    CHECK(num(rows.back()[2]) == doctest::Approx(0.416667).epsilon(1e-6));
    CHECK(rows.back()[6] == "NegativeDefinite->Indefinite");
  }
  SUBCASE("B_s definite below 1") {
    const auto r = run({"certify", "--families", "Bs", "--r-grid", "0:1:0.05"});
    CHECK(r.code == 0);
    for (const auto& row : csv_rows(r.out)) {
      if (row[0] != "point") continue;
      CHECK(row[6] == (num(row[2]) < 1 ? "NegativeDefinite" : "NegativeSemidefinite"));
    }
  }
  SUBCASE("--expect") {
    CHECK(run({"certify", "--r-grid", "0.01:1:0.01", "--expect"}).code == 0);
    CHECK(run({"certify", "--families", "As", "--r-grid", "0:1:0.05", "--expect"}).code == 0);
    // A huge tolerance calls every matrix semidefinite, which contradicts the expected regions.
    const auto bad = run({"certify", "--families", "Bs", "--r-grid", "0:0.5:0.1", "--tol", "10", "--expect"});
    CHECK(bad.code == 1);
    CHECK_FALSE(bad.err.empty());
  }
  SUBCASE("json output") {
    const auto r = run({"certify", "--families", "As,Bs", "--r-grid", "0.3:0.5:0.1", "--format", "json"});
    CHECK(r.code == 0);
    const auto j = io::Json::parse(r.out);
    CHECK(j["reports"].size() == 6);
    CHECK(j["thresholds"].size() == 1);
  }
  CHECK(run({"certify", "--r-grid", "1:0:0.1"}).code == 2);
  CHECK(run({"certify", "--r-grid", "0:1"}).code == 2);
  CHECK(run({"certify", "--r-grid", "0:2:0.5"}).code == 2);
  CHECK(run({"certify", "--r-grid", "0:1:0.5", "--families", "QsWorstCase"}).code == 2);
  CHECK(run({"certify", "--r-grid", "0:1:0.5", "--families", "Cs"}).code == 2);
}

TEST_CASE("cli simulate") {
  SUBCASE("zero initial state stays zero") {
    const auto r = run({"simulate", "--r", "0.7", "--x0", "0,0,0,0", "--steps", "20"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    CHECK(rows[0] == std::vector<std::string>{"t", "x1", "x2", "x3", "x4", "v", "vdot", "dv"});
    REQUIRE(rows.size() == 22);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      for (int i = 1; i <= 4; ++i) CHECK(rows[k][static_cast<std::size_t>(i)] == "0");
    }
  }
  SUBCASE("discrete gradient at omega0 dt = 10") {
    const auto r = run({"simulate", "--r", "0.9", "--omega0", "100", "--dt", "0.1", "--steps", "1000",
                        "--method", "dg", "--x0", "3,-2,4,1"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 1002);
    double worst = -1;
    for (std::size_t k = 1; k < rows.size(); ++k) worst = std::max(worst, num(rows[k][7]));
    CHECK(worst <= 1e-10);
  }
  SUBCASE("RK4 at a small step") {
    const auto r = run({"simulate", "--method", "rk4", "--dt", "0.0001", "--r", "0.5", "--steps", "20000",
                        "--x0", "2,-1,0.5,3"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    CHECK(rows[0].size() == 7);
    for (std::size_t k = 2; k < rows.size(); ++k) CHECK(num(rows[k][5]) - num(rows[k - 1][5]) <= 1e-9);
  }
  SUBCASE("emitted floats parse back to the simulated values") {
    const auto p = make_params(1.0, 0.4);
    StepConfig cfg;
    cfg.dt = 0.05;
    const auto tr = simulate(State<double>{Vector4d(1.3, -0.7, 0.2, 2.9)}, p, cfg, 40);
    const auto rows = csv_rows(io::trajectory_csv(tr, true));
    for (std::size_t k = 0; k < tr.size(); ++k) {
      CHECK(num(rows[k + 1][0]) == tr.times[k]);
      for (int i = 0; i < 4; ++i) CHECK(num(rows[k + 1][static_cast<std::size_t>(i + 1)]) == tr.states[k].x(i));
      CHECK(num(rows[k + 1][5]) == tr.V[k]);
      CHECK(num(rows[k + 1][6]) == tr.Vdot[k]);
    }
    const auto j = io::Json::parse(io::trajectory_json(p, cfg, tr, true).dump());
    for (std::size_t k = 0; k < tr.size(); ++k) {
      CHECK(j["V"][k].get<double>() == tr.V[k]);
      CHECK(j["x"][k][2].get<double>() == tr.states[k].x(2));
    }
  }
  SUBCASE("--out writes a file and nothing to stdout") {
    const auto path = temp_file("sim.csv");
    fs::remove(path);
    const auto r = run({"simulate", "--r", "0.2", "--x0", "1,1,1,1", "--steps", "5", "--out", path.string()});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    CHECK(read_file(path).rfind("t,x1,x2,x3,x4,v,vdot,dv\n", 0) == 0);
    fs::remove(path);
  }
  SUBCASE("integrator failure exits 3 naming the step") {
    const auto r = run({"simulate", "--r", "0.5", "--x0", "1,2,3,4", "--steps", "3", "--newton-tol", "1e-300"});
    CHECK(r.code == 3);
    CHECK(r.err.find("step 1") != std::string::npos);
  }
  CHECK(run({"simulate", "--r", "0.5", "--x0", "1,2,3"}).code == 2);
  CHECK(run({"simulate", "--r", "0.5", "--x0", "1,2,3,4", "--steps", "0"}).code == 2);
  CHECK(run({"simulate", "--r", "0.5", "--x0", "1,2,3,4", "--dt", "0"}).code == 2);
  CHECK(run({"simulate", "--r", "0.5", "--x0", "1,2,3,4", "--method", "euler"}).code == 2);
  CHECK(run({"simulate", "--r", "0.5"}).code == 2);
}

TEST_CASE("cli sweep") {
  const std::string minimal =
      write_temp("minimal.json", R"({"r":[0.5],"omega0":[1],"families":["As"],"seed":1,"samples_per_point":1})");
  SUBCASE("minimal spec gives one report row") {
    const auto r = run({"sweep", "--spec", minimal});
    CHECK(r.code == 0);
    const auto j = io::Json::parse(r.out);
    CHECK(j["schema_version"] == 1);
    CHECK(j["reports"].size() == 1);
    CHECK(j["trajectories"].size() == 1);
    CHECK(j["passed"] == true);
    const auto csv = run({"sweep", "--spec", minimal, "--format", "csv"});
    const auto rows = csv_rows(csv.out);
    CHECK(rows[1][0] == "point");
    CHECK(rows[2].size() == 1);  // blank separator line
  }
  SUBCASE("output is byte-identical across runs and thread counts") {
    const std::string spec = write_temp(
        "det.json", R"({"r":"0.1:1:0.1","omega0":[1,50],"families":["As","Bs","QsWorstCase"],"seed":99,
                        "samples_per_point":3,"omega0_dt":2,"steps":30})");
    for (const char* fmt : {"csv", "json"}) {
      const auto a = run({"sweep", "--spec", spec, "--format", fmt});
      CHECK(a.code == 0);
      for (const char* threads : {"1", "2", "5"}) {
        const auto b = run({"sweep", "--spec", spec, "--format", fmt, "--threads", threads});
        CHECK(b.out == a.out);
      }
    }
  }
  SUBCASE("bad specs exit 2 with a field path") {
    const auto r = run({"sweep", "--spec", write_temp("bad_r.json", R"({"r":[2],"omega0":[1],"families":["As"],
                                                                   "seed":1,"samples_per_point":1})")});
    CHECK(r.code == 2);
    CHECK(r.err.find("/r/0") != std::string::npos);
    CHECK(run({"sweep", "--spec", write_temp("broken.json", "{not json")}).code == 2);
    CHECK(run({"sweep", "--spec", temp_file("does_not_exist.json").string()}).code == 2);
    CHECK(run({"sweep"}).code == 2);
  }
  SUBCASE("bundled full-range spec") {
    const auto r = run({"sweep", "--spec", (fs::path(MOOGVCF_SOURCE_DIR) / "data" / "fullrange.json").string(),
                        "--format", "csv", "--threads", "2"});
    CHECK(r.code == 0);
  }
}

TEST_CASE("cli gradcheck") {
  const auto one = run({"gradcheck", "--points", "1"});
  CHECK(one.code == 0);
  CHECK(csv_rows(one.out)[1] == std::vector<std::string>{"42", "1", "0", "true"});
  const auto full = run({"gradcheck", "--seed", "42", "--points", "500"});
  CHECK(full.code == 0);
  CHECK(num(csv_rows(full.out)[1][2]) < 1e-5);
  CHECK(run({"gradcheck", "--seed", "42", "--points", "500"}).out == full.out);

  cli::Hooks hooks;
  hooks.gradient = [](const ScaledState<double>& w, const FilterParams<double>& p) {
    return Vector4d(-grad_V(w, p));
  };
  const auto broken = run({"gradcheck", "--points", "20"}, hooks);
  CHECK(broken.code == 1);
  CHECK(csv_rows(broken.out)[1][3] == "false");
  CHECK(run({"gradcheck", "--points", "0"}).code == 2);
}

TEST_CASE("cli usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"eig", "--r", "0.5", "--bogus"}).code == 2);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("golden outputs") {
  const std::pair<std::vector<std::string>, std::string> cases[] = {
      {{"eig", "--omega0", "2", "--r", "0.3"}, "eig_r03.csv"},
      {{"certify", "--r-grid", "0.1:1:0.1"}, "certify.csv"},
      {{"simulate", "--r", "0.5", "--x0", "1,-0.5,0.25,2", "--dt", "0.1", "--steps", "20", "--method", "rk4"},
       "simulate_rk4.csv"},
      {{"simulate", "--r", "1", "--omega0", "10", "--x0", "4,-3,2,-1", "--dt", "0.5", "--steps", "20"},
       "simulate_dg.csv"},
  };
  for (const auto& [args, name] : cases) {
    const auto r = run(args);
    CHECK(r.code == 0);
    const auto golden = kGolden / name;
    REQUIRE_MESSAGE(fs::exists(golden), golden.string());
    CHECK_MESSAGE(r.out == read_file(golden), name);
  }
}
