#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "mcgp/commands.hpp"

using namespace mcgp;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("mcgp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

#ifdef MCGP_CLI_PATH
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + MCGP_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const RunConfig d = parse_config(json::object());
  EXPECT_EQ(d.model_type, "mcgp");
  EXPECT_EQ(d.nugget, 1.5e-8);
  EXPECT_EQ(d.multistarts, 5);
  EXPECT_FALSE(d.literal_tau_exponent);
  const RunConfig c = parse_config(json::parse(R"({"seed": 9, "model_type": "igp", "optimizer": {"max_evals": 50},
                                                   "priors": {"K": 4, "mu0": [0.5, 0.5]}})"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model_type, "igp");
  EXPECT_EQ(c.max_evals, 50);
  EXPECT_EQ(*c.priors.K, 4);
  const HyperPriors p = c.make_priors(build_mesh(0.5).nodes);
  EXPECT_EQ(p.K, 4);
  EXPECT_EQ(p.mu0, Eigen::Vector2d(0.5, 0.5));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(json::parse(R"({"sede": 1})")), ValidationError);
  EXPECT_THROW(parse_config(json::parse(R"({"optimizer": {"restarts": 3}})")), ValidationError);
  EXPECT_THROW(parse_config(json::parse(R"({"priors": {"k": 3}})")), ValidationError);
  EXPECT_THROW(parse_config(json::parse(R"({"model_type": "gp"})")), ValidationError);
  EXPECT_THROW(parse_config(json::parse(R"({"nugget": "small"})")), ValidationError);
  EXPECT_THROW(parse_config(json::parse(R"({"seed": -1})")), ValidationError);
  EXPECT_THROW(parse_config(json::parse(R"({"priors": {"alpha0": 0}})")), ValidationError);
}

TEST(Csv, RoundTripIsExact) {
  TempDir t;
  Eigen::MatrixXd m(2, 3);
  m << 0.1, -1.0 / 3.0, 1e-300, 2.5e10, std::nextafter(1.0, 2.0), 0.0;
  csv::write(t.path() / "m.csv", m, {"a", "b", "c"});
  std::vector<std::string> header;
  const Eigen::MatrixXd r = csv::read(t.path() / "m.csv", &header);
  EXPECT_EQ(r, m);
  EXPECT_EQ(header, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Csv, ReportsRaggedAndNonNumericRows) {
  TempDir t;
  spit(t.path() / "ragged.csv", "1,2\n3\n");
  spit(t.path() / "text.csv", "1,2\n3,abc\n");
  try {
    csv::read(t.path() / "ragged.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(csv::read(t.path() / "text.csv"), ValidationError);
  EXPECT_THROW(csv::read(t.path() / "missing.csv"), ValidationError);
}

TEST(Dataset, SaveLoadRoundTrip) {
  TempDir t;
  GenerateArgs g;
  g.out = t.path() / "ds";
  g.h = 0.25;
  g.equispaced = 3;
  g.seed = 4;
  const PoissonDataset ds = cmd_generate(g);
  const DatasetFiles f = load_dataset(g.out);
  EXPECT_EQ(f.data.solutions, ds.solutions);
  EXPECT_EQ(f.data.mesh.nodes, ds.mesh.nodes);
  EXPECT_EQ(f.data.mesh.elements, ds.mesh.elements);
  EXPECT_EQ(f.data.mesh.boundary, ds.mesh.boundary);
  EXPECT_EQ(f.data.mesh.neighbors, ds.mesh.neighbors);
  EXPECT_EQ(*f.h, 0.25);
  EXPECT_EQ(f.seed, 4u);
}

TEST(Dataset, ShapeMismatchNamesTheFile) {
  TempDir t;
  GenerateArgs g;
  g.out = t.path() / "ds";
  g.h = 0.5;
  g.equispaced = 2;
  cmd_generate(g);
  spit(g.out / "inputs.csv", "0.1\n0.2\n0.3\n");
  try {
    load_dataset(g.out);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("solutions.csv"), std::string::npos);
  }
}

TEST(Generate, RequiresExactlyOneDesign) {
  TempDir t;
  GenerateArgs g;
  g.out = t.path() / "ds";
  EXPECT_THROW(cmd_generate(g), ValidationError);
  g.equispaced = 3;
  g.linspace = 3;
  EXPECT_THROW(cmd_generate(g), ValidationError);
  g.linspace.reset();
  g.h = 0.6;
  EXPECT_THROW(cmd_generate(g), ValidationError);
}

#ifdef MCGP_CLI_PATH

TEST(Cli, GenerateWritesManifestAndInputs) {
  TempDir t;
  const fs::path ds = t.path() / "ds";
  ASSERT_EQ(run_cli("generate --h 0.2 --equispaced 5 --out " + ds.string(), t.path() / "log"), 0)
      << slurp(t.path() / "log");
  const json m = json::parse(slurp(ds / "manifest.json"));
  EXPECT_EQ(m.at("n").get<int>(), 5);
  EXPECT_EQ(m.at("N").get<int>(), 121);
  EXPECT_EQ(m.at("elements").get<int>(), 50);
  const Eigen::MatrixXd x = csv::read(ds / "inputs.csv");
  ASSERT_EQ(x.rows(), 5);
  for (int i = 1; i <= 5; ++i) EXPECT_NEAR(x(i - 1, 0), 0.4 * i - 1.2, 1e-15);
}

TEST(Cli, GenerateFromInputFile) {
  TempDir t;
  spit(t.path() / "x.csv", "0.25\n");
  const fs::path ds = t.path() / "ds";
  ASSERT_EQ(run_cli("generate --h 0.5 --inputs " + (t.path() / "x.csv").string() + " --out " + ds.string(),
                    t.path() / "log"),
            0);
  EXPECT_EQ(csv::read(ds / "solutions.csv").cols(), 1);
}

TEST(Cli, FitIsByteIdenticalAcrossRuns) {
  TempDir t;
  const fs::path ds = t.path() / "ds";
  ASSERT_EQ(run_cli("generate --h 0.25 --equispaced 4 --out " + ds.string(), t.path() / "log"), 0);
  for (const char* name : {"m1", "m2"})
    ASSERT_EQ(run_cli("fit --dataset " + ds.string() + " --out " + (t.path() / name).string() + " --K 4 --seed 3",
                      t.path() / "log"),
              0)
        << slurp(t.path() / "log");
  EXPECT_NE(slurp(t.path() / "log").find("converged"), std::string::npos);
  EXPECT_EQ(slurp(t.path() / "log").find("NOT converged"), std::string::npos);
  for (const auto& entry : fs::directory_iterator(t.path() / "m1")) {
    const auto name = entry.path().filename();
    if (name == "fit_log.json") continue;  // holds wall-clock timings
    EXPECT_EQ(slurp(entry.path()), slurp(t.path() / "m2" / name)) << name;
  }
  ASSERT_EQ(run_cli("predict --model " + (t.path() / "m1").string() + " --dataset " + ds.string() + " --out " +
                        (t.path() / "pred").string(),
                    t.path() / "log"),
            0)
      << slurp(t.path() / "log");
  EXPECT_EQ(csv::read(t.path() / "pred" / "pred_mean.csv").rows(), 4);
}

TEST(Cli, BaselineFitRecordsType) {
  TempDir t;
  const fs::path ds = t.path() / "ds";
  ASSERT_EQ(run_cli("generate --h 0.5 --equispaced 3 --out " + ds.string(), t.path() / "log"), 0);
  ASSERT_EQ(run_cli("fit --model-type igp --dataset " + ds.string() + " --out " + (t.path() / "m").string(),
                    t.path() / "log"),
            0);
  EXPECT_EQ(load_model(t.path() / "m").type(), "igp");
  EXPECT_EQ(json::parse(slurp(t.path() / "m" / "fit_log.json")).at("model_type"), "igp");
}

TEST(Cli, InvalidInputExitsWithCodeTwo) {
  TempDir t;
  const fs::path ds = t.path() / "ds";
  ASSERT_EQ(run_cli("generate --h 0.5 --equispaced 3 --out " + ds.string(), t.path() / "log"), 0);
  spit(ds / "solutions.csv", slurp(ds / "solutions.csv") + "1,2\n");
  EXPECT_EQ(run_cli("fit --dataset " + ds.string() + " --out " + (t.path() / "m").string(), t.path() / "log"), 2);
  EXPECT_NE(slurp(t.path() / "log").find("solutions.csv"), std::string::npos);
  EXPECT_EQ(run_cli("generate --h 0.9 --equispaced 3 --out " + ds.string(), t.path() / "log"), 2);
  EXPECT_EQ(run_cli("frobnicate", t.path() / "log"), 2);
}

#endif
