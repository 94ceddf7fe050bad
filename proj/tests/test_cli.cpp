#include <mtalign/cli.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <set>
#include <sstream>

namespace mtalign {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
    int code;
    std::string err;
};

CliResult run(std::vector<std::string> args)
{
    args.insert(args.begin(), "mtalign");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), err);
    return {code, err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::set<std::string> files_under(const fs::path& dir)
{
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out.insert(e.path().string());
    return out;
}

std::string s(const fs::path& p) { return p.string(); }

TEST(CliTest, SynthWritesImageAndManifest)
{
    const fs::path dir = test::temp_dir("cli_synth");
    const CliResult r = run({"synth", "--size", "64", "--angle", "30", "--half-length", "20", "--noise", "0", "--seed",
                       "42", "--out", s(dir / "a.pgm")});
    ASSERT_EQ(r.code, 0) << r.err;
    const Image img = load_pgm(dir / "a.pgm");
    EXPECT_EQ(img.width(), 64);
    const json m = read_json(dir / "a.pgm.manifest.json");
    EXPECT_EQ(m["command"], "synth");
    EXPECT_EQ(m["tool_version"], kToolVersion);
    EXPECT_EQ(m["parameters"]["seed"], "42");
    EXPECT_EQ(m["parameters"]["angle"], "30");
    EXPECT_EQ(m["outputs"], json({s(dir / "a.pgm"), s(dir / "a.pgm.manifest.json")}));
}

TEST(CliTest, AlignRecoversSynthesizedRotation)
{
    const fs::path dir = test::temp_dir("cli_align");
    ASSERT_EQ(run({"synth", "--size", "128", "--half-length", "40", "--angle", "10", "--out", s(dir / "a.pgm")}).code, 0);
    ASSERT_EQ(run({"synth", "--size", "128", "--half-length", "40", "--angle", "40", "--out", s(dir / "a30.pgm")}).code, 0);
    const std::set<std::string> before = files_under(dir);

    const CliResult r = run({"align", "--ref", s(dir / "a.pgm"), "--cand", s(dir / "a30.pgm"), "--report", s(dir / "r.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json rep = read_json(dir / "r.json");
    EXPECT_NEAR(rep["angle_deg"].get<double>(), 30.0, 1.0);
    EXPECT_GE(rep["peak_ncc"].get<double>(), 0.9);
    EXPECT_FALSE(rep.contains("op_counts"));

    // The manifest lists exactly what the run created.
    std::set<std::string> created;
    for (const auto& f : files_under(dir))
        if (!before.count(f))
            created.insert(f);
    const json m = read_json(dir / "r.json.manifest.json");
    std::set<std::string> listed;
    for (const auto& f : m["outputs"])
        listed.insert(f.get<std::string>());
    EXPECT_EQ(listed, created);
    EXPECT_EQ(listed.size(), 4u);
    EXPECT_TRUE(fs::exists(dir / "r.aligned.pgm"));
    EXPECT_TRUE(fs::exists(dir / "r.curve.csv"));

    const CliResult pr = run({"align", "--ref", s(dir / "a.pgm"), "--cand", s(dir / "a30.pgm"), "--report",
                        s(dir / "p.json"), "--pruned"});
    ASSERT_EQ(pr.code, 0) << pr.err;
    const json prep = read_json(dir / "p.json");
    EXPECT_EQ(prep["angle_deg"], rep["angle_deg"]);
    EXPECT_EQ(prep["peak_ncc"], rep["peak_ncc"]);
    ASSERT_TRUE(prep.contains("op_counts"));
    EXPECT_LE(prep["op_counts"]["evaluated"].get<double>(), prep["op_counts"]["exhaustive"].get<double>());
}

TEST(CliTest, ErrorContract)
{
    const fs::path dir = test::temp_dir("cli_errors");
    const std::string missing = s(dir / "missing.pgm");
    const CliResult r = run({"align", "--ref", missing, "--cand", missing, "--report", s(dir / "r.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    EXPECT_FALSE(fs::exists(dir / "r.json.manifest.json"));

    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"synth", "--out", s(dir / "x.pgm"), "--bogus"}).code, 1);
    EXPECT_EQ(run({"synth"}).code, 1);
    EXPECT_EQ(run({"synth", "--size", "abc", "--out", s(dir / "x.pgm")}).code, 1);
    EXPECT_EQ(run({"synth", "--size", "8", "--out", s(dir / "x.pgm")}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliTest, BinaryExitCodes)
{
    const std::string bin = MTALIGN_CLI_PATH;
    const fs::path dir = test::temp_dir("cli_binary");
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " 2>/dev/null").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    EXPECT_EQ(status(bin + " synth --size 32 --half-length 10 --out " + s(dir / "a.pgm")), 0);
    EXPECT_EQ(status(bin + " nope"), 1);
    EXPECT_EQ(status(bin + " polar --in " + s(dir / "none.pgm") + " --out " + s(dir / "p.csv")), 2);
}

TEST(CliTest, PolarWritesGrid)
{
    const fs::path dir = test::temp_dir("cli_polar");
    ASSERT_EQ(run({"synth", "--size", "32", "--half-length", "10", "--out", s(dir / "a.pgm")}).code, 0);
    const CliResult r = run({"polar", "--in", s(dir / "a.pgm"), "--out", s(dir / "p.csv"), "--angular", "12", "--radial",
                       "5", "--center", "15.5,15.5", "--max-radius", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(slurp(dir / "p.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    }
    EXPECT_EQ(rows, 12);
    EXPECT_EQ(run({"polar", "--in", s(dir / "a.pgm"), "--out", s(dir / "q.csv"), "--center", "3"}).code, 2);
}

TEST(CliTest, SequenceOnReferenceTable)
{
    const fs::path dir = test::temp_dir("cli_sequence");
    std::ofstream(dir / "reference.csv") << ",0,1,2,3\n0,1,0.8,0.4,0.6\n1,0.8,1,0.5,0.7\n2,0.4,0.5,1,0.6\n3,0.6,0.7,0.6,1\n";
    std::ofstream(dir / "frames.txt") << "f0.pgm\nf1.pgm\nf2.pgm\nf3.pgm\n";
    const CliResult r = run({"sequence", "--matrix", s(dir / "reference.csv"), "--start", "0", "--length", "3", "--plan",
                       s(dir / "plan.json"), "--frames-out", s(dir / "order.txt"), "--paths", s(dir / "frames.txt"),
                       "--monotonicity", s(dir / "mono.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json plan = read_json(dir / "plan.json");
    EXPECT_EQ(plan["frames"], json({0, 1, 0}));
    EXPECT_EQ(plan["step_probs"], json({0.8, 0.8}));
    EXPECT_NEAR(plan["log_chain_prob"].get<double>(), 2 * std::log(0.8), 1e-12);
    EXPECT_EQ(slurp(dir / "order.txt"), "f0.pgm\nf1.pgm\nf0.pgm\n");
    EXPECT_TRUE(read_json(dir / "mono.json").is_array());

    EXPECT_EQ(run({"sequence", "--matrix", s(dir / "reference.csv"), "--start", "9", "--plan", s(dir / "x.json"),
                   "--frames-out", s(dir / "x.txt")})
                  .code,
              2);
    EXPECT_EQ(run({"sequence", "--matrix", s(dir / "absent.csv")}).code, 2);
}

TEST(CliTest, MatrixOverDirectory)
{
    const fs::path dir = test::temp_dir("cli_matrix");
    const fs::path in = dir / "in";
    fs::create_directories(in);
    for (int k = 0; k < 3; ++k) {
        ASSERT_EQ(run({"synth", "--size", "64", "--half-length", "20", "--offset", "8", "--angle",
                       std::to_string(20 * k), "--noise", "0.05", "--seed", std::to_string(k), "--out",
                       s(in / ("f" + std::to_string(k) + ".pgm")), "--manifest", s(dir / "synth.json")})
                      .code,
                  0);
    }
    const CliResult r = run({"matrix", "--inputs", s(in), "--crop", "24", "--angular", "180", "--radial", "30",
                       "--out-matrix", s(dir / "c.csv"), "--out-prob", s(dir / "p.csv"), "--aligned-dir",
                       s(dir / "aligned"), "--frames", s(dir / "frames.txt")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream cin(dir / "c.csv");
    const SquareTable c = read_square_csv(cin);
    ASSERT_EQ(c.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(c(i, i), 1.0);
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(c(i, j), c(j, i));
            EXPECT_GT(c(i, j), 0.5) << "aligned frames should agree";
        }
    }
    std::ifstream pin(dir / "p.csv");
    EXPECT_NO_THROW(ProbabilityTable{read_square_csv(pin)});
    EXPECT_EQ(slurp(dir / "frames.txt"), s(dir / "aligned" / "f0.pgm") + "\n" + s(dir / "aligned" / "f1.pgm") +
                                             "\n" + s(dir / "aligned" / "f2.pgm") + "\n");
    EXPECT_EQ(read_json(dir / "c.csv.manifest.json")["outputs"].size(), 7u);

    fs::create_directories(dir / "empty");
    EXPECT_EQ(run({"matrix", "--inputs", s(dir / "empty"), "--out-matrix", s(dir / "e.csv")}).code, 2);
}

TEST(CliTest, RepeatedRunsAreByteIdentical)
{
    auto pipeline = [](const fs::path& dir) {
        fs::create_directories(dir / "in");
        for (int k = 0; k < 3; ++k)
            EXPECT_EQ(run({"synth", "--size", "64", "--half-length", "20", "--offset", "6", "--angle",
                           std::to_string(15 * k), "--noise", "0.1", "--seed", "7", "--out",
                           s(dir / "in" / ("f" + std::to_string(k) + ".pgm")), "--manifest", s(dir / "m0.json")})
                          .code,
                      0);
        EXPECT_EQ(run({"align", "--ref", s(dir / "in/f0.pgm"), "--cand", s(dir / "in/f1.pgm"), "--report",
                       s(dir / "r.json"), "--angular", "180", "--radial", "30"})
                      .code,
                  0);
        EXPECT_EQ(run({"matrix", "--inputs", s(dir / "in"), "--crop", "24", "--angular", "180", "--radial", "30",
                       "--out-matrix", s(dir / "c.csv"), "--out-prob", s(dir / "p.csv"), "--frames",
                       s(dir / "frames.txt")})
                      .code,
                  0);
        EXPECT_EQ(run({"sequence", "--matrix", s(dir / "p.csv"), "--plan", s(dir / "plan.json"), "--frames-out",
                       s(dir / "order.txt"), "--paths", s(dir / "frames.txt")})
                      .code,
                  0);
    };
    const fs::path a = test::temp_dir("cli_det_a") / "run";
    const fs::path b = test::temp_dir("cli_det_b") / "run";
    pipeline(a);
    pipeline(b);
    // Paths embedded in manifests differ by directory; compare after substitution.
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file())
            continue;
        const fs::path rel = fs::relative(e.path(), a);
        std::string x = slurp(e.path()), y = slurp(b / rel);
        for (std::size_t pos; (pos = y.find(s(b))) != std::string::npos;)
            y.replace(pos, s(b).size(), s(a));
        EXPECT_EQ(x, y) << rel;
        ++compared;
    }
    EXPECT_GE(compared, 12u);
}

}  // namespace
}  // namespace mtalign
