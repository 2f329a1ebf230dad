#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

// Runs the CLI inside `dir` with a fixed build date, capturing stdout and stderr.
Run cli(const fs::path& dir, const std::string& args) {
    std::string cmd = "cd '" + dir.string() + "' && SOURCE_DATE_EPOCH=1700000000 " + ENERMOD_CLI + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class Scratch : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("enermod_cli_" + std::string(info->name()) + "_" + std::to_string(getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Relative path -> content for every regular file under `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

std::string data(const std::string& name) { return std::string(ENERMOD_DATA_DIR) + "/" + name; }

} // namespace

TEST_F(Scratch, UsageErrors) {
    EXPECT_EQ(cli(dir_, "").code, 2);
    EXPECT_EQ(cli(dir_, "warp").code, 2);
    auto r = cli(dir_, "gen-bench --kind instr --bogus");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("error: code=2"), std::string::npos) << r.output;
}

TEST_F(Scratch, HelpDocumentsExitCodes) {
    auto r = cli(dir_, "--help");
    EXPECT_EQ(r.code, 0);
    for (const char* s : {"gen-bench", "oracle", "fit", "reduce", "estimate", "validate", "sweep-noc", "sweep-imem", "explore",
                          "report"})
        EXPECT_NE(r.output.find(s), std::string::npos) << s;
    for (const char* s : {"0 ", "2 ", "3 ", "4 ", "5 "}) EXPECT_NE(r.output.find(s), std::string::npos) << s;
    EXPECT_NE(r.output.find("missing"), std::string::npos);
}

TEST_F(Scratch, CommSweepWritesOneProgramPerSize) {
    auto r = cli(dir_, "--outdir out gen-bench --kind comm --min 4 --max 1024 --step 4");
    ASSERT_EQ(r.code, 0) << r.output;
    size_t comm = 0, files = 0;
    std::istringstream manifest(slurp(dir_ / "out/benchmarks/manifest.csv"));
    std::string line;
    std::getline(manifest, line);
    EXPECT_EQ(line, "name,kind,swept,value,program,prologue,reps");
    while (std::getline(manifest, line)) comm += line.find(",comm,") != std::string::npos;
    for (const auto& e : fs::directory_iterator(dir_ / "out/benchmarks"))
        files += e.path().extension() == ".json" && e.path().filename().string().find("comm") != std::string::npos;
    EXPECT_EQ(comm, 256u);
    EXPECT_EQ(files, 256u);
}

TEST_F(Scratch, MissingParamsLeavesNoArtifacts) {
    ASSERT_EQ(cli(dir_, "--outdir out gen-bench --kind idle").code, 0);
    auto before = snapshot(dir_ / "out");
    auto r = cli(dir_, "--outdir out --params nowhere.json oracle");
    EXPECT_EQ(r.code, 3) << r.output;
    EXPECT_NE(r.output.find("error: code=3"), std::string::npos) << r.output;
    EXPECT_EQ(snapshot(dir_ / "out"), before);
    EXPECT_FALSE(fs::exists(dir_ / "out/traces"));
}

TEST_F(Scratch, ParseAndInvariantExitCodes) {
    std::ofstream(dir_ / "broken.json") << "{\"mesh_cols\": ";
    EXPECT_EQ(cli(dir_, "--config broken.json gen-bench --kind idle").code, 4);
    EXPECT_EQ(cli(dir_, "gen-bench --kind comm --src 0,0 --dst 0,0").code, 5);
}

TEST_F(Scratch, ValidateWritesSummary) {
    auto r = cli(dir_, "--outdir out validate");
    ASSERT_EQ(r.code, 0) << r.output;
    auto summary = nlohmann::json::parse(slurp(dir_ / "out/reports/validation_summary.json"));
    ASSERT_TRUE(summary.contains("mean_rel_error"));
    EXPECT_LE(summary["mean_rel_error"].get<double>(), 0.05);
    EXPECT_TRUE(fs::exists(dir_ / "out/models/default.json"));
    EXPECT_EQ(slurp(dir_ / "out/reports/validation.csv").rfind("benchmark,truth_pj,estimate_pj,rel_error", 0), 0u);
}

TEST_F(Scratch, PipelineIsByteIdenticalAcrossRerunsAndWorkers) {
    auto pipeline = [&](const std::string& out, unsigned workers) {
        std::string g = "--outdir " + out + " --workers " + std::to_string(workers) + " ";
        std::vector<std::string> steps{
            "gen-bench --kind training", "oracle", "fit --function fine --noc-reducer staircase",
            "estimate --model " + out + "/models/fine.json --trace " + out + "/traces/idle.trace",
            "sweep-noc --min 4 --max 256 --step 4", "sweep-imem --lo 0 --hi 99",
            "explore --graph " + data("graphs/pipeline4.json") + " --model " + out + "/models/fine.json --steps 500 --runs 2",
            "report"};
        for (const auto& step : steps) {
            auto r = cli(dir_, g + step);
            EXPECT_EQ(r.code, 0) << step << "\n" << r.output;
        }
        return snapshot(dir_ / out);
    };
    auto a = pipeline("a", 1), b = pipeline("b", 1), c = pipeline("c", 4);
    ASSERT_FALSE(a.empty());
    EXPECT_TRUE(a.count("models/fine.json"));
    EXPECT_TRUE(a.count("reports/partition.json"));
    EXPECT_TRUE(a.count("report.json") || a.count("reports/report.json"));
    ASSERT_EQ(a.size(), b.size());
    ASSERT_EQ(a.size(), c.size());
    for (const auto& [path, content] : a) {
        EXPECT_TRUE(b.at(path) == content) << "rerun differs: " << path;
        EXPECT_TRUE(c.at(path) == content) << "worker count changes: " << path;
    }
}
