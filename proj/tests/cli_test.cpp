#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <provrepeat/cli.hpp>

#include "support/fixtures.hpp"

using namespace provrepeat;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cli-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
    home_ = dir_ / "home";
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(std::vector<std::string> args) {
    args.insert(args.begin(), {"--home", home_.string()});
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  // Writes the trace log plus payload files; returns the trace path. Payloads live under root.
  fs::path stage(const ExecutionTrace& t, const std::string& name) {
    auto root = dir_ / (name + "-root");
    fixtures::write_payloads(t, root);
    auto log = dir_ / (name + ".jsonl");
    std::ofstream(log) << serialize_trace(t);
    return log;
  }

  fs::path root_of(const std::string& name) const { return dir_ / (name + "-root"); }

  fs::path dir_;
  fs::path home_;
};

}  // namespace

TEST_F(CliTest, CreateListShow) {
  EXPECT_EQ(run({"create", "pipeline"}).code, 0);
  auto l = run({"list"});
  EXPECT_EQ(l.code, 0);
  EXPECT_NE(l.out.find("SEQ"), std::string::npos);
  EXPECT_EQ(std::count(l.out.begin(), l.out.end(), '\n'), 1);  // header only
  EXPECT_EQ(run({"create", "pipeline"}).code, 3);                   // duplicate
  EXPECT_EQ(run({"show"}).code, 3);                            // no containers yet
}

TEST_F(CliTest, ExecTwiceDedups) {
  run({"create", "staleread"});
  auto log = stage(fixtures::stale_read_trace(), "staleread");
  auto first = run({"--json", "exec", log.string(), "--root", root_of("staleread").string()});
  ASSERT_EQ(first.code, 0) << first.err;
  auto j1 = nlohmann::json::parse(first.out);
  EXPECT_EQ(j1["seq"], 1);
  EXPECT_EQ(j1["provenance"]["activities"].get<int>() + j1["provenance"]["entities"].get<int>(), 5);
  EXPECT_EQ(j1["files"], 3);
  auto second = run({"--json", "exec", log.string(), "--root", root_of("staleread").string()});
  auto j2 = nlohmann::json::parse(second.out);
  EXPECT_EQ(j2["seq"], 2);
  EXPECT_EQ(j2["new_bytes"], 0);

  auto l = run({"--json", "list"});
  auto rows = nlohmann::json::parse(l.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["seq"], 1);
  EXPECT_EQ(rows[1]["seq"], 2);

  auto s = run({"show"});
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("staleread/2"), std::string::npos);
  EXPECT_NE(s.out.find("2 processes, 3 files"), std::string::npos);
}

TEST_F(CliTest, MissingPayloadIsWarning) {
  run({"create", "u"});
  auto t = fixtures::stale_read_trace();
  auto log = dir_ / "t.jsonl";
  std::ofstream(log) << serialize_trace(t);
  auto r = run({"exec", log.string(), "--root", (dir_ / "empty").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("missing file"), std::string::npos);
}

TEST_F(CliTest, MalformedTraceExitsThreeWithLine) {
  run({"create", "u"});
  auto log = dir_ / "bad.jsonl";
  auto good = serialize_trace(fixtures::stale_read_trace());
  std::ofstream(log) << good.substr(0, good.find('\n') + 1) << "{not json\n";
  auto r = run({"exec", log.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, RepeatPlanDoesNotTouchStore) {
  run({"create", "spawn"});
  auto log = stage(fixtures::spawn_trace(true), "spawn");
  run({"exec", log.string(), "--root", root_of("spawn").string()});
  Store probe(home_);
  auto before = probe.stored_bytes();
  auto r = run({"repeat", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("procs:    proc:10 proc:11"), std::string::npos) << r.out;
  EXPECT_EQ(probe.stored_bytes(), before);
  EXPECT_EQ(probe.list_containers("spawn").size(), 1u);
}

TEST_F(CliTest, RepeatProcsQ) {
  run({"create", "spawn"});
  auto log = stage(fixtures::spawn_trace(true), "spawn");
  run({"exec", log.string(), "--root", root_of("spawn").string()});
  auto work = dir_ / "work";
  auto r = run({"--json", "repeat", "1", "--procs", "Q", "--workdir", work.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["plan"]["required_procs"], nlohmann::json::array({"proc:11"}));
  EXPECT_EQ(j["plan"]["required_files"], nlohmann::json::array({"/B", "/C", "/Q-exe"}));
  EXPECT_TRUE(fs::exists(work / "B"));
  EXPECT_TRUE(fs::exists(work / "C"));
  EXPECT_FALSE(fs::exists(work / "A"));
  EXPECT_EQ(run({"repeat", "1", "--procs", "nobody"}).code, 3);
}

TEST_F(CliTest, RepeatGivenC) {
  run({"create", "spawn"});
  auto log = stage(fixtures::spawn_trace(), "spawn");
  run({"exec", log.string(), "--root", root_of("spawn").string()});
  auto newc = dir_ / "newC";
  std::ofstream(newc) << "replacement input\n";
  auto work = dir_ / "work";
  auto r = run({"repeat", "1", "--given", "C=" + newc.string(), "--workdir", work.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rerun:    proc:11\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("/B"), std::string::npos);
  std::ifstream in(work / "C");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "replacement input");

  EXPECT_EQ(run({"repeat", "1", "--given", "B=" + newc.string()}).code, 3);  // generated file
  EXPECT_EQ(run({"repeat", "1", "--given", "C"}).code, 2);                    // bad syntax
  EXPECT_EQ(run({"repeat", "1", "--given", "C=" + newc.string(), "--procs", "Q"}).code, 2);
}

TEST_F(CliTest, RepeatExecuteThenVerifyStaleRead) {
  for (auto overlap : {false, true}) {
    auto name = overlap ? "overlap" : "plain";
    run({"create", name});
    auto log = stage(fixtures::stale_read_trace(overlap), name);
    run({"exec", log.string(), "--root", root_of(name).string()});
    auto r = run({"repeat", "1", "--execute", "--workdir", (dir_ / name / "w").string()});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("isomorphic"), std::string::npos);
    EXPECT_NE(r.out.find("replay container: 2"), std::string::npos);
    EXPECT_EQ(run({"verify", "1", "2"}).code, 0);
  }
}

TEST_F(CliTest, RepeatExecutePartialSpawn) {
  run({"create", "spawn"});
  auto log = stage(fixtures::spawn_trace(true), "spawn");
  run({"exec", log.string(), "--root", root_of("spawn").string()});
  auto r = run({"--json", "repeat", "1", "--procs", "Q", "--execute", "--workdir", (dir_ / "w").string()});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["verdict"]["isomorphic"].get<bool>());
  EXPECT_TRUE(j["replay"]["outside"].empty());
  EXPECT_TRUE(j["replay"]["unused"].empty());
  // Removing a shipped input makes the replay read outside the plan.
  fs::remove(dir_ / "w" / "C");
  auto broken = run({"--json", "repeat", "1", "--procs", "Q", "--execute", "--workdir", (dir_ / "w").string()});
  EXPECT_EQ(broken.code, 0);  // materialize restores C before replaying
}

TEST_F(CliTest, VerifyDetectsDifference) {
  run({"create", "u"});
  auto a = stage(fixtures::stale_read_trace(), "a");
  auto b = stage(fixtures::spawn_trace(), "b");
  run({"exec", a.string(), "--root", root_of("a").string()});
  run({"exec", b.string(), "--root", root_of("b").string()});
  EXPECT_EQ(run({"verify", "1", "1"}).code, 0);
  auto r = run({"--json", "verify", "1", "2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(nlohmann::json::parse(r.out)["isomorphic"].get<bool>());
  EXPECT_EQ(run({"verify", "1", "9"}).code, 3);
}

TEST_F(CliTest, SummarizeSharedInput) {
  run({"create", "shared"});
  auto log = stage(fixtures::shared_input_trace(), "shared");
  run({"exec", log.string(), "--root", root_of("shared").string()});
  auto r = run({"summarize", "--mode", "ancestry", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["groups"].size(), 3u);
  auto only = run({"summarize", "--mode", "ancestry-only"});
  EXPECT_EQ(nlohmann::json::parse(only.out)["groups"].size(), 2u);
  auto dot = run({"summarize", "--mode", "collapse", "--format", "dot", "-o", (dir_ / "s.dot").string()});
  EXPECT_EQ(dot.code, 0);
  EXPECT_TRUE(fs::file_size(dir_ / "s.dot") > 0);
  EXPECT_EQ(run({"summarize", "--mode", "bogus"}).code, 2);
}

TEST_F(CliTest, StatsPrintsBothModes) {
  run({"create", "spawn"});
  auto log = stage(fixtures::spawn_trace(true), "spawn");
  run({"exec", log.string(), "--root", root_of("spawn").string()});
  auto r = run({"stats"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("collapse: files -"), std::string::npos);
  EXPECT_NE(r.out.find("ancestry: files -"), std::string::npos);
  auto j = nlohmann::json::parse(run({"--json", "stats"}).out);
  EXPECT_TRUE(j["collapse"].contains("combined_reduction"));
}

TEST_F(CliTest, ExportImportGc) {
  run({"create", "spawn"});
  auto log = stage(fixtures::spawn_trace(), "spawn");
  run({"exec", log.string(), "--root", root_of("spawn").string()});
  auto tar = dir_ / "spawn.tar";
  EXPECT_EQ(run({"export", "1", "-o", tar.string()}).code, 0);
  auto imp = run({"import", tar.string(), "--as", "copy"});
  EXPECT_EQ(imp.code, 0) << imp.err;
  EXPECT_NE(imp.out.find("copy/1"), std::string::npos);
  auto g = run({"gc"});
  EXPECT_EQ(g.code, 0);
  EXPECT_NE(g.out.find("removed 0 chunks"), std::string::npos);
  EXPECT_EQ(run({"import", (dir_ / "absent.tar").string()}).code, 3);
}

TEST_F(CliTest, IngestStrace) {
  auto log = dir_ / "run.strace";
  std::ofstream(log) << "5 1.000000 openat(AT_FDCWD, \"/data/x\", O_RDONLY) = 3\n5 1.000100 close(3) = 0\n";
  auto r = run({"ingest-strace", log.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  auto t = parse_trace_log(std::string_view(r.out));
  EXPECT_NE(t.find("/data/x"), nullptr);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"repeat"}).code, 2);
  EXPECT_EQ(run({"list", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"exec"}).code, 2);
  EXPECT_EQ(run({"list"}).code, 3);  // no current sciunit
  EXPECT_EQ(run({"--help"}).code, 0);
}
