#include <cstdlib>
#include <filesystem>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "privscore/pipeline.hpp"

using namespace privscore;
namespace pl = privscore::pipeline;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("privscore_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

GenConfig tiny() {
  GenConfig c;
  c.seed = 3;
  c.users = 120;
  c.items = 5;
  c.edges_per_node = 2.0;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PRIVSCORE_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read(const fs::path& p) { return io::read_file(p); }

void expect_parse_error(const pl::IngestOptions& opt, const std::string& where) {
  try {
    pl::assemble_dataset(opt);
    FAIL() << "expected a parse error at " << where;
  } catch (const io::ParseError& e) {
    EXPECT_EQ(std::string(e.what()).rfind(where, 0), 0u) << e.what();
  }
}

}  // namespace

TEST(Csv, ParsesQuotingAndLineNumbers) {
  auto t = io::parse_csv("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\r\n\n2,3\n", "f.csv");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].fields[0], "x,1");
  EXPECT_EQ(t.rows[0].fields[1], "he said \"hi\"");
  EXPECT_EQ(t.rows[1].line, 4u);
  EXPECT_THROW(io::parse_csv("a,b\n1,2,3\n", "f.csv"), io::ParseError);
  EXPECT_THROW(io::parse_csv("a,b\n\"open,2\n", "f.csv"), io::ParseError);
}

TEST(Ingest, ReportsFileAndLine) {
  TempDir tmp;
  io::write_file(tmp / "g.csv", "user_id,item_id,bytes\na,x,3\nb,x,-1\n");
  pl::IngestOptions opt;
  opt.granularity = tmp / "g.csv";
  expect_parse_error(opt, "g.csv:3:");

  io::write_file(tmp / "g.csv", "user_id,item_id,bytes\na,x,3\nb,x,abc\n");
  expect_parse_error(opt, "g.csv:3:");

  io::write_file(tmp / "g.csv", "user_id,item_id,bytes\na,x,3\na,x,4\n");
  expect_parse_error(opt, "g.csv:3:");

  io::write_file(tmp / "r.csv", "user_id,item_id,shared\na,x,2\n");
  pl::IngestOptions ropt;
  ropt.responses = tmp / "r.csv";
  expect_parse_error(ropt, "r.csv:2:");

  io::write_file(tmp / "h.csv", "user,item,bytes\n");
  pl::IngestOptions hopt;
  hopt.granularity = tmp / "h.csv";
  EXPECT_THROW(pl::assemble_dataset(hopt), ValidationError);
}

TEST(Ingest, RequiresExactlyOneSource) {
  pl::IngestOptions opt;
  EXPECT_THROW(pl::assemble_dataset(opt), ValidationError);
  opt.granularity = "a";
  opt.responses = "b";
  EXPECT_THROW(pl::assemble_dataset(opt), ValidationError);
}

TEST(Ingest, EdgesAndWarnings) {
  TempDir tmp;
  io::write_file(tmp / "g.csv", "user_id,item_id,bytes\na,x,3\nb,x,0\nc,y,12\nd,y,1\n");
  io::write_file(tmp / "e.csv", "source,target\na,b\nb,a\nc,c\nb,c\nz,a\n");
  pl::IngestOptions opt;
  opt.granularity = tmp / "g.csv";
  opt.edges = tmp / "e.csv";
  opt.out = tmp / "bundle";
  auto res = pl::cmd_ingest(opt);
  const auto& d = res.data;
  EXPECT_EQ(d.registry.size(), 5u);
  EXPECT_EQ(d.registry.id(4), "z");
  EXPECT_EQ(d.catalog.ids(), (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ((*d.granularity)(1, 0), 0);
  EXPECT_EQ(d.responses(1, 2), 1);
  EXPECT_EQ(res.report.duplicate_edges, 1u);
  EXPECT_EQ(res.report.self_loops, 1u);
  EXPECT_EQ(res.report.unknown_users, (std::vector<std::string>{"z"}));
  EXPECT_EQ(res.report.isolated_users, (std::vector<std::string>{"d"}));
  EXPECT_EQ(d.graph->edge_count(), 3u);
  EXPECT_TRUE(fs::exists(tmp / "bundle" / "validation.txt"));

  const auto loaded = pl::load_bundle(tmp / "bundle");
  EXPECT_EQ(loaded.hash, res.manifest_hash);
  EXPECT_EQ(loaded.data.registry.size(), 5u);
  EXPECT_EQ(loaded.data.graph->edge_count(), 3u);
}

TEST(Ingest, ProfilesMeasureBytes) {
  TempDir tmp;
  io::write_file(tmp / "p.csv", "user_id,item_id,text\na,birthday,July 20\nb,birthday,\na,music,rock\na,music,jazz\n");
  pl::IngestOptions opt;
  opt.profiles = tmp / "p.csv";
  const auto d = pl::assemble_dataset(opt).data;
  EXPECT_EQ((*d.granularity)(0, 0), 7);
  EXPECT_EQ((*d.granularity)(0, 1), 0);
  EXPECT_EQ((*d.granularity)(1, 0), 9);
  EXPECT_EQ(d.responses(0, 1), 0);
}

TEST(Bundle, DetectsEditedFiles) {
  TempDir tmp;
  pl::cmd_generate(tiny(), tmp / "b");
  EXPECT_NO_THROW(pl::load_bundle(tmp / "b"));
  auto text = read(tmp / "b" / "granularity.csv");
  text.back() = ' ';
  io::write_file(tmp / "b" / "granularity.csv", text + "\n");
  try {
    pl::load_bundle(tmp / "b");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("granularity.csv"), std::string::npos);
  }
  EXPECT_THROW(pl::load_bundle(tmp / "missing"), ValidationError);
}

TEST(Config, StrictParsing) {
  using nlohmann::json;
  auto msg = [](const json& j) {
    try {
      pl::gen_config_from_json(j);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(msg({{"seed", 1}, {"users", 50}}).find("'items'"), std::string::npos);
  EXPECT_NE(msg({{"seed", 1}, {"users", 50}, {"items", 3}, {"colour", 2}}).find("'colour'"), std::string::npos);
  EXPECT_NE(msg({{"seed", 1}, {"users", "many"}, {"items", 3}}).find("'users'"), std::string::npos);
  EXPECT_NE(msg({{"seed", 1}, {"users", 50}, {"items", 3}, {"graph", {{"mode", "ring"}}}}).find("graph.mode"),
            std::string::npos);

  const auto c = tiny();
  const auto back = pl::gen_config_from_json(pl::to_json(c));
  EXPECT_EQ(pl::to_json(back), pl::to_json(c));
}

TEST(Config, ShippedExampleLoads) {
  const auto j = nlohmann::json::parse(read(fs::path(PRIVSCORE_SOURCE_DIR) / "configs" / "small.json"));
  const auto c = pl::gen_config_from_json(j);
  EXPECT_EQ(c.users, 400u);
  EXPECT_EQ(c.max_level, 3);
}

TEST(Models, Resolution) {
  EXPECT_EQ(pl::resolve_models({"psc"}, std::nullopt).size(), 4u);
  EXPECT_EQ(pl::resolve_models({"psc"}, std::string("bc")), (std::vector<ScoreModel>{ScoreModel::PSC_BC}));
  EXPECT_EQ(pl::resolve_models({"PSI", "psn", "psc:prc"}, std::nullopt),
            (std::vector<ScoreModel>{ScoreModel::PSN, ScoreModel::PSI, ScoreModel::PSC_PRC}));
  EXPECT_THROW(pl::resolve_models({"psx"}, std::nullopt), ValidationError);
  EXPECT_THROW(pl::resolve_models({"psc:xyz"}, std::nullopt), ValidationError);
  EXPECT_EQ(pl::model_file_stem(ScoreModel::PSC_PRC), "psc-prc");
  EXPECT_EQ(pl::model_from_stem("psc-prc"), ScoreModel::PSC_PRC);
}

TEST(Pipeline, EndToEndIsByteIdentical) {
  TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    pl::cmd_generate(tiny(), *dir / "bundle");
    pl::ScoreOptions s;
    s.bundle = *dir / "bundle";
    pl::cmd_score(s);
    pl::EvaluateOptions e;
    e.bundle = *dir / "bundle";
    e.k_groups = {3, 4};
    pl::cmd_evaluate(e);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a / "bundle")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a / "bundle");
    ASSERT_TRUE(fs::exists(b / "bundle" / rel)) << rel;
    EXPECT_EQ(read(entry.path()), read(b / "bundle" / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 20u);
  for (const char* f : {"psn.csv", "psi.csv", "psgn.csv", "psgi.csv", "psc-prc.csv", "psc-evc.csv", "psc-cc.csv",
                        "psc-bc.csv", "psna.csv", "fit_2pl.json", "fit_grm.json", "run.json"})
    EXPECT_TRUE(fs::exists(a / "bundle" / "scores" / f)) << f;
  for (const char* f : {"gof.csv", "correlations.csv", "sensitivities.csv", "curves.csv", "damping.csv", "summary.txt"})
    EXPECT_TRUE(fs::exists(a / "bundle" / "report" / f)) << f;

  const auto psn = read(a / "bundle" / "scores" / "psn.csv");
  EXPECT_EQ(psn.rfind("# manifest=", 0), 0u);
}

TEST(Pipeline, EvaluateRejectsForeignScores) {
  TempDir tmp;
  pl::cmd_generate(tiny(), tmp / "one");
  auto other = tiny();
  other.seed = 4;
  pl::cmd_generate(other, tmp / "two");
  pl::ScoreOptions s;
  s.bundle = tmp / "one";
  s.models = {"psn"};
  pl::cmd_score(s);
  pl::EvaluateOptions e;
  e.bundle = tmp / "two";
  e.scores = tmp / "one" / "scores";
  EXPECT_THROW(pl::cmd_evaluate(e), ValidationError);
  e.bundle = tmp / "one";
  e.k_groups = {2};
  EXPECT_THROW(pl::cmd_evaluate(e), ValidationError);
}

TEST(Pipeline, ScoreValidatesInputs) {
  TempDir tmp;
  io::write_file(tmp / "r.csv", "user_id,item_id,shared\na,x,1\nb,x,0\n");
  pl::IngestOptions opt;
  opt.responses = tmp / "r.csv";
  opt.out = tmp / "bundle";
  pl::cmd_ingest(opt);
  pl::ScoreOptions s;
  s.bundle = tmp / "bundle";
  s.models = {"psgn"};
  EXPECT_THROW(pl::cmd_score(s), ValidationError);
  s.models = {"psc"};
  EXPECT_THROW(pl::cmd_score(s), ValidationError);
  s.models = {"psn"};
  s.damping = 1.0;
  EXPECT_THROW(pl::cmd_score(s), ValidationError);
  s.damping = 0.85;
  EXPECT_NO_THROW(pl::cmd_score(s));
}

TEST(Cli, ExitCodes) {
  TempDir tmp;
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_NE(run_cli(""), 0);
  io::write_file(tmp / "cfg.json", pl::to_json(tiny()).dump());
  const auto bundle = (tmp / "bundle").string();
  EXPECT_EQ(run_cli("generate --config " + (tmp / "cfg.json").string() + " --out " + bundle), 0);
  EXPECT_EQ(run_cli("score " + bundle + " --models psn,psc:prc"), 0);
  EXPECT_EQ(run_cli("evaluate " + bundle + " --k-groups 3,4"), 0);
  EXPECT_EQ(run_cli("evaluate " + bundle + " --k-groups 2"), 1);
  EXPECT_EQ(run_cli("score " + bundle + " --models psi --max-iterations 1"), 2);

  io::write_file(tmp / "bad.json", R"({"seed": 1, "users": 10})");
  EXPECT_EQ(run_cli("generate --config " + (tmp / "bad.json").string() + " --out " + (tmp / "x").string()), 1);
  io::write_file(tmp / "g.csv", "user_id,item_id,bytes\na,x,zz\n");
  EXPECT_EQ(run_cli("ingest --granularity " + (tmp / "g.csv").string() + " --out " + (tmp / "y").string()), 1);
}
