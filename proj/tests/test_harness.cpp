#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iwatsuka/harness.hpp"

using namespace iwatsuka;
namespace h = iwatsuka::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("iwatsuka_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

h::RunConfig small_config(const fs::path& out) {
  h::RunConfig c;
  c.j_max = 2;
  c.k_points = 32;
  c.spacing = 0.01;
  c.output_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int lab(const std::string& args) {
  const std::string cmd = std::string(IWATSUKA_LAB_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const h::RunConfig c;
  const auto back = h::config_from_json(h::config_to_json(c));
  EXPECT_EQ(h::config_to_json(back), h::config_to_json(c));
  EXPECT_NO_THROW(h::validate_config(c));
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(h::config_from_json(h::json::parse(R"({"profile": {"kind": "sharp", "b_mnus": 1}})")), ConfigError);
  EXPECT_THROW(h::config_from_json(h::json::parse(R"({"colour": 3})")), ConfigError);
}

TEST(Config, RejectsWrongTypesAndSchema) {
  EXPECT_THROW(h::config_from_json(h::json::parse(R"({"j_max": "three"})")), ConfigError);
  EXPECT_THROW(h::config_from_json(h::json::parse(R"({"schema_version": 2})")), ConfigError);
  EXPECT_THROW(h::config_from_json(h::json::parse(R"({"profile": {"kind": "wavy"}})")), ConfigError);
  EXPECT_THROW(h::config_from_json(h::json::parse(R"({"windows": {"j": 1}})")), ConfigError);
}

TEST(Config, RejectsInvalidJsonFile) {
  const auto dir = scratch("badjson");
  std::ofstream(dir / "c.json") << "{ \"j_max\": 3, ";
  EXPECT_THROW(h::load_config((dir / "c.json").string()), ConfigError);
  EXPECT_THROW(h::load_config((dir / "missing.json").string()), ConfigError);
}

TEST(Config, WindowAdmissibility) {
  h::RunConfig c;
  c.profile.b_plus = 2.0;
  EXPECT_THROW(h::validate_config(c), ConfigError);
  c.figure_mode = true;
  EXPECT_NO_THROW(h::validate_config(c));
  h::RunConfig d;
  d.windows = {{1, 0.25}};
  EXPECT_THROW(h::validate_config(d), ConfigError);
  d.windows = {{2, 0.1}};
  EXPECT_THROW(h::validate_config(d), ConfigError);
  h::RunConfig e;
  e.profile.kind = ProfileKind::SmoothLinear;
  e.profile.epsilon = 0.1;
  EXPECT_THROW(h::validate_config(e), ConfigError);
}

TEST(Registry, ContainsRequiredChecksInStableOrder) {
  const auto& reg = h::check_registry();
  EXPECT_GE(reg.size(), 15u);
  std::vector<std::string> ids;
  for (const auto& d : reg) ids.push_back(d.id);
  for (const char* want : {"a9_sandwich", "lemma31_monotone", "a14_lower_bound", "thm44_localization",
                           "b10_comparison", "emp1d_current", "thm71_asymptotic"})
    EXPECT_NE(std::find(ids.begin(), ids.end(), want), ids.end()) << want;
  std::vector<std::string> again;
  for (const auto& d : h::check_registry()) again.push_back(d.id);
  EXPECT_EQ(ids, again);
  std::set<std::string> unique(ids.begin(), ids.end());
  EXPECT_EQ(unique.size(), ids.size());
  for (const auto& d : reg) {
    EXPECT_FALSE(d.anchor.empty());
    EXPECT_NE(std::find(h::command_groups().begin(), h::command_groups().end(), d.group), h::command_groups().end());
  }
}

TEST(Run, EmptyCheckListGivesEmptyReport) {
  const auto out = scratch("empty");
  auto c = small_config(out);
  c.checks = std::vector<std::string>{};
  h::RunContext ctx(c);
  const auto res = h::run(ctx, "verify-all");
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_TRUE(res.reports.empty());
  EXPECT_TRUE(h::report_json(ctx, "verify-all", res)["checks"].empty());
}

TEST(Run, UnknownCommandOrCheckIsConfigError) {
  const auto out = scratch("unknown");
  auto c = small_config(out);
  h::RunContext ctx(c);
  EXPECT_THROW(h::run(ctx, "dance"), ConfigError);
  c.checks = std::vector<std::string>{"no_such_check"};
  h::RunContext ctx2(c);
  EXPECT_THROW(h::run(ctx2, "bands"), ConfigError);
}

TEST(Run, SelectedBandChecksPassAndWriteCsv) {
  const auto out = scratch("bands");
  auto c = small_config(out);
  c.checks = std::vector<std::string>{"a9_sandwich", "lemma31_monotone", "bflimit"};
  h::RunContext ctx(c);
  const auto res = h::run(ctx, "bands");
  ASSERT_EQ(res.reports.size(), 3u);
  for (const auto& r : res.reports) EXPECT_EQ(r.status, CheckStatus::Pass) << r.id << " " << r.note;
  EXPECT_EQ(res.exit_code, 0);
  const auto csv = slurp(out / "bands.csv");
  EXPECT_EQ(csv.rfind("# units", 0), 0u);
  EXPECT_NE(csv.find("k,j,omega,omega_prime_fh,omega_prime_alt,profile_id\n"), std::string::npos);
  EXPECT_NE(csv.find("sharp_1_1.5"), std::string::npos);
}

TEST(Run, BandsCsvIsDeterministic) {
  std::string first;
  for (int rep = 0; rep < 2; ++rep) {
    const auto out = scratch("determinism" + std::to_string(rep));
    auto c = small_config(out);
    c.checks = std::vector<std::string>{"a9_sandwich"};
    h::RunContext ctx(c);
    h::run(ctx, "bands");
    const auto csv = slurp(out / "bands.csv");
    if (rep == 0) first = csv;
    else EXPECT_EQ(csv, first);
  }
}

TEST(Run, FigureModeSkipsWindowChecks) {
  const auto out = scratch("figure");
  auto c = small_config(out);
  c.profile.b_plus = 2.0;
  c.figure_mode = true;
  c.checks = std::vector<std::string>{"a14_lower_bound", "a9_sandwich"};
  h::RunContext ctx(c);
  const auto res = h::run(ctx, "bands");
  ASSERT_EQ(res.reports.size(), 2u);
  EXPECT_EQ(res.reports[0].id, "a9_sandwich");
  EXPECT_EQ(res.reports[1].status, CheckStatus::Skipped);
  EXPECT_NE(h::report_text(ctx, "bands", res).find("r = 2 exceeds sqrt(3)"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli");
  EXPECT_EQ(lab("list-checks"), 0);
  EXPECT_EQ(lab("bands --config " + (out / "missing.json").string()), 2);
  std::ofstream(out / "bad.json") << R"({"profile": {"kind": "sharp", "b_minus": 1, "b_plus": 2}})";
  EXPECT_EQ(lab("bands --config " + (out / "bad.json").string() + " --out " + (out / "o1").string()), 2);
  std::ofstream(out / "ok.json") << R"({"j_max": 1, "k_grid": {"points": 16}, "spacing": 0.02,
                                        "checks": ["a9_sandwich"]})";
  EXPECT_EQ(lab("bands --config " + (out / "ok.json").string() + " --out " + (out / "o2").string()), 0);
  EXPECT_TRUE(fs::exists(out / "o2" / "report.json"));
  EXPECT_TRUE(fs::exists(out / "o2" / "bands.csv"));
  EXPECT_EQ(lab("no-such-command"), 2);
}

TEST(Cli, BundledConfigsParse) {
  for (const char* name : {"ratio2_bands.json", "default.json", "stress.json", "quick.json"}) {
    const auto path = fs::path(IWATSUKA_CONFIG_DIR) / name;
    EXPECT_NO_THROW(h::load_config(path.string())) << name;
  }
}
