#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cara/cli.hpp"
#include "fixtures.hpp"

using namespace cara;
using namespace cara::cli;

namespace {

ExperimentConfig fig_config(const SystemParams& s, Task task) {
  ExperimentConfig c;
  c.system = s;
  c.task = task;
  c.output.boundary_samples = 64;
  return c;
}

std::vector<std::string> csv_lines(const Table& t) {
  std::ostringstream os;
  write_csv(os, t);
  std::vector<std::string> lines;
  std::string text = os.str(), line;
  std::size_t pos = 0;
  while (true) {
    const auto e = text.find("\r\n", pos);
    if (e == std::string::npos) break;
    lines.push_back(text.substr(pos, e - pos));
    pos = e + 2;
  }
  EXPECT_EQ(pos, text.size());
  return lines;
}

std::size_t column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == name) return i;
  ADD_FAILURE() << "no column " << name;
  return 0;
}

json sample_json() {
  return json::parse(R"({
    "system": {
      "node1": {"pi_good": 0.8, "eps_good": 0.2, "eps_bad": 0.2},
      "node2": {"pi_good": 0.7, "eps_good": 0.2, "eps_bad": 0.2},
      "reception": {"q1_solo": 1.0, "q1_with_bad": 0.2, "q1_with_good": 0.1,
                    "q2_solo": 0.9, "q2_with_bad": 0.2, "q2_with_good": 0.1}
    },
    "task": "compare",
    "grid": {"lambda1": {"start": 0.0, "stop": 0.1, "step": 0.05},
             "lambda2": {"start": 0.0, "stop": 0.2, "step": 0.1}},
    "sim": {"horizon": 1000, "seeds": [1, 2], "policy": "cara_dominant", "dominant_node": 1,
            "p": [0.4, 0.6], "channel": {"mode": "markov", "persistence": [0.5, 0.5]}},
    "output": {"format": "json", "band": 0.01},
    "workers": 2
  })");
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const auto c = from_json(sample_json());
  EXPECT_EQ(c.system, test::fig1());
  EXPECT_EQ(c.task, Task::Compare);
  ASSERT_TRUE(c.grid);
  EXPECT_EQ(c.grid->points().size(), 9u);
  EXPECT_EQ(c.sim.policy, Policy::dominant(1));
  EXPECT_EQ(c.sim.channel.mode, ChannelMode::TwoStateMarkov);
  EXPECT_EQ(c.output.format, OutputFormat::Json);
  EXPECT_EQ(c.workers, 2u);
  EXPECT_EQ(from_json(to_json(c)), c);

  ExperimentConfig d;
  d.lcq = LcqSystemParams{{{0.5, 0.1, 0.9}, {0.5, 0.1, 0.9}, {0.5, 0.1, 0.9}}};
  d.sim.warmup = 7;
  EXPECT_EQ(from_json(to_json(d)), d);
}

TEST(Config, RejectsMalformedInput) {
  auto bad = [](auto mutate) {
    auto j = sample_json();
    mutate(j);
    return j;
  };
  EXPECT_THROW(from_json(json::array()), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j.erase("system"); })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["system"]["node1"].erase("pi_good"); })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["system"]["node1"]["pi_good"] = "x"; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["task"] = "plot"; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["grid"]["lambda1"]["step"] = 0.0; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["grid"]["lambda2"]["stop"] = 1.5; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["sim"]["p"] = {0.5}; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["sim"]["policy"] = "tdma"; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["output"]["format"] = "xml"; })), ConfigError);
  EXPECT_THROW(from_json(bad([](json& j) { j["workers"] = 0; })), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, InvalidSystemRejectedBeforeRunning) {
  auto c = fig_config(test::fig1(), Task::Region);
  c.system.reception.q1_with_good = 0.5;  // above q1_with_bad
  EXPECT_THROW(run_task(c), InvalidParams);
  c.allow_degenerate = true;
  c.system.reception.q1_with_good = 0.2;  // equal is fine when degenerate
  EXPECT_NO_THROW(run_task(c));
}

TEST(Grid, InclusiveRange) {
  EXPECT_EQ((Range{0.0, 0.3, 0.1}).points().size(), 4u);
  EXPECT_EQ((Range{0.015, 0.3, 0.015}).points().size(), 20u);
  EXPECT_TRUE((Range{0.3, 0.2, 0.1}).points().empty());
}

TEST(Csv, QuotingFollowsRfc4180) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
  Table t{{"a", "b,c"}, {{std::string("x\"y"), 0.5}, {std::int64_t{3}, true}}};
  const auto lines = csv_lines(t);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "a,\"b,c\"");
  EXPECT_EQ(lines[1], "\"x\"\"y\",0.5");
  EXPECT_EQ(lines[2], "3,true");
}

TEST(Csv, DoublesRoundTrip) {
  const double v = 50176.0 / 234375.0;
  EXPECT_EQ(std::stod(format_cell(v)), v);
}

TEST(Json, TableRecords) {
  Table t{{"name", "x"}, {{std::string("p"), 0.25}}};
  const auto j = table_to_json(t);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["name"], "p");
  EXPECT_EQ(j[0]["x"], 0.25);
}

TEST(Region, NonConvexRows) {
  const auto res = run_task(fig_config(test::fig1(), Task::Region));
  const auto& t = res.table;
  EXPECT_EQ(t.columns, (std::vector<std::string>{"segment_tag", "lambda1", "lambda2", "region_label"}));
  std::map<std::string, std::size_t> count;
  for (const auto& r : t.rows) ++count[std::get<std::string>(r[3])];
  // Curved: 2 line endpoints + 64 curve samples + 2 line endpoints.
  EXPECT_EQ(count["cara_eps"], 68u);
  EXPECT_EQ(count["cara_perfect"], 68u);
  EXPECT_EQ(count["aloha"], 68u);
  EXPECT_EQ(count["lcq"], 6u);
  const auto& first = t.rows.front();
  EXPECT_EQ(std::get<double>(first[1]), 0.0);
  EXPECT_NEAR(std::get<double>(first[2]), 0.504, 1e-12);
  EXPECT_NE(res.summary.find("non_convex"), std::string::npos) << res.summary;
  EXPECT_EQ(csv_lines(t).size(), t.rows.size() + 1);
}

TEST(Region, ConvexIsPolygon) {
  const auto res = run_task(fig_config(test::fig2(), Task::Region));
  std::size_t eps_rows = 0;
  for (const auto& r : res.table.rows)
    if (std::get<std::string>(r[3]) == "cara_eps") {
      ++eps_rows;
      EXPECT_EQ(std::get<std::string>(r[0]), "line");
    }
  EXPECT_EQ(eps_rows, 4u);
}

TEST(Region, ZeroErrorMatchesPerfectPath) {
  const auto res = run_task(fig_config(with_perfect_csi(test::fig1()), Task::Region));
  std::vector<std::vector<Cell>> eps, perfect;
  for (const auto& r : res.table.rows) {
    const auto label = std::get<std::string>(r[3]);
    if (label == "cara_eps") eps.push_back({r[0], r[1], r[2]});
    if (label == "cara_perfect") perfect.push_back({r[0], r[1], r[2]});
  }
  EXPECT_EQ(eps, perfect);
}

TEST(Region, AlohaTaskFailsWithoutGap) {
  auto c = fig_config(test::fig1(), Task::AlohaRegion);
  c.system.node2.pi_good = 0.0;
  EXPECT_THROW(run_task(c), NonPositiveAlohaGap);
  c.task = Task::Region;
  const auto res = run_task(c);
  EXPECT_NE(res.summary.find("aloha: skipped"), std::string::npos);
}

TEST(Compare, EmptyGridGivesEmptyReport) {
  auto c = fig_config(test::fig1(), Task::Compare);
  c.grid = GridSpec{{0.3, 0.2, 0.1}, {0.0, 0.1, 0.1}};
  const auto res = run_task(c);
  EXPECT_TRUE(res.table.rows.empty());
  EXPECT_EQ(res.scored_points, 0u);
  EXPECT_EQ(csv_lines(res.table).size(), 1u);
}

TEST(Compare, DeepInsideGridIsStable) {
  auto c = fig_config(test::fig1(), Task::Compare);
  c.grid = GridSpec{{0.01, 0.03, 0.01}, {0.01, 0.03, 0.01}};
  c.sim.horizon = 100'000;
  c.sim.seeds = {1, 2};
  c.workers = 4;
  const auto res = run_task(c);
  ASSERT_EQ(res.table.rows.size(), 18u);
  const auto vcol = column(res.table, "verdict");
  const auto bcol = column(res.table, "band_class");
  for (const auto& r : res.table.rows) {
    EXPECT_EQ(std::get<std::string>(r[vcol]), "stable");
    EXPECT_EQ(std::get<std::string>(r[bcol]), "inside");
  }
  EXPECT_EQ(res.scored_points, 18u);
  EXPECT_EQ(res.agreement, 1.0);
}

TEST(Compare, WorkerCountDoesNotChangeResults) {
  auto c = fig_config(test::fig1(), Task::Sweep);
  c.grid = GridSpec{{0.05, 0.25, 0.1}, {0.05, 0.25, 0.1}};
  c.sim.horizon = 20'000;
  c.workers = 1;
  const auto a = run_task(c);
  c.workers = 8;
  const auto b = run_task(c);
  EXPECT_EQ(csv_lines(a.table), csv_lines(b.table));
}

TEST(BandClass, UsesDownClosedness) {
  auto inside_unit = [](const ArrivalRates& r) { return r.lambda1 + r.lambda2 < 1.0; };
  EXPECT_EQ(classify_with_band({0.2, 0.2}, 0.05, inside_unit), BandClass::Inside);
  EXPECT_EQ(classify_with_band({0.48, 0.5}, 0.05, inside_unit), BandClass::Boundary);
  EXPECT_EQ(classify_with_band({0.6, 0.6}, 0.05, inside_unit), BandClass::Outside);
}

TEST(Simulate, OneRowPerSeed) {
  auto c = fig_config(test::fig1(), Task::Simulate);
  c.sim.rates = {0.1, 0.05};
  c.sim.seeds = {1, 2, 3};
  c.sim.horizon = 20'000;
  const auto res = run_task(c);
  EXPECT_EQ(res.table.rows.size(), 3u);
  EXPECT_EQ(res.failures, 0u);

  c.sim.rates = {0.1};
  const auto bad = run_task(c);
  EXPECT_EQ(bad.failures, 3u);
  EXPECT_FALSE(std::get<std::string>(bad.table.rows[0][column(bad.table, "error")]).empty());
}

TEST(Dominance, SilentSystemsIdentical) {
  auto c = fig_config(test::fig1(), Task::DominanceCheck);
  c.sim.p = {0.0, 0.0};
  c.sim.rates = {0.0, 0.0};
  c.sim.seeds = {1, 2};
  c.sim.horizon = 5'000;
  const auto res = run_task(c);
  EXPECT_EQ(res.failures, 0u);
  for (const auto& r : res.table.rows) EXPECT_TRUE(std::get<bool>(r[column(res.table, "identical")]));
}

TEST(Dominance, DecoupledSeedsReportViolations) {
  auto c = fig_config(test::fig1(), Task::DominanceCheck);
  c.sim.rates = {0.2, 0.2};
  c.sim.seeds = {1, 2, 3};
  c.sim.horizon = 50'000;
  EXPECT_EQ(run_task(c).failures, 0u);
  c.sim.decouple_seeds = true;
  const auto res = run_task(c);
  EXPECT_GT(res.failures, 0u);
  EXPECT_NE(res.summary.find("first violation"), std::string::npos);
}

TEST(ConfigFile, LoadsFromDisk) {
  const auto path = std::filesystem::temp_directory_path() / "cara_cli_test_config.json";
  {
    std::ofstream os(path);
    os << sample_json().dump();
  }
  EXPECT_EQ(load_config(path.string()), from_json(sample_json()));
  {
    std::ofstream os(path);
    os << "{ not json";
  }
  EXPECT_THROW(load_config(path.string()), ConfigError);
  std::filesystem::remove(path);
}
