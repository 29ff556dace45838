#include <gtest/gtest.h>

#include <fstream>

#include "statesafe/cli.hpp"

using namespace statesafe;
using cli::run_cli;

namespace {

const std::string kSource = STATESAFE_SOURCE_DIR;

io::json strip_volatile(io::json j) {
  j.erase("tool");
  j.erase("duration_ms");
  return j;
}

io::json read_json(const std::string& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in) << path;
  return io::json::parse(in);
}

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST(Bounds, ParseOverridesAndAliases) {
  const auto base = builtin::pair_counter_bounds();
  const auto b = io::parse_bounds("n_max=5,m_min=1,replica_count=3,cap=1000", base);
  EXPECT_EQ(b.int_ranges.at("n").max, 5);
  EXPECT_EQ(b.int_ranges.at("m").min, 1);
  EXPECT_EQ(b.replica_count, 3);
  EXPECT_EQ(b.enumeration_cap, 1000u);
  EXPECT_THROW(io::parse_bounds("k=1", base), Error);
  EXPECT_THROW(io::parse_bounds("n_max=x", base), Error);
  EXPECT_THROW(io::parse_bounds("n_max", base), Error);
  EXPECT_THROW(io::parse_bounds("cap=0", base), Error);
  const auto a = io::parse_bounds("bid_slots=3", builtin::auction_bounds(2, 2, 2));
  EXPECT_EQ(a.domain_sizes.at("bids"), 3);
}

TEST(Bounds, JsonRoundTrip) {
  const auto b = builtin::auction_bounds(3, 2, 2);
  EXPECT_EQ(io::bounds_to_json(b), io::bounds_to_json(io::bounds_from_json(io::bounds_to_json(b), b)));
  EXPECT_THROW(io::bounds_from_json(io::json{{"bids", "two"}}, b), Error);
}

TEST(States, JsonRoundTripOverTheWholeDomain) {
  const Model m(builtin::make_auction_safe());
  for (const auto& s : enumerate_states(m.layout(), 1u << 20)) {
    ASSERT_EQ(io::state_from_json(m.layout(), io::state_to_json(m.layout(), s)), s);
  }
  const auto j = io::state_to_json(m.layout(), *m.spec().initial_state);
  EXPECT_EQ(j.at("status"), "INVALID");
  EXPECT_TRUE(j.at("winner").is_null());
  EXPECT_EQ(j.at("bids").at("b2").at("placed"), false);
  EXPECT_EQ(j.at("tokens").at("r1"), true);
}

TEST(States, MalformedStatesAreSchemaMismatch) {
  const Model m(builtin::make_pair_counter());
  auto kind_of = [&](const io::json& j) {
    try {
      io::state_from_json(m.layout(), j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::DomainTooLarge;
  };
  EXPECT_EQ(kind_of({{"n", 1}}), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of({{"n", 1}, {"m", 13}}), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of({{"n", 1}, {"m", "x"}}), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of({{"n", 1}, {"m", 1}, {"k", 0}}), ErrorKind::SchemaMismatch);
}

TEST(Reports, CounterexamplesReplayAfterJsonRoundTrip) {
  const Model m(builtin::make_auction_unsafe());
  CheckConfig cfg;
  cfg.max_counterexamples_per_assertion = 20;
  const auto report = run_pipeline(builtin::make_auction_unsafe(), cfg);
  const auto j = io::report_to_json(&m, report);
  const auto back = io::report_from_json(&m, io::json::parse(j.dump()));
  EXPECT_EQ(io::report_to_json(&m, back).dump(), j.dump());
  std::size_t n = 0;
  for (const auto& s : back.stages) {
    for (const auto& c : s.counterexamples) {
      EXPECT_TRUE(replay(m, c).reproduces()) << c.assertion_id;
      ++n;
    }
  }
  EXPECT_GT(n, 0u);
}

TEST(Scenarios, SampleFilesMatchTheBuiltins) {
  for (const std::string name : {"fig1_auction", "fig1_auction_tokens"}) {
    auto loaded = io::load_scenario(read_json(kSource + "/samples/scenarios/" + name + ".json"));
    const auto t = sim::run_scenario(*loaded.model, loaded.scenario);
    const auto b = sim::make_scenario(name);
    const Model bm(builtin::make(b.spec, b.bounds));
    const auto u = sim::run_scenario(bm, b);
    EXPECT_EQ(io::trace_to_json(*loaded.model, t), io::trace_to_json(bm, u)) << name;
  }
}

TEST(Scenarios, TraceReplaysFromItsJson) {
  const Model m(builtin::make_gset());
  const auto t = sim::run_random(m, {9, 300, 0.3, 0.2, true});
  const auto j = io::trace_to_json(m, t);
  const auto s = io::trace_scenario_from_json(m, io::json::parse(j.dump()));
  const auto u = sim::run_scenario(m, s);
  EXPECT_EQ(u.final_states, t.final_states);
  auto ju = io::trace_to_json(m, u);
  auto jt = j;
  jt.erase("seed");
  jt.erase("scenario");
  ju.erase("scenario");
  EXPECT_EQ(ju, jt);
}

TEST(Scenarios, MalformedDocumentsAreRejected) {
  auto kind_of = [](const std::string& text) {
    try {
      io::load_scenario(io::json::parse(text));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::DomainTooLarge;
  };
  EXPECT_EQ(kind_of(R"({"events": []})"), ErrorKind::MalformedEvent);
  EXPECT_EQ(kind_of(R"({"spec": "nope", "events": []})"), ErrorKind::UnknownSpec);
  EXPECT_EQ(kind_of(R"({"spec": "gset"})"), ErrorKind::MalformedEvent);
  EXPECT_EQ(kind_of(R"({"spec": "gset", "events": [{"teleport": {}}]})"), ErrorKind::MalformedEvent);
  EXPECT_EQ(kind_of(R"({"spec": "gset", "events": [{"invoke": {"replica": "r9", "op": "add", "params": {"e": "e1"}}}]})"),
            ErrorKind::MalformedEvent);
  EXPECT_EQ(kind_of(R"({"spec": "gset", "events": [{"invoke": {"replica": "r1", "op": "add"}}]})"),
            ErrorKind::MalformedEvent);
  EXPECT_EQ(kind_of(R"({"spec": "gset", "events": [{"deliver": 3}]})"), ErrorKind::MalformedEvent);
  EXPECT_EQ(kind_of(R"({"spec": "gset", "policy": "retry", "events": []})"), ErrorKind::MalformedEvent);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({"check", "gset"}).code, 0);
  EXPECT_EQ(run_cli({"check", "pair_counter"}).code, 1);
  EXPECT_EQ(run_cli({"check", "auction_safe", "--bounds", "cap=10"}).code, 3);
  EXPECT_EQ(run_cli({"check", "nope"}).code, 2);
  EXPECT_EQ(run_cli({"check", "gset", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"check", "gset", "--bounds", "zz=1"}).code, 2);
  EXPECT_EQ(run_cli({"check", "gset", "--stage", "nope"}).code, 2);
  EXPECT_EQ(run_cli({"check", "gset", "--max-cex", "0"}).code, 2);
  EXPECT_EQ(run_cli({"check", "gset", "--leastness", "sampled:x"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"simulate"}).code, 2);
  EXPECT_EQ(run_cli({"simulate", "--random"}).code, 2);
  EXPECT_EQ(run_cli({"simulate", "--builtin", "fig1_auction"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "--builtin", "fig1_auction", "--spec", "auction_safe"}).code, 0);
  EXPECT_EQ(run_cli({"simulate", "--builtin", "fig1_auction", "--spec", "auction_safe", "--policy", "halt"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "--random", "--spec", "gset", "--steps", "200", "--drop", "0.3", "--dup", "0.2"}).code, 0);
  EXPECT_EQ(run_cli({"simulate", "--random", "--spec", "gset", "--drop", "1.5"}).code, 2);
  EXPECT_EQ(run_cli({"simulate", "/nonexistent.json"}).code, 2);
  EXPECT_EQ(run_cli({"list"}).code, 0);
  EXPECT_EQ(run_cli({"list", "--spec", "nope"}).code, 2);
}

TEST(Cli, MalformedScenarioFileIsUsageError) {
  const auto bad_json = write_temp("bad.json", "{not json");
  const auto r = run_cli({"simulate", bad_json});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("MalformedEvent"), std::string::npos);
  const auto bad_event = write_temp("bad_event.json", R"({"spec": "gset", "events": [{"deliver": "m1"}]})");
  const auto u = run_cli({"simulate", bad_event});
  EXPECT_EQ(u.code, 2);
  EXPECT_NE(u.err.find("UnknownMessage"), std::string::npos);
}

TEST(Cli, StageFilterRunsOneStage) {
  const auto r = run_cli({"check", "pair_counter", "--stage", "sequential_safety", "--format", "json"});
  EXPECT_EQ(r.code, 0);
  const auto j = io::json::parse(r.out);
  for (const auto& s : j.at("stages")) {
    EXPECT_EQ(s.at("verdict"), s.at("stage") == "SequentialSafety" ? "pass" : "skipped");
  }
}

TEST(Cli, ListShowsSpecsAndOperations) {
  const auto all = run_cli({"list"});
  for (const auto& b : builtin::registry()) EXPECT_NE(all.out.find(b.name), std::string::npos);
  EXPECT_NE(all.out.find("fig1_auction_tokens"), std::string::npos);
  const auto one = run_cli({"list", "--spec", "auction_safe"});
  for (const char* op : {"start_auction", "place_bid", "close_auction", "release_token"}) {
    EXPECT_NE(one.out.find(op), std::string::npos) << op;
  }
  EXPECT_NE(one.out.find("forall r in replicas: !tokens[r]"), std::string::npos);
  const auto j = io::json::parse(run_cli({"list", "--format", "json"}).out);
  EXPECT_EQ(j.at("specs").size(), builtin::registry().size());
}

TEST(Cli, JsonOutputMatchesGoldenFiles) {
  struct Case {
    std::vector<std::string> args;
    const char* golden;
  };
  const std::vector<Case> cases = {
      {{"check", "pair_counter", "--format", "json"}, "check_pair_counter.json"},
      {{"check", "auction_unsafe", "--format", "json"}, "check_auction_unsafe.json"},
      {{"simulate", "--builtin", "fig1_auction", "--format", "json"}, "fig1_auction.json"},
      {{"simulate", "--builtin", "fig1_auction", "--spec", "auction_safe", "--format", "json"}, "fig1_auction_safe.json"},
  };
  for (const auto& c : cases) {
    const auto r = run_cli(c.args);
    EXPECT_EQ(strip_volatile(io::json::parse(r.out)), strip_volatile(read_json(kSource + "/tests/golden/" + c.golden)))
        << c.golden;
  }
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  const std::vector<std::vector<std::string>> commands = {
      {"check", "auction_safe", "--format", "json"},
      {"check", "auction_safe", "--bounds", "replicas=3", "--format", "json"},
      {"simulate", "--random", "--spec", "auction_safe", "--seed", "4", "--steps", "500", "--drop", "0.3", "--dup", "0.2",
       "--format", "json"},
      {"list", "--format", "json"},
  };
  for (const auto& c : commands) {
    const auto a = strip_volatile(io::json::parse(run_cli(c).out)).dump();
    const auto b = strip_volatile(io::json::parse(run_cli(c).out)).dump();
    EXPECT_EQ(a, b) << c[0] << " " << c[1];
  }
}

TEST(Cli, JobsDoNotChangeTheReport) {
  auto run = [](const char* jobs) {
    auto j = strip_volatile(io::json::parse(run_cli({"check", "pair_counter", "--jobs", jobs, "--format", "json"}).out));
    j["config"].erase("jobs");
    return j.dump();
  };
  EXPECT_EQ(run("1"), run("4"));
}
