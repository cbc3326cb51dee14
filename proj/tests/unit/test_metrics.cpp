// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include <doctest.h>

#include <cmath>
#include <random>

#include "cwalk/error.hpp"
#include "cwalk/metrics.hpp"
#include "support.hpp"

using namespace cwalk;
using namespace cwalk::testing;

namespace {

constexpr auto C = BinaryRating::confusing;
constexpr auto N = BinaryRating::not_confusing;

PathDistribution dist(std::initializer_list<std::pair<Edge, double>> entries) {
  PathDistribution d;
  for (const auto& [e, m] : entries) d.mass[e] = m;
  return d;
}

// Straight from the definition, natural log converted to bits at the end.
double jsd_oracle(const std::map<Edge, double>& p, const std::map<Edge, double>& q) {
  std::set<Edge> keys;
  for (const auto& [e, _] : p) keys.insert(e);
  for (const auto& [e, _] : q) keys.insert(e);
  double sum = 0.0;
  for (const auto& e : keys) {
    const double a = p.count(e) ? p.at(e) : 0.0;
    const double b = q.count(e) ? q.at(e) : 0.0;
    const double m = (a + b) / 2.0;
    if (a > 0) sum += a * std::log(a / m);
    if (b > 0) sum += b * std::log(b / m);
  }
  return sum / 2.0 / std::log(2.0);
}

double kappa_oracle(const std::vector<BinaryRating>& a, const std::vector<BinaryRating>& b) {
  const double n = static_cast<double>(a.size());
  double agree = 0, pa = 0, pb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    pa += a[i] == C;
    pb += b[i] == C;
  }
  const double po = agree / n;
  const double pe = (pa / n) * (pb / n) + (1 - pa / n) * (1 - pb / n);
  return (po - pe) / (1 - pe);
}

SessionTrace finished(const std::string& id, AgentKind kind, const std::string& label, const Task& task,
                      const std::vector<ScreenId>& path, Outcome outcome) {
  SessionTrace t;
  t.session_id = id;
  t.agent_kind = kind;
  t.backend_label = label;
  t.run_label = label + "-run1";
  t.app_name = "app";
  t.task = task;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    TraceStep s;
    s.index = static_cast<int>(i);
    s.screen = path[i];
    s.response = HumanStepInput{"go", std::nullopt, "t", std::nullopt};
    s.resolved = Transition{path[i], "go " + path[i + 1], {}, TransitionKind::tap, path[i + 1]};
    t.steps.push_back(s);
  }
  t.outcome = outcome;
  return t;
}

}  // namespace

TEST_CASE("JSD hand-computed value") {
  const auto p = dist({{{"A", "B"}, 0.5}, {{"A", "C"}, 0.5}});
  const auto q = dist({{{"A", "B"}, 1.0}});
  // 0.5*(0.5*log2(2/3) + 0.5*log2(2)) + 0.5*log2(4/3)
  CHECK(js_divergence(p, q) == doctest::Approx(0.311278).epsilon(1e-6));
  CHECK(js_divergence(p, q) == doctest::Approx(jsd_oracle(p.mass, q.mass)).epsilon(1e-12));
  CHECK(js_divergence(p, p) == 0.0);
  CHECK(js_divergence(dist({{{"A", "B"}, 1.0}}), dist({{{"C", "D"}, 1.0}})) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(js_divergence(p, q, false), doctest::Contains("SupportMismatch"), Error);
}

TEST_CASE("path distributions") {
  SUBCASE("pooled edge counts") {
    const auto d = path_distribution({{"A", "B", "C"}, {"A", "D", "C"}});
    CHECK(d.mass.size() == 4);
    for (const auto& [e, m] : d.mass) CHECK(m == doctest::Approx(0.25));
  }
  SUBCASE("additive smoothing over a declared support") {
    const auto d = path_distribution({{"A", "B"}}, {{"A", "B"}, {"A", "C"}}, 1.0);
    CHECK(d.mass.at({"A", "B"}) == doctest::Approx(2.0 / 3.0));
    CHECK(d.mass.at({"A", "C"}) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("unsmoothed unobserved support") {
    CHECK_THROWS_WITH_AS(path_distribution({{"A", "B"}}, {{"A", "C"}}), doctest::Contains("ZeroMassSupport"), Error);
  }
  SUBCASE("nothing to distribute") {
    CHECK_THROWS_WITH_AS(path_distribution({}), doctest::Contains("EmptyPaths"), Error);
    CHECK_THROWS_WITH_AS(path_distribution({{"A"}}), doctest::Contains("EmptyPaths"), Error);
    CHECK_THROWS_WITH_AS(path_distribution({{"A", "B"}}, {}, -1.0), doctest::Contains("InvalidConfig"), Error);
  }
  CHECK(path_edges({"A", "B", "A"}) == std::vector<Edge>{{"A", "B"}, {"B", "A"}});
}

TEST_CASE("property: JSD matches the oracle on random distributions") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 300; ++round) {
    std::map<Edge, double> p, q;
    const int n = 1 + static_cast<int>(rng() % 8);
    double sp = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      const Edge e{"S" + std::to_string(i), "S" + std::to_string(i + 1)};
      if (rng() % 4) sp += (p[e] = u(rng));
      if (rng() % 4) sq += (q[e] = u(rng));
    }
    if (sp == 0 || sq == 0) continue;
    for (auto& [_, m] : p) m /= sp;
    for (auto& [_, m] : q) m /= sq;
    PathDistribution P{p}, Q{q};
    const double j = js_divergence(P, Q);
    CHECK(j == doctest::Approx(jsd_oracle(p, q)).epsilon(1e-12));
    CHECK(j == doctest::Approx(js_divergence(Q, P)).epsilon(1e-15));
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
    CHECK(js_divergence(P, P) == doctest::Approx(0.0));
  }
}

TEST_CASE("property: path distributions sum to one") {
  std::mt19937 rng(5);
  for (int round = 0; round < 200; ++round) {
    std::vector<std::vector<ScreenId>> paths(1 + rng() % 4);
    for (auto& path : paths) {
      path.resize(2 + rng() % 6);
      for (auto& s : path) s = std::string(1, static_cast<char>('A' + rng() % 5));
    }
    const double alpha = (rng() % 3) * 0.5;
    std::set<Edge> support;
    if (alpha > 0) support.insert({"Y", "Z"});
    const auto d = path_distribution(paths, support, alpha);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& [_, m] : d.mass) CHECK(m > 0.0);
  }
}

TEST_CASE("Cohen's kappa") {
  const std::vector a{C, C, N, N};
  const std::vector b{C, N, N, N};
  const auto k = cohens_kappa(a, b, "x", "y");
  CHECK(k.kappa == doctest::Approx(0.5));
  CHECK(k.n_items == 4);
  CHECK(k.rater_a == "x");
  CHECK(cohens_kappa(a, a).kappa == doctest::Approx(1.0));
  const std::vector flipped{N, N, C, C};
  CHECK(cohens_kappa(a, flipped).kappa == doctest::Approx(-1.0));
  const std::vector all{C, C, C};
  CHECK_FALSE(cohens_kappa(all, all).kappa.has_value());
  CHECK_THROWS_WITH_AS(cohens_kappa(a, all), doctest::Contains("LengthMismatch"), Error);
  CHECK_THROWS_WITH_AS(cohens_kappa(std::vector<BinaryRating>{}, std::vector<BinaryRating>{}),
                       doctest::Contains("EmptyInput"), Error);
}

TEST_CASE("property: kappa agrees with the float formula and is symmetric") {
  std::mt19937 rng(11);
  for (int round = 0; round < 300; ++round) {
    const auto n = 1 + rng() % 30;
    std::vector<BinaryRating> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng() % 2 ? C : N;
      b[i] = rng() % 3 ? a[i] : (rng() % 2 ? C : N);
    }
    const auto k = cohens_kappa(a, b);
    const auto k2 = cohens_kappa(b, a);
    CHECK(k.kappa.has_value() == k2.kappa.has_value());
    if (!k.kappa) continue;
    CHECK(*k.kappa == doctest::Approx(kappa_oracle(a, b)).epsilon(1e-9));
    CHECK(*k.kappa == doctest::Approx(*k2.kappa));
    CHECK(*k.kappa <= 1.0);
  }
}

TEST_CASE("cross tabulation with corrected odds ratio") {
  CHECK(corrected_odds_ratio(1, 5, 0, 18) == doctest::Approx(111.0 / 11.0));
  CHECK(corrected_odds_ratio(1, 5, 0, 18) == doctest::Approx(10.0909).epsilon(1e-5));
  CHECK(corrected_odds_ratio(0, 0, 0, 0) == doctest::Approx(1.0));

  const std::vector llm{C, C, N, N, C, N};
  const std::vector human{C, N, C, N, C, N};
  const auto t = failure_crosstab(llm, human);
  CHECK(t.a == 2);
  CHECK(t.b == 1);
  CHECK(t.c == 1);
  CHECK(t.d == 2);
  CHECK(t.total() == 6);
  CHECK(t.odds_ratio == doctest::Approx(2.5 * 2.5 / (1.5 * 1.5)));
  CHECK_THROWS_WITH_AS(failure_crosstab(llm, std::vector{C}), doctest::Contains("LengthMismatch"), Error);
}

TEST_CASE("completion rate") {
  Task task;
  task.id = "t";
  std::vector<SessionTrace> ts{finished("1", AgentKind::llm, "m", task, {"A", "B"}, Outcome::completed),
                               finished("2", AgentKind::llm, "m", task, {"A"}, Outcome::aborted_stuck),
                               finished("3", AgentKind::llm, "m", task, {"A"}, Outcome::aborted_max_steps)};
  CHECK(completion_rate(ts) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_WITH_AS(completion_rate(std::vector<SessionTrace>{}), doctest::Contains("EmptyInput"), Error);
}

TEST_CASE("report over a small synthetic study") {
  Task task;
  task.id = "t";
  task.start_screen = "A";
  task.goal_screens = {"C"};
  task.correct_paths = {{"A", "B", "C"}};

  ReportInputs in;
  in.traces = {finished("h1", AgentKind::human, "human", task, {"A", "B", "C"}, Outcome::completed),
               finished("m1", AgentKind::llm, "gpt", task, {"A", "B", "A", "B", "C"}, Outcome::completed),
               finished("m2", AgentKind::llm, "gemini", task, {"A"}, Outcome::aborted_stuck)};
  in.ratings = {make_rating("app", "t", "A", ConfusionRating::very, "r", RatingMode::without_context, "gpt-run1"),
                make_rating("app", "t", "B", ConfusionRating::not_at_all, "r", RatingMode::without_context, "gpt-run1")};
  in.human_labels = std::vector<HumanLabel>{{"t", "A", true, {}}, {"t", "B", true, {}}};
  in.catalog.tasks = {"t"};
  in.catalog.screens = {"A", "B", "C"};

  const auto r = build_report(in, GroupBy::agent_kind);
  REQUIRE(r.completion.size() == 2);
  CHECK(r.completion[0].group == "human");
  CHECK(r.completion[1].group == "llm");
  CHECK(r.completion[1].rate == doctest::Approx(0.5));

  // Steps cover completed traces only: the LLM needed 4 transitions.
  const auto llm_steps = std::find_if(r.steps.begin(), r.steps.end(), [](const auto& s) { return s.group == "llm"; });
  REQUIRE(llm_steps != r.steps.end());
  CHECK(llm_steps->n_completed == 1);
  CHECK(llm_steps->mean_steps == doctest::Approx(4.0));

  std::map<std::string, std::optional<double>> jsd;
  for (const auto& row : r.jsd) jsd[row.session_id] = row.jsd;
  CHECK(jsd.at("h1") == doctest::Approx(0.0));
  // Observed {AB:2, BA:1, BC:1}/4 against {AB:1/2, BC:1/2}.
  const double expected = jsd_oracle({{{"A", "B"}, 0.5}, {{"B", "A"}, 0.25}, {{"B", "C"}, 0.25}},
                                     {{{"A", "B"}, 0.5}, {{"B", "C"}, 0.5}});
  CHECK(*jsd.at("m1") == doctest::Approx(expected).epsilon(1e-12));
  CHECK_FALSE(jsd.at("m2").has_value());

  REQUIRE(r.crosstabs.size() == 1);
  CHECK(r.crosstabs[0].rater == "gpt-run1/without_context");
  CHECK(r.crosstabs[0].table.a == 1);
  CHECK(r.crosstabs[0].table.c == 1);

  const auto csv = render_csv(r);
  CHECK(csv.rfind("table,group,task,item,metric,value\n", 0) == 0);
  CHECK(csv.find("completion,llm,,,completion_rate,0.500000\n") != std::string::npos);
  CHECK(csv.find("jsd,llm,app/t,m2,jsd,n/a\n") != std::string::npos);
  const auto md = render_summary(r);
  CHECK(md.find("| llm |") != std::string::npos);

  auto grouped = build_report(in, GroupBy::backend_label);
  CHECK(grouped.completion.size() == 3);

  in.human_labels = std::vector<HumanLabel>{{"t", "Q", true, {}}};
  CHECK_THROWS_WITH_AS(build_report(in, GroupBy::agent_kind), doctest::Contains("UnknownScreen"), Error);
}

TEST_CASE("group-by names") {
  for (auto g : {GroupBy::agent_kind, GroupBy::backend_label, GroupBy::run}) CHECK(parse_group_by(to_string(g)) == g);
  CHECK_FALSE(parse_group_by("model"));
}
