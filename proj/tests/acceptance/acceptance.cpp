// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

// Acceptance run: one PASS/FAIL line per criterion. The only argument is the
// path of the cwalk executable, used for the end-to-end checks.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "cwalk/engine.hpp"
#include "cwalk/error.hpp"
#include "cwalk/metrics.hpp"
#include "cwalk/rater.hpp"
#include "fuzz_corpus.hpp"
#include "support.hpp"

using namespace cwalk;
using namespace cwalk::testing;

namespace {

using Steady = std::chrono::steady_clock;

/// Collects failed expectations for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

double seconds_since(Steady::time_point t0) {
  return std::chrono::duration<double>(Steady::now() - t0).count();
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

int run_cli(const fs::path& cwalk, const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = shell_quote(cwalk.string());
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " >>" + shell_quote(log.string()) + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> dir_contents(const fs::path& dir, const std::string& suffix) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out[name] = read_text(e.path());
    }
  }
  return out;
}

double jsd_bruteforce(const std::map<Edge, double>& p, const std::map<Edge, double>& q) {
  std::set<Edge> keys;
  for (const auto& [e, _] : p) keys.insert(e);
  for (const auto& [e, _] : q) keys.insert(e);
  long double sum = 0.0L;
  for (const auto& e : keys) {
    const long double a = p.count(e) ? p.at(e) : 0.0;
    const long double b = q.count(e) ? q.at(e) : 0.0;
    const long double m = (a + b) / 2.0L;
    if (a > 0) sum += a * std::log(a / m);
    if (b > 0) sum += b * std::log(b / m);
  }
  return static_cast<double>(sum / 2.0L / std::log(2.0L));
}

void metrics_oracle(Check& c) {
  const auto t0 = Steady::now();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int compared = 0;
  double worst = 0.0;
  while (compared < 500) {
    std::map<Edge, double> p, q;
    const int n = 1 + static_cast<int>(rng() % 7);
    double sp = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      const Edge e{"s" + std::to_string(rng() % 6), "s" + std::to_string(rng() % 6)};
      if (rng() % 3) sp += (p[e] += u(rng));
      if (rng() % 3) sq += (q[e] += u(rng));
    }
    if (sp == 0 || sq == 0) continue;
    for (auto& [_, m] : p) m /= sp;
    for (auto& [_, m] : q) m /= sq;
    const PathDistribution P{p}, Q{q};
    const double got = js_divergence(P, Q);
    worst = std::max(worst, std::abs(got - jsd_bruteforce(p, q)));
    c.expect(got == js_divergence(Q, P), "asymmetric pair");
    c.expect(js_divergence(P, P) == 0.0, "identity not exactly 0");
    ++compared;
  }
  c.expect(worst <= 1e-12, "max deviation " + std::to_string(worst));
  const PathDistribution a{{{{"A", "B"}, 0.5}, {{"B", "C"}, 0.5}}};
  const PathDistribution b{{{{"X", "Y"}, 1.0}}};
  c.expect(js_divergence(a, b) == 1.0, "disjoint support is not 1.0");
  c.expect(seconds_since(t0) < 5.0, "runtime over 5 s");
}

void kappa_odds(Check& c) {
  using enum BinaryRating;
  const std::vector a{confusing, confusing, not_confusing, not_confusing};
  const std::vector b{confusing, not_confusing, not_confusing, not_confusing};
  c.expect(cohens_kappa(a, b).kappa == 0.5, "kappa([1,1,0,0],[1,0,0,0]) != 0.5");
  c.expect(cohens_kappa(a, a).kappa == 1.0, "perfect agreement != 1");
  const std::vector ones{confusing, confusing, confusing};
  c.expect(!cohens_kappa(ones, ones).kappa.has_value(), "degenerate marginals gave a value");

  struct Table {
    std::size_t a, b, c, d;
    double expected;
  };
  // (a+.5)(d+.5) / ((b+.5)(c+.5)), worked by hand.
  const std::vector<Table> fixed{{1, 5, 0, 18, 111.0 / 11.0}, {2, 1, 1, 2, 25.0 / 9.0}, {0, 3, 4, 0, 1.0 / 63.0}};
  for (const auto& t : fixed) {
    const double got = corrected_odds_ratio(t.a, t.b, t.c, t.d);
    c.expect(std::abs(got - t.expected) <= 1e-9, "odds ratio off for table starting " + std::to_string(t.a));
  }
  for (std::size_t i = 0; i < 256; ++i) {
    const double v = corrected_odds_ratio(i & 3, (i >> 2) & 3, (i >> 4) & 3, (i >> 6) & 3);
    c.expect(std::isfinite(v) && v > 0, "non-finite odds ratio");
  }
}

void engine_loop(Check& c) {
  const auto t0 = Steady::now();
  const auto prompts = PromptLibrary::load(prompts_dir());
  TempDir dir;
  const auto loop = load_app_graph(write_app(dir.path(), loop_manifest()));
  ScriptedBackend looper(json::parse(read_text(fixtures_dir() / "scripts" / "evaluator_loop.json")));
  SessionConfig config;
  config.with_confusion = true;
  const auto t = run_session(loop, loop.tasks[0], looper, config, prompts, {"loop", AgentKind::scripted, "s", "r", "s"});
  c.expect(t.outcome == Outcome::aborted_stuck, "loop session not aborted_stuck");
  c.expect(t.failsafe_count() == 5, "fail-safe count " + std::to_string(t.failsafe_count()));
  bool detected = false;
  for (const auto& s : t.steps) {
    detected = detected || s.loop_detected;
    if (s.failsafe) {
      c.expect(!s.facilitator_messages.empty() && s.facilitator_messages.front().text == kFailsafeMessage,
               "fail-safe text differs");
    }
  }
  c.expect(detected, "no loop detected");

  const auto graph = load_app_graph(fixtures_dir() / "recipe_app" / "app.json");
  const auto script = json::parse(read_text(fixtures_dir() / "scripts" / "evaluator_a.json"));
  for (const auto& task : graph.tasks) {
    ScriptedBackend optimal(script);
    const auto trace = run_session(graph, task, optimal, config, prompts, {"opt", AgentKind::scripted, "s", "r", "s"});
    const auto summary = summarize(trace, task);
    c.expect(trace.outcome == Outcome::completed, task.id + " not completed");
    c.expect(summary.resolved_step_count == static_cast<int>(summary.path.size()) - 1, task.id + " step count");
    const bool on_correct_path =
        std::find(task.correct_paths.begin(), task.correct_paths.end(), summary.path) != task.correct_paths.end();
    c.expect(on_correct_path, task.id + " path is not a correct path");
    // Branching tasks pool several correct paths, so compare with the one walked.
    const auto reference = task.correct_paths.size() == 1 ? task.correct_paths : std::vector<std::vector<ScreenId>>{summary.path};
    c.expect(js_divergence(path_distribution({summary.path}), path_distribution(reference)) == 0.0,
             task.id + " JSD against its correct path is not 0");
  }
  c.expect(seconds_since(t0) < 2.0, "runtime over 2 s");
}

void protocol_robustness(Check& c) {
  const auto corpus = protocol_fuzz_corpus();
  std::size_t malformed = 0;
  for (const auto& item : corpus) {
    try {
      const auto r = parse_evaluator_response(item.raw, item.mode);
      c.expect(!item.expected, item.name + ": parsed but should fail");
      c.expect(!r.next_action.empty() && !r.possible_actions.empty(), item.name + ": invariant broken");
      c.expect(r.confusion.has_value() == (item.mode == ResponseMode::with_confusion), item.name + ": confusion");
    } catch (const Error& e) {
      ++malformed;
      c.expect(item.expected == e.code(), item.name + ": got " + std::string(errc_name(e.code())));
    } catch (const std::exception& e) {
      c.expect(false, item.name + ": untyped exception " + e.what());
    }
  }
  c.expect(malformed >= 25 && corpus.size() >= 50, "corpus too small");

  // One repair request per turn before the turn counts as stuck.
  TempDir dir;
  const auto graph = load_app_graph(write_app(dir.path(), minimal_manifest()));
  ScriptedBackend garbage(json{{"*", {{"responses", {"{\"current_state\": "}}, {"repeat", true}}}});
  SessionConfig config;
  const auto t = run_session(graph, graph.tasks[0], garbage, config, PromptLibrary::load(prompts_dir()),
                             {"p", AgentKind::scripted, "s", "r", "s"});
  c.expect(t.outcome == Outcome::aborted_stuck, "garbage session not stuck");
  for (const auto& s : t.steps) {
    const bool shape = s.facilitator_messages.size() == 2 &&
                       s.facilitator_messages[0].kind == FacilitatorMessageKind::parse_repair &&
                       s.facilitator_messages[1].kind == FacilitatorMessageKind::failsafe;
    c.expect(shape, "step " + std::to_string(s.index) + " lacks repair-then-failsafe");
  }
}

void end_to_end(Check& c, const fs::path& cwalk) {
  TempDir work;
  const auto fx = fixtures_dir();
  const auto app = (fx / "recipe_app" / "app.json").string();
  const auto log = work / "cli.log";
  const std::string ts = "2026-01-01T00:00:00Z";
  auto cli = [&](const std::vector<std::string>& args) {
    const int rc = run_cli(cwalk, args, log);
    c.expect(rc == 0, "cwalk " + args.front() + " exited " + std::to_string(rc));
  };

  // Replay the checked-in recording twice through walk and once through replay.
  for (const char* out : {"r1", "r2"}) {
    cli({"walk", "--manifest", app, "--backend", "replay:" + (fx / "recordings" / "recipe_b.jsonl").string(),
         "--label", "gpt-sim", "--with-confusion", "--run-id", "rec", "--timestamp", ts, "--out", (work / out).string()});
  }
  cli({"replay", "--recording", (fx / "recordings" / "recipe_b.jsonl").string(), "--out", (work / "r3").string()});
  const auto r1 = dir_contents(work / "r1", ".trace.jsonl");
  c.expect(r1.size() == 3, "expected 3 replayed traces, got " + std::to_string(r1.size()));
  c.expect(r1 == dir_contents(work / "r2", ".trace.jsonl"), "replayed traces differ between executions");
  c.expect(r1 == dir_contents(work / "r3", ".trace.jsonl"), "replay command output differs from walk");

  // Golden report: three scripted runs, the human trace, labels and ratings.
  for (const char x : {'a', 'b', 'c'}) {
    const std::string s(1, x);
    cli({"walk", "--manifest", app, "--backend", "scripted:" + (fx / "scripts" / ("evaluator_" + s + ".json")).string(),
         "--label", "scripted-" + s, "--with-confusion", "--run-id", "g" + s, "--timestamp", ts, "--out",
         (work / "traces").string()});
  }
  for (const auto& e : fs::directory_iterator(fx / "human")) {
    fs::copy_file(e.path(), work / "traces" / e.path().filename());
  }
  cli({"rate-screens", "--manifest", app, "--screens-file", (fx / "screens.jsonl").string(), "--backend",
       "scripted:" + (fx / "scripts" / "rater.json").string(), "--label", "rater", "--run-id", "rate", "--timestamp",
       ts, "--out", (work / "ratings" / "wc.ratings.jsonl").string()});
  cli({"metrics", "--traces", (work / "traces").string(), "--ratings", (work / "ratings").string(), "--human-labels",
       (fx / "human_labels.jsonl").string(), "--manifest", app, "--out", (work / "report").string()});
  c.expect(read_text(work / "report" / "metrics.csv") == read_text(fx / "golden" / "metrics.csv"),
           "metrics.csv differs from the golden file");
  c.expect(read_text(work / "report" / "summary.md") == read_text(fx / "golden" / "summary.md"),
           "summary.md differs from the golden file");
  c.expect(read_text(work / "report" / "metrics.csv").find("\ncompletion,human,") != std::string::npos,
           "report has no human row");
  if (!c.failures.empty()) std::cerr << read_text(log);
}

void rating_pipeline(Check& c, const fs::path& cwalk) {
  c.expect(collapse_rating(ConfusionRating::not_at_all) == BinaryRating::not_confusing, "not_at_all");
  c.expect(collapse_rating(ConfusionRating::slightly) == BinaryRating::confusing, "slightly");
  c.expect(collapse_rating(ConfusionRating::very) == BinaryRating::confusing, "very");

  // Revisit fixture: scripted-b walks home -> notifications -> home, rating
  // home slightly then not_at_all.
  const auto graph = load_app_graph(fixtures_dir() / "recipe_app" / "app.json");
  ScriptedBackend b(json::parse(read_text(fixtures_dir() / "scripts" / "evaluator_b.json")));
  SessionConfig config;
  config.with_confusion = true;
  const auto* task = graph.find_task("view_favorites");
  const auto trace = run_session(graph, *task, b, config, PromptLibrary::load(prompts_dir()),
                                 {"b", AgentKind::scripted, "s", "r", "s"});
  std::map<ScreenId, ConfusionRating> oracle;
  std::size_t revisits = 0;
  for (const auto& s : trace.steps) {
    const auto level = *step_confusion(s);
    auto [it, fresh] = oracle.emplace(s.screen, level);
    if (!fresh) {
      ++revisits;
      if (static_cast<int>(level) > static_cast<int>(it->second)) it->second = level;
    }
  }
  const auto ratings = extract_with_context_ratings(trace);
  c.expect(revisits > 0, "fixture trace has no revisit");
  c.expect(ratings.size() == oracle.size(), "one rating per distinct screen");
  for (const auto& r : ratings) {
    c.expect(oracle.at(r.screen) == r.rating, "max severity differs on " + r.screen);
    c.expect(r.binary == collapse_rating(r.rating), "binary drift on " + r.screen);
  }

  TempDir work;
  const auto fx = fixtures_dir();
  const int rc = run_cli(cwalk,
                         {"rate-screens", "--manifest", (fx / "recipe_app" / "app.json").string(), "--screens-file",
                          (fx / "screens.jsonl").string(), "--backend", "scripted:" + (fx / "scripts" / "rater.json").string(),
                          "--label", "rater", "--run-id", "rate", "--timestamp", "2026-01-01T00:00:00Z", "--jobs", "3",
                          "--out", (work / "wc.ratings.jsonl").string()},
                         work / "cli.log");
  c.expect(rc == 0, "rate-screens exited " + std::to_string(rc));
  c.expect(read_text(work / "wc.ratings.jsonl") == read_text(fx / "golden" / "wc.ratings.jsonl"),
           "ratings file differs from the golden file");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <path to cwalk>\n";
    return 64;
  }
  const fs::path cwalk = fs::absolute(argv[1]);
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"metrics oracle suite", metrics_oracle},
      {"kappa and odds ratio checks", kappa_odds},
      {"engine determinism and loop handling", engine_loop},
      {"protocol robustness", protocol_robustness},
      {"end-to-end fixture replay and golden report", [&](Check& c) { end_to_end(c, cwalk); }},
      {"rating pipeline", [&](Check& c) { rating_pipeline(c, cwalk); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    const auto t0 = Steady::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    std::ostringstream line;
    line << (c.failures.empty() ? "PASS " : "FAIL ") << name << " (" << std::fixed;
    line.precision(3);
    line << seconds_since(t0) << " s)";
    for (const auto& f : c.failures) line << "\n    " << f;
    std::cout << line.str() << std::endl;
    failed += !c.failures.empty();
  }
  return failed == 0 ? 0 : 1;
}
