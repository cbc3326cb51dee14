// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cwalk/error.hpp"

namespace cwalk {

std::set<Edge> PathDistribution::support() const {
  std::set<Edge> s;
  for (const auto& [e, _] : mass) s.insert(e);
  return s;
}

double PathDistribution::total() const {
  double t = 0.0;
  for (const auto& [_, m] : mass) t += m;
  return t;
}

std::vector<Edge> path_edges(const std::vector<ScreenId>& path) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) edges.emplace_back(path[i], path[i + 1]);
  return edges;
}

double completion_rate(std::span<const SessionTrace> traces) {
  if (traces.empty()) throw Error(Errc::EmptyInput, "no traces");
  const auto done = std::count_if(traces.begin(), traces.end(),
                                  [](const SessionTrace& t) { return t.outcome == Outcome::completed; });
  return static_cast<double>(done) / static_cast<double>(traces.size());
}

PathDistribution path_distribution(const std::vector<std::vector<ScreenId>>& paths, const std::set<Edge>& support,
                                   double alpha) {
  if (paths.empty()) throw Error(Errc::EmptyPaths, "no paths");
  if (!(alpha >= 0.0)) throw Error(Errc::InvalidConfig, "smoothing alpha must be >= 0");

  std::map<Edge, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& path : paths) {
    for (auto& e : path_edges(path)) {
      ++counts[std::move(e)];
      ++total;
    }
  }
  std::set<Edge> full = support;
  for (const auto& [e, _] : counts) full.insert(e);
  if (full.empty()) throw Error(Errc::EmptyPaths, "paths contain no edges");
  if (alpha == 0.0) {
    for (const auto& e : full) {
      if (!counts.count(e)) {
        throw Error(Errc::ZeroMassSupport, "edge " + e.first + "->" + e.second + " is unobserved and alpha is 0");
      }
    }
  }

  const double denom = static_cast<double>(total) + alpha * static_cast<double>(full.size());
  PathDistribution dist;
  for (const auto& e : full) {
    auto it = counts.find(e);
    const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    dist.mass.emplace(e, (c + alpha) / denom);
  }
  return dist;
}

double js_divergence(const PathDistribution& p, const PathDistribution& q, bool union_support) {
  if (!union_support && p.support() != q.support()) {
    throw Error(Errc::SupportMismatch, "distributions are defined over different edge sets");
  }
  std::set<Edge> edges = p.support();
  for (const auto& [e, _] : q.mass) edges.insert(e);

  auto at = [](const PathDistribution& d, const Edge& e) {
    auto it = d.mass.find(e);
    return it == d.mass.end() ? 0.0 : it->second;
  };
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (const auto& e : edges) {
    const double pe = at(p, e);
    const double qe = at(q, e);
    const double m = 0.5 * (pe + qe);
    if (pe > 0.0) kl_p += pe * std::log2(pe / m);
    if (qe > 0.0) kl_q += qe * std::log2(qe / m);
  }
  return std::clamp(0.5 * kl_p + 0.5 * kl_q, 0.0, 1.0);
}

KappaResult cohens_kappa(std::span<const BinaryRating> a, std::span<const BinaryRating> b, std::string rater_a,
                         std::string rater_b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "rating vectors differ in length");
  if (a.empty()) throw Error(Errc::EmptyInput, "no rated items");

  // Integer form of (p_o - p_e) / (1 - p_e), scaled by n^2.
  std::int64_t agree = 0, a_pos = 0, b_pos = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    a_pos += a[i] == BinaryRating::confusing;
    b_pos += b[i] == BinaryRating::confusing;
  }
  const auto n = static_cast<std::int64_t>(a.size());
  const std::int64_t chance = a_pos * b_pos + (n - a_pos) * (n - b_pos);

  KappaResult r{std::move(rater_a), std::move(rater_b), std::nullopt, a.size()};
  if (n * n != chance) r.kappa = static_cast<double>(n * agree - chance) / static_cast<double>(n * n - chance);
  return r;
}

double corrected_odds_ratio(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  return ((static_cast<double>(a) + 0.5) * (static_cast<double>(d) + 0.5)) /
         ((static_cast<double>(b) + 0.5) * (static_cast<double>(c) + 0.5));
}

CrossTab failure_crosstab(std::span<const BinaryRating> llm, std::span<const BinaryRating> human) {
  if (llm.size() != human.size()) throw Error(Errc::LengthMismatch, "rating vectors differ in length");
  CrossTab t;
  for (std::size_t i = 0; i < llm.size(); ++i) {
    const bool l = llm[i] == BinaryRating::confusing;
    const bool h = human[i] == BinaryRating::confusing;
    if (l && h) ++t.a;
    else if (l) ++t.b;
    else if (h) ++t.c;
    else ++t.d;
  }
  t.odds_ratio = corrected_odds_ratio(t.a, t.b, t.c, t.d);
  return t;
}

std::string_view to_string(GroupBy g) noexcept {
  switch (g) {
    case GroupBy::agent_kind: return "agent_kind";
    case GroupBy::backend_label: return "backend_label";
    case GroupBy::run: return "run";
  }
  return "agent_kind";
}

std::optional<GroupBy> parse_group_by(std::string_view s) noexcept {
  if (s == "agent_kind") return GroupBy::agent_kind;
  if (s == "backend_label") return GroupBy::backend_label;
  if (s == "run") return GroupBy::run;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::string group_of(const SessionTrace& t, GroupBy g) {
  switch (g) {
    case GroupBy::agent_kind: return std::string(to_string(t.agent_kind));
    case GroupBy::backend_label: return t.backend_label;
    case GroupBy::run: return t.run_label.empty() ? t.session_id : t.run_label;
  }
  return {};
}

std::string task_key(const SessionTrace& t) { return t.app_name + "/" + t.task_id(); }

std::string rater_name(const ScreenRating& r) { return r.run_label + "/" + std::string(to_string(r.mode)); }

constexpr std::string_view kHumanRater = "human";

}  // namespace

MetricsReport build_report(const ReportInputs& in, GroupBy group_by, double alpha) {
  MetricsReport rep;
  rep.group_by = group_by;
  rep.alpha = alpha;
  rep.provenance = in.provenance;
  std::sort(rep.provenance.begin(), rep.provenance.end());

  std::vector<const SessionTrace*> traces;
  for (const auto& t : in.traces) traces.push_back(&t);
  std::sort(traces.begin(), traces.end(),
            [](const SessionTrace* a, const SessionTrace* b) { return a->session_id < b->session_id; });

  // Completion and step statistics.
  std::map<std::string, std::vector<const SessionTrace*>> by_group;
  for (const auto* t : traces) by_group[group_of(*t, group_by)].push_back(t);
  for (const auto& [group, members] : by_group) {
    MetricsReport::CompletionRow row{group, members.size(), 0, 0.0};
    std::map<std::string, std::vector<int>> steps_by_task;
    for (const auto* t : members) {
      auto& bucket = steps_by_task[task_key(*t)];
      if (t->outcome != Outcome::completed) continue;
      ++row.n_completed;
      bucket.push_back(summarize(*t, t->task).resolved_step_count);
    }
    row.rate = static_cast<double>(row.n_completed) / static_cast<double>(row.n_traces);
    rep.completion.push_back(row);

    for (const auto& [task, counts] : steps_by_task) {
      MetricsReport::StepRow s{group, task, counts.size(), std::nullopt, std::nullopt, std::nullopt};
      if (!counts.empty()) {
        s.mean_steps = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
        s.min_steps = *std::min_element(counts.begin(), counts.end());
        s.max_steps = *std::max_element(counts.begin(), counts.end());
      }
      rep.steps.push_back(std::move(s));
    }

    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* t : members) {
      MetricsReport::JsdRow j{group, task_key(*t), t->session_id, std::nullopt};
      const auto observed = summarize(*t, t->task).path;
      if (observed.size() >= 2 && !t->task.correct_paths.empty()) {
        const auto reference = path_distribution(t->task.correct_paths, {}, alpha);
        auto support = reference.support();
        const auto run = path_distribution({observed}, {}, alpha);
        for (const auto& e : run.support()) support.insert(e);
        // Both sides smoothed over the same union support.
        const auto p = alpha > 0 ? path_distribution({observed}, support, alpha) : run;
        const auto q = alpha > 0 ? path_distribution(t->task.correct_paths, support, alpha) : reference;
        j.jsd = js_divergence(p, q);
        sum += *j.jsd;
        ++n;
      }
      rep.jsd.push_back(std::move(j));
    }
    rep.jsd_means.push_back({group, n, n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt});
  }

  // Rating matrix.
  RatingMatrix matrix;
  auto add = [&](const ScreenRating& r) {
    auto [it, inserted] = matrix.rows[rater_name(r)].emplace(ItemKey{r.task_id, r.screen}, r.binary);
    if (!inserted && r.binary == BinaryRating::confusing) it->second = r.binary;
  };
  for (const auto& r : in.ratings) add(r);
  for (const auto* t : traces) {
    if (!t->with_confusion || t->agent_kind == AgentKind::human) continue;
    for (const auto& r : extract_with_context_ratings(*t)) add(r);
  }
  if (in.human_labels) matrix.rows[std::string(kHumanRater)] = human_failure_points(*in.human_labels, in.catalog);

  for (const auto& [name, _] : matrix.rows) rep.raters.push_back(name);
  for (std::size_t i = 0; i < rep.raters.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.raters.size(); ++j) {
      const auto [va, vb] = matrix.aligned(rep.raters[i], rep.raters[j]);
      if (va.empty()) {
        rep.kappas.push_back({rep.raters[i], rep.raters[j], std::nullopt, 0});
      } else {
        rep.kappas.push_back(cohens_kappa(va, vb, rep.raters[i], rep.raters[j]));
      }
    }
  }
  if (in.human_labels) {
    for (const auto& name : rep.raters) {
      if (name == kHumanRater) continue;
      const auto [llm, human] = matrix.aligned(name, std::string(kHumanRater));
      if (llm.empty()) continue;
      rep.crosstabs.push_back({name, failure_crosstab(llm, human)});
    }
  }
  return rep;
}

namespace {

std::string real(double v) { return fmt::format("{:.6f}", v); }
std::string real(const std::optional<double>& v) { return v ? real(*v) : std::string("n/a"); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render_csv(const MetricsReport& r) {
  std::string out = "table,group,task,item,metric,value\n";
  auto row = [&](std::string_view table, const std::string& group, const std::string& task, const std::string& item,
                 std::string_view metric, const std::string& value) {
    out += fmt::format("{},{},{},{},{},{}\n", table, csv_field(group), csv_field(task), csv_field(item), metric,
                       csv_field(value));
  };
  row("meta", "", "", "", "group_by", std::string(to_string(r.group_by)));
  row("meta", "", "", "", "alpha", real(r.alpha));
  for (const auto& [file, hash] : r.provenance) row("provenance", "", "", file, "sha256", hash);
  for (const auto& c : r.completion) {
    row("completion", c.group, "", "", "n_traces", std::to_string(c.n_traces));
    row("completion", c.group, "", "", "n_completed", std::to_string(c.n_completed));
    row("completion", c.group, "", "", "completion_rate", real(c.rate));
  }
  for (const auto& s : r.steps) {
    row("steps", s.group, s.task, "", "n_completed", std::to_string(s.n_completed));
    row("steps", s.group, s.task, "", "mean_steps", real(s.mean_steps));
    row("steps", s.group, s.task, "", "min_steps", s.min_steps ? std::to_string(*s.min_steps) : "n/a");
    row("steps", s.group, s.task, "", "max_steps", s.max_steps ? std::to_string(*s.max_steps) : "n/a");
  }
  for (const auto& j : r.jsd) row("jsd", j.group, j.task, j.session_id, "jsd", real(j.jsd));
  for (const auto& m : r.jsd_means) {
    row("jsd_mean", m.group, "", "", "n", std::to_string(m.n));
    row("jsd_mean", m.group, "", "", "mean_jsd", real(m.mean));
  }
  for (const auto& k : r.kappas) {
    row("kappa", k.rater_a, "", k.rater_b, "n_items", std::to_string(k.n_items));
    row("kappa", k.rater_a, "", k.rater_b, "kappa", real(k.kappa));
  }
  for (const auto& c : r.crosstabs) {
    row("crosstab", c.rater, "", "human", "a", std::to_string(c.table.a));
    row("crosstab", c.rater, "", "human", "b", std::to_string(c.table.b));
    row("crosstab", c.rater, "", "human", "c", std::to_string(c.table.c));
    row("crosstab", c.rater, "", "human", "d", std::to_string(c.table.d));
    row("crosstab", c.rater, "", "human", "odds_ratio", real(c.table.odds_ratio));
  }
  return out;
}

std::string render_summary(const MetricsReport& r) {
  std::string out = "# Walkthrough metrics\n\n";
  out += fmt::format("Grouped by `{}`; path smoothing alpha = {}.\n\n", to_string(r.group_by), real(r.alpha));

  out += "## Task completion\n\n| group | traces | completed | rate |\n|---|---|---|---|\n";
  for (const auto& c : r.completion) {
    out += fmt::format("| {} | {} | {} | {} |\n", c.group, c.n_traces, c.n_completed, real(c.rate));
  }

  out += "\n## Steps to complete (completed traces only)\n\n"
         "| group | task | completed | mean | min | max |\n|---|---|---|---|---|---|\n";
  for (const auto& s : r.steps) {
    out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", s.group, s.task, s.n_completed, real(s.mean_steps),
                       s.min_steps ? std::to_string(*s.min_steps) : "n/a",
                       s.max_steps ? std::to_string(*s.max_steps) : "n/a");
  }

  out += "\n## Path divergence from the correct-path set (JSD, base 2)\n\n"
         "| group | task | session | JSD |\n|---|---|---|---|\n";
  for (const auto& j : r.jsd) out += fmt::format("| {} | {} | {} | {} |\n", j.group, j.task, j.session_id, real(j.jsd));
  out += "\n| group | traces with a path | mean JSD |\n|---|---|---|\n";
  for (const auto& m : r.jsd_means) out += fmt::format("| {} | {} | {} |\n", m.group, m.n, real(m.mean));

  out += "\n## Rater agreement (Cohen's kappa, binary failure points)\n\n";
  if (r.kappas.empty()) {
    out += "No rater pairs.\n";
  } else {
    out += "| rater A | rater B | items | kappa |\n|---|---|---|---|\n";
    for (const auto& k : r.kappas) {
      out += fmt::format("| {} | {} | {} | {} |\n", k.rater_a, k.rater_b, k.n_items, real(k.kappa));
    }
  }

  out += "\n## LLM failure points against human failure points\n\n";
  if (r.crosstabs.empty()) {
    out += "No human labels or no jointly rated screens.\n";
  } else {
    out += "| rater | a (both) | b (LLM only) | c (human only) | d (neither) | odds ratio (+0.5) |\n"
           "|---|---|---|---|---|---|\n";
    for (const auto& c : r.crosstabs) {
      out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", c.rater, c.table.a, c.table.b, c.table.c, c.table.d,
                         real(c.table.odds_ratio));
    }
  }

  out += "\n## Inputs\n\n| file | sha256 |\n|---|---|\n";
  for (const auto& [file, hash] : r.provenance) out += fmt::format("| {} | {} |\n", file, hash);
  return out;
}

}  // namespace cwalk
