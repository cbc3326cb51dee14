// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cwalk/app_graph.hpp"
#include "cwalk/engine.hpp"
#include "cwalk/protocol.hpp"
#include "cwalk/rater.hpp"

namespace cwalk {

/// A directed navigation edge (from-screen, to-screen).
using Edge = std::pair<ScreenId, ScreenId>;

struct PathDistribution {
  std::map<Edge, double> mass;

  std::set<Edge> support() const;
  double total() const;
  bool operator==(const PathDistribution&) const = default;
};

std::vector<Edge> path_edges(const std::vector<ScreenId>& path);

/// Fraction of traces with outcome completed. Throws EmptyInput.
double completion_rate(std::span<const SessionTrace> traces);

/// mass(e) = (count(e) + alpha) / (total + alpha * |S|) where S is `support`
/// joined with every observed edge. Throws EmptyPaths when there is no
/// mass to distribute, ZeroMassSupport when alpha = 0 leaves a declared
/// support edge unobserved.
PathDistribution path_distribution(const std::vector<std::vector<ScreenId>>& paths,
                                   const std::set<Edge>& support = {}, double alpha = 0.0);

/// Base-2 Jensen-Shannon divergence, in [0, 1]. Edges missing from one side
/// carry zero mass there (their KL term vanishes). With `union_support`
/// false the two supports must match exactly, else SupportMismatch.
double js_divergence(const PathDistribution& p, const PathDistribution& q, bool union_support = true);

struct KappaResult {
  std::string rater_a;
  std::string rater_b;
  /// Unset when chance agreement is exactly 1.
  std::optional<double> kappa;
  std::size_t n_items = 0;
};

/// Cohen's kappa over aligned binary ratings. Throws LengthMismatch,
/// EmptyInput.
KappaResult cohens_kappa(std::span<const BinaryRating> a, std::span<const BinaryRating> b,
                         std::string rater_a = "a", std::string rater_b = "b");

/// 2x2 table of LLM (rows) against human (columns) failure points:
/// a = both confusing, b = LLM only, c = human only, d = neither.
struct CrossTab {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;
  std::size_t d = 0;
  /// Haldane-Anscombe corrected: every cell gets +0.5.
  double odds_ratio = 1.0;

  std::size_t total() const { return a + b + c + d; }
};

double corrected_odds_ratio(std::size_t a, std::size_t b, std::size_t c, std::size_t d);

/// Throws LengthMismatch.
CrossTab failure_crosstab(std::span<const BinaryRating> llm, std::span<const BinaryRating> human);

enum class GroupBy { agent_kind, backend_label, run };

std::string_view to_string(GroupBy g) noexcept;
std::optional<GroupBy> parse_group_by(std::string_view s) noexcept;

struct ReportInputs {
  std::vector<SessionTrace> traces;
  std::vector<ScreenRating> ratings;
  std::optional<std::vector<HumanLabel>> human_labels;
  /// Catalog the labels are validated against.
  ScreenCatalog catalog;
  /// (file name, sha256) of every input file.
  std::vector<std::pair<std::string, std::string>> provenance;
};

struct MetricsReport {
  struct CompletionRow {
    std::string group;
    std::size_t n_traces = 0;
    std::size_t n_completed = 0;
    double rate = 0.0;
  };
  struct StepRow {
    std::string group;
    std::string task;  // "<app>/<task>"
    std::size_t n_completed = 0;
    std::optional<double> mean_steps;
    std::optional<int> min_steps;
    std::optional<int> max_steps;
  };
  struct JsdRow {
    std::string group;
    std::string task;
    std::string session_id;
    std::optional<double> jsd;
  };
  struct JsdMeanRow {
    std::string group;
    std::size_t n = 0;
    std::optional<double> mean;
  };
  struct CrossTabRow {
    std::string rater;
    CrossTab table;
  };

  GroupBy group_by = GroupBy::agent_kind;
  double alpha = 0.0;
  std::vector<CompletionRow> completion;
  std::vector<StepRow> steps;
  std::vector<JsdRow> jsd;
  std::vector<JsdMeanRow> jsd_means;
  std::vector<std::string> raters;
  std::vector<KappaResult> kappas;
  std::vector<CrossTabRow> crosstabs;
  std::vector<std::pair<std::string, std::string>> provenance;
};

/// Step statistics use completed traces only. JSD compares each trace's
/// edge distribution with its task's correct-path distribution. With-context
/// ratings are pulled from with-confusion LLM traces automatically; raters
/// are named "<run_label>/<mode>" plus "human".
MetricsReport build_report(const ReportInputs& inputs, GroupBy group_by, double alpha = 0.0);

/// Columns: table,group,task,item,metric,value. Undefined values are "n/a".
std::string render_csv(const MetricsReport& report);
std::string render_summary(const MetricsReport& report);

}  // namespace cwalk
