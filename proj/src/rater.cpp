// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/rater.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "cwalk/error.hpp"
#include "cwalk/io.hpp"
#include "cwalk/text.hpp"

namespace cwalk {

using nlohmann::json;

std::string_view to_string(RatingMode m) noexcept {
  return m == RatingMode::with_context ? "with_context" : "without_context";
}

std::optional<RatingMode> parse_rating_mode(std::string_view s) noexcept {
  if (s == "with_context") return RatingMode::with_context;
  if (s == "without_context") return RatingMode::without_context;
  return std::nullopt;
}

ScreenRating make_rating(std::string app_name, std::string task_id, ScreenId screen, ConfusionRating rating,
                         std::string rationale, RatingMode mode, std::string run_label) {
  return {std::move(app_name), std::move(task_id), std::move(screen), rating,      collapse_rating(rating),
          std::move(rationale), mode,              std::move(run_label)};
}

ScreenRating rate_without_context(const AppGraph& graph, const Screen& screen, const Task& task, Backend& backend,
                                  const PromptLibrary& prompts, const std::string& run_label) {
  std::vector<ChatTurn> history;
  history.push_back({Role::system, prompts.render(TemplateId::without_context, task.description), {}});
  history.push_back({Role::facilitator, "", {ImageRef{screen.id, graph.image_path(screen)}}});
  const RequestContext ctx{run_label + ":" + task.id + "@" + screen.id, task.id, screen.id};
  try {
    auto answer = parse_confusion_answer(backend.complete(history, ctx));
    return make_rating(graph.name, task.id, screen.id, answer.rating, std::move(answer.rationale),
                       RatingMode::without_context, run_label);
  } catch (const Error& e) {
    throw Error(Errc::RatingFailed, task.id + "@" + screen.id + ": " + e.what(), e.code());
  }
}

std::vector<ScreenRating> rate_screens(const AppGraph& graph, const std::vector<RatingRequest>& requests,
                                       Backend& backend, const PromptLibrary& prompts, const std::string& run_label,
                                       int concurrency) {
  struct Job {
    const Screen* screen;
    const Task* task;
  };
  std::vector<Job> jobs;
  for (const auto& r : requests) {
    const Task* task = graph.find_task(r.task_id);
    if (!task) throw Error(Errc::UnknownTask, "unknown task '" + r.task_id + "'");
    const Screen* screen = graph.find_screen(r.screen);
    if (!screen) throw Error(Errc::UnknownScreen, "unknown screen '" + r.screen + "'");
    jobs.push_back({screen, task});
  }

  std::vector<std::optional<ScreenRating>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = rate_without_context(graph, *jobs[i].screen, *jobs[i].task, backend, prompts, run_label);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, concurrency));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < std::min(n, jobs.size()); ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<ScreenRating> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

std::vector<ScreenRating> extract_with_context_ratings(const SessionTrace& trace) {
  if (!trace.with_confusion) {
    throw Error(Errc::ModeMismatch, "trace " + trace.session_id + " was not run with confusion ratings");
  }
  const auto& label = trace.run_label.empty() ? trace.backend_label : trace.run_label;
  std::vector<ScreenRating> out;
  std::map<ScreenId, std::size_t> slot;
  for (const auto& step : trace.steps) {
    const auto rating = step_confusion(step);
    if (!rating) continue;
    auto it = slot.find(step.screen);
    if (it == slot.end()) {
      slot.emplace(step.screen, out.size());
      out.push_back(make_rating(trace.app_name, trace.task_id(), step.screen, *rating, step_confusion_rationale(step),
                                RatingMode::with_context, label));
    } else if (*rating > out[it->second].rating) {
      out[it->second] = make_rating(trace.app_name, trace.task_id(), step.screen, *rating,
                                    step_confusion_rationale(step), RatingMode::with_context, label);
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<ScreenRating>& ratings) {
  std::string out;
  for (const auto& r : ratings) {
    json j{{"run_label", r.run_label}, {"mode", to_string(r.mode)},     {"app", r.app_name},
           {"task", r.task_id},        {"screen", r.screen},            {"rating", to_string(r.rating)},
           {"binary", to_string(r.binary)}, {"rationale", r.rationale}};
    out += j.dump() + '\n';
  }
  return out;
}

namespace {

template <typename Fn>
void for_each_record(std::string_view text, const std::string& source, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto where = source + ":" + std::to_string(lineno);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::SchemaViolation, where + ": not a JSON record");
    try {
      fn(j, where);
    } catch (const json::exception& e) {
      throw Error(Errc::SchemaViolation, where + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<ScreenRating> ratings_from_jsonl(std::string_view text, const std::string& source) {
  std::vector<ScreenRating> out;
  for_each_record(text, source, [&](const json& j, const std::string& where) {
    auto mode = parse_rating_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(Errc::SchemaViolation, where + ": bad mode");
    auto rating = parse_confusion(j.at("rating").get<std::string>());
    if (!rating) throw Error(Errc::SchemaViolation, where + ": bad rating");
    auto binary = parse_binary(j.at("binary").get<std::string>());
    if (!binary) throw Error(Errc::SchemaViolation, where + ": bad binary value");
    if (*binary != collapse_rating(*rating)) throw Error(Errc::SchemaViolation, where + ": binary disagrees with rating");
    out.push_back(make_rating(j.at("app").get<std::string>(), j.at("task").get<std::string>(),
                              j.at("screen").get<std::string>(), *rating, j.value("rationale", std::string()), *mode,
                              j.at("run_label").get<std::string>()));
  });
  return out;
}

std::set<ItemKey> RatingMatrix::columns() const {
  std::set<ItemKey> cols;
  for (const auto& [_, row] : rows) {
    for (const auto& [key, _v] : row) cols.insert(key);
  }
  return cols;
}

std::pair<std::vector<BinaryRating>, std::vector<BinaryRating>> RatingMatrix::aligned(const std::string& a,
                                                                                      const std::string& b) const {
  std::pair<std::vector<BinaryRating>, std::vector<BinaryRating>> out;
  auto ra = rows.find(a);
  auto rb = rows.find(b);
  if (ra == rows.end() || rb == rows.end()) return out;
  for (const auto& [key, value] : ra->second) {
    auto it = rb->second.find(key);
    if (it == rb->second.end()) continue;
    out.first.push_back(value);
    out.second.push_back(it->second);
  }
  return out;
}

std::vector<HumanLabel> human_labels_from_jsonl(std::string_view text, const std::string& source) {
  std::vector<HumanLabel> out;
  for_each_record(text, source, [&](const json& j, const std::string&) {
    HumanLabel l;
    l.task_id = j.at("task").get<std::string>();
    l.screen = j.at("screen").get<std::string>();
    l.confusing = j.at("confusing").get<bool>();
    if (j.contains("note") && !j["note"].is_null()) l.note = j["note"].get<std::string>();
    out.push_back(std::move(l));
  });
  return out;
}

std::vector<HumanLabel> load_human_labels(const std::filesystem::path& path) {
  return human_labels_from_jsonl(io::read_file(path), path.filename().string());
}

ScreenCatalog ScreenCatalog::from_graph(const AppGraph& graph) {
  ScreenCatalog c;
  for (const auto& t : graph.tasks) c.tasks.insert(t.id);
  for (const auto& s : graph.screens) c.screens.insert(s.id);
  return c;
}

void ScreenCatalog::merge(const ScreenCatalog& other) {
  tasks.insert(other.tasks.begin(), other.tasks.end());
  screens.insert(other.screens.begin(), other.screens.end());
}

RaterRow human_failure_points(const std::vector<HumanLabel>& labels, const ScreenCatalog& catalog) {
  RaterRow row;
  for (const auto& l : labels) {
    if (!catalog.tasks.count(l.task_id)) throw Error(Errc::UnknownTask, "label names unknown task '" + l.task_id + "'");
    if (!catalog.screens.count(l.screen)) {
      throw Error(Errc::UnknownScreen, "label names unknown screen '" + l.screen + "'");
    }
    auto value = l.confusing ? BinaryRating::confusing : BinaryRating::not_confusing;
    auto [it, inserted] = row.emplace(ItemKey{l.task_id, l.screen}, value);
    // A point coded confusing by any coder stays confusing.
    if (!inserted && value == BinaryRating::confusing) it->second = value;
  }
  return row;
}

}  // namespace cwalk
