// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "cwalk/service.hpp"
#include "cwalk/store.hpp"
#include "support.hpp"

using namespace cwalk;
using namespace cwalk::testing;

namespace {

struct Fixture {
  TempDir dir;
  SessionService service;

  explicit Fixture(ServiceOptions o = {})
      : service(load_app_graph(fixtures_dir() / "recipe_app" / "app.json"), with_dir(std::move(o), dir)) {}

  static ServiceOptions with_dir(ServiceOptions o, const TempDir& d) {
    o.trace_dir = d / "traces";
    o.clock = fixed_clock("2026-01-01T00:00:00Z");
    return o;
  }

  std::pair<int, json> call(const std::string& method, const std::string& path, const json& body = nullptr) {
    const auto r = service.handle(method, path, body.is_null() ? "" : body.dump());
    return {r.status, r.content_type == "application/json" ? json::parse(r.body) : json(r.body)};
  }

  std::string create(const std::string& task, bool confusion = true) {
    auto [status, body] = call("POST", "/api/sessions", {{"task_id", task}, {"participant_label", "P 07"},
                                                         {"with_confusion", confusion}});
    REQUIRE(status == 201);
    return body["session_id"];
  }
};

json chip_step(const std::string& chip, json confusion = "not_at_all") {
  return {{"transition_id", chip}, {"think_aloud", "this seems to be the right way"}, {"confusion", confusion}};
}

}  // namespace

TEST_CASE("task list and screens") {
  Fixture f;
  auto [status, body] = f.call("GET", "/api/tasks");
  CHECK(status == 200);
  CHECK(body["tasks"].size() == 3);
  const auto png = f.service.handle("GET", "/api/screens/home", "");
  CHECK(png.status == 200);
  CHECK(png.content_type == "image/png");
  CHECK(png.body.substr(1, 3) == "PNG");
  CHECK(f.call("GET", "/api/screens/nowhere").first == 404);
  CHECK(f.call("POST", "/api/tasks").first == 405);
  CHECK(f.call("GET", "/api/elsewhere").first == 404);
}

TEST_CASE("a human session records fail-safes and chip steps") {
  Fixture f;
  const auto id = f.create("find_recipe");
  CHECK(id == "human-1-P_07-find_recipe");

  auto [status, body] = f.call("GET", "/api/sessions/" + id);
  CHECK(status == 200);
  CHECK(body["screen_id"] == "home");
  CHECK_FALSE(body.contains("step_count"));
  CHECK(body["facilitator_message"].is_null());

  // A free-text action that matches nothing gets the fail-safe verbatim.
  std::tie(status, body) = f.call("POST", "/api/sessions/" + id + "/step",
                                  {{"action_text", "shake the phone"}, {"think_aloud", "maybe shaking helps"},
                                   {"confusion", "very"}});
  CHECK(status == 200);
  CHECK_FALSE(body["advanced"].get<bool>());
  CHECK(body["facilitator_message"] == std::string(kFailsafeMessage));

  std::tie(status, body) = f.call("GET", "/api/sessions/" + id);
  CHECK(body["facilitator_message"] == std::string(kFailsafeMessage));

  CHECK(f.call("POST", "/api/sessions/" + id + "/step", {{"think_aloud", "x"}, {"confusion", "very"}}).first == 422);
  CHECK(f.call("POST", "/api/sessions/" + id + "/step", chip_step("tap search", nullptr)).first == 422);

  std::tie(status, body) = f.call("GET", "/api/sessions/" + id);
  REQUIRE(body["steps"].size() == 1);
  CHECK(body["steps"][0]["confusion"] == "very");
  const auto chip = body["transitions"][0]["id"].get<std::string>();
  std::tie(status, body) = f.call("POST", "/api/sessions/" + id + "/step", chip_step(chip));
  CHECK(status == 200);
  CHECK(body["advanced"].get<bool>());
  CHECK(body["image_url"] == "/api/screens/" + body["screen_id"].get<std::string>());
}

TEST_CASE("completion requires the goal screen and closes the session") {
  Fixture f;
  const auto id = f.create("view_favorites");
  auto [status, body] = f.call("POST", "/api/sessions/" + id + "/complete");
  CHECK(status == 422);
  CHECK(body["code"] == "NotOnGoal");

  const auto graph = load_app_graph(fixtures_dir() / "recipe_app" / "app.json");
  const auto& path = graph.find_task("view_favorites")->correct_paths[0];
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    std::string chip;
    for (const auto& t : available_transitions(graph, path[i])) {
      if (t.to == path[i + 1]) {
        chip = t.action_label;
        break;
      }
    }
    std::tie(status, body) = f.call("POST", "/api/sessions/" + id + "/step", chip_step(chip));
    REQUIRE(status == 200);
    CHECK(body["advanced"].get<bool>());
    CHECK_FALSE(body["closed"].get<bool>());
  }
  std::tie(status, body) = f.call("POST", "/api/sessions/" + id + "/complete");
  CHECK(status == 200);
  CHECK(body["outcome"] == "completed");
  CHECK(body["steps"] == path.size() - 1);
  CHECK(body["path"] == path);

  CHECK(f.call("POST", "/api/sessions/" + id + "/complete").first == 409);
  CHECK(f.call("POST", "/api/sessions/" + id + "/step", chip_step("x")).first == 409);

  const auto trace = f.service.handle("GET", "/api/sessions/" + id + "/trace", "");
  CHECK(trace.content_type == "application/x-ndjson");
  const auto stored = store::load_traces(f.dir / "traces");
  REQUIRE(stored.items.size() == 1);
  CHECK(to_jsonl(stored.items[0]) == trace.body);
  CHECK(stored.items[0].agent_kind == AgentKind::human);
  CHECK(stored.items[0].run_label == "P 07");
}

TEST_CASE("five fail-safes abort a human session") {
  Fixture f;
  const auto id = f.create("find_recipe", false);
  json body;
  for (int i = 0; i < 5; ++i) {
    int status;
    std::tie(status, body) =
        f.call("POST", "/api/sessions/" + id + "/step", {{"action_text", "sing to it"}, {"think_aloud", "hmm"}});
    CHECK(status == 200);
  }
  CHECK(body["closed"].get<bool>());
  CHECK(body["outcome"] == "aborted_stuck");
  CHECK(f.call("POST", "/api/sessions/" + id + "/step", {{"action_text", "x"}, {"think_aloud", "x"}}).first == 409);
}

TEST_CASE("request validation") {
  Fixture f;
  CHECK(f.call("POST", "/api/sessions", {{"task_id", "nope"}}).first == 422);
  CHECK(f.call("POST", "/api/sessions", json::object()).first == 422);
  CHECK(f.service.handle("POST", "/api/sessions", "{broken").status == 422);
  CHECK(f.call("GET", "/api/sessions/human-99").first == 404);
  CHECK(f.call("POST", "/api/sessions/human-99/step", chip_step("x")).first == 404);
}

TEST_CASE("presentation options") {
  ServiceOptions o;
  o.show_chips = false;
  o.show_step_count = true;
  Fixture f(o);
  const auto id = f.create("find_recipe");
  auto [status, body] = f.call("GET", "/api/sessions/" + id);
  CHECK(body["transitions"].empty());
  CHECK(body["step_count"] == 0);
}

TEST_CASE("HTTP round trip") {
  Fixture f;
  HttpServer server(f.service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/tasks");
  REQUIRE(res);
  CHECK(res->status == 200);
  res = client.Post("/api/sessions", R"({"task_id": "find_recipe", "participant_label": "P1"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto id = json::parse(res->body)["session_id"].get<std::string>();
  res = client.Post("/api/sessions/" + id + "/step", R"({"action_text": "dance", "think_aloud": "no idea"})",
                    "application/json");
  REQUIRE(res);
  CHECK(json::parse(res->body)["facilitator_message"] == std::string(kFailsafeMessage));
  res = client.Get("/api/screens/home");
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "image/png");

  server.stop();
  t.join();
}
