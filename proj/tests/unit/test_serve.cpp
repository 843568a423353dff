#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ember/serve.hpp"
#include "fixtures.hpp"

using namespace ember;
using nlohmann::json;

namespace {

struct Served {
  ember::testing::TempDir dir{"serve"};
  std::unique_ptr<serve::Service> service;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Served() {
    auto config = ember::testing::tiny_config(dir.path());
    dataset::generate_dataset(config, dir.path() / "data");
    auto data = dataset::Dataset::load(dir.path() / "data");
    auto opts = training::options_for(config, emulator::Mode::PGCLPlus);
    opts.epochs = 1;
    auto trained = training::train(data, opts);
    training::save_checkpoint(dir.path() / "model", trained.model, trained.prior_rate, data.manifest(),
                              config.to_kv());
    service = std::make_unique<serve::Service>(std::move(data), training::load_checkpoint(dir.path() / "model"));
    serve::mount(server, *service);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Served() {
    server.stop();
    thread.join();
  }
};

Served& served() {
  static Served s;
  return s;
}

httplib::Result post(const std::string& path, const json& body) {
  httplib::Client client("127.0.0.1", served().port);
  return client.Post(path, body.dump(), "application/json");
}

}  // namespace

TEST_SUITE("serve") {
  TEST_CASE("GET /patterns") {
    httplib::Client client("127.0.0.1", served().port);
    auto res = client.Get("/patterns");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = json::parse(res->body);
    CHECK(j["patterns"] == json::array({"inward", "strip_south"}));
    CHECK(j["rows"] == 10);
    CHECK(j["steps"] == 12);
    CHECK(j.contains("scenario"));
  }

  TEST_CASE("GET /runs") {
    httplib::Client client("127.0.0.1", served().port);
    auto res = client.Get("/runs");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = json::parse(res->body);
    CHECK(j["runs"].size() == 8);
    std::size_t train = 0;
    for (const auto& r : j["runs"]) train += r["split"] == "train";
    CHECK(train == 4);
  }

  TEST_CASE("POST /predict shape contract") {
    auto res = post("/predict", {{"wind_speed", 4}, {"wind_direction", 270}, {"pattern", "strip_south"}});
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = json::parse(res->body);
    REQUIRE(j["frames"].size() == 12);
    for (const auto& f : j["frames"]) {
      REQUIRE(f.size() == 10);
      for (const auto& row : f) CHECK(row.size() == 10);
    }
    CHECK(j["ba_percent"].size() == 12);
    CHECK(j["ros"].size() == 12);
    CHECK(j["inference_ms"].get<double>() >= 0.0);
    CHECK(j["scenario"]["pattern"] == "strip_south");
    CHECK(j["scenario"]["wind_speed"] == 4);
    CHECK(j["scenario"]["mode"] == "pgcl+");
  }

  TEST_CASE("POST /simulate is deterministic per seed") {
    const json body{{"wind_speed", 8}, {"wind_direction", 230}, {"pattern", "inward"}, {"seed", 11}};
    auto a = post("/simulate", body);
    auto b = post("/simulate", body);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->status == 200);
    CHECK(json::parse(a->body)["frames"] == json::parse(b->body)["frames"]);
    CHECK(json::parse(a->body)["scenario"]["seed"] == 11);
    auto c = post("/simulate", {{"wind_speed", 8}, {"wind_direction", 230}, {"pattern", "inward"}, {"seed", 12}});
    CHECK(json::parse(a->body)["frames"] != json::parse(c->body)["frames"]);
  }

  TEST_CASE("error contracts") {
    auto unknown = post("/predict", {{"wind_speed", 4}, {"wind_direction", 270}, {"pattern", "ring2"}});
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
    CHECK(json::parse(unknown->body) == json{{"error", "unknown_pattern"}});

    auto fast = post("/predict", {{"wind_speed", 31}, {"wind_direction", 270}, {"pattern", "inward"}});
    REQUIRE(fast);
    CHECK(fast->status == 422);
    CHECK(json::parse(fast->body)["field"] == "wind_speed");

    auto dir = post("/simulate", {{"wind_speed", 3}, {"wind_direction", 360}, {"pattern", "inward"}});
    REQUIRE(dir);
    CHECK(dir->status == 422);
    CHECK(json::parse(dir->body)["field"] == "wind_direction");

    auto missing = post("/predict", {{"wind_speed", 3}, {"pattern", "inward"}});
    CHECK(missing->status == 422);

    httplib::Client client("127.0.0.1", served().port);
    auto bad = client.Post("/predict", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
  }
}
