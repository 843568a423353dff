#include "ember/serve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include <httplib.h>
#include <json.hpp>

#include "ember/errors.hpp"
#include "ember/evaluation.hpp"
#include "ember/losses.hpp"

namespace ember::serve {

using nlohmann::json;

namespace {

struct Scenario {
  double wind_speed = 0.0;
  double wind_direction = 0.0;
  fireca::IgnitionKind pattern = fireca::IgnitionKind::StripSouth;
  std::uint64_t seed = 1;
};

Response reply(int status, const json& body) { return {status, body.dump()}; }

Response field_error(const std::string& field, const std::string& why) {
  return reply(422, {{"error", "invalid_field"}, {"field", field}, {"detail", why}});
}

json grid_echo(const dataset::DatasetManifest& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"steps", m.steps}};
}

// Parses and range-checks a scenario body; sets `error` on failure.
std::optional<Scenario> parse_scenario(const std::string& body, const dataset::DatasetManifest& m, bool with_seed,
                                       Response& error) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    error = reply(400, {{"error", "invalid_json"}});
    return std::nullopt;
  }
  if (!j.is_object()) {
    error = reply(400, {{"error", "invalid_json"}});
    return std::nullopt;
  }
  Scenario s;
  if (!j.contains("wind_speed") || !j["wind_speed"].is_number()) {
    error = field_error("wind_speed", "must be a number");
    return std::nullopt;
  }
  s.wind_speed = j["wind_speed"].get<double>();
  if (!(s.wind_speed >= 0.0 && s.wind_speed <= kMaxWindSpeed)) {
    error = field_error("wind_speed", "must lie in [0, 30] m/s");
    return std::nullopt;
  }
  if (!j.contains("wind_direction") || !j["wind_direction"].is_number()) {
    error = field_error("wind_direction", "must be a number");
    return std::nullopt;
  }
  s.wind_direction = j["wind_direction"].get<double>();
  if (!(s.wind_direction >= 0.0 && s.wind_direction < 360.0)) {
    error = field_error("wind_direction", "must lie in [0, 360) degrees");
    return std::nullopt;
  }
  if (!j.contains("pattern") || !j["pattern"].is_string()) {
    error = field_error("pattern", "must be a string");
    return std::nullopt;
  }
  const auto kind = fireca::parse_kind(j["pattern"].get<std::string>());
  if (!kind || !m.sources.count(*kind)) {
    error = reply(404, {{"error", "unknown_pattern"}});
    return std::nullopt;
  }
  s.pattern = *kind;
  if (with_seed && j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      error = field_error("seed", "must be a non-negative integer");
      return std::nullopt;
    }
    s.seed = j["seed"].get<std::uint64_t>();
  }
  return s;
}

json frames_body(const FuelFieldSequence& seq, double eps_b) {
  json frames = json::array();
  json ba = json::array();
  json ros = json::array();
  const std::size_t n = seq.rows * seq.cols;
  const std::span<const double> all(seq.values);
  for (std::size_t t = 0; t < seq.steps; ++t) {
    json frame = json::array();
    for (std::size_t r = 0; r < seq.rows; ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < seq.cols; ++c) row.push_back(seq.at(t, r, c));
      frame.push_back(std::move(row));
    }
    frames.push_back(std::move(frame));
    const auto cur = all.subspan(t * n, n);
    ba.push_back(losses::ba(cur, eps_b));
    ros.push_back(t == 0 ? 0.0 : losses::ros(cur, all.first(n), seq.rows, seq.cols, t, 0, eps_b));
  }
  return {{"frames", std::move(frames)}, {"ba_percent", std::move(ba)}, {"ros", std::move(ros)}};
}

json scenario_echo(const Scenario& s, const dataset::DatasetManifest& m) {
  json e = grid_echo(m);
  e["wind_speed"] = s.wind_speed;
  e["wind_direction"] = s.wind_direction;
  e["pattern"] = std::string(fireca::kind_name(s.pattern));
  return e;
}

}  // namespace

Service::Service(dataset::Dataset data, training::Checkpoint checkpoint)
    : data_(std::move(data)), checkpoint_(std::move(checkpoint)) {
  training::require_compatible(checkpoint_, data_.manifest());
}

Response Service::patterns() const {
  const auto& m = data_.manifest();
  json kinds = json::array();
  for (const auto& [k, file] : m.sources) kinds.push_back(std::string(fireca::kind_name(k)));
  return reply(200, {{"patterns", kinds},
                     {"rows", m.rows},
                     {"cols", m.cols},
                     {"steps", m.steps},
                     {"wind_speed_range", {m.scaling.speed_min, m.scaling.speed_max}},
                     {"scenario", grid_echo(m)}});
}

Response Service::runs() const {
  const auto& m = data_.manifest();
  json list = json::array();
  for (const auto& r : m.runs) {
    const bool train = std::find(m.train.begin(), m.train.end(), r.id) != m.train.end();
    list.push_back({{"id", r.id},
                    {"pattern", std::string(fireca::kind_name(r.pattern))},
                    {"wind_speed", r.wind_speed},
                    {"wind_direction", r.wind_direction},
                    {"seed", r.seed},
                    {"split", train ? "train" : "test"}});
  }
  return reply(200, {{"runs", list}, {"scenario", grid_echo(m)}});
}

Response Service::predict(const std::string& body) {
  const auto& m = data_.manifest();
  Response error;
  const auto s = parse_scenario(body, m, false, error);
  if (!s) return error;
  const auto config = m.scenario(s->pattern, s->wind_speed, s->wind_direction, s->seed);
  FuelFieldSequence seq;
  double ms = 0.0;
  {
    std::lock_guard lock(model_mutex_);
    const auto start = std::chrono::steady_clock::now();
    seq = evaluation::predict(checkpoint_.model, data_.inputs(config));
    ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  json out = frames_body(seq, losses::LossWeights{}.eps_b);
  out["inference_ms"] = ms;
  out["scenario"] = scenario_echo(*s, m);
  out["scenario"]["mode"] = std::string(emulator::mode_name(checkpoint_.model.config().mode));
  return reply(200, out);
}

Response Service::simulate(const std::string& body) const {
  const auto& m = data_.manifest();
  Response error;
  const auto s = parse_scenario(body, m, true, error);
  if (!s) return error;
  const auto config = m.scenario(s->pattern, s->wind_speed, s->wind_direction, s->seed);
  const auto start = std::chrono::steady_clock::now();
  const auto seq = fireca::simulate(config);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  json out = frames_body(seq, losses::LossWeights{}.eps_b);
  out["inference_ms"] = ms;
  out["scenario"] = scenario_echo(*s, m);
  out["scenario"]["seed"] = s->seed;
  return reply(200, out);
}

void mount(httplib::Server& server, Service& service) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/patterns", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.patterns());
  });
  server.Get("/runs", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.runs());
  });
  server.Post("/predict", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.predict(req.body));
  });
  server.Post("/simulate", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.simulate(req.body));
  });
}

void run(Service& service, const std::string& host, int port) {
  httplib::Server server;
  mount(server, service);
  if (!server.listen(host, port)) throw IoError("serve: cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace ember::serve
