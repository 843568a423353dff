#pragma once

// JSON-over-HTTP scenario service:
//   GET  /patterns  ignition kinds with a source run, grid dims
//   POST /predict   {wind_speed, wind_direction, pattern} -> emulator frames
//   POST /simulate  same body plus optional seed -> simulator frames
//   GET  /runs      manifest listing
// Out-of-range wind fields answer 422 naming the field; unknown patterns 404.

#include <mutex>
#include <string>

#include "ember/dataset.hpp"
#include "ember/training.hpp"

namespace httplib {
class Server;
}

namespace ember::serve {

struct Response {
  int status = 200;
  std::string body;  // JSON
};

inline constexpr double kMaxWindSpeed = 30.0;

class Service {
 public:
  Service(dataset::Dataset data, training::Checkpoint checkpoint);

  Response patterns() const;
  Response runs() const;
  Response predict(const std::string& body);
  Response simulate(const std::string& body) const;

  const dataset::Dataset& data() const { return data_; }

 private:
  dataset::Dataset data_;
  training::Checkpoint checkpoint_;
  std::mutex model_mutex_;
};

/// Registers the routes on an httplib server.
void mount(httplib::Server& server, Service& service);

/// Blocks serving on host:port until the process stops.
void run(Service& service, const std::string& host, int port);

}  // namespace ember::serve
