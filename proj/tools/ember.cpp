// ember: desk-scale fire emulation pipeline.
//
//   ember generate  --out DIR            simulate the sweep into DIR/data
//   ember train     --out DIR --mode M   train one model into DIR/models/M
//   ember evaluate  --out DIR            score trained models and baselines
//   ember baseline  --out DIR            score the match baselines only
//   ember ablate    --out DIR            one-at-a-time constraint ablation
//   ember serve     --out DIR --port P   HTTP scenario service

#include <malloc.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ember/config.hpp"
#include "ember/container.hpp"
#include "ember/dataset.hpp"
#include "ember/errors.hpp"
#include "ember/evaluation.hpp"
#include "ember/serve.hpp"
#include "ember/training.hpp"

namespace fs = std::filesystem;
using namespace ember;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<std::string> grid;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> epochs;
  std::optional<int> port;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--mode", o.mode, "cl, pgcl or pgcl+");
  cmd->add_option("--grid", o.grid, "grid as MxP");
  cmd->add_option("--steps", o.steps, "frames per run");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--port", o.port, "serve port");
}

PipelineConfig resolve(const Overrides& o) {
  KeyValueConfig kv = o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (o.out) kv.set("out", *o.out);
  if (o.mode) kv.set("mode", *o.mode);
  if (o.grid) kv.set("grid", *o.grid);
  if (o.steps) kv.set("steps", std::to_string(*o.steps));
  if (o.epochs) kv.set("epochs", std::to_string(*o.epochs));
  if (o.port) kv.set("port", std::to_string(*o.port));
  return PipelineConfig::from(kv);
}

void write_text(const fs::path& path, const std::string& text) {
  container::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

fs::path model_dir(const PipelineConfig& c, emulator::Mode mode) {
  return c.out / "models" / std::string(emulator::mode_name(mode));
}

int cmd_generate(const PipelineConfig& c) {
  const auto m = dataset::generate_dataset(c, c.out / "data");
  std::cout << "generated " << m.runs.size() << " runs (" << m.train.size() << " train, " << m.test.size()
            << " test) and " << m.sources.size() << " source runs in " << (c.out / "data").string() << "\n";
  return 0;
}

int cmd_train(const PipelineConfig& c) {
  const auto data = dataset::Dataset::load(c.out / "data");
  auto options = training::options_for(c, c.mode);
  options.progress = &std::cerr;
  auto result = training::train(data, options);
  const auto dir = model_dir(c, c.mode);
  training::save_checkpoint(dir, result.model, result.prior_rate, data.manifest(), c.to_kv());
  training::write_loss_log(dir / "train_log.txt", result.steps);
  training::write_loss_log(dir / "epoch_log.txt", result.epochs);
  if (result.aborted) {
    std::cerr << "training aborted: " << result.abort_reason << "; last good parameters saved to " << dir << "\n";
    return 3;
  }
  std::cout << "trained " << emulator::mode_name(c.mode) << " for " << c.epochs << " epochs -> " << dir.string()
            << "\n";
  return 0;
}

std::vector<evaluation::Scored> baseline_rows(const dataset::Dataset& data, const PipelineConfig& c) {
  const auto library = evaluation::training_library(data);
  const auto& test = data.manifest().test;
  return {{"match_ignition",
           evaluation::score_runs(data, test, evaluation::match_ignition_predictor(library, data), c.weights)},
          {"match_wind", evaluation::score_runs(data, test, evaluation::match_wind_predictor(library, data), c.weights)}};
}

void write_report(const fs::path& reports, const std::string& name, const evaluation::Report& report) {
  write_text(reports / (name + ".txt"), evaluation::report_text(report));
  write_text(reports / (name + ".kv"), evaluation::report_kv(report));
}

int cmd_evaluate(const PipelineConfig& c, bool explicit_mode) {
  const auto data = dataset::Dataset::load(c.out / "data");
  std::vector<evaluation::Scored> scored;
  std::string timing;
  for (auto mode : {emulator::Mode::CL, emulator::Mode::PGCL, emulator::Mode::PGCLPlus}) {
    if (explicit_mode && mode != c.mode) continue;
    const auto dir = model_dir(c, mode);
    if (!fs::exists(dir / "model.txt")) {
      if (explicit_mode) throw ConfigError("evaluate: no checkpoint at " + dir.string());
      continue;
    }
    auto ck = training::load_checkpoint(dir);
    training::require_compatible(ck, data.manifest());
    const std::string name(emulator::mode_name(mode));
    scored.push_back({name, evaluation::score_runs(data, data.manifest().test,
                                                   evaluation::model_predictor(ck.model, data), c.weights)});
    const auto t = evaluation::time_inference(ck.model, data, data.manifest().test, c.timing_repetitions);
    timing += "timing." + name + ".emulator_mean_s = " + std::to_string(t.emulator.mean) + "\n";
    timing += "timing." + name + ".emulator_min_s = " + std::to_string(t.emulator.min) + "\n";
    timing += "timing." + name + ".emulator_max_s = " + std::to_string(t.emulator.max) + "\n";
    timing += "timing." + name + ".simulator_mean_s = " + std::to_string(t.simulator.mean) + "\n";
    timing += "timing." + name + ".simulator_min_s = " + std::to_string(t.simulator.min) + "\n";
    timing += "timing." + name + ".simulator_max_s = " + std::to_string(t.simulator.max) + "\n";
    timing += "timing." + name + ".speedup = " + std::to_string(t.speedup()) + "\n";
  }
  if (scored.empty()) throw ConfigError("evaluate: no trained models under " + (c.out / "models").string());
  for (auto& b : baseline_rows(data, c)) scored.push_back(std::move(b));
  const auto report = evaluation::build_report(std::move(scored));
  write_report(c.out / "reports", "evaluation", report);
  write_text(c.out / "reports" / "timing.kv", timing);
  std::cout << evaluation::report_text(report).substr(0, evaluation::report_text(report).find("\n\n")) << "\n\n"
            << timing;
  return 0;
}

int cmd_baseline(const PipelineConfig& c) {
  const auto data = dataset::Dataset::load(c.out / "data");
  const auto report = evaluation::build_report(baseline_rows(data, c));
  write_report(c.out / "reports", "baselines", report);
  const auto text = evaluation::report_text(report);
  std::cout << text.substr(0, text.find("\n\n")) << "\n";
  return 0;
}

int cmd_ablate(const PipelineConfig& c) {
  const auto data = dataset::Dataset::load(c.out / "data");
  std::optional<evaluation::Summary> reference;
  const auto cl_dir = model_dir(c, emulator::Mode::CL);
  if (fs::exists(cl_dir / "model.txt")) {
    auto ck = training::load_checkpoint(cl_dir);
    training::require_compatible(ck, data.manifest());
    reference = evaluation::summarize(
        "none", evaluation::score_runs(data, data.manifest().test, evaluation::model_predictor(ck.model, data),
                                       c.weights));
  }
  const auto table = evaluation::ablate(data, c, reference ? &*reference : nullptr, &std::cerr);
  write_text(c.out / "reports" / "ablation.txt", evaluation::ablation_text(table));
  write_text(c.out / "reports" / "ablation.kv", evaluation::ablation_kv(table));
  std::cout << evaluation::ablation_text(table);
  return 0;
}

int cmd_serve(const PipelineConfig& c) {
  auto data = dataset::Dataset::load(c.out / "data");
  auto ck = training::load_checkpoint(model_dir(c, c.mode));
  serve::Service service(std::move(data), std::move(ck));
  std::cout << "serving " << emulator::mode_name(c.mode) << " on http://127.0.0.1:" << c.port << std::endl;
  serve::run(service, "127.0.0.1", c.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large activation buffers on the heap instead of remapping them every step.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  CLI::App app{"desk-scale prescribed-fire emulation pipeline"};
  app.require_subcommand(1);
  Overrides o;
  auto* gen = app.add_subcommand("generate", "simulate the desk dataset");
  auto* train = app.add_subcommand("train", "train one emulator");
  auto* eval = app.add_subcommand("evaluate", "score models and baselines on the test split");
  auto* ablate = app.add_subcommand("ablate", "one-at-a-time constraint ablation");
  auto* serve_cmd = app.add_subcommand("serve", "HTTP scenario service");
  auto* base = app.add_subcommand("baseline", "score the match baselines");
  for (auto* cmd : {gen, train, eval, ablate, serve_cmd, base}) add_common(cmd, o);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto c = resolve(o);
    if (gen->parsed()) return cmd_generate(c);
    if (train->parsed()) return cmd_train(c);
    if (eval->parsed()) return cmd_evaluate(c, o.mode.has_value());
    if (ablate->parsed()) return cmd_ablate(c);
    if (serve_cmd->parsed()) return cmd_serve(c);
    if (base->parsed()) return cmd_baseline(c);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
