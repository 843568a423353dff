#include "ember/evaluation.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <map>
#include <ostream>

#include "ember/errors.hpp"

namespace ember::evaluation {

namespace {

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string label(const std::string& key, double v) { return key + "=" + num(v); }

void append_summary_kv(std::string& out, const std::string& prefix, const Summary& s) {
  const std::pair<const char*, double> fields[] = {
      {"runs", static_cast<double>(s.runs)},
      {"mse", s.mse},
      {"burned_mse", s.burned_mse},
      {"unburned_mse", s.unburned_mse},
      {"fire_metrics_mse", s.fire_metrics_mse},
      {"dmse", s.dmse},
      {"metric_ft", s.metric_ft},
      {"metric_burned", s.metric_burned},
      {"metric_unburned", s.metric_unburned},
      {"metric_fp", s.metric_fp},
      {"metric_fn", s.metric_fn},
  };
  for (const auto& [k, v] : fields) out += prefix + "." + k + " = " + num(v) + "\n";
}

std::string table_header() {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s %4s %10s %10s %10s %10s %10s %8s %8s %8s %8s %8s\n", "model", "runs", "mse",
                "burned", "unburned", "fire", "dmse", "ft%", "burned%", "unburn%", "fp%", "fn%");
  return buf;
}

std::string table_row(const Summary& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s %4zu %10.6f %10.6f %10.6f %10.4f %10.6f %8.3f %8.3f %8.3f %8.3f %8.3f\n",
                s.name.c_str(), s.runs, s.mse, s.burned_mse, s.unburned_mse, s.fire_metrics_mse, s.dmse,
                s.metric_ft, s.metric_burned, s.metric_unburned, s.metric_fp, s.metric_fn);
  return buf;
}

}  // namespace

RunScores score_run(const dataset::RunRecord& run, const FuelFieldSequence& truth, const FuelFieldSequence& pred,
                    const losses::LossWeights& w) {
  RunScores s;
  s.id = run.id;
  s.pattern = run.pattern;
  s.wind_speed = run.wind_speed;
  s.wind_direction = run.wind_direction;
  s.mse = metrics::mse_suite(truth.view(), pred.view(), w);
  s.dmse = truth.steps >= 2 ? metrics::dmse(truth.view(), pred.view()) : metrics::Dmse{0.0, true};
  s.consistency = metrics::consistency_metrics(truth.view(), pred.view(), {w.eps, w.eps_b, w.eps_u, 0.0});
  return s;
}

std::vector<RunScores> score_runs(const dataset::Dataset& data, const std::vector<std::string>& ids,
                                  const Predictor& predict_fn, const losses::LossWeights& w) {
  std::vector<RunScores> out;
  for (const auto& id : ids) {
    const auto& run = data.manifest().run(id);
    out.push_back(score_run(run, data.sequence(id), predict_fn(run), w));
  }
  return out;
}

Summary summarize(const std::string& name, const std::vector<RunScores>& runs) {
  Summary s;
  s.name = name;
  s.runs = runs.size();
  if (runs.empty()) return s;
  for (const auto& r : runs) {
    s.mse += r.mse.mse;
    s.burned_mse += r.mse.burned_mse;
    s.unburned_mse += r.mse.unburned_mse;
    s.fire_metrics_mse += r.mse.fire_metrics_mse;
    s.dmse += r.dmse.value;
    s.metric_ft += r.consistency.metric_ft;
    s.metric_burned += r.consistency.metric_burned;
    s.metric_unburned += r.consistency.metric_unburned;
    s.metric_fp += r.consistency.metric_fp;
    s.metric_fn += r.consistency.metric_fn;
  }
  const double n = static_cast<double>(runs.size());
  for (double* f : {&s.mse, &s.burned_mse, &s.unburned_mse, &s.fire_metrics_mse, &s.dmse, &s.metric_ft,
                    &s.metric_burned, &s.metric_unburned, &s.metric_fp, &s.metric_fn}) {
    *f /= n;
  }
  return s;
}

FuelFieldSequence predict(emulator::EmulatorModel& model, const Tensor& inputs) {
  NoGradGuard guard;
  return FuelFieldSequence::from_tensor(model.forward(inputs, false).fuel);
}

Predictor model_predictor(emulator::EmulatorModel& model, const dataset::Dataset& data) {
  return [&model, &data](const dataset::RunRecord& run) { return predict(model, data.inputs(run.id)); };
}

baselines::HistoricalLibrary training_library(const dataset::Dataset& data) {
  baselines::HistoricalLibrary lib;
  const auto& m = data.manifest();
  for (const auto& id : m.train) lib.add(m.scenario(m.run(id)), data.sequence(id));
  return lib;
}

Predictor match_ignition_predictor(const baselines::HistoricalLibrary& library, const dataset::Dataset& data) {
  return [&library, &data](const dataset::RunRecord& run) {
    return *baselines::match_ignition(data.manifest().scenario(run), library).sequence;
  };
}

Predictor match_wind_predictor(const baselines::HistoricalLibrary& library, const dataset::Dataset& data) {
  return [&library, &data](const dataset::RunRecord& run) {
    return *baselines::match_wind(data.manifest().scenario(run), library).sequence;
  };
}

Report build_report(std::vector<Scored> scored) {
  Report report;
  for (const auto& s : scored) report.rows.push_back(summarize(s.name, s.runs));

  // Group keys in a stable order: speeds, directions, then patterns.
  std::map<double, int> speeds, directions;
  std::map<fireca::IgnitionKind, int> patterns;
  for (const auto& s : scored) {
    for (const auto& r : s.runs) {
      speeds[r.wind_speed] = 0;
      directions[r.wind_direction] = 0;
      patterns[r.pattern] = 0;
    }
  }
  auto add_group = [&](const std::string& name, auto&& keep) {
    std::vector<Summary> rows;
    for (const auto& s : scored) {
      std::vector<RunScores> subset;
      for (const auto& r : s.runs) {
        if (keep(r)) subset.push_back(r);
      }
      rows.push_back(summarize(s.name, subset));
    }
    report.subgroups.emplace_back(name, std::move(rows));
  };
  for (const auto& [v, _] : speeds) add_group(label("speed", v), [v](const RunScores& r) { return r.wind_speed == v; });
  for (const auto& [v, _] : directions) {
    add_group(label("direction", v), [v](const RunScores& r) { return r.wind_direction == v; });
  }
  for (const auto& [k, _] : patterns) {
    add_group("pattern=" + std::string(fireca::kind_name(k)), [k](const RunScores& r) { return r.pattern == k; });
  }
  report.scored = std::move(scored);
  return report;
}

std::string report_text(const Report& report) {
  std::string out = "test split\n" + table_header();
  for (const auto& s : report.rows) out += table_row(s);
  for (const auto& [group, rows] : report.subgroups) {
    out += "\n" + group + "\n" + table_header();
    for (const auto& s : rows) out += table_row(s);
  }
  return out;
}

std::string report_kv(const Report& report) {
  std::string out;
  for (const auto& s : report.rows) append_summary_kv(out, "row." + s.name, s);
  for (const auto& [group, rows] : report.subgroups) {
    for (const auto& s : rows) append_summary_kv(out, "subgroup." + group + "." + s.name, s);
  }
  for (const auto& sc : report.scored) {
    for (const auto& r : sc.runs) {
      append_summary_kv(out, "run." + sc.name + "." + r.id, summarize(sc.name, {r}));
    }
  }
  return out;
}

TimingComparison time_inference(emulator::EmulatorModel& model, const dataset::Dataset& data,
                                const std::vector<std::string>& ids, std::size_t repetitions) {
  if (ids.empty()) throw ConfigError("time_inference: no runs to time");
  std::vector<double> emu, sim;
  const auto& m = data.manifest();
  for (const auto& id : ids) {
    const auto config = m.scenario(m.run(id));
    const auto e = metrics::time_calls([&] { predict(model, data.inputs(config)); }, repetitions);
    const auto s = metrics::time_calls([&] { fireca::simulate(config); }, repetitions);
    emu.insert(emu.end(), e.begin(), e.end());
    sim.insert(sim.end(), s.begin(), s.end());
  }
  return {metrics::summarize(emu), metrics::summarize(sim)};
}

std::vector<std::pair<std::string, losses::LossWeights>> ablation_sets(const losses::LossWeights& base) {
  auto only = [&](std::initializer_list<losses::Term> terms) {
    auto w = losses::LossWeights::unconstrained();
    w.ft = base.ft;
    w.ros = base.ros;
    w.ba = base.ba;
    w.burned = base.burned;
    w.unburned = base.unburned;
    w.eps = base.eps;
    w.eps_b = base.eps_b;
    w.eps_u = base.eps_u;
    w.norm = base.norm;
    w.per_cell = base.per_cell;
    w.base = losses::Base::MSE;
    for (auto t : terms) w.set_enabled(t, true);
    return w;
  };
  using losses::Term;
  return {{"FT", only({Term::FT})},
          {"B", only({Term::Burned})},
          {"U", only({Term::Unburned})},
          {"FM", only({Term::ROS, Term::BA})}};
}

AblationTable ablate(const dataset::Dataset& data, const PipelineConfig& config, const Summary* reference,
                     std::ostream* progress) {
  const auto& test = data.manifest().test;
  auto run = [&](const std::string& name, training::TrainOptions options) {
    options.progress = progress;
    auto result = training::train(data, options);
    if (result.aborted) throw TrainingError("ablation " + name + ": " + result.abort_reason);
    auto scores = score_runs(data, test, model_predictor(result.model, data), options.weights);
    return AblationRow{name, summarize(name, scores)};
  };
  AblationTable table;
  if (reference) {
    table.reference = {"none", *reference};
    table.reference.summary.name = "none";
  } else {
    table.reference = run("none", training::options_for(config, emulator::Mode::CL));
  }
  for (const auto& [name, weights] : ablation_sets(config.weights)) {
    auto options = training::options_for(config, emulator::Mode::PGCL);
    options.weights = weights;
    table.rows.push_back(run(name, options));
  }
  return table;
}

std::string ablation_text(const AblationTable& table) {
  std::string out = "one-at-a-time constraint ablation (test split)\n" + table_header();
  for (const auto& r : table.rows) out += table_row(r.summary);
  out += "reference\n" + table_row(table.reference.summary);
  return out;
}

std::string ablation_kv(const AblationTable& table) {
  std::string out;
  for (const auto& r : table.rows) append_summary_kv(out, "ablation." + r.name, r.summary);
  append_summary_kv(out, "reference.none", table.reference.summary);
  return out;
}

}  // namespace ember::evaluation
