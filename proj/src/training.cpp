#include "ember/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>

#include "ember/adam.hpp"
#include "ember/container.hpp"
#include "ember/errors.hpp"
#include "ember/fireca.hpp"

namespace ember::training {

namespace {

using emulator::Mode;

struct Sample {
  std::string id;
  Tensor x;
  Tensor y;
};

std::vector<std::vector<double>> snapshot(emulator::EmulatorModel& model) {
  std::vector<std::vector<double>> out;
  for (auto& [name, t] : model.named_parameters()) out.emplace_back(t.data().begin(), t.data().end());
  for (auto& [name, buf] : model.named_buffers()) out.push_back(*buf);
  return out;
}

void restore(emulator::EmulatorModel& model, const std::vector<std::vector<double>>& saved) {
  std::size_t i = 0;
  for (auto& [name, t] : model.named_parameters()) {
    auto dst = t.mutable_data();
    std::copy(saved[i].begin(), saved[i].end(), dst.begin());
    ++i;
  }
  for (auto& [name, buf] : model.named_buffers()) *buf = saved[i++];
}

// Output biases start at the data scale so early steps are spent on structure.
void init_output_bias(emulator::EmulatorModel& model, double mean_fuel, double prior_rate, std::size_t cells) {
  auto b = model.head_bias().mutable_data();
  const auto& cfg = model.config();
  if (cfg.mode != Mode::PGCLPlus) {
    b[0] = mean_fuel;
    return;
  }
  const std::size_t k = cfg.components;
  for (std::size_t j = 0; j < k; ++j) b[k + j] = mean_fuel;
  const double per_cell = std::max(prior_rate / static_cast<double>(cells), 1e-6);
  model.rate_bias().mutable_data()[0] = std::log(std::expm1(per_cell));
}

LossRecord record(std::size_t epoch, std::size_t step, std::string run, const losses::LossResult& r) {
  LossRecord rec;
  rec.epoch = epoch;
  rec.step = step;
  rec.run = std::move(run);
  rec.total = r.total.item();
  rec.base = r.base;
  rec.terms = r.terms;
  return rec;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TrainOptions options_for(const PipelineConfig& config, Mode mode) {
  TrainOptions o;
  o.mode = mode;
  o.epochs = config.epochs;
  o.lr = config.lr;
  o.seed = config.seed;
  o.hidden = config.hidden;
  o.layers = config.layers;
  o.sigma_floor = config.sigma_floor;
  o.bn_running_at_inference = config.bn_running_at_inference;
  o.weights = config.weights;
  switch (mode) {
    case Mode::CL: {
      auto w = losses::LossWeights::unconstrained();
      w.eps = config.weights.eps;
      w.eps_b = config.weights.eps_b;
      w.eps_u = config.weights.eps_u;
      o.weights = w;
      o.weights.base = losses::Base::MSE;
      break;
    }
    case Mode::PGCL:
      o.weights.base = losses::Base::MSE;
      o.weights.use_pp = false;
      break;
    case Mode::PGCLPlus:
      o.weights.base = losses::Base::MDN_NLL;
      break;
  }
  return o;
}

double training_prior_rate(const dataset::Dataset& data, double eps_b) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const auto& id : data.manifest().train) {
    const auto counts = emulator::burned_counts(data.sequence(id).to_tensor(), eps_b);
    for (double c : counts) total += c;
    frames += counts.size();
  }
  return frames == 0 ? 0.0 : total / static_cast<double>(frames);
}

TrainResult train(const dataset::Dataset& data, const TrainOptions& options) {
  const auto& m = data.manifest();
  if (m.train.empty()) throw ConfigError("train: the training split is empty");
  options.weights.validate();
  if (options.mode == Mode::PGCLPlus && options.weights.base != losses::Base::MDN_NLL) {
    throw ConfigError("train: pgcl+ needs the MDN_NLL base");
  }
  if (options.mode != Mode::PGCLPlus && options.weights.base != losses::Base::MSE) {
    throw ConfigError("train: point-prediction modes need the MSE base");
  }

  emulator::EmulatorConfig mc;
  mc.hidden = options.hidden;
  mc.layers = options.layers;
  mc.mode = options.mode;
  mc.sigma_floor = options.sigma_floor;
  mc.bn_running_at_inference = options.bn_running_at_inference;
  mc.seed = options.seed;
  TrainResult result{emulator::EmulatorModel(mc), {}, {}, 0.0, 0.0, false, {}};
  auto& model = result.model;

  std::vector<Sample> samples;
  double fuel_sum = 0.0;
  std::size_t fuel_n = 0;
  for (const auto& id : m.train) {
    const auto& seq = data.sequence(id);
    for (double v : seq.values) fuel_sum += v;
    fuel_n += seq.values.size();
    samples.push_back({id, data.inputs(id), seq.to_tensor()});
  }
  result.mean_fuel = fuel_sum / static_cast<double>(fuel_n);
  result.prior_rate = training_prior_rate(data, options.weights.eps_b);
  const bool use_pp = options.mode == Mode::PGCLPlus && options.weights.use_pp;
  if (use_pp && !(result.prior_rate > 0.0)) {
    throw ConfigError("train: no burned cells in the training split, the Poisson prior rate would be 0");
  }
  init_output_bias(model, result.mean_fuel, result.prior_rate, m.rows * m.cols);

  Adam adam(model.parameters(), AdamOptions{options.lr});
  std::mt19937_64 order_rng(options.seed ^ 0x0bd3f00dULL);
  std::mt19937_64 psi_rng(options.seed ^ 0x9a11ULL);
  std::vector<std::size_t> order(samples.size());
  auto last_good = snapshot(model);
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(fireca::uniform01(order_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    LossRecord mean;
    mean.epoch = epoch;
    for (std::size_t idx : order) {
      const auto& s = samples[idx];
      auto pred = model.forward(s.x, true);
      std::optional<emulator::PoissonTerms> pp;
      if (use_pp) {
        pp = emulator::poisson_head(pred.mixture->rate, s.y, result.prior_rate, options.weights.eps_b, psi_rng);
      }
      auto loss = losses::total_loss(s.y, pred.fuel, pred.mixture ? &*pred.mixture : nullptr, options.weights,
                                     pp ? &pp->loss : nullptr);
      const double value = loss.total.item();
      if (!std::isfinite(value)) {
        restore(model, last_good);
        result.aborted = true;
        result.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + " on run " + s.id;
        return result;
      }
      adam.zero_grad();
      loss.total.backward();
      try {
        adam.step();
      } catch (const TrainingError& e) {
        restore(model, last_good);
        result.aborted = true;
        result.abort_reason = e.what();
        return result;
      }
      last_good = snapshot(model);
      ++global_step;
      result.steps.push_back(record(epoch, global_step, s.id, loss));
      const auto& rec = result.steps.back();
      mean.total += rec.total;
      mean.base += rec.base;
      for (std::size_t t = 0; t < losses::kTermCount; ++t) mean.terms[t] += rec.terms[t];
    }
    const double n = static_cast<double>(order.size());
    mean.total /= n;
    mean.base /= n;
    for (auto& t : mean.terms) t /= n;
    result.epochs.push_back(mean);
    if (options.progress) {
      *options.progress << emulator::mode_name(options.mode) << " epoch " << epoch + 1 << "/" << options.epochs
                        << " loss " << fmt(mean.total) << " base " << fmt(mean.base) << std::endl;
    }
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& dir, emulator::EmulatorModel& model, double prior_rate,
                     const dataset::DatasetManifest& manifest, const KeyValueConfig& config_echo) {
  const auto& c = model.config();
  KeyValueConfig arch;
  arch.set("mode", std::string(emulator::mode_name(c.mode)));
  arch.set("in_channels", std::to_string(c.in_channels));
  arch.set("hidden", std::to_string(c.hidden));
  arch.set("layers", std::to_string(c.layers));
  arch.set("kernel", std::to_string(c.kernel));
  arch.set("components", std::to_string(c.components));
  arch.set("sigma_floor", fmt(c.sigma_floor));
  arch.set("bn_inference", c.bn_running_at_inference ? "running" : "batch");
  arch.set("seed", std::to_string(c.seed));
  arch.set("prior_rate", fmt(prior_rate));
  arch.set("rows", std::to_string(manifest.rows));
  arch.set("cols", std::to_string(manifest.cols));
  arch.set("steps", std::to_string(manifest.steps));
  auto write_text = [](const std::filesystem::path& p, const std::string& text) {
    container::write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  write_text(dir / "model.txt", arch.dump());
  write_text(dir / "config.txt", config_echo.dump());
  for (auto& [name, t] : model.named_parameters()) container::save(dir / "weights" / (name + ".embr"), t);
  for (auto& [name, buf] : model.named_buffers()) {
    container::save(dir / "weights" / (name + ".embr"), Tensor::from({buf->size()}, *buf));
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto arch = KeyValueConfig::load(dir / "model.txt");
  emulator::EmulatorConfig c;
  auto mode = emulator::parse_mode(arch.get_string("mode", ""));
  if (!mode) throw ConfigError("checkpoint " + dir.string() + ": bad mode");
  c.mode = *mode;
  c.in_channels = static_cast<std::size_t>(arch.get_int("in_channels", 4));
  c.hidden = static_cast<std::size_t>(arch.get_int("hidden", 8));
  c.layers = static_cast<std::size_t>(arch.get_int("layers", 4));
  c.kernel = static_cast<std::size_t>(arch.get_int("kernel", 3));
  c.components = static_cast<std::size_t>(arch.get_int("components", 2));
  c.sigma_floor = arch.get_double("sigma_floor", 0.01);
  c.bn_running_at_inference = arch.get_string("bn_inference", "batch") == "running";
  c.seed = static_cast<std::uint64_t>(arch.get_int("seed", 0));
  Checkpoint ck{emulator::EmulatorModel(c), 0.0, 0, 0, 0};
  ck.prior_rate = arch.get_double("prior_rate", 0.0);
  ck.rows = static_cast<std::size_t>(arch.get_int("rows", 0));
  ck.cols = static_cast<std::size_t>(arch.get_int("cols", 0));
  ck.steps = static_cast<std::size_t>(arch.get_int("steps", 0));
  for (auto& [name, t] : ck.model.named_parameters()) {
    const auto loaded = container::load(dir / "weights" / (name + ".embr"));
    if (loaded.shape() != t.shape()) {
      throw ConfigError("checkpoint: " + name + " has shape " + shape_string(loaded.shape()) + ", model expects " +
                        shape_string(t.shape()));
    }
    auto dst = t.mutable_data();
    std::copy(loaded.data().begin(), loaded.data().end(), dst.begin());
  }
  for (auto& [name, buf] : ck.model.named_buffers()) {
    const auto loaded = container::load(dir / "weights" / (name + ".embr"));
    if (loaded.numel() != buf->size()) throw ConfigError("checkpoint: " + name + " has the wrong length");
    buf->assign(loaded.data().begin(), loaded.data().end());
  }
  return ck;
}

void require_compatible(const Checkpoint& ck, const dataset::DatasetManifest& m) {
  if (ck.rows != m.rows || ck.cols != m.cols || ck.steps != m.steps) {
    throw ConfigError("checkpoint trained on " + std::to_string(ck.steps) + "x" + std::to_string(ck.rows) + "x" +
                      std::to_string(ck.cols) + " but the dataset is " + std::to_string(m.steps) + "x" +
                      std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& records) {
  std::string text = "epoch step run total base";
  for (std::size_t t = 0; t < losses::kTermCount; ++t) {
    text += " " + std::string(losses::term_name(static_cast<losses::Term>(t)));
  }
  text += "\n";
  for (const auto& r : records) {
    text += std::to_string(r.epoch) + " " + std::to_string(r.step) + " " + (r.run.empty() ? "-" : r.run) + " " +
            fmt(r.total) + " " + fmt(r.base);
    for (double v : r.terms) text += " " + fmt(v);
    text += "\n";
  }
  container::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace ember::training
