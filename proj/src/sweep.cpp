#include "rankctl/sweep.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace rankctl {

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 2) throw InvalidInput("log_grid: need 0 < lo <= hi and count >= 2");
  std::vector<double> out;
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

namespace {

InterventionSpec with_phi(InterventionSpec spec, double phi) {
  spec.phi = Vector::Constant(spec.tau.size(), phi);
  return spec;
}

SweepCell run_cell(const ContextStream& stream, const InterventionSpec& base, const ControllerConfig& config,
                   double phi, const SweepOptions& options) {
  const InterventionSpec spec = with_phi(base, phi);
  ControllerConfig chosen = config;
  if (options.tuning && (config.kind == ControllerKind::kStationary || config.kind == ControllerKind::kPredictive ||
                         config.kind == ControllerKind::kPControl)) {
    const SweepTuning& tun = *options.tuning;
    const InterventionSpec dev_spec = with_phi(tun.dev_spec, phi);
    std::function<ProgressToGoTable(std::size_t, std::size_t)> dev_forecasts;
    if (options.forecast_for) {
      dev_forecasts = [&](std::size_t b_off, std::size_t b_on) { return options.forecast_for(tun.dev, dev_spec, b_off, b_on); };
    }
    const auto configs = expand_grid(config.kind, tun.grid, dev_forecasts);
    const TuningResult tuned = tune_gain(tun.dev, configs, dev_spec, tun.options);
    chosen = tuned.best;
    if (chosen.kind == ControllerKind::kPredictive) {
      chosen.forecasts = options.forecast_for(stream, spec, chosen.offline_samples, chosen.forecasts->num_forecasts());
    }
  } else if (config.kind == ControllerKind::kPredictive && !config.forecasts) {
    if (!options.forecast_for) throw InvalidInput("sweep: predictive controller needs forecasts");
    const std::size_t b_off = config.offline_samples ? config.offline_samples : 20;
    const std::size_t b_on = options.online_forecasts ? std::min(options.online_forecasts, b_off) : b_off;
    chosen.forecasts = options.forecast_for(stream, spec, b_off, b_on);
    chosen.offline_samples = b_off;
  }
  Controller controller(chosen, spec);
  SweepCell cell;
  cell.controller = to_string(config.kind);
  cell.phi = phi;
  cell.config = chosen;
  cell.result = run_episode(controller, stream, spec, options.mode, options.seed);
  return cell;
}

}  // namespace

std::vector<SweepCell> sweep_phi(const ContextStream& stream, const InterventionSpec& spec,
                                 const std::vector<ControllerConfig>& controllers,
                                 const std::vector<double>& phi_grid, const SweepOptions& options) {
  if (phi_grid.empty()) throw InvalidInput("sweep: empty phi grid");
  if (controllers.empty()) throw InvalidInput("sweep: no controllers");
  for (double phi : phi_grid) {
    if (!(phi >= 0.0) || !std::isfinite(phi)) throw InvalidInput("sweep: phi must be finite and >= 0");
  }
  const std::size_t cells = controllers.size() * phi_grid.size();
  std::vector<SweepCell> out(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < cells; k = next++) {
      try {
        out[k] = run_cell(stream, spec, controllers[k / phi_grid.size()], phi_grid[k % phi_grid.size()], options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(cells)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return out;
}

}  // namespace rankctl
