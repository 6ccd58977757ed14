#pragma once

// phi sweeps: one closed-loop episode per (controller, phi) cell.

#include "rankctl/controllers.hpp"
#include "rankctl/forecast.hpp"
#include "rankctl/simhub.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rankctl {

struct SweepCell {
  std::string controller;
  double phi = 0.0;  // every constraint uses this factor
  ControllerConfig config;
  EpisodeResult result;
};

struct SweepTuning {
  ContextStream dev;
  InterventionSpec dev_spec;  // tau for the dev horizon; phi is overwritten per cell
  TuningGrid grid;
  TuningOptions options;
};

struct SweepOptions {
  ProgressMode mode = ProgressMode::kExpected;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  // Forecasts for predictive cells on the given evaluation stream and spec.
  std::function<ProgressToGoTable(const ContextStream&, const InterventionSpec&, std::size_t, std::size_t)>
      forecast_for;
  std::size_t online_forecasts = 0;  // untuned predictive cells; 0 uses every offline sample
  std::optional<SweepTuning> tuning;  // per-(controller, phi) re-tuning when set
};

// Log-spaced grid lo..hi with count points (count >= 2).
std::vector<double> log_grid(double lo, double hi, std::size_t count);

// Cells are ordered by (controller index, phi index) regardless of workers.
std::vector<SweepCell> sweep_phi(const ContextStream& stream, const InterventionSpec& spec,
                                 const std::vector<ControllerConfig>& controllers,
                                 const std::vector<double>& phi_grid, const SweepOptions& options = {});

}  // namespace rankctl
