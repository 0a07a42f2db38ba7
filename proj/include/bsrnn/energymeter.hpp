// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_ENERGYMETER_HPP_
#define BSRNN_ENERGYMETER_HPP_

#include <string>
#include <vector>

namespace bsrnn {

struct HardwareSpec {
  double n_gpus = 0.0;
  double gpu_power_w = 0.0;
  double gpu_usage_fraction = 1.0;
  double n_cpu_cores = 0.0;
  double core_power_w = 0.0;
  double cpu_usage_fraction = 1.0;
  double memory_gb = 0.0;
  double pue = 1.5;

  void validate() const;
  std::string to_json() const;
  static HardwareSpec from_json(const std::string& text);
};

// kWh = hours * (gpu + cpu + 0.375 W/GB memory) * PUE / 1000.
double estimate_energy_kwh(double wall_time_h, const HardwareSpec& hw);

struct ParetoPoint {
  double metric_db = 0.0;
  double energy_kwh = 0.0;
  std::string label;
};

// Strict dominance: another point must be better on BOTH axes to knock one
// out. Survivors come back ordered by energy (ascending, stable).
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

struct RunReport {
  std::string run_id;
  std::string source;
  std::string model_label;
  double wall_time_h = 0.0;
  HardwareSpec hardware;
  double energy_kwh = 0.0;
  double measured_kwh = -1.0;  // < 0 means not measured
  double best_metric_db = 0.0;
  int epochs = 0;
  uint64_t seed = 0;

  std::string to_json() const;
  static RunReport from_json(const std::string& text);
};

}  // namespace bsrnn

#endif  // BSRNN_ENERGYMETER_HPP_
