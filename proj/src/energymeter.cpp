// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/energymeter.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

#include "json.hpp"

namespace bsrnn {

using nlohmann::json;

void HardwareSpec::validate() const {
  for (double v : {n_gpus, gpu_power_w, gpu_usage_fraction, n_cpu_cores, core_power_w,
                   cpu_usage_fraction, memory_gb})
    if (v < 0.0) throw std::invalid_argument("hardware spec fields must be non-negative");
  if (pue < 1.0) throw std::invalid_argument("pue must be >= 1");
}

std::string HardwareSpec::to_json() const {
  const json j = {{"n_gpus", n_gpus},
                  {"gpu_power_w", gpu_power_w},
                  {"gpu_usage_fraction", gpu_usage_fraction},
                  {"n_cpu_cores", n_cpu_cores},
                  {"core_power_w", core_power_w},
                  {"cpu_usage_fraction", cpu_usage_fraction},
                  {"memory_gb", memory_gb},
                  {"pue", pue}};
  return j.dump();
}

HardwareSpec HardwareSpec::from_json(const std::string& text) {
  const json j = json::parse(text);
  HardwareSpec hw;
  hw.n_gpus = j.value("n_gpus", 0.0);
  hw.gpu_power_w = j.value("gpu_power_w", 0.0);
  hw.gpu_usage_fraction = j.value("gpu_usage_fraction", 1.0);
  hw.n_cpu_cores = j.value("n_cpu_cores", 0.0);
  hw.core_power_w = j.value("core_power_w", 0.0);
  hw.cpu_usage_fraction = j.value("cpu_usage_fraction", 1.0);
  hw.memory_gb = j.value("memory_gb", 0.0);
  hw.pue = j.value("pue", 1.5);
  hw.validate();
  return hw;
}

double estimate_energy_kwh(double wall_time_h, const HardwareSpec& hw) {
  if (wall_time_h < 0.0) throw std::invalid_argument("wall time must be non-negative");
  hw.validate();
  const double watts = hw.n_gpus * hw.gpu_power_w * hw.gpu_usage_fraction +
                       hw.n_cpu_cores * hw.core_power_w * hw.cpu_usage_fraction +
                       hw.memory_gb * 0.375;
  return wall_time_h * watts * hw.pue / 1000.0;
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
  std::vector<size_t> order(points.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return points[a].energy_kwh < points[b].energy_kwh;
  });

  std::vector<ParetoPoint> front;
  double best_lower = -1e300;  // best metric among strictly cheaper points
  size_t i = 0;
  while (i < order.size()) {
    // Points sharing one energy value cannot dominate each other.
    size_t j = i;
    double group_best = -1e300;
    for (; j < order.size() &&
           points[order[j]].energy_kwh == points[order[i]].energy_kwh;
         ++j) {
      const ParetoPoint& p = points[order[j]];
      if (p.metric_db >= best_lower) front.push_back(p);
      group_best = std::max(group_best, p.metric_db);
    }
    best_lower = std::max(best_lower, group_best);
    i = j;
  }
  return front;
}

std::string RunReport::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["source"] = source;
  j["model_label"] = model_label;
  j["wall_time_h"] = wall_time_h;
  j["hardware"] = json::parse(hardware.to_json());
  j["energy_kwh"] = energy_kwh;
  if (measured_kwh >= 0.0) j["measured_kwh"] = measured_kwh;
  j["best_metric_db"] = best_metric_db;
  j["epochs"] = epochs;
  j["seed"] = seed;
  return j.dump();
}

RunReport RunReport::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunReport r;
  r.run_id = j.value("run_id", "");
  r.source = j.value("source", "");
  r.model_label = j.value("model_label", "");
  r.wall_time_h = j.value("wall_time_h", 0.0);
  if (j.contains("hardware")) r.hardware = HardwareSpec::from_json(j["hardware"].dump());
  r.energy_kwh = j.value("energy_kwh", 0.0);
  r.measured_kwh = j.value("measured_kwh", -1.0);
  r.best_metric_db = j.value("best_metric_db", 0.0);
  r.epochs = j.value("epochs", 0);
  r.seed = j.value("seed", uint64_t{0});
  return r;
}

}  // namespace bsrnn
