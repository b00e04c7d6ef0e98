#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latentbo/bo/loop.hpp"
#include "latentbo/io/csv.hpp"

namespace latentbo::analysis {

// Per-step aggregation of incumbent and cumulative regret across seeds,
// aligned by step and truncated to the shortest trace when lengths differ.
struct Summary {
  std::vector<int> steps;
  std::vector<double> mean_incumbent, sd_incumbent;
  std::vector<double> mean_cum_regret, sd_cum_regret;
  bool truncated = false;
};

inline Summary summarize(const std::vector<std::vector<bo::TraceRecord>>& traces) {
  if (traces.empty()) throw std::invalid_argument("summarize: need at least one trace");
  std::size_t len = traces[0].size();
  for (const auto& t : traces) len = std::min(len, t.size());
  Summary s;
  for (const auto& t : traces) s.truncated |= t.size() != len;
  const double n = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < len; ++i) {
    double mi = 0.0, mr = 0.0;
    for (const auto& t : traces) {
      mi += t[i].incumbent_f;
      mr += t[i].cum_regret;
    }
    mi /= n;
    mr /= n;
    double vi = 0.0, vr = 0.0;
    for (const auto& t : traces) {
      vi += (t[i].incumbent_f - mi) * (t[i].incumbent_f - mi);
      vr += (t[i].cum_regret - mr) * (t[i].cum_regret - mr);
    }
    s.steps.push_back(traces[0][i].step);
    s.mean_incumbent.push_back(mi);
    s.sd_incumbent.push_back(traces.size() > 1 ? std::sqrt(vi / (n - 1)) : 0.0);
    s.mean_cum_regret.push_back(mr);
    s.sd_cum_regret.push_back(traces.size() > 1 ? std::sqrt(vr / (n - 1)) : 0.0);
  }
  return s;
}

inline void write_summary_csv(const std::string& path, const Summary& s,
                              const nlohmann::json& resolved_config) {
  io::CsvWriter w;
  w.comment("config: " + resolved_config.dump());
  if (s.truncated) w.comment("warning: traces had mismatched lengths; truncated to the shortest");
  w.header({"step", "mean_incumbent", "sd_incumbent", "mean_cum_regret", "sd_cum_regret"});
  for (std::size_t i = 0; i < s.steps.size(); ++i)
    w.row({static_cast<double>(s.steps[i]), s.mean_incumbent[i], s.sd_incumbent[i],
           s.mean_cum_regret[i], s.sd_cum_regret[i]});
  w.save(path);
}

}  // namespace latentbo::analysis
