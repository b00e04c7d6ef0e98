#pragma once

#include "latentbo/analysis/gp_eval.hpp"
#include "latentbo/analysis/recovery.hpp"
#include "latentbo/analysis/separation.hpp"
#include "latentbo/analysis/summary.hpp"

namespace latentbo::analysis {

// Histogram CSV: (population, bin_left, bin_right, count) rows for external plotting.
inline void write_separation_csv(const std::string& path, const SeparationReport& rep,
                                 const nlohmann::json& resolved_config) {
  io::CsvWriter w;
  w.comment("config: " + resolved_config.dump());
  w.comment("means: high_high=" + io::format_double(rep.mean_hh) +
            " low_low=" + io::format_double(rep.mean_ll) +
            " high_low=" + io::format_double(rep.mean_hl));
  w.header({"population", "bin_left", "bin_right", "count"});
  const char* names[3] = {"high_high", "low_low", "high_low"};
  for (int pop = 0; pop < 3; ++pop)
    for (int b = 0; b < SeparationReport::kBins; ++b)
      w.row_strings({names[pop], io::format_double(rep.bin_edges[static_cast<std::size_t>(b)]),
                     io::format_double(rep.bin_edges[static_cast<std::size_t>(b) + 1]),
                     std::to_string(rep.bin_counts[static_cast<std::size_t>(pop)][static_cast<std::size_t>(b)])});
  w.save(path);
}

inline void write_recovery_csv(const std::string& path, const RecoveryTrace& trace,
                               const nlohmann::json& resolved_config) {
  io::CsvWriter w;
  w.comment("config: " + resolved_config.dump());
  w.header({"epoch", "p_tilde", "capped"});
  for (std::size_t i = 0; i < trace.p.size(); ++i)
    w.row_strings({std::to_string(i), io::format_double(trace.p[i]), trace.capped[i] ? "1" : "0"});
  w.save(path);
}

}  // namespace latentbo::analysis
