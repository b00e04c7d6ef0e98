#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "latentbo/bo/loop.hpp"

namespace latentbo::analysis {

using math::Tensor;

// Pairwise latent-distance populations for the high/low objective split, plus
// equal-width histograms over the pooled range.
struct SeparationReport {
  std::vector<double> high_high, low_low, high_low;
  double mean_hh = 0.0, mean_ll = 0.0, mean_hl = 0.0;
  std::vector<double> bin_edges;                  // kBins + 1 edges
  std::array<std::vector<int>, 3> bin_counts;     // hh, ll, hl
  bool degenerate_split = false;                  // all-equal objective values

  static constexpr int kBins = 50;

  double inter_intra_ratio() const {
    const double intra = std::max(mean_hh, mean_ll);
    return mean_hl / std::max(intra, 1e-12);
  }
};

namespace detail {
inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}
}  // namespace detail

// Distances are computed from latent rows directly; the public entry point
// below encodes labeled inputs first.
inline SeparationReport separation_report_from_latents(const Tensor& latents,
                                                       const std::vector<double>& f) {
  const int n = latents.rows();
  if (n < 4) throw std::invalid_argument("separation_report: need at least 4 points");
  if (static_cast<int>(f.size()) != n)
    throw std::invalid_argument("separation_report: label count mismatch");

  SeparationReport rep;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const bool all_equal = std::all_of(f.begin(), f.end(), [&](double v) { return v == f[0]; });
  if (all_equal) {
    rep.degenerate_split = true;  // split by index, stable
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return f[static_cast<std::size_t>(a)] > f[static_cast<std::size_t>(b)]; });
  }
  const int n_high = n / 2;
  std::vector<bool> is_high(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n_high; ++i) is_high[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  auto dist = [&](int a, int b) {
    double s = 0.0;
    for (int dd = 0; dd < latents.cols(); ++dd) {
      const double diff = latents.at(a, dd) - latents.at(b, dd);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      if (is_high[static_cast<std::size_t>(i)] && is_high[static_cast<std::size_t>(j)])
        rep.high_high.push_back(d);
      else if (!is_high[static_cast<std::size_t>(i)] && !is_high[static_cast<std::size_t>(j)])
        rep.low_low.push_back(d);
      else
        rep.high_low.push_back(d);
    }
  rep.mean_hh = detail::mean_of(rep.high_high);
  rep.mean_ll = detail::mean_of(rep.low_low);
  rep.mean_hl = detail::mean_of(rep.high_low);

  double lo = 1e300, hi = -1e300;
  for (const auto* pop : {&rep.high_high, &rep.low_low, &rep.high_low})
    for (double d : *pop) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  if (hi <= lo) hi = lo + 1.0;  // collapsed space: single-width bins
  rep.bin_edges.resize(SeparationReport::kBins + 1);
  for (int b = 0; b <= SeparationReport::kBins; ++b)
    rep.bin_edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / SeparationReport::kBins;
  const auto populations = {&rep.high_high, &rep.low_low, &rep.high_low};
  int pi = 0;
  for (const auto* pop : populations) {
    auto& counts = rep.bin_counts[static_cast<std::size_t>(pi++)];
    counts.assign(SeparationReport::kBins, 0);
    for (double d : *pop) {
      int b = static_cast<int>((d - lo) / (hi - lo) * SeparationReport::kBins);
      b = std::clamp(b, 0, SeparationReport::kBins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
  }
  return rep;
}

// Rank by objective value, split at the median into high/low halves (ties by
// stable order; odd counts put the extra point in the low half), encode all
// points to latent means, and report the three pairwise-distance populations.
inline SeparationReport separation_report(const vae::VaeParams& params,
                                          const std::vector<tasks::Input>& inputs,
                                          const std::vector<double>& f) {
  auto latents = bo::build_latent_dataset(params, inputs);
  if (!latents) throw std::invalid_argument("separation_report: empty labeled set");
  return separation_report_from_latents(*latents, f);
}

}  // namespace latentbo::analysis
