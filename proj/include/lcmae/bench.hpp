#pragma once

#include <string>
#include <vector>

#include "lcmae/fusion.hpp"

namespace lcmae {

struct BenchRow {
  int n = 0;
  std::string mechanism;  // "token_to_sequence" | "sequence_to_sequence"
  double mean_ns = 0;
  double std_ns = 0;
  double median_ns = 0;
  uint64_t flops = 0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double token_slope = 0;
  double seq_slope = 0;
};

// Least-squares slope of ln(y) against ln(x).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

// Times one fusion attention block (CLS query against [CLS; camera]) and a
// sequence-to-sequence baseline (n decoder tokens attending to n camera
// tokens) at each n. Forward only, raw float32 kernels.
BenchResult bench_fusion_complexity(const std::vector<int>& n_values,
                                    const FusionConfig& cfg, int reps);

void write_bench_csv(const std::string& path, const BenchResult& res);

}  // namespace lcmae
