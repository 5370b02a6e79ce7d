#include "lcmae/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace lcmae {

double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ContractError("fit_loglog_slope: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    if (x <= 0 || y <= 0) throw ContractError("fit_loglog_slope: values must be positive");
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double m = static_cast<double>(points.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

namespace {

Mat<float> random_mat(int r, int c, SplitMix64& rng) {
  Mat<float> m(r, c);
  for (float& v : m.d) v = static_cast<float>(rng.uniform(-0.05, 0.05));
  return m;
}

Mat<float> col_block(const Mat<float>& a, int c0, int w) {
  Mat<float> out(a.rows, w);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < w; ++c) out(r, c) = a(r, c0 + c);
  return out;
}

struct AttnWeights {
  Mat<float> wq, wk, wv, wo;
  Mat<float> bq, bo;
};

// One multi-head attention pass with queries q (m x d) and keys/values kv
// (n x d); returns m x d. Matches the model's computation shape-for-shape.
Mat<float> attention_pass(const Mat<float>& q_in, const Mat<float>& kv,
                          const AttnWeights& w, int n_heads) {
  int d = w.wq.cols;
  int hd = d / n_heads;
  Mat<float> q = matmul(q_in, w.wq);
  for (int r = 0; r < q.rows; ++r)
    for (int c = 0; c < d; ++c) q(r, c) += w.bq(0, c);
  flops::add(static_cast<uint64_t>(q.rows) * d);
  Mat<float> k = matmul(kv, w.wk);
  Mat<float> v = matmul(kv, w.wv);
  Mat<float> concat(q.rows, d);
  float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  for (int h = 0; h < n_heads; ++h) {
    Mat<float> qh = col_block(q, h * hd, hd);
    Mat<float> kh = col_block(k, h * hd, hd);
    Mat<float> vh = col_block(v, h * hd, hd);
    Mat<float> scores = matmul_nt(qh, kh);
    for (float& s : scores.d) s *= scale;
    flops::add(scores.d.size());
    Mat<float> p = softmax_rows(scores);
    Mat<float> oh = matmul(p, vh);
    for (int r = 0; r < oh.rows; ++r)
      for (int c = 0; c < hd; ++c) concat(r, h * hd + c) = oh(r, c);
  }
  Mat<float> out = matmul(concat, w.wo);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < d; ++c) out(r, c) += w.bo(0, c);
  flops::add(static_cast<uint64_t>(out.rows) * d);
  return out;
}

struct Timing {
  double mean_ns, std_ns, median_ns;
};

template <typename F>
Timing time_reps(int reps, F&& fn) {
  fn();  // warm-up: touches pages, primes caches
  std::vector<double> ns(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    ns[static_cast<size_t>(i)] =
        std::chrono::duration<double, std::nano>(t1 - t0).count();
  }
  double mean = 0;
  for (double v : ns) mean += v;
  mean /= reps;
  double var = 0;
  for (double v : ns) var += (v - mean) * (v - mean);
  var /= reps;
  std::vector<double> sorted = ns;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[sorted.size() / 2];
  return {mean, std::sqrt(var), median};
}

}  // namespace

BenchResult bench_fusion_complexity(const std::vector<int>& n_values,
                                    const FusionConfig& cfg, int reps) {
  cfg.validate();
  if (n_values.size() < 5)
    throw ContractError("bench_fusion_complexity: need >= 5 sequence lengths");
  for (size_t i = 1; i < n_values.size(); ++i)
    if (n_values[i] <= n_values[i - 1])
      throw ContractError("bench_fusion_complexity: n_values must be ascending");
  if (n_values.front() < 1)
    throw ContractError("bench_fusion_complexity: sequence lengths must be positive");
  if (reps < 30) throw ContractError("bench_fusion_complexity: reps must be >= 30");

  int d = cfg.embed_dim;
  SplitMix64 rng(0x9e3779b97f4a7c15ULL);
  AttnWeights w{random_mat(d, d, rng), random_mat(d, d, rng), random_mat(d, d, rng),
                random_mat(d, d, rng), random_mat(1, d, rng), random_mat(1, d, rng)};
  Mat<float> cls = random_mat(1, d, rng);

  BenchResult res;
  std::vector<std::pair<double, double>> token_pts, seq_pts;
  volatile float sink = 0.0f;
  for (int n : n_values) {
    Mat<float> cam = random_mat(n, d, rng);
    Mat<float> dec = random_mat(n, d, rng);

    auto token_pass = [&] {
      Mat<float> kv(n + 1, d);
      std::copy(cls.d.begin(), cls.d.end(), kv.d.begin());
      std::copy(cam.d.begin(), cam.d.end(), kv.d.begin() + d);
      Mat<float> out = attention_pass(cls, kv, w, cfg.n_heads);
      sink = sink + out(0, 0);
    };
    auto seq_pass = [&] {
      Mat<float> out = attention_pass(dec, cam, w, cfg.n_heads);
      sink = sink + out(0, 0);
    };

    flops::reset();
    token_pass();
    uint64_t token_flops = flops::total();
    flops::reset();
    seq_pass();
    uint64_t seq_flops = flops::total();

    Timing tt = time_reps(reps, token_pass);
    Timing ts = time_reps(reps, seq_pass);
    res.rows.push_back({n, "token_to_sequence", tt.mean_ns, tt.std_ns, tt.median_ns,
                        token_flops});
    res.rows.push_back({n, "sequence_to_sequence", ts.mean_ns, ts.std_ns, ts.median_ns,
                        seq_flops});
    token_pts.emplace_back(n, tt.median_ns);
    seq_pts.emplace_back(n, ts.median_ns);
  }
  res.token_slope = fit_loglog_slope(token_pts);
  res.seq_slope = fit_loglog_slope(seq_pts);
  return res;
}

void write_bench_csv(const std::string& path, const BenchResult& res) {
  std::ofstream out(path);
  if (!out) throw FormatError("bench: cannot write " + path);
  out << "n,mechanism,mean_ns,std_ns,flops\n";
  for (const BenchRow& r : res.rows)
    out << r.n << ',' << r.mechanism << ',' << static_cast<uint64_t>(r.mean_ns) << ','
        << static_cast<uint64_t>(r.std_ns) << ',' << r.flops << '\n';
}

}  // namespace lcmae
