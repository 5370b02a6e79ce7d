#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "lcmae/bench.hpp"
#include "lcmae/run_config.hpp"
#include "lcmae/training.hpp"

namespace fs = std::filesystem;
using namespace lcmae;

namespace {

constexpr double kDegToRad = M_PI / 180.0;

struct GridFlags {
  int height = 64, width = 1024;
  double elev_min_deg = -24.8, elev_max_deg = 2.0;
  double az_min_deg = -180.0, az_max_deg = 180.0;
  double max_range = 80.0, z_min = -3.0, z_max = 7.0;
  bool desk = false;

  void attach(CLI::App* app) {
    app->add_flag("--desk", desk, "use the desk-scale grid preset");
    app->add_option("--grid-height", height);
    app->add_option("--grid-width", width);
    app->add_option("--elev-min-deg", elev_min_deg);
    app->add_option("--elev-max-deg", elev_max_deg);
    app->add_option("--az-min-deg", az_min_deg);
    app->add_option("--az-max-deg", az_max_deg);
    app->add_option("--max-range", max_range);
    app->add_option("--z-min", z_min);
    app->add_option("--z-max", z_max);
  }

  GridSpec build() const {
    if (desk) return desk_grid();
    GridSpec g;
    g.height = height;
    g.width = width;
    g.elevation_min = elev_min_deg * kDegToRad;
    g.elevation_max = elev_max_deg * kDegToRad;
    g.azimuth_min = az_min_deg * kDegToRad;
    g.azimuth_max = az_max_deg * kDegToRad;
    g.max_range = max_range;
    g.z_min = z_min;
    g.z_max = z_max;
    g.validate();
    return g;
  }
};

FullConfig config_for_ckpt(const std::string& config_path, const std::string& ckpt_path) {
  std::string path = config_path;
  if (path.empty())
    path = (fs::path(ckpt_path).parent_path() / "config.txt").string();
  return load_config_file(path);
}

CameraMode parse_mode(const std::string& s) {
  if (s == "full") return CameraMode::full;
  if (s == "zero-image") return CameraMode::zero_image;
  if (s == "zero-tokens") return CameraMode::zero_tokens;
  throw ContractError("unknown camera mode '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  throw ContractError("unknown split '" + s + "'");
}

int cmd_project(const std::string& in, const std::string& out_dir,
                const std::string& stem, const GridFlags& gf) {
  GridSpec grid = gf.build();
  PointCloud cloud = load_point_cloud_file(in);
  SphericalImage img = spherical_project(cloud, grid);
  fs::create_directories(out_dir);
  std::string name = stem.empty() ? fs::path(in).stem().string() : stem;
  save_spherical_image(out_dir, name, img, grid);
  size_t occ = 0;
  for (uint8_t o : img.occupancy) occ += o;
  std::printf("projected %zu points onto %dx%d grid, %zu cells occupied\n",
              cloud.points.size(), grid.height, grid.width, occ);
  return 0;
}

int cmd_gen_scenes(int count, uint64_t seed, const std::string& out_dir, int n_boxes,
                   double noise_std, int camera_size, bool project,
                   const GridFlags& gf) {
  GridSpec grid = gf.desk ? desk_grid() : gf.build();
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    SceneParams p;
    p.seed = derive_seed(seed, 0, static_cast<uint64_t>(i));
    p.n_boxes = n_boxes;
    p.noise_std = noise_std;
    p.camera_height = camera_size;
    p.camera_width = camera_size;
    p.grid = grid;
    ScenePair pair = generate_scene(p);
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene%04d", i);
    save_point_cloud_file(out_dir + "/" + stem + ".bin", pair.cloud);
    write_ppm(out_dir + "/" + stem + "_camera.ppm", pair.camera);
    if (project) {
      SphericalImage img = spherical_project(pair.cloud, grid);
      save_spherical_image(out_dir, stem, img, grid);
    }
  }
  std::printf("wrote %d scenes to %s\n", count, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume) {
  FullConfig cfg = load_config_file(config_path);
  TrainOptions opt;
  opt.resume_stem = resume;
  TrainReport rep = train(cfg, out_dir, opt);
  if (!rep.rows.empty()) {
    const EpochRecord& last = rep.rows.back();
    std::printf("done: %zu epochs, final val MSSIM %.4f (camera) / %.4f (zero tokens), "
                "%.1fs\n",
                rep.rows.size(), last.val_mssim_camera, last.val_mssim_zero_tokens,
                rep.wall_seconds);
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& config_path,
             const std::string& split_name, const std::string& mode_name,
             const std::string& out_csv) {
  FullConfig cfg = config_for_ckpt(config_path, ckpt);
  uint64_t digest = config_digest(cfg);
  ParamStore<float> ps = build_params<float>(cfg.model);
  load_checkpoint(ckpt, ps, digest);
  Split split = parse_split(split_name);
  CameraMode mode = parse_mode(mode_name);
  std::vector<Sample> samples = build_split(cfg, split);
  EvalResult res = evaluate(ps, cfg, samples, split, mode);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_csv.empty()) {
    file.open(out_csv);
    if (!file) throw FormatError("eval: cannot write " + out_csv);
    out = &file;
  }
  char head[64];
  std::snprintf(head, sizeof head, "# config_digest %016llx\n",
                static_cast<unsigned long long>(digest));
  *out << head << "index,full_mssim,masked_mssim\n";
  for (size_t i = 0; i < res.full_mssim.size(); ++i) {
    char row[96];
    std::snprintf(row, sizeof row, "%zu,%.9f,%.9f\n", i, res.full_mssim[i],
                  res.masked_mssim[i]);
    *out << row;
  }
  char agg[96];
  std::snprintf(agg, sizeof agg, "mean,%.9f,%.9f\n", res.mean_full, res.mean_masked);
  *out << agg;
  std::fprintf(stderr, "%s/%s: mean MSSIM %.6f full, %.6f masked-region (%zu samples)\n",
               split_name.c_str(), mode_name.c_str(), res.mean_full, res.mean_masked,
               res.full_mssim.size());
  return 0;
}

int cmd_reconstruct(const std::string& ckpt, const std::string& config_path,
                    const std::string& split_name, int index, int64_t mask_seed,
                    const std::string& mode_name, const std::string& out_dir) {
  FullConfig cfg = config_for_ckpt(config_path, ckpt);
  uint64_t digest = config_digest(cfg);
  ParamStore<float> ps = build_params<float>(cfg.model);
  load_checkpoint(ckpt, ps, digest);
  Split split = parse_split(split_name);
  CameraMode mode = parse_mode(mode_name);
  Sample s = make_sample(cfg, split, index);
  uint64_t seed = mask_seed >= 0 ? static_cast<uint64_t>(mask_seed)
                                 : eval_mask_seed(cfg.model.seed, split, index);
  MaskPlan plan = sample_mask(cfg.model.n_lidar_patches(), cfg.model.mask_ratio, seed);
  ForwardOutput<float> out =
      mode == CameraMode::full ? forward(s.lidar, s.camera, ps, cfg.model, plan)
                               : forward_no_camera(s.lidar, ps, cfg.model, plan, mode);

  fs::create_directories(out_dir);
  Image masked = masked_input_image(s.lidar.img, plan, cfg.model.patch_size);
  Image composite =
      masked_composite(s.lidar.img, out.reconstruction, plan, cfg.model.patch_size);
  const char* chan[3] = {"intensity", "range", "height"};
  for (int c = 0; c < 3; ++c) {
    std::string suffix = std::string(chan[c]) + ".pgm";
    write_pgm(out_dir + "/target_" + suffix, s.lidar.img, c);
    write_pgm(out_dir + "/masked_" + suffix, masked, c);
    write_pgm(out_dir + "/recon_" + suffix, out.reconstruction, c);
    write_pgm(out_dir + "/composite_" + suffix, composite, c);
  }
  write_ppm(out_dir + "/camera.ppm", s.camera);
  write_mask_plan_file(out_dir + "/mask.plan", plan);
  double full = ms_ssim(out.reconstruction, s.lidar.img);
  double masked_score = ms_ssim(composite, s.lidar.img);
  std::printf("sample %s[%d], loss %.6f, MSSIM %.4f full / %.4f masked-region\n",
              split_name.c_str(), index, static_cast<double>(out.loss), full,
              masked_score);
  return 0;
}

int cmd_bench(int min_n, int max_n, int reps, int embed_dim, int n_heads,
              const std::string& out_csv) {
  std::vector<int> ns;
  for (int n = min_n; n <= max_n; n *= 2) ns.push_back(n);
  FusionConfig cfg;
  cfg.embed_dim = embed_dim;
  cfg.n_heads = n_heads;
  cfg.depth = 1;
  BenchResult res = bench_fusion_complexity(ns, cfg, reps);
  if (!out_csv.empty()) write_bench_csv(out_csv, res);
  for (const BenchRow& r : res.rows)
    std::printf("n=%5d  %-22s mean %12.0f ns  std %10.0f ns  flops %llu\n", r.n,
                r.mechanism.c_str(), r.mean_ns, r.std_ns,
                static_cast<unsigned long long>(r.flops));
  std::printf("log-log slopes: token_to_sequence %.3f, sequence_to_sequence %.3f\n",
              res.token_slope, res.seq_slope);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-camera fusion masked autoencoder toolkit"};
  app.require_subcommand(1);

  auto* project = app.add_subcommand("project", "project a point cloud to a spherical image");
  std::string pr_in, pr_out = ".", pr_stem;
  GridFlags pr_grid;
  project->add_option("--in", pr_in, "point cloud file (x,y,z,intensity float32 records)")
      ->required();
  project->add_option("--out-dir", pr_out);
  project->add_option("--stem", pr_stem, "output file stem (default: input stem)");
  pr_grid.attach(project);

  auto* gen = app.add_subcommand("gen-scenes", "generate synthetic scene pairs");
  int g_count = 8;
  uint64_t g_seed = 7;
  std::string g_out = "scenes";
  int g_boxes = 3, g_cam = 64;
  double g_noise = 0.01;
  bool g_project = false;
  GridFlags g_grid;
  g_grid.desk = true;
  gen->add_option("--count", g_count);
  gen->add_option("--seed", g_seed);
  gen->add_option("--out-dir", g_out);
  gen->add_option("--n-boxes", g_boxes);
  gen->add_option("--noise-std", g_noise);
  gen->add_option("--camera-size", g_cam);
  gen->add_flag("--project", g_project, "also write projected spherical images");
  g_grid.attach(gen);

  auto* tr = app.add_subcommand("train", "train from a config file");
  std::string t_config, t_out = "run", t_resume;
  tr->add_option("--config", t_config)->required();
  tr->add_option("--out", t_out);
  tr->add_option("--resume", t_resume, "checkpoint stem to resume from (no extension)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string e_ckpt, e_config, e_split = "val", e_mode = "full", e_out;
  ev->add_option("--ckpt", e_ckpt)->required();
  ev->add_option("--config", e_config, "config file (default: config.txt next to ckpt)");
  ev->add_option("--split", e_split)->check(CLI::IsMember({"train", "val"}));
  ev->add_option("--camera-mode", e_mode)
      ->check(CLI::IsMember({"full", "zero-image", "zero-tokens"}));
  ev->add_option("--out", e_out, "write CSV here instead of stdout");

  auto* rc = app.add_subcommand("reconstruct", "dump reconstruction images for one sample");
  std::string r_ckpt, r_config, r_split = "val", r_mode = "full", r_out = "recon";
  int r_index = 0;
  int64_t r_seed = -1;
  rc->add_option("--ckpt", r_ckpt)->required();
  rc->add_option("--config", r_config);
  rc->add_option("--split", r_split)->check(CLI::IsMember({"train", "val"}));
  rc->add_option("--index", r_index);
  rc->add_option("--mask-seed", r_seed, "mask seed (default: the split's eval seed)");
  rc->add_option("--camera-mode", r_mode)
      ->check(CLI::IsMember({"full", "zero-image", "zero-tokens"}));
  rc->add_option("--out-dir", r_out);

  auto* be = app.add_subcommand("bench-attention", "attention complexity benchmark");
  int b_min = 256, b_max = 8192, b_reps = 30, b_dim = 64, b_heads = 4;
  std::string b_out;
  be->add_option("--min-n", b_min);
  be->add_option("--max-n", b_max);
  be->add_option("--reps", b_reps);
  be->add_option("--embed-dim", b_dim);
  be->add_option("--n-heads", b_heads);
  be->add_option("--out", b_out, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(project)) return cmd_project(pr_in, pr_out, pr_stem, pr_grid);
    if (app.got_subcommand(gen))
      return cmd_gen_scenes(g_count, g_seed, g_out, g_boxes, g_noise, g_cam, g_project,
                            g_grid);
    if (app.got_subcommand(tr)) return cmd_train(t_config, t_out, t_resume);
    if (app.got_subcommand(ev)) return cmd_eval(e_ckpt, e_config, e_split, e_mode, e_out);
    if (app.got_subcommand(rc))
      return cmd_reconstruct(r_ckpt, r_config, r_split, r_index, r_seed, r_mode, r_out);
    if (app.got_subcommand(be))
      return cmd_bench(b_min, b_max, b_reps, b_dim, b_heads, b_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
