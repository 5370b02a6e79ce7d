#include "lcmae/patching.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lcmae {

void MaskPlan::validate() const {
  if (static_cast<int>(permutation.size()) != n_patches)
    throw ShapeError("MaskPlan: permutation length != n_patches");
  if (n_keep < 0 || n_keep > n_patches) throw ShapeError("MaskPlan: bad n_keep");
  std::vector<char> seen(n_patches, 0);
  for (int v : permutation) {
    if (v < 0 || v >= n_patches || seen[v])
      throw ShapeError("MaskPlan: permutation is not a bijection");
    seen[v] = 1;
  }
}

template <typename S>
PatchSequence<S> patchify(const Image& img, int P) {
  if (P <= 0 || img.height % P != 0 || img.width % P != 0)
    throw ShapeError("patchify: image " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + " not divisible by patch size " +
                     std::to_string(P));
  PatchSequence<S> seq;
  seq.grid_rows = img.height / P;
  seq.grid_cols = img.width / P;
  seq.patch_size = P;
  seq.channels = img.channels;
  seq.data = Mat<S>(seq.n_patches(), seq.patch_dim());
  for (int pr = 0; pr < seq.grid_rows; ++pr)
    for (int pc = 0; pc < seq.grid_cols; ++pc) {
      int k = pr * seq.grid_cols + pc;
      int off = 0;
      for (int c = 0; c < img.channels; ++c)
        for (int r = 0; r < P; ++r)
          for (int col = 0; col < P; ++col)
            seq.data(k, off++) = static_cast<S>(img.at(c, pr * P + r, pc * P + col));
    }
  return seq;
}

template <typename S>
Image unpatchify(const PatchSequence<S>& seq) {
  if (seq.data.rows != seq.n_patches() || seq.data.cols != seq.patch_dim())
    throw ShapeError("unpatchify: data shape inconsistent with grid");
  const int P = seq.patch_size;
  Image img(seq.grid_rows * P, seq.grid_cols * P, seq.channels);
  for (int pr = 0; pr < seq.grid_rows; ++pr)
    for (int pc = 0; pc < seq.grid_cols; ++pc) {
      int k = pr * seq.grid_cols + pc;
      int off = 0;
      for (int c = 0; c < seq.channels; ++c)
        for (int r = 0; r < P; ++r)
          for (int col = 0; col < P; ++col)
            img.at(c, pr * P + r, pc * P + col) = static_cast<float>(seq.data(k, off++));
    }
  return img;
}

MaskPlan sample_mask(int n_patches, double mask_ratio, uint64_t seed) {
  if (n_patches <= 0) throw ContractError("sample_mask: n_patches must be positive");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0))
    throw ContractError("sample_mask: mask_ratio must be in [0, 1)");
  MaskPlan plan;
  plan.n_patches = n_patches;
  plan.seed = seed;
  plan.n_keep = static_cast<int>(std::floor((1.0 - mask_ratio) * n_patches + 0.5));
  plan.permutation.resize(n_patches);
  std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
  SplitMix64 rng(seed);
  for (int i = n_patches - 1; i >= 1; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(plan.permutation[i], plan.permutation[j]);
  }
  return plan;
}

template <typename S>
PatchSequence<S> gather_visible(const PatchSequence<S>& seq, const MaskPlan& plan) {
  plan.validate();
  if (plan.n_patches != seq.n_patches())
    throw ShapeError("gather_visible: plan patch count mismatch");
  PatchSequence<S> out = seq;
  out.data = Mat<S>(plan.n_keep, seq.patch_dim());
  for (int i = 0; i < plan.n_keep; ++i)
    for (int j = 0; j < seq.patch_dim(); ++j)
      out.data(i, j) = seq.data(plan.permutation[i], j);
  return out;
}

void write_mask_plan(std::ostream& out, const MaskPlan& plan) {
  out << "maskplan 1\n"
      << plan.n_patches << " " << plan.n_keep << " " << plan.seed << "\n";
  for (int i = 0; i < plan.n_patches; ++i)
    out << plan.permutation[i] << (i + 1 == plan.n_patches ? '\n' : ' ');
}

MaskPlan read_mask_plan(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "maskplan" || version != 1)
    throw FormatError("mask plan: bad header");
  MaskPlan plan;
  if (!(in >> plan.n_patches >> plan.n_keep >> plan.seed))
    throw FormatError("mask plan: bad counts");
  plan.permutation.resize(plan.n_patches);
  for (int i = 0; i < plan.n_patches; ++i)
    if (!(in >> plan.permutation[i])) throw FormatError("mask plan: truncated permutation");
  plan.validate();
  return plan;
}

void write_mask_plan_file(const std::string& path, const MaskPlan& plan) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  write_mask_plan(f, plan);
}

MaskPlan read_mask_plan_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open mask plan file " + path);
  return read_mask_plan(f);
}

template PatchSequence<float> patchify<float>(const Image&, int);
template PatchSequence<double> patchify<double>(const Image&, int);
template Image unpatchify<float>(const PatchSequence<float>&);
template Image unpatchify<double>(const PatchSequence<double>&);
template PatchSequence<float> gather_visible<float>(const PatchSequence<float>&, const MaskPlan&);
template PatchSequence<double> gather_visible<double>(const PatchSequence<double>&, const MaskPlan&);

}  // namespace lcmae
