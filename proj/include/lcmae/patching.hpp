#pragma once

#include <iosfwd>

#include "lcmae/image.hpp"
#include "lcmae/mat.hpp"

namespace lcmae {

// Row-major patch grid; patch k covers rows [pr*P, pr*P+P) and columns
// [pc*P, pc*P+P) with k = pr*grid_cols + pc. Within a patch, values are
// flattened channel-major then row-major.
template <typename S = float>
struct PatchSequence {
  int grid_rows = 0;
  int grid_cols = 0;
  int patch_size = 0;
  int channels = 0;
  Mat<S> data;  // n_patches x (P*P*C)

  int n_patches() const { return grid_rows * grid_cols; }
  int patch_dim() const { return patch_size * patch_size * channels; }
};

// Seeded permutation of patch indices. The first n_keep entries are the
// visible set, the rest are masked; together they partition all indices.
struct MaskPlan {
  int n_patches = 0;
  int n_keep = 0;
  uint64_t seed = 0;
  std::vector<int> permutation;

  std::vector<int> visible_indices() const {
    return {permutation.begin(), permutation.begin() + n_keep};
  }
  std::vector<int> masked_indices() const {
    return {permutation.begin() + n_keep, permutation.end()};
  }
  void validate() const;
};

template <typename S = float>
PatchSequence<S> patchify(const Image& img, int patch_size);

template <typename S = float>
Image unpatchify(const PatchSequence<S>& seq);

// Fisher-Yates over SplitMix64(seed), j = next() % (i+1); n_keep rounds
// (1 - mask_ratio) * n_patches half-up.
MaskPlan sample_mask(int n_patches, double mask_ratio, uint64_t seed);

// Visible patches in permutation order; grid metadata retained.
template <typename S = float>
PatchSequence<S> gather_visible(const PatchSequence<S>& seq, const MaskPlan& plan);

void write_mask_plan(std::ostream& out, const MaskPlan& plan);
MaskPlan read_mask_plan(std::istream& in);
void write_mask_plan_file(const std::string& path, const MaskPlan& plan);
MaskPlan read_mask_plan_file(const std::string& path);

}  // namespace lcmae
