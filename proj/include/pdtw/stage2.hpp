#ifndef PDTW_STAGE2_HPP
#define PDTW_STAGE2_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pdtw/features.hpp"
#include "pdtw/stage1.hpp"
#include "pdtw/stats.hpp"

namespace pdtw::stage2 {

// Half-open range of masked-frame indices within one file.
struct FrameRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t length() const { return end - begin; }
};

// [start - E, end + E) clipped to the file's masked-frame bounds.
FrameRange expand_segment(const stage1::Segment& seg, std::uint32_t E,
                          std::uint32_t file_frame_count);

// Normal fit over cosine distances of randomly sampled frame pairs across the
// whole masked corpus.
stats::NormalParams calibrate_frame_distances(
    const std::vector<features::MaskedFile>& corpus,
    std::size_t n_samples = 1000000, std::uint64_t rng_seed = 0,
    int threads = 0);

// P[y][z] = cdf(cosine_distance(row y of a, row z of b)), clamped.
MatrixD probability_matrix(const MatrixD& a, FrameRange ra, const MatrixD& b,
                           FrameRange rb, const stats::NormalParams& params,
                           double cdf_clamp = stats::kCdfClampEpsilon);

enum class DtwCostMode { RawProb, LogProb };

struct AlignmentPath {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> steps;  // (p, q)
  std::vector<double> local_p;  // raw probability per step

  // Validates anchoring at (0,0) and (rows-1, cols-1) and step increments in
  // {(1,0),(0,1),(1,1)}; throws std::logic_error on violation.
  static AlignmentPath create(
      std::vector<std::pair<std::uint32_t, std::uint32_t>> steps,
      std::vector<double> local_p, std::size_t rows, std::size_t cols);
};

// Minimum accumulated-cost path from corner to corner under steps
// {(1,0),(0,1),(1,1)}. Cost is the raw probability by default (LogProb uses
// log p instead). Backtracking ties prefer diagonal, then vertical (advance
// in p), then horizontal.
AlignmentPath dtw_min_cost_path(const MatrixD& P,
                                DtwCostMode mode = DtwCostMode::RawProb);

// Sum of log local probabilities along the path (log-domain product).
double path_alignment_logprob(const AlignmentPath& path);

// Contiguous subarray with the minimal sum; inclusive step range. Ties are
// broken by earliest start, then shortest length.
struct Subpath {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
  double sum = 0.0;
  std::size_t length() const { return last - first + 1; }
};
Subpath min_sum_subarray(std::span<const double> s);
// O(n^2) reference with identical summation order and tie-breaks.
Subpath min_sum_subarray_naive(std::span<const double> s);

// Minimizes sum over the range of log(p_d) - log(alpha); the value is the
// log-domain likelihood-ratio score of the best subpath.
struct SubpathLr {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
  double lr = 0.0;
};
SubpathLr best_subpath_lr(const AlignmentPath& path, double alpha);

struct DiscoveredPair {
  std::string file_a, file_b;
  double onset_a = 0.0, offset_a = 0.0;
  double onset_b = 0.0, offset_b = 0.0;
  double lr_score = 0.0;
  std::uint32_t path_length = 0;  // steps in the chosen subpath
  std::uint32_t cand_seg_a = 0, cand_seg_b = 0;
};

enum class Rejection { None, TooShort, SelfOverlap };

struct AlignOutcome {
  Rejection rejection = Rejection::None;
  DiscoveredPair pair;  // valid when rejection == None
};

struct AlignOptions {
  double alpha = 1e-3;
  std::uint32_t expand_frames = 25;    // E
  std::uint32_t min_path_steps = 5;    // L_min
  DtwCostMode cost_mode = DtwCostMode::RawProb;
  double cdf_clamp = stats::kCdfClampEpsilon;
};

// Expands both candidate segments, aligns them, extracts the best subpath and
// maps its endpoints back to file times ([first frame time, last frame time +
// frame shift] on each side independently). Rejections are normal outcomes.
AlignOutcome align_pair(const stage1::CandidatePair& cand,
                        const stage1::SegmentTable& table,
                        const std::vector<features::MaskedFile>& corpus,
                        const stats::NormalParams& params_d,
                        const AlignOptions& opts);

// Parallel batch over candidates; results are returned in candidate order, so
// output is thread-count invariant.
std::vector<AlignOutcome> align_candidates(
    std::span<const stage1::CandidatePair> candidates,
    const stage1::SegmentTable& table,
    const std::vector<features::MaskedFile>& corpus,
    const stats::NormalParams& params_d, const AlignOptions& opts,
    int threads = 0);

}  // namespace pdtw::stage2

#endif  // PDTW_STAGE2_HPP
