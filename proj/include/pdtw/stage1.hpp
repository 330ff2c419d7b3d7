#ifndef PDTW_STAGE1_HPP
#define PDTW_STAGE1_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pdtw/features.hpp"
#include "pdtw/stats.hpp"

namespace pdtw::stage1 {

using stats::cosine_distance;

struct Segment {
  std::uint32_t segment_id = 0;
  std::uint32_t file_index = 0;
  std::uint32_t start_frame = 0;  // indices into the file's masked frames
  std::uint32_t end_frame = 0;    // exclusive; end - start == window_frames
  double start_time = 0.0;
  double end_time = 0.0;
};

struct SegmentTable {
  std::vector<Segment> segments;
  MatrixF embeddings;  // one row per segment, M*d columns
  std::vector<std::string> file_ids;
  std::vector<std::uint32_t> file_frame_counts;  // masked frames per file
  std::uint32_t window_frames = 20;      // L
  std::uint32_t shift_frames = 10;       // S
  std::uint32_t downsample_frames = 4;   // M
  double frame_shift = 0.010;

  std::size_t size() const { return segments.size(); }
};

// Bin b of the downsampled window covers frames [floor(b*L/M), floor((b+1)*L/M)).
// Bin means are concatenated into an M*d vector. Throws BadConfig if M > rows.
std::vector<float> embed_segment(const MatrixD& frames, std::size_t row_begin,
                                 std::size_t row_count, std::uint32_t M);

// Fixed-length windows of L masked frames every S frames, per file; the
// trailing remainder is dropped and segments never span files.
SegmentTable segment_corpus(const std::vector<features::MaskedFile>& corpus,
                            std::uint32_t L = 20, std::uint32_t S = 10,
                            std::uint32_t M = 4);

stats::NormalParams calibrate_segment_distances(const SegmentTable& table,
                                                std::size_t n_samples = 1000000,
                                                std::uint64_t rng_seed = 0,
                                                int threads = 0);

struct CandidatePair {
  std::uint32_t seg_a = 0;  // seg_a < seg_b
  std::uint32_t seg_b = 0;
  double distance = 0.0;
  double p_value = 0.0;
};

// Pre-deduplication match: query-major output of the k-NN sweep.
struct RawMatch {
  std::uint32_t query = 0;
  std::uint32_t match = 0;
  double distance = 0.0;
  double p_value = 0.0;
};

struct CandidateSearchOptions {
  std::uint32_t k = 5;
  double alpha = 1e-3;
  double cdf_clamp = stats::kCdfClampEpsilon;
  int threads = 0;
};

// Segments are inadmissible as neighbors when they come from the same file
// and their masked-frame windows overlap or abut (|start delta| < L + S).
bool admissible(const Segment& a, const Segment& b, std::uint32_t L,
                std::uint32_t S);

// Per query segment, the k nearest admissible segments with p(d) < alpha,
// ties on distance broken by lower segment id. Embeddings are L2-normalized
// once and the sweep runs as a blocked inner-product scan, parallel over
// query blocks; output is ordered by (query, distance, match) and is
// thread-count invariant.
std::vector<RawMatch> find_candidates_raw(const SegmentTable& table,
                                          const stats::NormalParams& params,
                                          const CandidateSearchOptions& opts = {});

// Serial reference: plain double loop with a full sort per query. Kept for
// testing and benchmarking against the blocked sweep.
std::vector<RawMatch> find_candidates_raw_naive(
    const SegmentTable& table, const stats::NormalParams& params,
    const CandidateSearchOptions& opts = {});

// Canonical (min_id, max_id) pairs, sorted and deduplicated.
std::vector<CandidatePair> canonicalize(const std::vector<RawMatch>& raw);

std::vector<CandidatePair> find_candidates(const SegmentTable& table,
                                           const stats::NormalParams& params,
                                           const CandidateSearchOptions& opts = {});
std::vector<CandidatePair> find_candidates_naive(
    const SegmentTable& table, const stats::NormalParams& params,
    const CandidateSearchOptions& opts = {});

// TSV dump "<seg_a>\t<seg_b>\t<distance>\t<p_value>".
void write_candidates_tsv(const std::string& path,
                          std::span<const CandidatePair> pairs);

}  // namespace pdtw::stage1

#endif  // PDTW_STAGE1_HPP
