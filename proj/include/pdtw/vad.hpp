#ifndef PDTW_VAD_HPP
#define PDTW_VAD_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pdtw/features.hpp"
#include "pdtw/stats.hpp"

namespace pdtw::vad {

struct SpeechMask {
  std::string file_id;
  std::vector<std::uint8_t> keep;        // one flag per frame
  std::vector<std::uint32_t> kept_indices;  // original frame index per kept frame
  std::vector<double> kept_frame_times;     // center time per kept frame
};

struct VadOptions {
  double threshold = 0.01;    // one-tailed probability cutoff
  bool speech_by_mean = false;  // pick the speech component by larger mean
                                // instead of larger weight
  bool use_normalized_c0 = false;
  std::uint64_t rng_seed = 0;  // forwarded to fit_gmm2
};

struct VadResult {
  std::vector<SpeechMask> masks;
  bool degenerate = false;  // GMM fit failed; everything kept
  stats::Gmm2Params gmm;
  int speech_component = -1;   // index into gmm arrays, -1 when degenerate
  double cut_value = 0.0;      // frames beyond this value (toward the other
                               // component) are discarded
  bool cut_below = true;       // true: discard c0 < cut_value, else c0 > cut_value
};

// Pools dimension 0 of every file, fits a two-component GMM, and discards
// frames whose one-tailed probability under the speech component (on the tail
// facing the other component) is below threshold. The speech component is the
// one with the larger mixture weight by default. A degenerate fit keeps all
// frames.
VadResult compute_speech_mask(const std::vector<features::FeatureMatrix>& corpus,
                              const VadOptions& opts = {});

// All-frames-kept masks, used when VAD is disabled or degenerate.
std::vector<SpeechMask> keep_all_masks(
    const std::vector<features::FeatureMatrix>& corpus);

features::MaskedFile apply_mask(const features::FeatureMatrix& m,
                                const SpeechMask& mask);

// TSV lines "<file_id>\t<frame_index>\t<0|1>".
void write_masks_tsv(const std::string& path,
                     const std::vector<SpeechMask>& masks);
// Rebuilds masks from the TSV; frame times are recomputed from the given
// frame shift and length (center of frame i = i*shift + length/2).
std::vector<SpeechMask> read_masks_tsv(const std::string& path,
                                       double frame_shift,
                                       double frame_length);

}  // namespace pdtw::vad

#endif  // PDTW_VAD_HPP
