#ifndef PDTW_FEATURES_HPP
#define PDTW_FEATURES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pdtw/common.hpp"

namespace pdtw::features {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::string file_id;
  std::vector<float> samples;  // amplitudes in [-1, 1)
  int sample_rate = kSampleRate;
};

struct FeatureMatrix {
  std::string file_id;
  MatrixD frames;  // one row per frame
  double frame_shift = 0.010;
  double frame_length = 0.025;
  // Dimensions that had zero variance during normalization (centered only).
  std::vector<std::uint8_t> degenerate_dims;

  // Center time of frame i; strictly increasing with step frame_shift.
  double frame_time(std::size_t i) const {
    return static_cast<double>(i) * frame_shift + 0.5 * frame_length;
  }
};

// A file after voice-activity masking: only kept frames, with their original
// center times. This is what both search stages consume.
struct MaskedFile {
  std::string file_id;
  MatrixD frames;
  std::vector<double> frame_times;
  double frame_shift = 0.010;
};

// Strict RIFF reader: PCM 16-bit mono 16 kHz only, no resampling. Samples are
// scaled by 1/32768. file_id is the path stem.
Waveform load_wav(const std::string& path);

struct MfccOptions {
  double pre_emphasis = 0.97;
  int frame_length_samples = 400;  // 25 ms at 16 kHz
  int frame_shift_samples = 160;   // 10 ms
  int fft_size = 512;
  int num_filters = 24;       // triangular mel filters over 0..8 kHz
  int num_cepstra = 13;       // includes c0
  int delta_context = 2;      // +/- frames for the delta regression
  double filterbank_floor = 1e-10;
};

// 13 static cepstra + deltas + delta-deltas = 39 dims. Pre-emphasis is applied
// per frame, then a Hamming window, 512-point magnitude spectrum, 24 mel
// filters, log, DCT-II. Normalization is a separate step. Throws TooShort for
// input below one analysis window.
FeatureMatrix compute_mfcc(const Waveform& w, const MfccOptions& opts = {});

// Delta coefficients by least-squares slope over +/- context frames, with
// boundary frames replicated. Exposed for direct testing.
MatrixD compute_deltas(const MatrixD& x, int context = 2);

enum class NormScope { PerFile, PerCorpus };

// Zero-mean unit-variance per dimension (population std). Zero-variance
// dimensions are centered only and flagged in degenerate_dims.
void normalize_features(FeatureMatrix& m);
void normalize_features(std::vector<FeatureMatrix>& corpus, NormScope scope);

// PDTWFEAT binary format: magic "PDTWFEAT", u32-le frame count, u32-le
// dimension count, f32-le frame_shift_seconds, then frames*dims f32-le values
// row-major. CSV files (one comma-separated frame per line) take their frame
// shift from csv_frame_shift. Loaded matrices get frame_length = frame_shift.
FeatureMatrix load_features(const std::string& path,
                            double csv_frame_shift = 0.010);
void store_features(const std::string& path, const FeatureMatrix& m);

}  // namespace pdtw::features

#endif  // PDTW_FEATURES_HPP
