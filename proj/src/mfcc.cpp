#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <vector>

#include "pdtw/features.hpp"

namespace pdtw::features {

namespace {

// FFTW plan creation is not thread-safe; execution on per-call buffers is.
std::mutex g_fftw_plan_mutex;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// Triangular filterbank over the magnitude spectrum, filters equally spaced
// on the mel scale between 0 and nyquist. weights[m][k] for bin k.
std::vector<std::vector<double>> build_mel_filters(int num_filters, int fft_size,
                                                   double sample_rate) {
  const int num_bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i) {
    const double mel = mel_max * static_cast<double>(i) / (num_filters + 1);
    edges[i] = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  }
  std::vector<std::vector<double>> weights(num_filters,
                                           std::vector<double>(num_bins, 0.0));
  const double bin_hz = sample_rate / fft_size;
  for (int m = 0; m < num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < num_bins; ++k) {
      const double f = k * bin_hz;
      if (f > lo && f < mid) {
        weights[m][k] = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        weights[m][k] = (hi - f) / (hi - mid);
      }
    }
  }
  return weights;
}

struct FftwRealDeleter {
  void operator()(double* p) const { fftw_free(p); }
};
struct FftwComplexDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

}  // namespace

MatrixD compute_deltas(const MatrixD& x, int context) {
  MatrixD d(x.rows, x.cols);
  double denom = 0.0;
  for (int n = 1; n <= context; ++n) denom += 2.0 * n * n;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(x.rows) - 1;
  for (std::ptrdiff_t t = 0; t <= last; ++t) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      double acc = 0.0;
      for (int n = 1; n <= context; ++n) {
        const std::ptrdiff_t hi = std::min(t + n, last);
        const std::ptrdiff_t lo = std::max(t - n, std::ptrdiff_t{0});
        acc += n * (x.at(hi, c) - x.at(lo, c));
      }
      d.at(t, c) = acc / denom;
    }
  }
  return d;
}

FeatureMatrix compute_mfcc(const Waveform& w, const MfccOptions& opts) {
  const int flen = opts.frame_length_samples;
  const int fshift = opts.frame_shift_samples;
  if (static_cast<int>(w.samples.size()) < flen) {
    throw TooShort(w.file_id + ": shorter than one analysis window");
  }
  const std::size_t num_frames = (w.samples.size() - flen) / fshift + 1;
  const int num_bins = opts.fft_size / 2 + 1;

  std::vector<double> hamming(flen);
  for (int n = 0; n < flen; ++n) {
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (flen - 1));
  }
  const auto filters = build_mel_filters(opts.num_filters, opts.fft_size,
                                         w.sample_rate);
  // Orthonormal DCT-II basis, num_cepstra x num_filters.
  MatrixD dct(opts.num_cepstra, opts.num_filters);
  for (int k = 0; k < opts.num_cepstra; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / opts.num_filters);
    for (int m = 0; m < opts.num_filters; ++m) {
      dct.at(k, m) = scale * std::cos(M_PI * k * (m + 0.5) / opts.num_filters);
    }
  }

  std::unique_ptr<double, FftwRealDeleter> fft_in(fftw_alloc_real(opts.fft_size));
  std::unique_ptr<fftw_complex, FftwComplexDeleter> fft_out(
      fftw_alloc_complex(num_bins));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(opts.fft_size, fft_in.get(), fft_out.get(),
                                FFTW_ESTIMATE);
  }

  MatrixD statics(num_frames, opts.num_cepstra);
  std::vector<double> frame(flen), energies(opts.num_filters);
  for (std::size_t f = 0; f < num_frames; ++f) {
    const float* src = w.samples.data() + f * fshift;
    for (int n = 0; n < flen; ++n) frame[n] = src[n];
    for (int n = flen - 1; n >= 1; --n) {
      frame[n] -= opts.pre_emphasis * frame[n - 1];
    }
    frame[0] *= 1.0 - opts.pre_emphasis;
    for (int n = 0; n < flen; ++n) fft_in.get()[n] = frame[n] * hamming[n];
    for (int n = flen; n < opts.fft_size; ++n) fft_in.get()[n] = 0.0;
    fftw_execute(plan);

    for (int m = 0; m < opts.num_filters; ++m) {
      double acc = 0.0;
      const auto& wts = filters[m];
      for (int k = 0; k < num_bins; ++k) {
        if (wts[k] == 0.0) continue;
        const double re = fft_out.get()[k][0];
        const double im = fft_out.get()[k][1];
        acc += wts[k] * std::sqrt(re * re + im * im);
      }
      energies[m] = std::log(std::max(acc, opts.filterbank_floor));
    }
    for (int k = 0; k < opts.num_cepstra; ++k) {
      double acc = 0.0;
      for (int m = 0; m < opts.num_filters; ++m) acc += dct.at(k, m) * energies[m];
      statics.at(f, k) = acc;
    }
  }
  {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }

  const MatrixD delta = compute_deltas(statics, opts.delta_context);
  const MatrixD delta2 = compute_deltas(delta, opts.delta_context);

  FeatureMatrix m;
  m.file_id = w.file_id;
  m.frame_shift = static_cast<double>(fshift) / w.sample_rate;
  m.frame_length = static_cast<double>(flen) / w.sample_rate;
  m.frames = MatrixD(num_frames, 3 * opts.num_cepstra);
  for (std::size_t f = 0; f < num_frames; ++f) {
    for (int k = 0; k < opts.num_cepstra; ++k) {
      m.frames.at(f, k) = statics.at(f, k);
      m.frames.at(f, opts.num_cepstra + k) = delta.at(f, k);
      m.frames.at(f, 2 * opts.num_cepstra + k) = delta2.at(f, k);
    }
  }
  return m;
}

}  // namespace pdtw::features
