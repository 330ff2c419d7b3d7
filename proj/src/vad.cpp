#include "pdtw/vad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace pdtw::vad {

namespace {

SpeechMask mask_from_flags(const features::FeatureMatrix& m,
                           std::vector<std::uint8_t> keep) {
  SpeechMask mask;
  mask.file_id = m.file_id;
  mask.keep = std::move(keep);
  for (std::size_t i = 0; i < mask.keep.size(); ++i) {
    if (mask.keep[i]) {
      mask.kept_indices.push_back(static_cast<std::uint32_t>(i));
      mask.kept_frame_times.push_back(m.frame_time(i));
    }
  }
  return mask;
}

}  // namespace

std::vector<SpeechMask> keep_all_masks(
    const std::vector<features::FeatureMatrix>& corpus) {
  std::vector<SpeechMask> masks;
  masks.reserve(corpus.size());
  for (const auto& m : corpus) {
    masks.push_back(
        mask_from_flags(m, std::vector<std::uint8_t>(m.frames.rows, 1)));
  }
  return masks;
}

VadResult compute_speech_mask(const std::vector<features::FeatureMatrix>& corpus,
                              const VadOptions& opts) {
  VadResult res;
  std::vector<double> pooled;
  for (const auto& m : corpus) {
    for (std::size_t r = 0; r < m.frames.rows; ++r) {
      pooled.push_back(m.frames.at(r, 0));
    }
  }

  try {
    res.gmm = stats::fit_gmm2(pooled, 200, 1e-6, opts.rng_seed);
  } catch (const DegenerateSample&) {
    res.degenerate = true;
    res.masks = keep_all_masks(corpus);
    return res;
  }

  // Components are sorted by mean; pick the speech one.
  int speech;
  if (opts.speech_by_mean) {
    speech = 1;
  } else {
    speech = res.gmm.weight[1] > res.gmm.weight[0] ? 1 : 0;
  }
  const int other = 1 - speech;
  res.speech_component = speech;

  const stats::NormalParams sp{res.gmm.mean[speech],
                               std::sqrt(res.gmm.variance[speech])};
  // Cut the tail of the speech component that faces the other component.
  res.cut_below = res.gmm.mean[speech] > res.gmm.mean[other];

  for (const auto& m : corpus) {
    std::vector<std::uint8_t> keep(m.frames.rows, 1);
    for (std::size_t r = 0; r < m.frames.rows; ++r) {
      const double x = m.frames.at(r, 0);
      const double p = stats::normal_cdf_raw(x, sp);
      const double tail = res.cut_below ? p : 1.0 - p;
      if (tail < opts.threshold) keep[r] = 0;
    }
    res.masks.push_back(mask_from_flags(m, std::move(keep)));
  }

  // Report the threshold location for diagnostics: the c0 value at which the
  // facing tail hits the cutoff.
  {
    // Invert the normal CDF by bisection; plenty fast for a single value.
    double lo = sp.mu - 40.0 * sp.sigma, hi = sp.mu + 40.0 * sp.sigma;
    const double target = res.cut_below ? opts.threshold : 1.0 - opts.threshold;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (stats::normal_cdf_raw(mid, sp) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    res.cut_value = 0.5 * (lo + hi);
  }
  return res;
}

features::MaskedFile apply_mask(const features::FeatureMatrix& m,
                                const SpeechMask& mask) {
  features::MaskedFile out;
  out.file_id = m.file_id;
  out.frame_shift = m.frame_shift;
  out.frame_times = mask.kept_frame_times;
  out.frames = MatrixD(mask.kept_indices.size(), m.frames.cols);
  for (std::size_t r = 0; r < mask.kept_indices.size(); ++r) {
    const auto src = m.frames.row(mask.kept_indices[r]);
    std::copy(src.begin(), src.end(), out.frames.row(r).begin());
  }
  return out;
}

void write_masks_tsv(const std::string& path,
                     const std::vector<SpeechMask>& masks) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path);
  for (const auto& mask : masks) {
    for (std::size_t i = 0; i < mask.keep.size(); ++i) {
      out << mask.file_id << '\t' << i << '\t' << (mask.keep[i] ? 1 : 0) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<SpeechMask> read_masks_tsv(const std::string& path,
                                       double frame_shift,
                                       double frame_length) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  // Preserve first-seen file order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<std::uint32_t, std::uint8_t>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, idx_s, keep_s;
    if (!std::getline(ss, id, '\t') || !std::getline(ss, idx_s, '\t') ||
        !std::getline(ss, keep_s, '\t')) {
      throw MalformedLine(path + ":" + std::to_string(lineno));
    }
    if (rows.find(id) == rows.end()) order.push_back(id);
    rows[id].emplace_back(static_cast<std::uint32_t>(std::stoul(idx_s)),
                          static_cast<std::uint8_t>(std::stoi(keep_s) ? 1 : 0));
  }
  std::vector<SpeechMask> masks;
  for (const auto& id : order) {
    auto& entries = rows[id];
    std::sort(entries.begin(), entries.end());
    SpeechMask mask;
    mask.file_id = id;
    mask.keep.resize(entries.size());
    for (const auto& [idx, keep] : entries) {
      if (idx >= mask.keep.size()) {
        throw MalformedLine(path + ": non-contiguous frame indices for " + id);
      }
      mask.keep[idx] = keep;
    }
    for (std::size_t i = 0; i < mask.keep.size(); ++i) {
      if (mask.keep[i]) {
        mask.kept_indices.push_back(static_cast<std::uint32_t>(i));
        mask.kept_frame_times.push_back(static_cast<double>(i) * frame_shift +
                                        0.5 * frame_length);
      }
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

}  // namespace pdtw::vad
