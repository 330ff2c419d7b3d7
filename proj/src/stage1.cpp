#include "pdtw/stage1.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pdtw::stage1 {

namespace {

// Top-k accumulator ordered by (distance, segment_id). Small k, so linear
// insertion beats a heap.
struct TopK {
  std::uint32_t k;
  std::vector<std::pair<double, std::uint32_t>> items;  // sorted ascending

  explicit TopK(std::uint32_t k_) : k(k_) { items.reserve(k_); }

  void offer(double d, std::uint32_t id) {
    const std::pair<double, std::uint32_t> cand{d, id};
    if (items.size() == k && !(cand < items.back())) return;
    auto pos = std::upper_bound(items.begin(), items.end(), cand);
    items.insert(pos, cand);
    if (items.size() > k) items.pop_back();
  }
};

// Unit-normalized copy of the embeddings; norms in 64-bit, stored back as
// 32-bit so the sweep reads floats and accumulates doubles.
MatrixF normalized_embeddings(const SegmentTable& table) {
  MatrixF normed(table.embeddings.rows, table.embeddings.cols);
  for (std::size_t r = 0; r < table.embeddings.rows; ++r) {
    const auto src = table.embeddings.row(r);
    double ss = 0.0;
    for (float v : src) ss += static_cast<double>(v) * v;
    const double inv = 1.0 / std::max(std::sqrt(ss), 1e-12);
    auto dst = normed.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = static_cast<float>(src[c] * inv);
    }
  }
  return normed;
}

double dot_f32(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return acc;
}

}  // namespace

std::vector<float> embed_segment(const MatrixD& frames, std::size_t row_begin,
                                 std::size_t row_count, std::uint32_t M) {
  if (M == 0 || M > row_count) {
    throw BadConfig("embed_segment: need 1 <= M <= window length");
  }
  const std::size_t d = frames.cols;
  std::vector<float> out(M * d);
  for (std::uint32_t b = 0; b < M; ++b) {
    const std::size_t lo = b * row_count / M;
    const std::size_t hi = (b + 1) * row_count / M;
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        acc += frames.at(row_begin + r, c);
      }
      out[b * d + c] = static_cast<float>(acc / static_cast<double>(hi - lo));
    }
  }
  return out;
}

SegmentTable segment_corpus(const std::vector<features::MaskedFile>& corpus,
                            std::uint32_t L, std::uint32_t S, std::uint32_t M) {
  if (L == 0 || S == 0 || M == 0 || M > L) {
    throw BadConfig("segment_corpus: require L > 0, S > 0, 0 < M <= L");
  }
  SegmentTable table;
  table.window_frames = L;
  table.shift_frames = S;
  table.downsample_frames = M;

  std::size_t dim = 0;
  std::size_t count = 0;
  for (const auto& file : corpus) {
    if (file.frames.rows == 0) continue;
    if (dim == 0) {
      dim = file.frames.cols;
    } else if (file.frames.cols != dim) {
      throw DimensionMismatch("segment_corpus: files have differing dimensions");
    }
    if (file.frames.rows >= L) count += (file.frames.rows - L) / S + 1;
  }
  table.embeddings = MatrixF(count, M * dim);

  std::uint32_t next_id = 0;
  for (std::uint32_t fi = 0; fi < corpus.size(); ++fi) {
    const auto& file = corpus[fi];
    table.file_ids.push_back(file.file_id);
    table.file_frame_counts.push_back(static_cast<std::uint32_t>(file.frames.rows));
    if (fi == 0) table.frame_shift = file.frame_shift;
    if (file.frames.rows < L) continue;
    for (std::size_t off = 0; off + L <= file.frames.rows; off += S) {
      Segment seg;
      seg.segment_id = next_id;
      seg.file_index = fi;
      seg.start_frame = static_cast<std::uint32_t>(off);
      seg.end_frame = static_cast<std::uint32_t>(off + L);
      seg.start_time = file.frame_times[off];
      seg.end_time = file.frame_times[off + L - 1] + file.frame_shift;
      const auto emb = embed_segment(file.frames, off, L, M);
      std::copy(emb.begin(), emb.end(), table.embeddings.row(next_id).begin());
      table.segments.push_back(seg);
      ++next_id;
    }
  }
  return table;
}

stats::NormalParams calibrate_segment_distances(const SegmentTable& table,
                                                std::size_t n_samples,
                                                std::uint64_t rng_seed,
                                                int threads) {
  stats::VectorCollectionF vecs;
  vecs.count = table.embeddings.rows;
  vecs.dim = table.embeddings.cols;
  vecs.row = [&table](std::size_t i) { return table.embeddings.row(i); };
  return stats::sample_distance_distribution(vecs, n_samples, rng_seed, threads);
}

bool admissible(const Segment& a, const Segment& b, std::uint32_t L,
                std::uint32_t S) {
  if (a.file_index != b.file_index) return true;
  const std::int64_t delta = static_cast<std::int64_t>(a.start_frame) -
                             static_cast<std::int64_t>(b.start_frame);
  return std::llabs(delta) >= static_cast<std::int64_t>(L) + S;
}

std::vector<RawMatch> find_candidates_raw_naive(
    const SegmentTable& table, const stats::NormalParams& params,
    const CandidateSearchOptions& opts) {
  const MatrixF normed = normalized_embeddings(table);
  const std::size_t n = table.size();
  std::vector<RawMatch> out;
  for (std::size_t i = 0; i < n; ++i) {
    // All admissible significant matches for this query, then a full sort.
    std::vector<std::pair<double, std::uint32_t>> hits;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!admissible(table.segments[i], table.segments[j], table.window_frames,
                      table.shift_frames)) {
        continue;
      }
      const double d = 1.0 - dot_f32(normed.row(i), normed.row(j));
      if (!(d < params.mu)) continue;  // cdf(d) < alpha <= 0.5 implies d < mu
      if (stats::normal_cdf(d, params, opts.cdf_clamp) < opts.alpha) {
        hits.emplace_back(d, static_cast<std::uint32_t>(j));
      }
    }
    std::sort(hits.begin(), hits.end());
    if (hits.size() > opts.k) hits.resize(opts.k);
    for (const auto& [d, id] : hits) {
      out.push_back({static_cast<std::uint32_t>(i), id, d,
                     stats::normal_cdf(d, params, opts.cdf_clamp)});
    }
  }
  return out;
}

std::vector<RawMatch> find_candidates_raw(const SegmentTable& table,
                                          const stats::NormalParams& params,
                                          const CandidateSearchOptions& opts) {
  const MatrixF normed = normalized_embeddings(table);
  const std::size_t n = table.size();
  constexpr std::size_t kQueryBlock = 32;
  constexpr std::size_t kKeyTile = 256;
  const std::size_t num_blocks = (n + kQueryBlock - 1) / kQueryBlock;
  std::vector<std::vector<RawMatch>> per_block(num_blocks);

  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(num_blocks); ++bi) {
    const std::size_t q0 = static_cast<std::size_t>(bi) * kQueryBlock;
    const std::size_t q1 = std::min(q0 + kQueryBlock, n);
    std::vector<TopK> topk(q1 - q0, TopK(opts.k));

    for (std::size_t t0 = 0; t0 < n; t0 += kKeyTile) {
      const std::size_t t1 = std::min(t0 + kKeyTile, n);
      for (std::size_t i = q0; i < q1; ++i) {
        const auto qrow = normed.row(i);
        auto& acc = topk[i - q0];
        for (std::size_t j = t0; j < t1; ++j) {
          if (j == i) continue;
          if (!admissible(table.segments[i], table.segments[j],
                          table.window_frames, table.shift_frames)) {
            continue;
          }
          const double d = 1.0 - dot_f32(qrow, normed.row(j));
          if (!(d < params.mu)) continue;
          if (stats::normal_cdf(d, params, opts.cdf_clamp) < opts.alpha) {
            acc.offer(d, static_cast<std::uint32_t>(j));
          }
        }
      }
    }

    auto& sink = per_block[bi];
    for (std::size_t i = q0; i < q1; ++i) {
      for (const auto& [d, id] : topk[i - q0].items) {
        sink.push_back({static_cast<std::uint32_t>(i), id, d,
                        stats::normal_cdf(d, params, opts.cdf_clamp)});
      }
    }
  }

  std::vector<RawMatch> out;
  for (auto& block : per_block) {
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

std::vector<CandidatePair> canonicalize(const std::vector<RawMatch>& raw) {
  std::vector<CandidatePair> pairs;
  pairs.reserve(raw.size());
  for (const auto& m : raw) {
    CandidatePair p;
    p.seg_a = std::min(m.query, m.match);
    p.seg_b = std::max(m.query, m.match);
    p.distance = m.distance;
    p.p_value = m.p_value;
    pairs.push_back(p);
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.seg_a, a.seg_b) < std::tie(b.seg_a, b.seg_b);
  });
  pairs.erase(std::unique(pairs.begin(), pairs.end(),
                          [](const auto& a, const auto& b) {
                            return a.seg_a == b.seg_a && a.seg_b == b.seg_b;
                          }),
              pairs.end());
  return pairs;
}

std::vector<CandidatePair> find_candidates(const SegmentTable& table,
                                           const stats::NormalParams& params,
                                           const CandidateSearchOptions& opts) {
  return canonicalize(find_candidates_raw(table, params, opts));
}

std::vector<CandidatePair> find_candidates_naive(
    const SegmentTable& table, const stats::NormalParams& params,
    const CandidateSearchOptions& opts) {
  return canonicalize(find_candidates_raw_naive(table, params, opts));
}

void write_candidates_tsv(const std::string& path,
                          std::span<const CandidatePair> pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path);
  char buf[128];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof(buf), "%u\t%u\t%.10g\t%.10g\n", p.seg_a, p.seg_b,
                  p.distance, p.p_value);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace pdtw::stage1
