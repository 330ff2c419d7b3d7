#include "pdtw/features.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pdtw::features {

namespace {

std::string path_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::uint32_t read_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16le(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32le(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32le(out, bits);
}

float read_f32le(std::istream& in) {
  const std::uint32_t bits = read_u32le(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

constexpr char kFeatMagic[8] = {'P', 'D', 'T', 'W', 'F', 'E', 'A', 'T'};

FeatureMatrix load_features_binary(std::ifstream& in, const std::string& path) {
  const std::uint32_t frames = read_u32le(in);
  const std::uint32_t dims = read_u32le(in);
  const float shift = read_f32le(in);
  if (!in || frames == 0 || dims == 0 || !(shift > 0.0f)) {
    throw MalformedHeader("bad PDTWFEAT header in " + path);
  }
  FeatureMatrix m;
  m.file_id = path_stem(path);
  m.frame_shift = shift;
  m.frame_length = shift;
  m.frames = MatrixD(frames, dims);
  for (std::size_t i = 0; i < static_cast<std::size_t>(frames) * dims; ++i) {
    m.frames.data[i] = read_f32le(in);
  }
  if (!in) {
    throw MalformedHeader("truncated PDTWFEAT payload in " + path);
  }
  return m;
}

FeatureMatrix load_features_csv(const std::string& path, double frame_shift) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        row.push_back(v);
      } catch (const std::exception&) {
        throw MalformedLine(path + ":" + std::to_string(lineno) +
                            ": not a number: '" + field + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DimensionMismatch(path + ":" + std::to_string(lineno) +
                              ": row width " + std::to_string(row.size()) +
                              " != " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw MalformedHeader("empty feature CSV: " + path);
  FeatureMatrix m;
  m.file_id = path_stem(path);
  m.frame_shift = frame_shift;
  m.frame_length = frame_shift;
  m.frames = MatrixD(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin(), rows[r].end(), m.frames.row(r).begin());
  }
  return m;
}

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char riff[4], wave[4];
  in.read(riff, 4);
  read_u32le(in);  // overall size, unused
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) {
    throw UnsupportedFormat(path + " is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> payload;

  while (in) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    const std::uint32_t size = read_u32le(in);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      audio_format = read_u16le(in);
      channels = read_u16le(in);
      rate = read_u32le(in);
      read_u32le(in);  // byte rate
      read_u16le(in);  // block align
      bits = read_u16le(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      payload.resize(size);
      in.read(payload.data(), size);
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }

  if (!have_fmt || payload.empty()) {
    throw UnsupportedFormat(path + ": missing fmt or data chunk");
  }
  if (audio_format != 1 || bits != 16) {
    throw UnsupportedFormat(path + ": only PCM 16-bit is supported");
  }
  if (channels != 1) {
    throw UnsupportedFormat(path + ": only mono is supported, got " +
                            std::to_string(channels) + " channels");
  }
  if (rate != static_cast<std::uint32_t>(kSampleRate)) {
    throw UnsupportedFormat(path + ": sample rate " + std::to_string(rate) +
                            " != 16000 (no resampling)");
  }

  Waveform w;
  w.file_id = path_stem(path);
  w.sample_rate = kSampleRate;
  const std::size_t n = payload.size() / 2;
  if (n == 0) throw UnsupportedFormat(path + ": empty data chunk");
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t s;
    std::memcpy(&s, payload.data() + 2 * i, 2);
    w.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return w;
}

void normalize_features(FeatureMatrix& m) {
  const std::size_t rows = m.frames.rows, cols = m.frames.cols;
  m.degenerate_dims.assign(cols, 0);
  for (std::size_t c = 0; c < cols; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) sum += m.frames.at(r, c);
    const double mean = sum / static_cast<double>(rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = m.frames.at(r, c) - mean;
      ss += d * d;
    }
    const double var = ss / static_cast<double>(rows);
    if (var < 1e-20) {
      for (std::size_t r = 0; r < rows; ++r) m.frames.at(r, c) -= mean;
      m.degenerate_dims[c] = 1;
    } else {
      const double inv_std = 1.0 / std::sqrt(var);
      for (std::size_t r = 0; r < rows; ++r) {
        m.frames.at(r, c) = (m.frames.at(r, c) - mean) * inv_std;
      }
    }
  }
}

void normalize_features(std::vector<FeatureMatrix>& corpus, NormScope scope) {
  if (scope == NormScope::PerFile) {
    for (auto& m : corpus) normalize_features(m);
    return;
  }
  if (corpus.empty()) return;
  const std::size_t cols = corpus.front().frames.cols;
  std::size_t total = 0;
  std::vector<double> sum(cols, 0.0), ss(cols, 0.0);
  for (const auto& m : corpus) {
    if (m.frames.cols != cols) {
      throw DimensionMismatch("corpus files have differing feature dimensions");
    }
    total += m.frames.rows;
    for (std::size_t r = 0; r < m.frames.rows; ++r) {
      const auto row = m.frames.row(r);
      for (std::size_t c = 0; c < cols; ++c) sum[c] += row[c];
    }
  }
  std::vector<double> mean(cols);
  for (std::size_t c = 0; c < cols; ++c) mean[c] = sum[c] / static_cast<double>(total);
  for (const auto& m : corpus) {
    for (std::size_t r = 0; r < m.frames.rows; ++r) {
      const auto row = m.frames.row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = row[c] - mean[c];
        ss[c] += d * d;
      }
    }
  }
  for (auto& m : corpus) {
    m.degenerate_dims.assign(cols, 0);
    for (std::size_t c = 0; c < cols; ++c) {
      const double var = ss[c] / static_cast<double>(total);
      if (var < 1e-20) {
        for (std::size_t r = 0; r < m.frames.rows; ++r) m.frames.at(r, c) -= mean[c];
        m.degenerate_dims[c] = 1;
      } else {
        const double inv_std = 1.0 / std::sqrt(var);
        for (std::size_t r = 0; r < m.frames.rows; ++r) {
          m.frames.at(r, c) = (m.frames.at(r, c) - mean[c]) * inv_std;
        }
      }
    }
  }
}

FeatureMatrix load_features(const std::string& path, double csv_frame_shift) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in && std::memcmp(magic, kFeatMagic, 8) == 0) {
    return load_features_binary(in, path);
  }
  return load_features_csv(path, csv_frame_shift);
}

void store_features(const std::string& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(kFeatMagic, 8);
  write_u32le(out, static_cast<std::uint32_t>(m.frames.rows));
  write_u32le(out, static_cast<std::uint32_t>(m.frames.cols));
  write_f32le(out, static_cast<float>(m.frame_shift));
  for (double v : m.frames.data) write_f32le(out, static_cast<float>(v));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace pdtw::features
