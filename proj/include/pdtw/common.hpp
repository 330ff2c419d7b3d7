#ifndef PDTW_COMMON_HPP
#define PDTW_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdtw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PDTW_DEFINE_ERROR(name)          \
  class name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

PDTW_DEFINE_ERROR(IoError);
PDTW_DEFINE_ERROR(UnsupportedFormat);
PDTW_DEFINE_ERROR(MalformedHeader);
PDTW_DEFINE_ERROR(DimensionMismatch);
PDTW_DEFINE_ERROR(DegenerateSample);
PDTW_DEFINE_ERROR(BadConfig);
PDTW_DEFINE_ERROR(LengthMismatch);
PDTW_DEFINE_ERROR(TooShort);
PDTW_DEFINE_ERROR(MalformedLine);
PDTW_DEFINE_ERROR(OverlappingIntervals);
PDTW_DEFINE_ERROR(UnknownFile);
PDTW_DEFINE_ERROR(EmptyCorpus);
PDTW_DEFINE_ERROR(EmptyPairSet);

#undef PDTW_DEFINE_ERROR

// Dense row-major matrix. Rows are the unit of access everywhere (one row =
// one frame or one embedding), so only row views are exposed.
template <typename T>
struct RowMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  RowMatrix() = default;
  RowMatrix(std::size_t r, std::size_t c, T fill = T{})
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data.data() + r * cols, cols);
  }
  std::span<T> row(std::size_t r) {
    return std::span<T>(data.data() + r * cols, cols);
  }
  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool empty() const { return rows == 0 || cols == 0; }
};

using MatrixF = RowMatrix<float>;
using MatrixD = RowMatrix<double>;

// Non-owning view of a contiguous row range of a float matrix.
struct RowBlock {
  const MatrixF* matrix = nullptr;
  std::size_t begin = 0;
  std::size_t count = 0;

  std::size_t rows() const { return count; }
  std::size_t cols() const { return matrix->cols; }
  std::span<const float> row(std::size_t r) const { return matrix->row(begin + r); }
};

}  // namespace pdtw

#endif  // PDTW_COMMON_HPP
