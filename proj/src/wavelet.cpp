#include "nogap/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include "nogap/errors.hpp"

namespace nogap::wavelet {

namespace {

// Scaling filters (rec_lo) of the orthonormal Daubechies family.
constexpr std::array<double, 8> kDb4 = {
    0.23037781330889651,   0.71484657055291567,  0.63088076792985892,
    -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
    0.032883011666885197,  -0.010597401785069032};

constexpr std::array<double, 12> kDb6 = {
    0.11154074335010947,  0.49462389039845306,    0.75113390802109536,
    0.31525035170919763,  -0.22626469396543983,   -0.12976686756726194,
    0.097501605587323043, 0.027522865530305727,   -0.03158203931748603,
    0.00055384220116149613, 0.0047772575109455108, -0.0010773010853084796};

constexpr std::array<double, 16> kDb8 = {
    0.054415842243104008,   0.31287159091429995,    0.67563073629728976,
    0.58535468365420673,    -0.015829105256349306,  -0.28401554296154691,
    0.00047248457391328279, 0.12874742662047847,    -0.017369301001807547,
    -0.044088253930794755,  0.013981027917398282,   0.0087460940474057766,
    -0.0048703529934515741, -0.00039174037337694705, 0.00067544940645056933,
    -0.00011747678412476953};

WaveletFilter make_filter(std::string name, std::span<const double> scaling) {
  WaveletFilter f;
  f.name = std::move(name);
  const std::size_t n = scaling.size();
  f.rec_lo.assign(scaling.begin(), scaling.end());
  f.dec_lo.assign(scaling.rbegin(), scaling.rend());
  f.rec_hi.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double sign = (t % 2 == 0) ? 1.0 : -1.0;
    f.rec_hi[t] = sign * scaling[n - 1 - t];
  }
  f.dec_hi.assign(f.rec_hi.rbegin(), f.rec_hi.rend());
  return f;
}

// Single periodic analysis step: x (length n) -> [approx | detail].
void analyze(const WaveletFilter& f, const double* x, double* out, std::size_t n) {
  const std::size_t half = n / 2;
  const std::size_t taps = f.taps();
  const double* h = f.rec_lo.data();
  const double* g = f.rec_hi.data();
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t t = 0; t < taps; ++t) {
      const double v = x[(2 * k + t) % n];
      a += h[t] * v;
      d += g[t] * v;
    }
    out[k] = a;
    out[half + k] = d;
  }
}

// Adjoint (= inverse) of analyze.
void synthesize(const WaveletFilter& f, const double* in, double* y, std::size_t n) {
  const std::size_t half = n / 2;
  const std::size_t taps = f.taps();
  const double* h = f.rec_lo.data();
  const double* g = f.rec_hi.data();
  std::fill(y, y + n, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double a = in[k];
    const double d = in[half + k];
    for (std::size_t t = 0; t < taps; ++t) y[(2 * k + t) % n] += h[t] * a + g[t] * d;
  }
}

// Applies one analysis or synthesis step to every line along `axis` inside the
// box [0, extent[d]) of a row-major array.
void transform_box_axis(std::span<double> data, const Shape& shape, const Shape& extent,
                        std::size_t axis, const WaveletFilter& f, bool forward) {
  const std::size_t rank = shape.size();
  std::vector<std::size_t> strides(rank, 1);
  for (std::size_t d = rank; d-- > 1;) strides[d - 1] = strides[d] * shape[d];

  const std::size_t n = extent[axis];
  const std::size_t stride = strides[axis];
  std::vector<double> line(n), out(n);
  std::vector<std::size_t> idx(rank, 0);

  while (true) {
    std::size_t base = 0;
    for (std::size_t d = 0; d < rank; ++d) base += idx[d] * strides[d];
    for (std::size_t i = 0; i < n; ++i) line[i] = data[base + i * stride];
    if (forward) {
      analyze(f, line.data(), out.data(), n);
    } else {
      synthesize(f, line.data(), out.data(), n);
    }
    for (std::size_t i = 0; i < n; ++i) data[base + i * stride] = out[i];

    // odometer over every axis except `axis`
    std::size_t d = rank;
    while (d-- > 0) {
      if (d == axis) continue;
      if (++idx[d] < extent[d]) break;
      idx[d] = 0;
    }
    if (d == static_cast<std::size_t>(-1)) break;
  }
}

// One low-pass step along `axis`: [outer, n, inner] <-> [outer, n / 2, inner].
// Lines are processed a whole inner block at a time so the innermost loop is
// contiguous.
std::vector<double> lowpass_step(std::span<const double> in, const Shape& shape, std::size_t axis,
                                 const WaveletFilter& f, bool analysis) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t n = analysis ? shape[axis] : 2 * shape[axis];
  const std::size_t half = n / 2;
  const std::size_t taps = f.taps();
  const double* h = f.rec_lo.data();
  std::vector<double> out(outer * (analysis ? half : n) * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = in.data() + o * (analysis ? n : half) * inner;
    double* dst = out.data() + o * (analysis ? half : n) * inner;
    for (std::size_t k = 0; k < half; ++k) {
      for (std::size_t t = 0, j = 2 * k; t < taps; ++t, ++j) {
        if (j == n) j = 0;
        const double c = h[t];
        const double* __restrict x = analysis ? src + j * inner : src + k * inner;
        double* __restrict y = analysis ? dst + k * inner : dst + j * inner;
        for (std::size_t i = 0; i < inner; ++i) y[i] += c * x[i];
      }
    }
  }
  return out;
}

std::vector<std::size_t> all_axes(std::size_t rank) {
  std::vector<std::size_t> axes(rank);
  for (std::size_t i = 0; i < rank; ++i) axes[i] = i;
  return axes;
}

void check_signal_rank(const Shape& shape) {
  if (shape.size() != 1 && shape.size() != 2) {
    throw ShapeError("dwt expects a 1D or 2D signal, got shape " + shape_to_string(shape));
  }
}

}  // namespace

bool is_supported(std::string_view name) {
  return name == "db4" || name == "db6" || name == "db8";
}

WaveletFilter filter_coeffs(std::string_view name) {
  if (name == "db4") return make_filter("db4", kDb4);
  if (name == "db6") return make_filter("db6", kDb6);
  if (name == "db8") return make_filter("db8", kDb8);
  throw ConfigError("unsupported wavelet '" + std::string(name) + "' (expected db4, db6 or db8)");
}

void check_divisible(const Shape& shape, std::span<const std::size_t> axes, int levels) {
  if (levels < 1) throw ShapeError("wavelet levels must be >= 1, got " + std::to_string(levels));
  const std::size_t block = std::size_t{1} << levels;
  for (std::size_t axis : axes) {
    if (axis >= shape.size()) {
      throw ShapeError("transform axis " + std::to_string(axis) + " out of range for shape " +
                       shape_to_string(shape));
    }
    if (shape[axis] % block != 0) {
      throw ShapeError("axis " + std::to_string(axis) + " has length " + std::to_string(shape[axis]) +
                       ", not divisible by 2^" + std::to_string(levels) + " = " +
                       std::to_string(block));
    }
  }
}

void dwt_packed(std::span<double> data, const Shape& shape, std::span<const std::size_t> axes,
                const WaveletFilter& filter, int levels) {
  check_divisible(shape, axes, levels);
  if (data.size() != shape_size(shape)) throw ShapeError("dwt_packed: buffer/shape mismatch");
  Shape extent = shape;
  for (int level = 0; level < levels; ++level) {
    for (std::size_t axis : axes) extent[axis] = shape[axis] >> level;
    for (std::size_t axis : axes) transform_box_axis(data, shape, extent, axis, filter, true);
  }
}

void idwt_packed(std::span<double> data, const Shape& shape, std::span<const std::size_t> axes,
                 const WaveletFilter& filter, int levels) {
  check_divisible(shape, axes, levels);
  if (data.size() != shape_size(shape)) throw ShapeError("idwt_packed: buffer/shape mismatch");
  Shape extent = shape;
  for (int level = levels - 1; level >= 0; --level) {
    for (std::size_t axis : axes) extent[axis] = shape[axis] >> level;
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      transform_box_axis(data, shape, extent, *it, filter, false);
    }
  }
}

std::vector<double> approx_analysis(std::span<const double> data, const Shape& shape,
                                    std::span<const std::size_t> axes, const WaveletFilter& filter, int levels) {
  check_divisible(shape, axes, levels);
  if (data.size() != shape_size(shape)) throw ShapeError("approx_analysis: buffer/shape mismatch");
  std::vector<double> cur(data.begin(), data.end());
  Shape s = shape;
  for (int level = 0; level < levels; ++level) {
    for (std::size_t axis : axes) {
      cur = lowpass_step(cur, s, axis, filter, true);
      s[axis] /= 2;
    }
  }
  return cur;
}

std::vector<double> approx_synthesis(std::span<const double> coarse, const Shape& full_shape,
                                     std::span<const std::size_t> axes, const WaveletFilter& filter, int levels) {
  check_divisible(full_shape, axes, levels);
  Shape s = full_shape;
  for (std::size_t axis : axes) s[axis] >>= levels;
  if (coarse.size() != shape_size(s)) throw ShapeError("approx_synthesis: buffer/shape mismatch");
  std::vector<double> cur(coarse.begin(), coarse.end());
  for (int level = 0; level < levels; ++level) {
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      cur = lowpass_step(cur, s, *it, filter, false);
      s[*it] *= 2;
    }
  }
  return cur;
}

WaveletCoeffs dwt(const Tensor& signal, const WaveletFilter& filter, int levels) {
  const Shape& shape = signal.shape();
  check_signal_rank(shape);
  const auto axes = all_axes(shape.size());
  check_divisible(shape, axes, levels);

  std::vector<double> packed = signal.to_vector();
  dwt_packed(packed, shape, axes, filter, levels);

  WaveletCoeffs out;
  out.levels = levels;
  out.original_shape = shape;
  if (shape.size() == 1) {
    const std::size_t n = shape[0];
    const std::size_t coarse = n >> levels;
    out.approx = Tensor::computed({coarse}, {packed.begin(), packed.begin() + coarse});
    for (int l = 1; l <= levels; ++l) {
      const std::size_t len = n >> l;
      out.details.push_back(
          Tensor::computed({len}, {packed.begin() + len, packed.begin() + 2 * len}));
    }
    return out;
  }

  const std::size_t rows = shape[0];
  const std::size_t cols = shape[1];
  auto block = [&](std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
    std::vector<double> b(h * w);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) b[i * w + j] = packed[(r0 + i) * cols + c0 + j];
    }
    return b;
  };
  const std::size_t ch = rows >> levels;
  const std::size_t cw = cols >> levels;
  out.approx = Tensor::computed({ch, cw}, block(0, 0, ch, cw));
  for (int l = 1; l <= levels; ++l) {
    const std::size_t h = rows >> l;
    const std::size_t w = cols >> l;
    std::vector<double> bands;
    bands.reserve(3 * h * w);
    for (auto [r0, c0] : {std::pair{std::size_t{0}, w}, std::pair{h, std::size_t{0}}, std::pair{h, w}}) {
      auto b = block(r0, c0, h, w);
      bands.insert(bands.end(), b.begin(), b.end());
    }
    out.details.push_back(Tensor::computed({3, h, w}, std::move(bands)));
  }
  return out;
}

Tensor idwt(const WaveletCoeffs& coeffs, const WaveletFilter& filter) {
  const Shape& shape = coeffs.original_shape;
  check_signal_rank(shape);
  const int levels = coeffs.levels;
  const auto axes = all_axes(shape.size());
  check_divisible(shape, axes, levels);
  if (coeffs.details.size() != static_cast<std::size_t>(levels)) {
    throw ShapeError("idwt: " + std::to_string(coeffs.details.size()) + " detail bands for " +
                     std::to_string(levels) + " levels");
  }

  std::vector<double> packed(shape_size(shape), 0.0);
  auto expect = [](const Tensor& t, const Shape& s, const std::string& what) {
    if (t.shape() != s) {
      throw ShapeError("idwt: " + what + " has shape " + shape_to_string(t.shape()) + ", expected " +
                       shape_to_string(s));
    }
  };

  if (shape.size() == 1) {
    const std::size_t n = shape[0];
    expect(coeffs.approx, {n >> levels}, "approximation");
    std::copy(coeffs.approx.data().begin(), coeffs.approx.data().end(), packed.begin());
    for (int l = 1; l <= levels; ++l) {
      const std::size_t len = n >> l;
      const Tensor& d = coeffs.details[l - 1];
      expect(d, {len}, "detail level " + std::to_string(l));
      std::copy(d.data().begin(), d.data().end(), packed.begin() + len);
    }
  } else {
    const std::size_t rows = shape[0];
    const std::size_t cols = shape[1];
    auto put = [&](const double* src, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) packed[(r0 + i) * cols + c0 + j] = src[i * w + j];
      }
    };
    const std::size_t ch = rows >> levels;
    const std::size_t cw = cols >> levels;
    expect(coeffs.approx, {ch, cw}, "approximation");
    put(coeffs.approx.raw(), 0, 0, ch, cw);
    for (int l = 1; l <= levels; ++l) {
      const std::size_t h = rows >> l;
      const std::size_t w = cols >> l;
      const Tensor& d = coeffs.details[l - 1];
      expect(d, {3, h, w}, "detail level " + std::to_string(l));
      put(d.raw(), 0, w, h, w);
      put(d.raw() + h * w, h, 0, h, w);
      put(d.raw() + 2 * h * w, h, w, h, w);
    }
  }
  idwt_packed(packed, shape, axes, filter, levels);
  return Tensor::computed(shape, std::move(packed));
}

}  // namespace nogap::wavelet
