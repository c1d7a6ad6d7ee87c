#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nogap/tensor.hpp"

namespace nogap::wavelet {

/// Orthonormal Daubechies filter bank. dbN has N vanishing moments and 2N
/// taps. Coefficients follow the usual toolkit convention: rec_lo is the
/// scaling filter, dec_lo its time reversal, rec_hi[t] = (-1)^t rec_lo[L-1-t]
/// and dec_hi the time reversal of rec_hi.
struct WaveletFilter {
  std::string name;
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
  std::vector<double> rec_lo;
  std::vector<double> rec_hi;

  std::size_t taps() const noexcept { return rec_lo.size(); }
  std::size_t vanishing_moments() const noexcept { return rec_lo.size() / 2; }
};

/// Supported names are db4, db6 and db8; anything else is a ConfigError.
WaveletFilter filter_coeffs(std::string_view name);

bool is_supported(std::string_view name);

/// Result of a multi-level transform of a 1D or 2D signal.
///
/// 1D: approx has shape [n / 2^L]; details[l] has shape [n / 2^(l+1)].
/// 2D: approx has shape [h / 2^L, w / 2^L]; details[l] has shape
/// [3, h / 2^(l+1), w / 2^(l+1)] holding the (low,high), (high,low) and
/// (high,high) subbands along (axis 0, axis 1). Details run finest to coarsest.
struct WaveletCoeffs {
  Tensor approx;
  std::vector<Tensor> details;
  int levels = 0;
  Shape original_shape;
};

/// Periodic multi-level DWT. Every axis length must be divisible by 2^levels.
WaveletCoeffs dwt(const Tensor& signal, const WaveletFilter& filter, int levels);

/// Exact inverse of dwt on the periodic lattice.
Tensor idwt(const WaveletCoeffs& coeffs, const WaveletFilter& filter);

/// Throws ShapeError naming the first transformed axis whose length is not a
/// multiple of 2^levels.
void check_divisible(const Shape& shape, std::span<const std::size_t> axes, int levels);

/// In-place multi-level transform of a row-major array along `axes` using the
/// Mallat packing: after the call each transformed axis holds
/// [approx | detail_L | ... | detail_1], and the coarse approximation block is
/// the box [0, n_axis / 2^levels) over those axes. Other axes are batched.
void dwt_packed(std::span<double> data, const Shape& shape, std::span<const std::size_t> axes,
                const WaveletFilter& filter, int levels);

/// Inverse of dwt_packed. Because the transform is orthonormal this is also
/// its adjoint.
void idwt_packed(std::span<double> data, const Shape& shape, std::span<const std::size_t> axes,
                 const WaveletFilter& filter, int levels);

/// Coarsest approximation block of dwt_packed without computing any detail
/// coefficients. Each transformed axis shrinks to n_axis / 2^levels.
std::vector<double> approx_analysis(std::span<const double> data, const Shape& shape,
                                    std::span<const std::size_t> axes, const WaveletFilter& filter, int levels);

/// Adjoint of approx_analysis: idwt_packed of the approximation block with all
/// detail coefficients zero. `full_shape` is the shape before analysis.
std::vector<double> approx_synthesis(std::span<const double> coarse, const Shape& full_shape,
                                     std::span<const std::size_t> axes, const WaveletFilter& filter, int levels);

}  // namespace nogap::wavelet
