#pragma once

#include <cstddef>

namespace nowcast::nn::detail {

// C[MxN] (+)= op(A) * op(B), all row-major and densely packed.
// op(A) is MxK (A stored KxM when trans_a); op(B) is KxN (B stored NxK when trans_b).
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

// Unfolds one [C,H,W] image into [C*k*k, out_h*out_w] patch columns.
template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t out_h,
            std::size_t out_w, T* cols);

// Adjoint of im2col: scatters columns back, accumulating into image.
template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t out_h,
            std::size_t out_w, T* image);

}  // namespace nowcast::nn::detail
