#pragma once

#include "minitad/autograd/tensor.hpp"

#include <cstddef>
#include <vector>

namespace minitad::ag {

// Linear algebra and elementwise arithmetic.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor abs(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor add_row(const Tensor& a, const Tensor& row);  // row: 1 x cols(a), broadcast down
Tensor mul_row(const Tensor& a, const Tensor& row);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

// Pointwise nonlinearities.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor silu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor pow_scalar(const Tensor& a, double p);  // a >= 0 for fractional p

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sum(const Tensor& a);  // n x 1

// Shape manipulation.
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<Index>& rows);
// out[t] = a[t - shift], zero outside [0, rows).
Tensor shift_rows(const Tensor& a, Index shift);
// Zero every row at or beyond valid_rows.
Tensor mask_rows(const Tensor& a, Index valid_rows);
// (N*group) x D -> N x (group*D), row-major within each group.
Tensor group_rows(const Tensor& a, Index group);
Tensor flip_rows(const Tensor& a);

// Fused layers.
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
// Row-wise softmax over the first valid_cols columns; later columns get 0.
Tensor masked_softmax_rows(const Tensor& a, Index valid_cols);

struct LerpTap {
  Index lo = 0;
  Index hi = 0;
  double w_lo = 1.0;
  double w_hi = 0.0;
};
// out[r] = w_lo * a[lo] + w_hi * a[hi] for each tap r.
Tensor lerp_rows(const Tensor& a, const std::vector<LerpTap>& taps);

// out[t] = mean of a[j] over j in neighbors[t]; empty neighbor lists give zero rows.
Tensor neighbor_mean(const Tensor& a, const std::vector<std::vector<Index>>& neighbors);

// Kernel-3, stride-2, pad-1 max pooling over the first valid_rows rows.
// Output has ceil(rows/2) rows; rows past ceil(valid_rows/2) are zero.
Tensor max_pool_stride2(const Tensor& a, Index valid_rows);

// Diagonal linear recurrence h_t = decay_t * h_{t-1} + input_t over the first
// valid_rows rows (reversed direction when `reverse`). Other rows are zero.
Tensor diag_scan(const Tensor& decay, const Tensor& input, Index valid_rows, bool reverse);

// LSTM recurrence over precomputed input projections (T x 4H, gate order
// i, f, g, o) with recurrent weights (H x 4H). Zero initial state; rows past
// valid_rows are zero and never touch the state.
Tensor lstm_recurrence(const Tensor& input_gates, const Tensor& recurrent, Index valid_rows,
                       bool reverse);

}  // namespace minitad::ag
