#pragma once

#include "satcn/array.hpp"

namespace satcn {

/// Unpadded shared 1-D temporal convolution. A width-w kernel shortens the
/// time axis by w - 1; the same kernel applies to every node.
struct TcnLayerParams {
  Array kernel;  // [w, c_in, c_out]
  Array bias;    // [c_out]

  std::size_t width() const { return kernel.dim(0); }
  std::size_t c_in() const { return kernel.dim(1); }
  std::size_t c_out() const { return kernel.dim(2); }
};

/// [n, T_in, c_in] -> [n, T_in - w + 1, c_out] with
/// out[i][t][o] = bias[o] + sum_{tau,a} kernel[tau][a][o] * x[i][t+tau][a].
Array tcn_forward(const Array& x, const TcnLayerParams& p);

}  // namespace satcn
