#include "satcn/tcn.hpp"

#include <stdexcept>

namespace satcn {

Array tcn_forward(const Array& x, const TcnLayerParams& p) {
  if (x.rank() != 3) {
    throw std::invalid_argument("tcn_forward: input must be [n, T, c_in]");
  }
  if (p.kernel.rank() != 3) {
    throw std::invalid_argument("tcn_forward: kernel must be [w, c_in, c_out]");
  }
  const std::size_t n = x.dim(0), T = x.dim(1), cin = x.dim(2);
  const std::size_t w = p.width(), cout = p.c_out();
  if (p.c_in() != cin) {
    throw std::invalid_argument("tcn_forward: channel mismatch");
  }
  if (p.bias.size() != cout) {
    throw std::invalid_argument("tcn_forward: bias shape mismatch");
  }
  if (T < w) {
    throw std::invalid_argument("tcn_forward: input shorter than kernel width");
  }

  const std::size_t T_out = T - w + 1;
  Array out({n, T_out, cout}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T_out; ++t) {
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = p.bias[o];
        for (std::size_t tau = 0; tau < w; ++tau) {
          for (std::size_t a = 0; a < cin; ++a) {
            acc += p.kernel.at(tau, a, o) * x.at(i, t + tau, a);
          }
        }
        out.at(i, t, o) = acc;
      }
    }
  }
  return out;
}

}  // namespace satcn
