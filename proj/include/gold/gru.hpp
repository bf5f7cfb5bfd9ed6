#pragma once

// Single-layer GRU cell with an explicit forward trace and hand-written
// backpropagation.
//
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   n  = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * n + z * h

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gold/error.hpp"
#include "gold/random.hpp"

namespace gold {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct GruCell {
  Mat Wz, Wr, Wn;  // hidden x input
  Mat Uz, Ur, Un;  // hidden x hidden
  Vec bz, br, bn;

  static GruCell zeros(Eigen::Index input, Eigen::Index hidden) {
    return {Mat::Zero(hidden, input), Mat::Zero(hidden, input), Mat::Zero(hidden, input),
            Mat::Zero(hidden, hidden), Mat::Zero(hidden, hidden), Mat::Zero(hidden, hidden),
            Vec::Zero(hidden),         Vec::Zero(hidden),         Vec::Zero(hidden)};
  }

  Eigen::Index input_size() const { return Wz.cols(); }
  Eigen::Index hidden_size() const { return Wz.rows(); }

  /// Visits (name, tensor) for every weight, in checkpoint order.
  template <typename Self, typename Fn>
  static void visit(Self& cell, Fn&& fn) {
    fn("Wz", cell.Wz);
    fn("Wr", cell.Wr);
    fn("Wn", cell.Wn);
    fn("Uz", cell.Uz);
    fn("Ur", cell.Ur);
    fn("Un", cell.Un);
    fn("bz", cell.bz);
    fn("br", cell.br);
    fn("bn", cell.bn);
  }

  /// Visits matching tensors of several cells with the same shapes.
  template <typename Fn, typename... Cells>
  static void zip(Fn&& fn, Cells&... c) {
    fn("Wz", c.Wz...);
    fn("Wr", c.Wr...);
    fn("Wn", c.Wn...);
    fn("Uz", c.Uz...);
    fn("Ur", c.Ur...);
    fn("Un", c.Un...);
    fn("bz", c.bz...);
    fn("br", c.br...);
    fn("bn", c.bn...);
  }
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)) per matrix; biases start at zero.
inline void glorot_fill(Mat& m, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-a, a);
}

inline GruCell random_gru(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  GruCell c = GruCell::zeros(input, hidden);
  for (Mat* m : {&c.Wz, &c.Wr, &c.Wn, &c.Uz, &c.Ur, &c.Un}) glorot_fill(*m, rng);
  return c;
}

namespace detail {
inline Vec sigmoid(const Vec& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}
}  // namespace detail

/// Activations recorded during a forward pass; h[0] is the zero state.
struct GruTrace {
  std::vector<Vec> x, h, z, r, n;

  std::size_t steps() const { return x.size(); }
  const Vec& output(std::size_t step) const { return h[step + 1]; }
  const Vec& last() const { return h.back(); }
};

inline GruTrace gru_forward(const GruCell& cell, std::span<const Vec> inputs) {
  GruTrace tr;
  tr.h.push_back(Vec::Zero(cell.hidden_size()));
  for (const auto& x : inputs) {
    if (x.size() != cell.input_size())
      throw DataError("recurrent cell input has length " + std::to_string(x.size()) + ", expected " +
                      std::to_string(cell.input_size()));
    const Vec& h = tr.h.back();
    Vec z = detail::sigmoid(cell.Wz * x + cell.Uz * h + cell.bz);
    Vec r = detail::sigmoid(cell.Wr * x + cell.Ur * h + cell.br);
    Vec n = (cell.Wn * x + cell.Un * r.cwiseProduct(h) + cell.bn).array().tanh().matrix();
    Vec next = (Vec::Ones(z.size()) - z).cwiseProduct(n) + z.cwiseProduct(h);
    tr.x.push_back(x);
    tr.z.push_back(std::move(z));
    tr.r.push_back(std::move(r));
    tr.n.push_back(std::move(n));
    tr.h.push_back(std::move(next));
  }
  return tr;
}

/// Backpropagates d(loss)/d(output at each step) through the trace.
/// Accumulates weight gradients into `grad` and returns d(loss)/d(input) per
/// step. `d_out` entries may be empty vectors meaning zero.
inline std::vector<Vec> gru_backward(const GruCell& cell, const GruTrace& tr, std::span<const Vec> d_out,
                                     GruCell& grad) {
  const std::size_t steps = tr.steps();
  std::vector<Vec> dx(steps);
  Vec carry = Vec::Zero(cell.hidden_size());
  for (std::size_t s = steps; s-- > 0;) {
    const Vec& x = tr.x[s];
    const Vec& h = tr.h[s];
    const Vec& z = tr.z[s];
    const Vec& r = tr.r[s];
    const Vec& n = tr.n[s];

    Vec dh = carry;
    if (s < d_out.size() && d_out[s].size() != 0) dh += d_out[s];

    const Vec dz = dh.cwiseProduct(h - n);
    const Vec dn = dh.cwiseProduct(Vec::Ones(z.size()) - z);
    Vec dh_prev = dh.cwiseProduct(z);

    const Vec dn_pre = dn.cwiseProduct((1.0 - n.array().square()).matrix());
    const Vec rh = r.cwiseProduct(h);
    grad.Wn.noalias() += dn_pre * x.transpose();
    grad.Un.noalias() += dn_pre * rh.transpose();
    grad.bn += dn_pre;
    const Vec d_rh = cell.Un.transpose() * dn_pre;
    const Vec dr = d_rh.cwiseProduct(h);
    dh_prev += d_rh.cwiseProduct(r);

    const Vec dz_pre = dz.cwiseProduct(z.cwiseProduct(Vec::Ones(z.size()) - z));
    const Vec dr_pre = dr.cwiseProduct(r.cwiseProduct(Vec::Ones(r.size()) - r));
    grad.Wz.noalias() += dz_pre * x.transpose();
    grad.Uz.noalias() += dz_pre * h.transpose();
    grad.bz += dz_pre;
    grad.Wr.noalias() += dr_pre * x.transpose();
    grad.Ur.noalias() += dr_pre * h.transpose();
    grad.br += dr_pre;

    dh_prev.noalias() += cell.Uz.transpose() * dz_pre + cell.Ur.transpose() * dr_pre;
    dx[s] = cell.Wz.transpose() * dz_pre + cell.Wr.transpose() * dr_pre + cell.Wn.transpose() * dn_pre;
    carry = std::move(dh_prev);
  }
  return dx;
}

}  // namespace gold
