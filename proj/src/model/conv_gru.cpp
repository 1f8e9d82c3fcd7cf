#include "xnec/model/conv_gru.hpp"

#include <cmath>

#include "xnec/error.hpp"

namespace xnec::model {

ConvGru::ConvGru(const std::string& name, int in_channels, int hidden_channels, int kernel, Rng& rng)
    : input_weight(name + ".input_weight", 3 * hidden_channels, in_channels * kernel * kernel),
      input_bias(name + ".input_bias", 3 * hidden_channels, 1),
      gate_weight(name + ".gate_weight", 2 * hidden_channels, hidden_channels * kernel * kernel),
      candidate_weight(name + ".candidate_weight", hidden_channels, hidden_channels * kernel * kernel),
      in_(in_channels),
      hidden_(hidden_channels),
      kernel_(kernel) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_channels * kernel * kernel));
  init_uniform(input_weight.value, bound, rng);
  init_uniform(input_bias.value, bound, rng);
  init_uniform(gate_weight.value, bound, rng);
  init_uniform(candidate_weight.value, bound, rng);
}

Matrix ConvGru::forward(const Matrix& inputs, int steps, int height, int width, Cache* cache) const {
  if (inputs.rows() != in_) throw Error(Errc::invalid_argument, "conv-gru: input channel mismatch");
  if (steps <= 0 || inputs.cols() % steps != 0) throw Error(Errc::invalid_argument, "conv-gru: bad step count");
  const Eigen::Index columns = inputs.cols() / steps;
  const int H = hidden_;

  Matrix input_cols = im2col(inputs, height, width, kernel_);
  Matrix gx = input_weight.value * input_cols;
  gx.colwise() += input_bias.value.col(0);

  if (cache) {
    cache->steps = steps;
    cache->columns = columns;
    for (auto* v : {&cache->h_prev, &cache->z, &cache->r, &cache->n, &cache->h_cols, &cache->rh_cols}) {
      v->clear();
      v->reserve(steps);
    }
  }

  Matrix h = Matrix::Zero(H, columns);
  for (int t = 0; t < steps; ++t) {
    const auto step_gx = gx.middleCols(t * columns, columns);
    Matrix h_cols = im2col(h, height, width, kernel_);
    const Matrix gh = gate_weight.value * h_cols;
    const Matrix z = (step_gx.topRows(H) + gh.topRows(H)).unaryExpr([](double v) { return sigmoid(v); });
    const Matrix r = (step_gx.middleRows(H, H) + gh.bottomRows(H)).unaryExpr([](double v) { return sigmoid(v); });
    const Matrix rh = r.cwiseProduct(h);
    Matrix rh_cols = im2col(rh, height, width, kernel_);
    const Matrix n = (step_gx.bottomRows(H) + candidate_weight.value * rh_cols).array().tanh().matrix();
    Matrix next = (1.0 - z.array()) * n.array() + z.array() * h.array();
    if (cache) {
      cache->h_prev.push_back(std::move(h));
      cache->z.push_back(z);
      cache->r.push_back(r);
      cache->n.push_back(n);
      cache->h_cols.push_back(std::move(h_cols));
      cache->rh_cols.push_back(std::move(rh_cols));
    }
    h = std::move(next);
  }
  if (cache) cache->input_cols = std::move(input_cols);
  return h;
}

Matrix ConvGru::backward(const Matrix& d_final, const Cache& cache, int height, int width, bool need_input_grad) {
  const int H = hidden_;
  const Eigen::Index columns = cache.columns;
  Matrix d_gx(3 * H, cache.steps * columns);
  Matrix dh = d_final;
  for (int t = cache.steps - 1; t >= 0; --t) {
    const Matrix& h = cache.h_prev[t];
    const Matrix& z = cache.z[t];
    const Matrix& r = cache.r[t];
    const Matrix& n = cache.n[t];

    const Matrix dn = dh.cwiseProduct((1.0 - z.array()).matrix());
    const Matrix dz = dh.cwiseProduct(h - n);
    Matrix dh_prev = dh.cwiseProduct(z);

    const Matrix dan = dn.array() * (1.0 - n.array().square());
    candidate_weight.grad.noalias() += dan * cache.rh_cols[t].transpose();
    const Matrix drh = col2im(candidate_weight.value.transpose() * dan, H, height, width, kernel_);
    const Matrix dr = drh.cwiseProduct(h);
    dh_prev += drh.cwiseProduct(r);

    const Matrix daz = dz.array() * z.array() * (1.0 - z.array());
    const Matrix dar = dr.array() * r.array() * (1.0 - r.array());

    Matrix d_gh(2 * H, columns);
    d_gh.topRows(H) = daz;
    d_gh.bottomRows(H) = dar;
    gate_weight.grad.noalias() += d_gh * cache.h_cols[t].transpose();
    dh_prev += col2im(gate_weight.value.transpose() * d_gh, H, height, width, kernel_);

    auto block = d_gx.middleCols(t * columns, columns);
    block.topRows(H) = daz;
    block.middleRows(H, H) = dar;
    block.bottomRows(H) = dan;
    dh = std::move(dh_prev);
  }
  input_weight.grad.noalias() += d_gx * cache.input_cols.transpose();
  input_bias.grad += d_gx.rowwise().sum();
  if (!need_input_grad) return {};
  return col2im(input_weight.value.transpose() * d_gx, in_, height, width, kernel_);
}

}  // namespace xnec::model
