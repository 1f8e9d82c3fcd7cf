#include "xnec/model/head.hpp"

#include <string>

#include "xnec/error.hpp"

namespace xnec::model {

Head::Head(const HeadConfig& config, Rng& rng) : config_(config) {
  if (config.input <= 0) throw Error(Errc::invalid_argument, "head: input size must be positive");
  if (config.dropout < 0.0 || config.dropout >= 1.0) throw Error(Errc::invalid_argument, "head: dropout must be in [0,1)", "dropout");
  int in = config.input;
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    const std::string name = "head.fc" + std::to_string(i);
    linears.emplace_back(name, in, config.hidden[i], false, rng);
    norms.emplace_back("head.bn" + std::to_string(i), config.hidden[i], config.bn_momentum, config.bn_eps);
    in = config.hidden[i];
  }
  linears.emplace_back("head.out", in, 1, true, rng);
}

Matrix Head::forward(const Matrix& x, bool training, Rng* dropout_rng, Cache* cache) {
  if (!training) return forward_eval(x);
  if (x.rows() != config_.input) throw Error(Errc::invalid_argument, "head: input size mismatch");
  if (!x.allFinite()) throw Error(Errc::invalid_argument, "head: non-finite input");
  if (cache) *cache = Cache{};
  Matrix h = x;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (cache) cache->inputs.push_back(h);
    BatchNorm::Cache bn;
    Matrix pre = norms[i].forward(linears[i].forward(h), true, &bn);
    h = pre.cwiseMax(0.0);
    Matrix mask;
    if (config_.dropout > 0.0) {
      if (!dropout_rng) throw Error(Errc::invalid_argument, "head: training mode needs a dropout stream");
      mask = dropout_mask(h.rows(), h.cols(), config_.dropout, *dropout_rng);
      h = h.cwiseProduct(mask);
    }
    if (cache) {
      cache->bn.push_back(std::move(bn));
      cache->pre_relu.push_back(std::move(pre));
      cache->masks.push_back(std::move(mask));
    }
  }
  if (cache) cache->inputs.push_back(h);
  return linears.back().forward(h);
}

Matrix Head::forward_eval(const Matrix& x) const {
  if (x.rows() != config_.input) throw Error(Errc::invalid_argument, "head: input size mismatch");
  if (!x.allFinite()) throw Error(Errc::invalid_argument, "head: non-finite input");
  Matrix h = x;
  for (std::size_t i = 0; i < norms.size(); ++i) h = norms[i].forward_eval(linears[i].forward(h)).cwiseMax(0.0);
  return linears.back().forward(h);
}

Matrix Head::backward(const Matrix& d_logits, const Cache& cache) {
  Matrix d = linears.back().backward(d_logits, cache.inputs.back());
  for (std::size_t i = norms.size(); i-- > 0;) {
    if (cache.masks[i].size() != 0) d = d.cwiseProduct(cache.masks[i]);
    d = d.cwiseProduct((cache.pre_relu[i].array() > 0.0).cast<double>().matrix());
    d = norms[i].backward(d, cache.bn[i]);
    d = linears[i].backward(d, cache.inputs[i]);
  }
  return d;
}

std::vector<Parameter*> Head::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < linears.size(); ++i) {
    out.push_back(&linears[i].weight);
    if (linears[i].has_bias()) out.push_back(&linears[i].bias);
    if (i < norms.size()) {
      out.push_back(&norms[i].gamma);
      out.push_back(&norms[i].beta);
    }
  }
  return out;
}

std::vector<Parameter*> Head::buffers() {
  std::vector<Parameter*> out;
  for (auto& bn : norms) {
    out.push_back(&bn.running_mean);
    out.push_back(&bn.running_var);
  }
  return out;
}

}  // namespace xnec::model
