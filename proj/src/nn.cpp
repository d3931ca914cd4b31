#include "bkd/nn.hpp"

#include <cmath>
#include <string>

#include "bkd/rng.hpp"

namespace bkd {

void Topology::validate() const {
  require(num_classes >= 2, ErrorKind::invalid_input, "num_classes must be >= 2");
  require(input_dim >= 1, ErrorKind::invalid_input, "input_dim must be >= 1");
  for (int width : hidden_dims) {
    require(width >= 1, ErrorKind::invalid_input, "hidden widths must be >= 1");
  }
}

std::vector<int> Topology::layer_widths() const {
  std::vector<int> widths;
  widths.reserve(hidden_dims.size() + 2);
  widths.push_back(input_dim);
  widths.insert(widths.end(), hidden_dims.begin(), hidden_dims.end());
  widths.push_back(num_classes);
  return widths;
}

bool ModelParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

ModelParams init_params(const Topology& topology, std::uint64_t seed) {
  topology.validate();
  ModelParams params;
  params.topology = topology;
  params.seed = seed;
  Rng rng(seed);
  const auto widths = topology.layer_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Matrix(fan_in, fan_out), RowVector::Zero(fan_out)};
    for (int i = 0; i < fan_in; ++i) {
      for (int j = 0; j < fan_out; ++j) layer.weight(i, j) = rng.uniform(-scale, scale);
    }
    params.velocity.push_back({Matrix::Zero(fan_in, fan_out), RowVector::Zero(fan_out)});
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void check_features(const ModelParams& params, const Matrix& features) {
  require(features.cols() == params.topology.input_dim, ErrorKind::invalid_input,
          "feature width " + std::to_string(features.cols()) + " does not match input_dim " +
              std::to_string(params.topology.input_dim));
}

}  // namespace

ForwardPass forward(const ModelParams& params, const Matrix& features) {
  check_features(params, features);
  ForwardPass pass;
  pass.cache.inputs.reserve(params.layers.size());
  pass.cache.inputs.push_back(features);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z = pass.cache.inputs.back() * layer.weight;
    z.rowwise() += layer.bias;
    if (l + 1 == params.layers.size()) {
      pass.logits = std::move(z);
    } else {
      pass.cache.inputs.push_back(z.cwiseMax(0.0));
    }
  }
  return pass;
}

Matrix predict_logits(const ModelParams& params, const Matrix& features) {
  check_features(params, features);
  Matrix activation = features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z = activation * layer.weight;
    z.rowwise() += layer.bias;
    if (l + 1 == params.layers.size()) return z;
    activation = z.cwiseMax(0.0);
  }
  return activation;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& grad_logits) {
  const auto depth = params.layers.size();
  require(cache.inputs.size() == depth, ErrorKind::invalid_input,
          "forward cache depth does not match the network");
  for (std::size_t l = 0; l < depth; ++l) {
    require(cache.inputs[l].cols() == params.layers[l].weight.rows() &&
                cache.inputs[l].rows() == cache.inputs[0].rows(),
            ErrorKind::invalid_input, "forward cache shape does not match the network");
  }
  require(grad_logits.rows() == cache.inputs[0].rows() &&
              grad_logits.cols() == params.topology.num_classes,
          ErrorKind::invalid_input, "upstream gradient shape does not match the logits");

  Gradients grads;
  grads.layers.resize(depth);
  Matrix upstream = grad_logits;
  for (std::size_t l = depth; l-- > 0;) {
    const Matrix& input = cache.inputs[l];
    grads.layers[l].weight = input.transpose() * upstream;
    grads.layers[l].bias = upstream.colwise().sum();
    if (l == 0) break;
    Matrix downstream = upstream * params.layers[l].weight.transpose();
    // ReLU derivative: inputs[l] is the post-activation of layer l-1.
    upstream = (input.array() > 0.0).select(downstream, 0.0);
  }
  return grads;
}

void sgd_step(ModelParams& params, const Gradients& grads, const SgdOptions& options) {
  require(options.lr > 0.0, ErrorKind::invalid_input, "learning rate must be positive");
  require(options.momentum >= 0.0 && options.momentum < 1.0, ErrorKind::invalid_input,
          "momentum must be in [0, 1)");
  require(options.weight_decay >= 0.0, ErrorKind::invalid_input,
          "weight decay must be non-negative");
  require(grads.layers.size() == params.layers.size(), ErrorKind::invalid_input,
          "gradient depth does not match the network");
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    require(g.weight.rows() == params.layers[l].weight.rows() &&
                g.weight.cols() == params.layers[l].weight.cols() &&
                g.bias.size() == params.layers[l].bias.size(),
            ErrorKind::invalid_input, "gradient shape does not match the network");
    require(g.weight.allFinite() && g.bias.allFinite(), ErrorKind::training_fault,
            "non-finite gradient in layer " + std::to_string(l));
  }

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    auto& velocity = params.velocity[l];
    const auto& g = grads.layers[l];
    velocity.weight = options.momentum * velocity.weight + g.weight +
                      options.weight_decay * layer.weight;
    velocity.bias = options.momentum * velocity.bias + g.bias;
    layer.weight -= options.lr * velocity.weight;
    layer.bias -= options.lr * velocity.bias;
  }
  require(params.all_finite(), ErrorKind::training_fault, "parameters became non-finite");
}

}  // namespace bkd
