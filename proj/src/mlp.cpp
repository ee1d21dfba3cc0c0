#include "maxent/mlp.hpp"

#include "maxent/error.hpp"

#include <cmath>

namespace maxent {
namespace {

constexpr const char* kModule = "autodiff_mlp";

void check_weights_present(const ad::ParamStore& params, const std::string& prefix,
                           const MlpSpec& spec) {
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto& w = params.at(weight_name(prefix, l));
    const auto& b = params.at(bias_name(prefix, l));
    if (w.shape.size() != 2 || int(w.shape[0]) != spec.layer_out(l) ||
        int(w.shape[1]) != spec.layer_in(l) || int(b.size()) != spec.layer_out(l)) {
      throw Error(ErrorKind::kDimensionMismatch, kModule,
                  "layer '" + weight_name(prefix, l) + "' does not match its spec");
    }
  }
}

}  // namespace

void MlpSpec::validate() const {
  bool ok = input_dim >= 1 && output_dim >= 1;
  for (int h : hidden_dims) ok = ok && h >= 1;
  if (!ok) throw Error(ErrorKind::kInvalidArgument, kModule, "all MLP dimensions must be >= 1");
}

int MlpSpec::layer_in(int layer) const { return layer == 0 ? input_dim : hidden_dims[layer - 1]; }

int MlpSpec::layer_out(int layer) const {
  return layer == num_layers() - 1 ? output_dim : hidden_dims[layer];
}

std::string weight_name(const std::string& prefix, int layer) {
  return prefix + "l" + std::to_string(layer) + ".weight";
}

std::string bias_name(const std::string& prefix, int layer) {
  return prefix + "l" + std::to_string(layer) + ".bias";
}

void init_mlp(ad::ParamStore& params, const std::string& prefix, const MlpSpec& spec,
              std::mt19937_64& rng) {
  spec.validate();
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_in(l);
    const int out = spec.layer_out(l);
    const double limit = std::sqrt(6.0 / double(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(std::size_t(in) * std::size_t(out));
    for (double& v : w) v = dist(rng);
    params.add(weight_name(prefix, l), {std::size_t(out), std::size_t(in)}, std::move(w));
    params.add_zeros(bias_name(prefix, l), {std::size_t(out)});
  }
}

void apply_activation(ad::Matrix& m, Activation act) {
  if (act == Activation::kTanh) {
    m = ad::tanh_of(m);
  } else {
    m = m.cwiseMax(0.0);
  }
}

ad::Var mlp_forward(ad::Tape& tape, const MlpSpec& spec, ad::ParamStore& params,
                    const std::string& prefix, ad::Var x, ad::ParamMode mode) {
  spec.validate();
  if (tape.value(x).cols() != spec.input_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule,
                "input has " + std::to_string(tape.value(x).cols()) + " columns, expected " +
                    std::to_string(spec.input_dim));
  }
  check_weights_present(params, prefix, spec);
  ad::Var h = x;
  for (int l = 0; l < spec.num_layers(); ++l) {
    ad::Var w = tape.param(params, weight_name(prefix, l), mode);
    ad::Var b = tape.param(params, bias_name(prefix, l), mode);
    h = tape.linear(h, w, b);
    if (l + 1 < spec.num_layers()) {
      h = spec.activation == Activation::kTanh ? tape.tanh(h) : tape.relu(h);
    }
  }
  return h;
}

ad::Matrix weight_matrix(const ad::ParamStore& params, const std::string& name) {
  const auto& e = params.at(name);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      e.values.data(), Eigen::Index(e.rows()), Eigen::Index(e.cols()));
}

Eigen::RowVectorXd bias_row(const ad::ParamStore& params, const std::string& name) {
  const auto& e = params.at(name);
  return Eigen::Map<const Eigen::RowVectorXd>(e.values.data(), Eigen::Index(e.size()));
}

ad::Matrix mlp_eval_from_preactivation(const MlpSpec& spec, const ad::ParamStore& params,
                                       const std::string& prefix, ad::Matrix preact,
                                       int from_layer) {
  ad::Matrix h = std::move(preact);
  for (int l = from_layer; l < spec.num_layers(); ++l) {
    if (l > from_layer) {
      ad::Matrix next = h * weight_matrix(params, weight_name(prefix, l)).transpose();
      next.rowwise() += bias_row(params, bias_name(prefix, l));
      h = std::move(next);
    }
    if (l + 1 < spec.num_layers()) apply_activation(h, spec.activation);
  }
  return h;
}

ad::Matrix mlp_eval(const MlpSpec& spec, const ad::ParamStore& params, const std::string& prefix,
                    const ad::Matrix& x) {
  spec.validate();
  if (x.cols() != spec.input_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule,
                "input has " + std::to_string(x.cols()) + " columns, expected " +
                    std::to_string(spec.input_dim));
  }
  check_weights_present(params, prefix, spec);
  ad::Matrix pre = x * weight_matrix(params, weight_name(prefix, 0)).transpose();
  pre.rowwise() += bias_row(params, bias_name(prefix, 0));
  return mlp_eval_from_preactivation(spec, params, prefix, std::move(pre), 0);
}

}  // namespace maxent
