#pragma once

#include "maxent/autodiff.hpp"

#include <random>
#include <string>
#include <vector>

namespace maxent {

enum class Activation { kTanh, kRelu };

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::kTanh;

  void validate() const;
  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
};

// Parameter names: `<prefix>l<k>.weight` (out x in) and `<prefix>l<k>.bias` (out).
std::string weight_name(const std::string& prefix, int layer);
std::string bias_name(const std::string& prefix, int layer);

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
void init_mlp(ad::ParamStore& params, const std::string& prefix, const MlpSpec& spec,
              std::mt19937_64& rng);

/// Taped forward pass; rows of `x` are samples. Activation on hidden layers only.
ad::Var mlp_forward(ad::Tape& tape, const MlpSpec& spec, ad::ParamStore& params,
                    const std::string& prefix, ad::Var x,
                    ad::ParamMode mode = ad::ParamMode::kTrainable);

/// Plain evaluation with no tape.
ad::Matrix mlp_eval(const MlpSpec& spec, const ad::ParamStore& params, const std::string& prefix,
                    const ad::Matrix& x);

/// Evaluation resumed after layer `from_layer`'s pre-activation has been formed
/// by the caller; used to share the first affine map across grids.
ad::Matrix mlp_eval_from_preactivation(const MlpSpec& spec, const ad::ParamStore& params,
                                       const std::string& prefix, ad::Matrix preact,
                                       int from_layer);

/// Row-major view of a weight entry as an Eigen matrix copy.
ad::Matrix weight_matrix(const ad::ParamStore& params, const std::string& name);
/// Bias entry as a row vector.
Eigen::RowVectorXd bias_row(const ad::ParamStore& params, const std::string& name);

void apply_activation(ad::Matrix& m, Activation act);

}  // namespace maxent
