#pragma once

// Minimal reverse-mode gradient engine over dense matrices.
//
// Every value on a Tape is a matrix whose rows are batch samples. Parameters
// live in a ParamStore and are pulled onto a tape either as trainable leaves
// (their gradients are accumulated into the store on backward) or as frozen
// constants.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace maxent::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Elementwise tanh through the vectorized exp; std::tanh is scalar for doubles.
Matrix tanh_of(const Matrix& x);

struct ParamEntry {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grads;

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : shape[0]; }
};

/// Named, shaped flat parameter arrays with matching gradient slots.
/// Iteration order is lexicographic by name.
class ParamStore {
 public:
  using Map = std::map<std::string, ParamEntry>;

  void add(const std::string& name, std::vector<std::size_t> shape, std::vector<double> values);
  void add_zeros(const std::string& name, std::vector<std::size_t> shape);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;

  void zero_grad();
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t total_values() const;

  /// Copy of every entry whose name starts with `prefix`, prefix stripped.
  ParamStore extract(const std::string& prefix) const;
  /// Inserts every entry of `other` under `prefix` + name.
  void merge(const ParamStore& other, const std::string& prefix);

  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  bool operator==(const ParamStore& other) const;

 private:
  Map entries_;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

enum class ParamMode { kTrainable, kFrozen };

class Tape {
 public:
  Tape() { nodes_.reserve(128); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Leaf without gradient.
  Var constant(Matrix value);
  /// Leaf whose gradient is retained and readable after backward.
  Var input(Matrix value);
  /// Parameter leaf; shape [r, c] maps to an r x c matrix, shape [n] to 1 x n.
  Var param(ParamStore& store, const std::string& name, ParamMode mode = ParamMode::kTrainable);
  Var param(const ParamStore& store, const std::string& name);

  /// x * w^T + b with x: B x in, w: out x in, b: 1 x out.
  Var linear(Var x, Var w, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var neg(Var a) { return scale(a, -1.0); }
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  Var minimum(Var a, Var b);
  /// Row-wise sum: B x n -> B x 1.
  Var sum_cols(Var a);
  /// Mean of every element: -> 1 x 1.
  Var mean(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var col(Var a, int j);
  /// Broadcast a 1 x n row to B x n.
  Var repeat_rows(Var a, int rows);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  /// Gradient of the backward root w.r.t. v; zero matrix when v was not reached.
  Matrix grad(Var v) const;

  /// Propagates `seed` from `root` back to every node, accumulating parameter
  /// gradients into their stores. A tape can be consumed only once.
  void backward(Var root, const Matrix& seed);
  void backward(Var root);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConstant,
    kInput,
    kParam,
    kLinear,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddScalar,
    kTanh,
    kRelu,
    kExp,
    kLog,
    kSquare,
    kMin,
    kSumCols,
    kMean,
    kConcat,
    kCol,
    kRepeatRows,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int c = -1;
    double k = 0.0;
    Matrix value;
    Matrix grad;
    ParamEntry* param = nullptr;
    std::vector<int> parts;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check_open() const;
  void accumulate(int id, const Matrix& g);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

using AdamState = std::map<std::string, AdamMoments>;

/// Bias-corrected Adam update at step t (t >= 1); zeroes gradients afterwards.
/// Throws before touching any value when a gradient is non-finite.
void adam_step(ParamStore& params, AdamState& state, double lr, std::pair<double, double> betas,
               double eps, long t);

/// Adam with its own step counter and moment buffers.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(ParamStore& params);
  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  AdamState state_;
  long t_ = 0;
};

}  // namespace maxent::ad
