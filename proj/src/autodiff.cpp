#include "maxent/autodiff.hpp"

#include "maxent/error.hpp"

#include <cmath>
#include <numeric>

namespace maxent {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingParameter: return "missing parameter";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kTapeConsumed: return "tape already consumed";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kDegenerateDensity: return "degenerate density";
    case ErrorKind::kDimensionTooLarge: return "dimension too large";
    case ErrorKind::kBoundary: return "boundary";
    case ErrorKind::kOutOfBox: return "action out of box";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
  }
  return "unknown";
}

}  // namespace maxent

namespace maxent::ad {

Matrix tanh_of(const Matrix& x) {
  // Blocked so the exp temporaries stay in cache.
  constexpr Eigen::Index kBlock = 512;
  Matrix out(x.rows(), x.cols());
  Eigen::Array<double, kBlock, 1> e;
  for (Eigen::Index i = 0; i < x.size(); i += kBlock) {
    const Eigen::Index m = std::min(kBlock, x.size() - i);
    const auto xi = Eigen::Map<const Eigen::ArrayXd>(x.data() + i, m);
    e.head(m) = (-2.0 * xi.abs()).exp();
    Eigen::Map<Eigen::ArrayXd>(out.data() + i, m) = xi.sign() * (1.0 - e.head(m)) / (1.0 + e.head(m));
  }
  return out;
}

namespace {

constexpr const char* kModule = "autodiff_mlp";

[[noreturn]] void fail(ErrorKind kind, const std::string& what) { throw Error(kind, kModule, what); }

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kDimensionMismatch,
         std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b));
  }
}

Matrix entry_matrix(const ParamEntry& e) {
  Matrix m(static_cast<Eigen::Index>(e.rows()), static_cast<Eigen::Index>(e.cols()));
  const std::size_t cols = e.cols();
  for (std::size_t r = 0; r < e.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = e.values[r * cols + c];
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------- ParamStore

void ParamStore::add(const std::string& name, std::vector<std::size_t> shape,
                     std::vector<double> values) {
  if (shape.empty() || shape.size() > 2) {
    fail(ErrorKind::kInvalidArgument, "entry '" + name + "' must be 1-D or 2-D");
  }
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (n == 0) fail(ErrorKind::kInvalidArgument, "entry '" + name + "' has a zero dimension");
  if (values.size() != n) {
    fail(ErrorKind::kDimensionMismatch, "entry '" + name + "' expects " + std::to_string(n) +
                                            " values, got " + std::to_string(values.size()));
  }
  if (contains(name)) fail(ErrorKind::kInvalidArgument, "duplicate entry '" + name + "'");
  ParamEntry e;
  e.shape = std::move(shape);
  e.values = std::move(values);
  e.grads.assign(n, 0.0);
  entries_.emplace(name, std::move(e));
}

void ParamStore::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  add(name, std::move(shape), std::vector<double>(n, 0.0));
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorKind::kMissingParameter, "no entry '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorKind::kMissingParameter, "no entry '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) std::fill(e.grads.begin(), e.grads.end(), 0.0);
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.size();
  return n;
}

ParamStore ParamStore::extract(const std::string& prefix) const {
  ParamStore out;
  for (const auto& [name, e] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) {
      out.add(name.substr(prefix.size()), e.shape, e.values);
    }
  }
  return out;
}

void ParamStore::merge(const ParamStore& other, const std::string& prefix) {
  for (const auto& [name, e] : other) add(prefix + name, e.shape, e.values);
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [name, e] : entries_) {
    if (name != it->first || e.shape != it->second.shape || e.values != it->second.values) {
      return false;
    }
    ++it;
  }
  return true;
}

// ---------------------------------------------------------------------- Tape

void Tape::check_open() const {
  if (consumed_) fail(ErrorKind::kTapeConsumed, "tape was already consumed by backward");
}

Var Tape::push(Node node) {
  check_open();
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    fail(ErrorKind::kInvalidArgument, "variable does not belong to this tape");
  }
  return nodes_[v.id];
}

Var Tape::constant(Matrix value) {
  Node n{Op::kConstant};
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Matrix value) {
  Node n{Op::kInput};
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(ParamStore& store, const std::string& name, ParamMode mode) {
  ParamEntry& e = store.at(name);
  Node n{mode == ParamMode::kTrainable ? Op::kParam : Op::kConstant};
  n.value = entry_matrix(e);
  if (mode == ParamMode::kTrainable) n.param = &e;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  Node n{Op::kConstant};
  n.value = entry_matrix(store.at(name));
  return push(std::move(n));
}

Var Tape::linear(Var x, Var w, Var b) {
  const Matrix& xv = node(x).value;
  const Matrix& wv = node(w).value;
  const Matrix& bv = node(b).value;
  if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
    fail(ErrorKind::kDimensionMismatch, "linear: input " + shape_str(xv) + ", weight " +
                                            shape_str(wv) + ", bias " + shape_str(bv));
  }
  Node n{Op::kLinear, x.id, w.id, b.id};
  n.value.noalias() = xv * wv.transpose();
  n.value.rowwise() += bv.row(0);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "add");
  Node n{Op::kAdd, a.id, b.id};
  n.value = node(a).value + node(b).value;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "sub");
  Node n{Op::kSub, a.id, b.id};
  n.value = node(a).value - node(b).value;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "mul");
  Node n{Op::kMul, a.id, b.id};
  n.value = node(a).value.cwiseProduct(node(b).value);
  return push(std::move(n));
}

Var Tape::scale(Var a, double k) {
  Node n{Op::kScale, a.id};
  n.k = k;
  n.value = node(a).value * k;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double k) {
  Node n{Op::kAddScalar, a.id};
  n.value = node(a).value.array() + k;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n{Op::kTanh, a.id};
  n.value = tanh_of(node(a).value);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n{Op::kRelu, a.id};
  n.value = node(a).value.cwiseMax(0.0);
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n{Op::kExp, a.id};
  n.value = node(a).value.array().exp();
  return push(std::move(n));
}

Var Tape::log(Var a) {
  Node n{Op::kLog, a.id};
  n.value = node(a).value.array().log();
  return push(std::move(n));
}

Var Tape::square(Var a) {
  Node n{Op::kSquare, a.id};
  n.value = node(a).value.array().square();
  return push(std::move(n));
}

Var Tape::minimum(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "minimum");
  Node n{Op::kMin, a.id, b.id};
  n.value = node(a).value.cwiseMin(node(b).value);
  return push(std::move(n));
}

Var Tape::sum_cols(Var a) {
  Node n{Op::kSumCols, a.id};
  n.value = node(a).value.rowwise().sum();
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  Node n{Op::kMean, a.id};
  n.value = Matrix::Constant(1, 1, node(a).value.mean());
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kInvalidArgument, "concat of zero parts");
  const Eigen::Index rows = node(parts[0]).value.rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (node(p).value.rows() != rows) {
      fail(ErrorKind::kDimensionMismatch, "concat: row counts differ");
    }
    cols += node(p).value.cols();
  }
  Node n{Op::kConcat};
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    const Matrix& v = node(p).value;
    n.value.middleCols(off, v.cols()) = v;
    off += v.cols();
    n.parts.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::col(Var a, int j) {
  const Matrix& v = node(a).value;
  if (j < 0 || j >= v.cols()) {
    fail(ErrorKind::kDimensionMismatch, "col " + std::to_string(j) + " of " + shape_str(v));
  }
  Node n{Op::kCol, a.id};
  n.c = j;
  n.value = v.col(j);
  return push(std::move(n));
}

Var Tape::repeat_rows(Var a, int rows) {
  const Matrix& v = node(a).value;
  if (v.rows() != 1) fail(ErrorKind::kDimensionMismatch, "repeat_rows expects a single row");
  Node n{Op::kRepeatRows, a.id};
  n.value = v.replicate(rows, 1);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Matrix& m = node(v).value;
  if (m.size() != 1) fail(ErrorKind::kDimensionMismatch, "scalar of " + shape_str(m));
  return m(0, 0);
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (n.op == Op::kConstant) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) { backward(root, Matrix::Ones(1, 1)); }

void Tape::backward(Var root, const Matrix& seed) {
  check_open();
  const Node& r = node(root);
  if (seed.rows() != r.value.rows() || seed.cols() != r.value.cols()) {
    fail(ErrorKind::kDimensionMismatch,
         "seed " + shape_str(seed) + " does not match output " + shape_str(r.value));
  }
  consumed_ = true;
  nodes_[root.id].grad = seed;

  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
      case Op::kInput:
        break;
      case Op::kParam: {
        ParamEntry& e = *n.param;
        const std::size_t cols = e.cols();
        for (std::size_t rr = 0; rr < e.rows(); ++rr) {
          for (std::size_t cc = 0; cc < cols; ++cc) e.grads[rr * cols + cc] += g(rr, cc);
        }
        break;
      }
      case Op::kLinear: {
        if (nodes_[n.a].op != Op::kConstant) accumulate(n.a, g * nodes_[n.b].value);
        if (nodes_[n.b].op != Op::kConstant) {
          accumulate(n.b, g.transpose() * nodes_[n.a].value);
        }
        if (nodes_[n.c].op != Op::kConstant) accumulate(n.c, g.colwise().sum());
        break;
      }
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kMul:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::kScale:
        accumulate(n.a, g * n.k);
        break;
      case Op::kAddScalar:
        accumulate(n.a, g);
        break;
      case Op::kTanh:
        accumulate(n.a, (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::kRelu:
        accumulate(n.a, (g.array() * (nodes_[n.a].value.array() > 0.0).cast<double>()).matrix());
        break;
      case Op::kExp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kLog:
        accumulate(n.a, (g.array() / nodes_[n.a].value.array()).matrix());
        break;
      case Op::kSquare:
        accumulate(n.a, (2.0 * g.array() * nodes_[n.a].value.array()).matrix());
        break;
      case Op::kMin: {
        // Ties route the gradient to the first operand.
        const auto pick_a = (nodes_[n.a].value.array() <= nodes_[n.b].value.array()).cast<double>();
        accumulate(n.a, (g.array() * pick_a).matrix());
        accumulate(n.b, (g.array() * (1.0 - pick_a)).matrix());
        break;
      }
      case Op::kSumCols:
        accumulate(n.a, g.replicate(1, nodes_[n.a].value.cols()));
        break;
      case Op::kMean: {
        const Matrix& av = nodes_[n.a].value;
        accumulate(n.a, Matrix::Constant(av.rows(), av.cols(), g(0, 0) / double(av.size())));
        break;
      }
      case Op::kConcat: {
        Eigen::Index off = 0;
        for (int p : n.parts) {
          const Eigen::Index w = nodes_[p].value.cols();
          accumulate(p, g.middleCols(off, w));
          off += w;
        }
        break;
      }
      case Op::kCol: {
        const Matrix& av = nodes_[n.a].value;
        Matrix full = Matrix::Zero(av.rows(), av.cols());
        full.col(n.c) = g;
        accumulate(n.a, full);
        break;
      }
      case Op::kRepeatRows:
        accumulate(n.a, g.colwise().sum());
        break;
    }
  }
}

// ---------------------------------------------------------------------- Adam

void adam_step(ParamStore& params, AdamState& state, double lr, std::pair<double, double> betas,
               double eps, long t) {
  if (!(lr > 0.0)) fail(ErrorKind::kInvalidArgument, "learning rate must be positive");
  if (betas.first < 0.0 || betas.first >= 1.0 || betas.second < 0.0 || betas.second >= 1.0) {
    fail(ErrorKind::kInvalidArgument, "betas must lie in [0, 1)");
  }
  if (t < 1) fail(ErrorKind::kInvalidArgument, "adam step counter must be >= 1");
  for (const auto& [name, e] : params) {
    for (double g : e.grads) {
      if (!std::isfinite(g)) fail(ErrorKind::kNonFinite, "gradient of '" + name + "' is not finite");
    }
  }
  const double c1 = 1.0 - std::pow(betas.first, double(t));
  const double c2 = 1.0 - std::pow(betas.second, double(t));
  for (auto& [name, e] : params) {
    AdamMoments& mom = state[name];
    if (mom.m.size() != e.size()) {
      mom.m.assign(e.size(), 0.0);
      mom.v.assign(e.size(), 0.0);
    }
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double g = e.grads[i];
      mom.m[i] = betas.first * mom.m[i] + (1.0 - betas.first) * g;
      mom.v[i] = betas.second * mom.v[i] + (1.0 - betas.second) * g * g;
      e.values[i] -= lr * (mom.m[i] / c1) / (std::sqrt(mom.v[i] / c2) + eps);
      e.grads[i] = 0.0;
    }
  }
}

void Adam::step(ParamStore& params) {
  ++t_;
  adam_step(params, state_, config_.lr, {config_.beta1, config_.beta2}, config_.eps, t_);
}

}  // namespace maxent::ad
