#pragma once

// Dense f64 tensors with tape-based reverse-mode differentiation.
//
// Operations record a backward closure on the thread's active Tape whenever
// one of their inputs requires a gradient. Without an active tape they are
// plain forward computations, which is what the finite-difference checker
// relies on.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mvptm::numerics {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};

/// Shared-handle tensor: copies alias the same storage. Use clone() for a
/// deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return s_->shape.at(axis); }
  std::size_t size() const { return s_->data.size(); }

  std::span<double> data() { return s_->data; }
  std::span<const double> data() const { return s_->data; }
  double& operator[](std::size_t i) { return s_->data[i]; }
  double operator[](std::size_t i) const { return s_->data[i]; }
  double item() const;

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool on) { s_->requires_grad = on; }
  bool has_grad() const { return !s_->grad.empty(); }
  /// Gradient buffer, allocated (zero-filled) on first access. Like the
  /// data it lives in the shared storage, so a const handle can accumulate.
  std::span<double> grad() const;
  void zero_grad() const;

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  const std::shared_ptr<TensorStorage>& storage() const { return s_; }

 private:
  std::shared_ptr<TensorStorage> s_;
};

/// Ordered record of differentiable operations for one forward pass.
class Tape {
 public:
  void record(std::function<void()> backward_step);
  /// Seeds d(loss)/d(loss) = 1 and replays the recorded steps in reverse.
  /// Throws Error(NotScalar) when `loss` has more than one element.
  void backward(Tensor& loss);
  void clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

Tape* active_tape();

/// Makes `tape` the active tape on this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

void backward(Tensor& loss);

// Elementwise / reductions
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor add_row(const Tensor& x, const Tensor& row);  // broadcast over the last axis

// Linear algebra. `b` may be 2-D (shared across the leading axes of `a`) or
// carry the same leading axes as `a`.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last(const Tensor& a);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& w);

/// softmax(logits + bias) over the last axis. `bias` has either the full
/// shape of `logits` or its trailing two axes; it never receives gradient.
Tensor softmax_bias(const Tensor& logits, const Tensor& bias);

Tensor concat_last(std::span<const Tensor> parts);
Tensor slice_last(const Tensor& x, std::size_t start, std::size_t length);
Tensor concat_rows(const Tensor& a, const Tensor& b);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor gelu(const Tensor& x);

/// Mean over rows whose `keep` flag is set. x: [n, d] -> [d] or
/// [B, n, d] -> [B, d] with keep of length B*n.
/// Throws Error(EmptyPool) when a sample keeps no rows.
Tensor mean_pool(const Tensor& x, const std::vector<bool>& keep);

/// Row lookup: ids index rows of `table` [V, d]; result shape is
/// `index_shape` + [d].
Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& index_shape);

Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

/// Mean over rows of -log softmax(logits[r] + bias[r])[targets[r]].
/// logits [R, C]; bias may be undefined or [R, C].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                             const Tensor& bias = Tensor());

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares tape gradients of `f` against central differences
/// (f(θ+h) - f(θ-h)) / 2h for every coordinate of every tensor in `params`.
/// Relative error uses max(1, |analytic|, |numeric|) as denominator.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                           double h = 1e-4);

/// Seeded generator used for initialisation and shuffling (MT19937-64 with
/// portable real/integer conversions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  std::size_t below(std::size_t bound);
  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mvptm::numerics
