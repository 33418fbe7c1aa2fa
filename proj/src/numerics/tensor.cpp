#include <algorithm>
#include <limits>
#include <sstream>

#include "mvptm/error.hpp"
#include "mvptm/numerics.hpp"

namespace mvptm::numerics {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : s_(std::make_shared<TensorStorage>()) {
  for (auto e : shape) {
    if (e == 0) throw Error(ErrorCode::ShapeMismatch, "zero extent in " + shape_string(shape));
  }
  if (element_count(shape) != data.size()) {
    throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data.size()) +
                                              " does not match shape " + shape_string(shape));
  }
  s_->shape = std::move(shape);
  s_->data = std::move(data);
  s_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) {
    throw Error(ErrorCode::NotScalar, "tensor of shape " + shape_string(shape()) + " is not scalar");
  }
  return s_->data[0];
}

std::span<double> Tensor::grad() const {
  if (s_->grad.empty()) s_->grad.assign(s_->data.size(), 0.0);
  return s_->grad;
}

void Tensor::zero_grad() const {
  if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(s_->shape, s_->data, s_->requires_grad);
  return t;
}

void Tape::record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) {
    throw Error(ErrorCode::NotScalar,
                "backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void backward(Tensor& loss) {
  Tape* tape = active_tape();
  if (tape == nullptr) {
    if (loss.size() != 1) {
      throw Error(ErrorCode::NotScalar,
                  "backward needs a scalar loss, got " + shape_string(loss.shape()));
    }
    return;
  }
  tape->backward(loss);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t bound) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t b = bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % b);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw Error(ErrorCode::CorruptCheckpoint, "unreadable RNG state");
}

}  // namespace mvptm::numerics
