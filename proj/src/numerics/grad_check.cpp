#include <algorithm>
#include <cmath>
#include <limits>

#include "mvptm/numerics.hpp"

namespace mvptm::numerics {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double h) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  NoGradScope no_grad;
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double original = p[k];
      p[k] = original + h;
      const double up = f().item();
      p[k] = original - h;
      const double down = f().item();
      p[k] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][k];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error || std::isnan(rel)) {
        report.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        report.worst_param = pi;
        report.worst_index = k;
      }
    }
  }
  return report;
}

}  // namespace mvptm::numerics
