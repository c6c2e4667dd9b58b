#include "zcap/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace zcap {

double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.v) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.v) g *= scale;
  }
  return norm;
}

void adam_step(const std::vector<Parameter*>& params, const OptimizerConfig& cfg) {
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("adam_step: negative learning rate");
  if (cfg.grad_clip_norm) clip_global_norm(params, *cfg.grad_clip_norm);
  for (Parameter* p : params) {
    if (p->grad.shape != p->value.shape) throw std::invalid_argument("adam_step: grad shape mismatch");
    p->step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step));
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.v[i];
      double& m = p->moment1.v[i];
      double& u = p->moment2.v[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      u = cfg.beta2 * u + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m / bc1;
      const double u_hat = u / bc2;
      p->value.v[i] -= cfg.learning_rate * m_hat / (std::sqrt(u_hat) + cfg.epsilon);
    }
    p->zero_grad();
  }
}

}  // namespace zcap
