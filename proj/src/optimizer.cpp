#include "photodeg/optimizer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace photodeg {

namespace {

double finite_or_inf(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double up = f(probe);
    probe[k] = x[k] - h;
    const double down = f(probe);
    probe[k] = x[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd central_hessian(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& steps) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = steps[i];
    probe[i] = x[i] + hi;
    const double up = f(probe);
    probe[i] = x[i] - hi;
    const double down = f(probe);
    probe[i] = x[i];
    hess(i, i) = (up - 2.0 * f0 + down) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = steps[j];
      probe[i] = x[i] + hi;
      probe[j] = x[j] + hj;
      const double pp = f(probe);
      probe[j] = x[j] - hj;
      const double pm = f(probe);
      probe[i] = x[i] - hi;
      const double mm = f(probe);
      probe[j] = x[j] + hj;
      const double mp = f(probe);
      probe[i] = x[i];
      probe[j] = x[j];
      hess(i, j) = hess(j, i) = (pp - pm - mp + mm) / (4.0 * hi * hj);
    }
  }
  return hess;
}

OptimizerResult minimize_bfgs(const Objective& f_raw, Eigen::VectorXd x0, const OptimizerOptions& options,
                              const Eigen::MatrixXd& initial_inverse_hessian) {
  OptimizerResult res;
  const Eigen::Index n = x0.size();
  auto f = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    return finite_or_inf(f_raw(x));
  };
  auto log = [&](const std::string& line) {
    if (options.keep_trace) res.trace.push_back(line);
  };

  Eigen::VectorXd x = std::move(x0);
  double fx = f(x);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.value = fx;
    res.reason = "objective not finite at the starting point";
    log(res.reason);
    return res;
  }
  Eigen::MatrixXd inv_h = initial_inverse_hessian.size() == n * n ? initial_inverse_hessian
                                                                 : Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = central_gradient(f, x, options.fd_step);

  double last_step = 0.0;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    res.grad_inf = g.lpNorm<Eigen::Infinity>();
    {
      std::ostringstream os;
      os.precision(12);
      os << "iter " << res.iterations << " f=" << fx << " |g|inf=" << res.grad_inf << " step=" << last_step;
      log(os.str());
    }
    if (res.grad_inf < options.grad_tol) {
      res.converged = true;
      res.reason = "gradient tolerance";
      break;
    }
    Eigen::VectorXd dir = -inv_h * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      // Lost descent; restart from steepest descent.
      inv_h.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    double step = 1.0;
    Eigen::VectorXd trial;
    double f_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = x + step * dir;
      f_trial = f(trial);
      if (f_trial <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.reason = "line search failed";
      res.converged = res.grad_inf < 1e3 * options.grad_tol;
      log(res.reason);
      break;
    }
    last_step = step;
    const Eigen::VectorXd s = trial - x;
    const double rel_step = s.lpNorm<Eigen::Infinity>() / std::max(1.0, x.lpNorm<Eigen::Infinity>());
    const double f_prev = fx;
    x = trial;
    fx = f_trial;
    const Eigen::VectorXd g_new = central_gradient(f, x, options.fd_step);
    const Eigen::VectorXd y = g_new - g;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      inv_h = (eye - rho * s * y.transpose()) * inv_h * (eye - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    if (rel_step < options.step_tol && std::abs(f_prev - fx) <= 1e-14 * std::max(1.0, std::abs(fx))) {
      res.grad_inf = g.lpNorm<Eigen::Infinity>();
      res.converged = true;
      res.reason = "step tolerance";
      break;
    }
  }
  if (res.reason.empty()) res.reason = "iteration limit";
  res.x = x;
  res.value = fx;
  res.grad_inf = g.lpNorm<Eigen::Infinity>();
  return res;
}

}  // namespace photodeg
