#include "aspus/coxnull.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "aspus/errors.hpp"

namespace aspus {

namespace {

void check_shapes(const Matrix& covar, const Vector& time,
                  const IntVector& status, const Vector& beta) {
  const Index n = time.size();
  if (n == 0) {
    throw ValidationError("partial likelihood needs at least one subject");
  }
  if (covar.rows() != n || status.size() != n) {
    throw ValidationError("covariates, times and statuses disagree on length");
  }
  if (beta.size() != covar.cols()) {
    throw ValidationError("coefficient length does not match covariate count");
  }
}

std::vector<Index> order_by_time_descending(const Vector& time) {
  std::vector<Index> ord(static_cast<std::size_t>(time.size()));
  std::iota(ord.begin(), ord.end(), Index{0});
  std::stable_sort(ord.begin(), ord.end(),
                   [&time](Index a, Index b) { return time[a] > time[b]; });
  return ord;
}

double grad_max_norm(const LoglikResult& r) {
  return r.grad.size() == 0 ? 0.0 : r.grad.template lpNorm<Eigen::Infinity>();
}

}  // namespace

LoglikResult partial_loglik(const Matrix& covar, const Vector& time,
                            const IntVector& status, const Vector& beta) {
  check_shapes(covar, time, status, beta);
  const Index n = time.size();
  const Index k = covar.cols();
  const Vector eta = k > 0 ? Vector(covar * beta) : Vector::Zero(n);

  LoglikResult res;
  res.grad = Vector::Zero(k);
  res.info = Matrix::Zero(k, k);

  const std::vector<Index> ord = order_by_time_descending(time);
  double s0 = 0.0;
  Vector s1 = Vector::Zero(k);
  Matrix s2 = Matrix::Zero(k, k);
  double shift = -std::numeric_limits<double>::infinity();

  std::size_t i = 0;
  while (i < ord.size()) {
    const double t = time[ord[i]];
    std::size_t j = i;
    while (j < ord.size() && time[ord[j]] == t) {
      const Index r = ord[j];
      if (eta[r] > shift) {
        const double rescale = std::exp(shift - eta[r]);
        s0 *= rescale;
        s1 *= rescale;
        s2 *= rescale;
        shift = eta[r];
      }
      const double w = std::exp(eta[r] - shift);
      s0 += w;
      if (k > 0) {
        s1.noalias() += w * covar.row(r).transpose();
        s2.noalias() += w * covar.row(r).transpose() * covar.row(r);
      }
      ++j;
    }
    Index events_here = 0;
    for (std::size_t e = i; e < j; ++e) {
      const Index r = ord[e];
      if (status[r] == 1) {
        ++events_here;
        res.loglik += eta[r];
        if (k > 0) res.grad += covar.row(r).transpose();
      }
    }
    if (events_here > 0) {
      const double d = static_cast<double>(events_here);
      res.loglik -= d * (std::log(s0) + shift);
      if (k > 0) {
        const Vector zbar = s1 / s0;
        res.grad -= d * zbar;
        res.info.noalias() += d * (s2 / s0 - zbar * zbar.transpose());
      }
    }
    i = j;
  }
  return res;
}

namespace {

[[noreturn]] void throw_rank_deficiency(
    const Matrix& info, const std::vector<std::string>& covar_names) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(info);
  const Vector v = es.eigenvectors().col(0).cwiseAbs();
  const double top = v.maxCoeff();
  std::string cols;
  for (Index c = 0; c < v.size(); ++c) {
    if (v[c] >= 0.5 * top) {
      if (!cols.empty()) cols += ", ";
      cols += c < static_cast<Index>(covar_names.size())
                  ? "'" + covar_names[static_cast<std::size_t>(c)] + "'"
                  : "column " + std::to_string(c);
    }
  }
  throw RankDeficiencyError(
      "covariate information matrix is singular; a constant or collinear "
      "direction loads on " +
      cols);
}

}  // namespace

NullModel fit_null(const Matrix& covar, const Vector& time,
                   const IntVector& status, const FitOptions& opts,
                   const std::vector<std::string>& covar_names) {
  const Index n = time.size();
  const Index k = covar.cols();
  NullModel model;
  model.beta = Vector::Zero(k);

  LoglikResult cur = partial_loglik(covar, time, status, model.beta);

  Index events = 0;
  for (Index i = 0; i < n; ++i) events += (status[i] == 1);
  if (k > 0 && events > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(cur.info);
    const double top = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(1.0, top)) {
      throw_rank_deficiency(cur.info, covar_names);
    }
  }

  model.loglik_path.push_back(cur.loglik);
  model.converged = grad_max_norm(cur) < opts.tol;
  for (int it = 0; it < opts.max_iter && !model.converged; ++it) {
    Eigen::LDLT<Matrix> ldlt(cur.info);
    Vector dir = ldlt.solve(cur.grad);
    if (ldlt.info() != Eigen::Success || !dir.allFinite()) {
      throw ConvergenceError(
          "Newton step failed: information matrix could not be solved");
    }
    double step = 1.0;
    bool accepted = false;
    Vector beta_trial;
    LoglikResult trial;
    // Near the optimum a full Newton step improves the likelihood by less
    // than the evaluation noise at |loglik| scale; insisting on a strict
    // increase would reject it and strand the gradient above tolerance.
    const double slack = 1e-10 * (1.0 + std::abs(cur.loglik));
    for (int h = 0; h <= opts.max_halvings; ++h) {
      beta_trial = model.beta + step * dir;
      trial = partial_loglik(covar, time, status, beta_trial);
      if (std::isfinite(trial.loglik) && trial.loglik > cur.loglik - slack) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    model.beta = std::move(beta_trial);
    cur = std::move(trial);
    model.iterations = it + 1;
    model.loglik_path.push_back(cur.loglik);
    model.converged = grad_max_norm(cur) < opts.tol;
  }
  model.loglik = cur.loglik;

  if (k > 0) {
    const Vector eta = covar * model.beta;
    model.mu = (eta.array() - eta.maxCoeff()).exp();
  } else {
    model.mu = Vector::Ones(n);
  }
  return model;
}

NullModel fit_null(const SurvivalDataset& ds, const FitOptions& opts) {
  return fit_null(ds.covar, ds.time, ds.status, opts, ds.covar_ids);
}

}  // namespace aspus
