#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "landmark/errors.hpp"

namespace landmark {

// Three-component temporal covariance of the longitudinal marker:
//   C(t1,t2) = sigma1_sq + sigma2_sq * exp(-lambda |t1-t2|) + sigma3_sq * 1{same occasion}
struct CovarianceParams {
    double sigma1_sq = 0.0;     // between-subject variance
    double sigma2_sq = 0.0;     // within-subject serial variance
    double lambda_decay = 1.0;  // decay rate of the serial correlation, per year
    double sigma3_sq = 0.0;     // white-noise (measurement/occasion) variance

    double total_variance() const { return sigma1_sq + sigma2_sq + sigma3_sq; }

    bool valid() const {
        return sigma1_sq >= 0.0 && sigma2_sq >= 0.0 && sigma3_sq >= 0.0 &&
               (sigma2_sq == 0.0 || lambda_decay > 0.0) &&
               std::isfinite(sigma1_sq) && std::isfinite(sigma2_sq) &&
               std::isfinite(sigma3_sq) && std::isfinite(lambda_decay);
    }
};

// A point on the process: time coordinate plus measurement occasion. Fresh
// occasions (negative or otherwise unmatched ids) never share white noise.
struct ProcessPoint {
    double time = 0.0;
    int occasion = 0;
};

inline Eigen::MatrixXd covariance_matrix(const std::vector<ProcessPoint>& pts,
                                         const CovarianceParams& p) {
    const int n = static_cast<int>(pts.size());
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i) {
        c(i, i) = p.sigma1_sq + p.sigma2_sq + p.sigma3_sq;
        for (int j = 0; j < i; ++j) {
            const double gap = std::fabs(pts[i].time - pts[j].time);
            double v = p.sigma1_sq + p.sigma2_sq * std::exp(-p.lambda_decay * gap);
            if (pts[i].occasion == pts[j].occasion) v += p.sigma3_sq;
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

// Cholesky with one jitter retry at 1e-8 * total variance.
class SpdSolver {
  public:
    SpdSolver(Eigen::MatrixXd m, const CovarianceParams& p, const std::string& context) {
        llt_.compute(m);
        if (llt_.info() != Eigen::Success) {
            const double jitter = 1e-8 * p.total_variance();
            m.diagonal().array() += jitter;
            llt_.compute(m);
            if (llt_.info() != Eigen::Success)
                throw NumericError(context + ": covariance not positive definite after jitter");
        }
    }

    // may be constructed in "no-throw" mode for use inside optimizers
    SpdSolver(Eigen::MatrixXd m, const CovarianceParams& p, std::nothrow_t) noexcept {
        llt_.compute(m);
        if (llt_.info() != Eigen::Success) {
            m.diagonal().array() += 1e-8 * p.total_variance();
            llt_.compute(m);
            if (llt_.info() != Eigen::Success) ok_ = false;
        }
    }

    bool ok() const { return ok_; }

    double log_det() const {
        return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }

    // L^{-1} b, so that |L^{-1} b|^2 = b' V^{-1} b
    Eigen::MatrixXd half_solve(const Eigen::MatrixXd& b) const {
        return llt_.matrixL().solve(b);
    }

  private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    bool ok_ = true;
};

}  // namespace landmark
