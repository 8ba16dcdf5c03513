#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace landmark {

struct SimplexOptions {
    double rel_tol = 1e-8;   // relative spread of function values at convergence
    int max_iter = 4000;     // per run
    double init_step = 0.5;  // initial simplex edge length
};

struct SimplexResult {
    Eigen::VectorXd x;
    double fval = 0.0;
    int iterations = 0;
    bool converged = false;
    double spread = 0.0;  // f(worst) - f(best) at exit
};

// Nelder-Mead downhill simplex, standard coefficients. Minimizes f.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const SimplexOptions& opt = {}) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<Eigen::VectorXd> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (int i = 0; i < n; ++i) pts[i + 1](i) += opt.init_step;
    for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);

    std::vector<int> order(n + 1);
    SimplexResult res;
    int iter = 0;
    for (; iter < opt.max_iter; ++iter) {
        for (int i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int best = order[0], worst = order[n], second = order[n - 1];

        res.spread = fv[worst] - fv[best];
        if (res.spread <= opt.rel_tol * (std::fabs(fv[best]) + opt.rel_tol)) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += pts[i];
        centroid /= n;

        Eigen::VectorXd xr = centroid + alpha * (centroid - pts[worst]);
        const double fr = f(xr);
        if (fr < fv[order[0]]) {
            Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
            const double fe = f(xe);
            if (fe < fr) { pts[worst] = xe; fv[worst] = fe; }
            else         { pts[worst] = xr; fv[worst] = fr; }
        } else if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            Eigen::VectorXd xc = outside ? centroid + rho * (xr - centroid)
                                         : centroid + rho * (pts[worst] - centroid);
            const double fc = f(xc);
            if (fc < (outside ? fr : fv[worst])) {
                pts[worst] = xc;
                fv[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    pts[i] = pts[best] + sigma * (pts[i] - pts[best]);
                    fv[i] = f(pts[i]);
                }
            }
        }
        ++res.iterations;
    }
    res.iterations = iter;
    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = pts[best];
    res.fval = fv[best];
    return res;
}

}  // namespace landmark
