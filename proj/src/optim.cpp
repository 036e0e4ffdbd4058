#include "dlcm/optim.hpp"

#include <cmath>

#include "dlcm/util.hpp"

namespace dlcm {

namespace {

struct LineEval {
    double a = 0.0;
    double f = 0.0;
    double df = 0.0;  // directional derivative
    bool finite = false;
};

// Cubic minimiser of the interpolant through (a0,f0,d0) and (a1,f1,d1);
// falls back to the midpoint when degenerate.
double cubic_step(double a0, double f0, double d0, double a1, double f1, double d1) {
    const double h = a1 - a0;
    if (h == 0.0) return a0;
    const double d1d = d0 + d1 - 3.0 * (f1 - f0) / h;
    const double disc = d1d * d1d - d0 * d1;
    if (disc < 0.0) return 0.5 * (a0 + a1);
    const double s = std::sqrt(disc) * (h > 0.0 ? 1.0 : -1.0);
    const double denom = d1 - d0 + 2.0 * s;
    if (denom == 0.0) return 0.5 * (a0 + a1);
    double t = a1 - h * (d1 + s - d1d) / denom;
    if (!std::isfinite(t)) return 0.5 * (a0 + a1);
    return t;
}

}  // namespace

OptimResult minimize_bfgs(const Objective& fn, const Eigen::VectorXd& x0,
                          const BfgsOptions& opt) {
    const long n = x0.size();
    OptimResult res;
    res.x = x0;
    res.grad.resize(n);

    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        ++evals;
        return fn(x, g);
    };

    Eigen::VectorXd g(n);
    double f = eval(res.x, &g);
    if (!std::isfinite(f) || !g.allFinite())
        throw NumericError("minimize_bfgs: objective not finite at the starting point");

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool h_initialised = false;

    Eigen::VectorXd d(n), x_try(n), g_try(n);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        res.iterations = iter;
        if (g.lpNorm<Eigen::Infinity>() <= opt.gtol) {
            res.converged = true;
            res.message = "gradient tolerance reached";
            break;
        }
        if (evals >= opt.max_evals) {
            res.message = "evaluation budget exhausted";
            break;
        }

        d.noalias() = -(H * g);
        double dg = d.dot(g);
        if (!(dg < 0.0) || !d.allFinite()) {
            // not a descent direction: restart from steepest descent
            H.setIdentity();
            h_initialised = false;
            d = -g;
            dg = d.dot(g);
        }

        // ---- strong-Wolfe line search --------------------------------------
        const double f0 = f;
        const double df0 = dg;
        auto phi = [&](double a) {
            LineEval le;
            le.a = a;
            x_try = res.x + a * d;
            le.f = eval(x_try, &g_try);
            le.finite = std::isfinite(le.f) && g_try.allFinite();
            le.df = le.finite ? g_try.dot(d) : 0.0;
            return le;
        };

        LineEval lo{0.0, f0, df0, true};
        LineEval cur;
        double a = opt.initial_step;
        const double a_max = 1e6;
        bool bracketed = false;
        LineEval hi;
        bool accepted = false;

        for (int ls = 0; ls < 30 && !accepted; ++ls) {
            cur = phi(a);
            if (!cur.finite || cur.f > f0 + opt.wolfe_c1 * a * df0 ||
                (ls > 0 && cur.f >= lo.f)) {
                hi = cur;
                bracketed = true;
                break;
            }
            if (std::abs(cur.df) <= -opt.wolfe_c2 * df0) {
                accepted = true;
                break;
            }
            if (cur.df >= 0.0) {
                // minimum lies between the previous point and this one; the
                // current point is the better (Armijo-satisfying) end
                hi = lo;
                lo = cur;
                bracketed = true;
                break;
            }
            lo = cur;
            a = std::min(2.0 * a, a_max);
            if (a >= a_max) break;
        }

        if (!accepted && bracketed) {
            // zoom between lo (good side) and hi
            for (int z = 0; z < 40; ++z) {
                double aj;
                if (hi.finite) {
                    aj = cubic_step(lo.a, lo.f, lo.df, hi.a, hi.f, hi.df);
                    const double lo_b = std::min(lo.a, hi.a), hi_b = std::max(lo.a, hi.a);
                    const double margin = 0.05 * (hi_b - lo_b);
                    if (!(aj > lo_b + margin && aj < hi_b - margin)) aj = 0.5 * (lo.a + hi.a);
                } else {
                    aj = lo.a + 0.5 * (hi.a - lo.a);
                }
                if (std::abs(hi.a - lo.a) < 1e-14 * std::max(1.0, std::abs(lo.a))) break;
                cur = phi(aj);
                if (!cur.finite || cur.f > f0 + opt.wolfe_c1 * aj * df0 || cur.f >= lo.f) {
                    hi = cur;
                } else {
                    if (std::abs(cur.df) <= -opt.wolfe_c2 * df0) {
                        accepted = true;
                        break;
                    }
                    if (cur.df * (hi.a - lo.a) >= 0.0) hi = lo;
                    lo = cur;
                }
                if (evals >= opt.max_evals) break;
            }
        }

        LineEval step;
        if (accepted) {
            step = cur;
        } else if (lo.a > 0.0 && lo.finite && lo.f < f0) {
            // settle for the best Armijo point found
            step = phi(lo.a);
            if (!step.finite || step.f >= f0) {
                res.message = "line search failed";
                break;
            }
        } else {
            res.message = "line search failed";
            break;
        }

        const Eigen::VectorXd s = step.a * d;
        res.x += s;
        const Eigen::VectorXd y = g_try - g;
        const double df_step = f - step.f;
        f = step.f;
        g = g_try;

        const double ys = y.dot(s);
        if (ys > 1e-10 * y.norm() * s.norm()) {
            if (!h_initialised) {
                H = (ys / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
                h_initialised = true;
            }
            const double rho = 1.0 / ys;
            const Eigen::VectorXd Hy = H * y;
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            H.noalias() -= rho * (s * Hy.transpose() + Hy * s.transpose());
            H.noalias() += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose());
        }

        if (opt.ftol > 0.0 && std::abs(df_step) <= opt.ftol * std::max(1.0, std::abs(f))) {
            res.converged = true;
            res.message = "function tolerance reached";
            res.iterations = iter + 1;
            break;
        }
    }

    if (res.message.empty() && !res.converged) res.message = "iteration limit reached";
    if (g.lpNorm<Eigen::Infinity>() <= opt.gtol) res.converged = true;
    res.f = f;
    res.grad = g;
    res.n_evals = evals;
    return res;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double eps) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (long j = 0; j < x.size(); ++j) {
        const double h = eps * std::max(1.0, std::abs(x[j]));
        const double orig = x[j];
        xp[j] = orig + h;
        const double fp = f(xp);
        xp[j] = orig - h;
        const double fm = f(xp);
        xp[j] = orig;
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

namespace {

Eigen::MatrixXd fd_hessian_once(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    const long n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd xp = x;
    const double f0 = f(x);
    for (long i = 0; i < n; ++i) {
        const double oi = x[i];
        xp[i] = oi + h[i];
        const double fp = f(xp);
        xp[i] = oi - h[i];
        const double fm = f(xp);
        xp[i] = oi;
        H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (long j = i + 1; j < n; ++j) {
            const double oj = x[j];
            xp[i] = oi + h[i];
            xp[j] = oj + h[j];
            const double fpp = f(xp);
            xp[j] = oj - h[j];
            const double fpm = f(xp);
            xp[i] = oi - h[i];
            const double fmm = f(xp);
            xp[j] = oj + h[j];
            const double fmp = f(xp);
            xp[i] = oi;
            xp[j] = oj;
            H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
        }
    }
    return H;
}

}  // namespace

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, double eps, bool richardson) {
    Eigen::VectorXd h(x.size());
    for (long j = 0; j < x.size(); ++j) h[j] = eps * std::max(1.0, std::abs(x[j]));
    const Eigen::MatrixXd H1 = fd_hessian_once(f, x, h);
    if (!richardson) return H1;
    const Eigen::MatrixXd H2 = fd_hessian_once(f, x, (0.5 * h.array()).matrix());
    return (4.0 * H2 - H1) / 3.0;
}

}  // namespace dlcm
