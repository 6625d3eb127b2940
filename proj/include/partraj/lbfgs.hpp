#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace partraj
{

    struct LbfgsOptions
    {
        int memory = 8;
        int max_iters = 200;
        double grad_tol = 1e-6; // relative to max(1, |x|)
        double c1 = 1e-4;       // sufficient decrease
        double c2 = 0.9;        // curvature
        int max_evals_per_search = 40;
    };

    struct LbfgsResult
    {
        Eigen::VectorXd x;
        double value = 0.0;
        int iterations = 0;
        int evaluations = 0;
        bool converged = false;
        bool line_search_failed = false;
    };

    namespace detail
    {
        // Minimizer of the cubic through (a, fa, da) and (b, fb, db), safeguarded
        // to stay inside the bracket; falls back to bisection.
        inline double cubicStep(double a, double fa, double da, double b, double fb, double db)
        {
            const double lo = std::min(a, b);
            const double hi = std::max(a, b);
            const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
            const double disc = d1 * d1 - da * db;
            double t = 0.5 * (a + b);
            if (disc >= 0.0)
            {
                const double d2 = std::copysign(std::sqrt(disc), b - a);
                const double denom = db - da + 2.0 * d2;
                if (denom != 0.0)
                    t = b - (b - a) * (db + d2 - d1) / denom;
            }
            const double margin = 0.1 * (hi - lo);
            if (!std::isfinite(t) || t < lo + margin || t > hi - margin)
                t = 0.5 * (a + b);
            return t;
        }
    } // namespace detail

    // Limited-memory BFGS with a strong-Wolfe line search. `fn(x, grad)` returns
    // the value and writes the gradient. The best evaluated iterate is returned.
    template <typename Fn>
    LbfgsResult lbfgsMinimize(Fn &&fn, const Eigen::VectorXd &x0, const LbfgsOptions &opts = {})
    {
        const Eigen::Index n = x0.size();
        LbfgsResult res;
        Eigen::VectorXd x = x0;
        Eigen::VectorXd g(n);
        double f = fn(x, g);
        res.evaluations = 1;
        res.x = x;
        res.value = f;

        auto small = [&](const Eigen::VectorXd &xx, const Eigen::VectorXd &gg)
        { return gg.norm() <= opts.grad_tol * std::max(1.0, xx.norm()); };

        if (small(x, g))
        {
            res.converged = true;
            return res;
        }

        std::deque<Eigen::VectorXd> sHist, yHist;
        std::deque<double> rhoHist;
        Eigen::VectorXd d(n), xNew(n), gNew(n), alphaBuf(opts.memory);

        for (int it = 0; it < opts.max_iters; ++it)
        {
            // Two-loop recursion.
            d = -g;
            const int k = static_cast<int>(sHist.size());
            for (int j = k - 1; j >= 0; --j)
            {
                alphaBuf(j) = rhoHist[j] * sHist[j].dot(d);
                d.noalias() -= alphaBuf(j) * yHist[j];
            }
            if (k > 0)
                d *= sHist.back().dot(yHist.back()) / yHist.back().squaredNorm();
            for (int j = 0; j < k; ++j)
            {
                const double beta = rhoHist[j] * yHist[j].dot(d);
                d.noalias() += (alphaBuf(j) - beta) * sHist[j];
            }

            double dphi0 = g.dot(d);
            if (!(dphi0 < 0.0))
            {
                sHist.clear();
                yHist.clear();
                rhoHist.clear();
                d = -g;
                dphi0 = -g.squaredNorm();
            }

            const double phi0 = f;
            double step = (k == 0) ? std::min(1.0, 1.0 / g.norm()) : 1.0;

            // Bracketing phase, then zoom.
            double aPrev = 0.0, fPrev = phi0, dPrev = dphi0;
            double aLo = 0.0, fLo = phi0, dLo = dphi0, aHi = 0.0, fHi = 0.0, dHi = 0.0;
            bool bracketed = false, accepted = false;
            double aCur = step, fCur = 0.0, dCur = 0.0;
            int evals = 0;
            while (evals < opts.max_evals_per_search)
            {
                xNew = x + aCur * d;
                fCur = fn(xNew, gNew);
                ++evals;
                dCur = gNew.dot(d);
                if (std::isfinite(fCur) && fCur < res.value)
                {
                    res.value = fCur;
                    res.x = xNew;
                }
                if (!std::isfinite(fCur) || fCur > phi0 + opts.c1 * aCur * dphi0 ||
                    (evals > 1 && fCur >= fPrev))
                {
                    aLo = aPrev, fLo = fPrev, dLo = dPrev;
                    aHi = aCur, fHi = fCur, dHi = dCur;
                    bracketed = true;
                    break;
                }
                if (std::abs(dCur) <= -opts.c2 * dphi0)
                {
                    accepted = true;
                    break;
                }
                if (dCur >= 0.0)
                {
                    aLo = aCur, fLo = fCur, dLo = dCur;
                    aHi = aPrev, fHi = fPrev, dHi = dPrev;
                    bracketed = true;
                    break;
                }
                aPrev = aCur, fPrev = fCur, dPrev = dCur;
                aCur *= 2.0;
            }
            while (bracketed && !accepted && evals < opts.max_evals_per_search)
            {
                if (std::abs(aHi - aLo) <= 1e-16 * std::max(1.0, aLo))
                    break;
                if (std::isfinite(fHi))
                    aCur = detail::cubicStep(aLo, fLo, dLo, aHi, fHi, dHi);
                else
                    aCur = 0.5 * (aLo + aHi);
                xNew = x + aCur * d;
                fCur = fn(xNew, gNew);
                ++evals;
                dCur = gNew.dot(d);
                if (std::isfinite(fCur) && fCur < res.value)
                {
                    res.value = fCur;
                    res.x = xNew;
                }
                if (!std::isfinite(fCur) || fCur > phi0 + opts.c1 * aCur * dphi0 || fCur >= fLo)
                {
                    aHi = aCur, fHi = fCur, dHi = dCur;
                }
                else
                {
                    if (std::abs(dCur) <= -opts.c2 * dphi0)
                    {
                        accepted = true;
                        break;
                    }
                    if (dCur * (aHi - aLo) >= 0.0)
                        aHi = aLo, fHi = fLo, dHi = dLo;
                    aLo = aCur, fLo = fCur, dLo = dCur;
                }
            }
            res.evaluations += evals;
            res.iterations = it + 1;

            if (!accepted)
            {
                // Settle for sufficient decrease at the low end of the bracket.
                if (bracketed && aLo > 0.0)
                {
                    aCur = aLo;
                    xNew = x + aCur * d;
                    fCur = fn(xNew, gNew);
                    ++res.evaluations;
                }
                else
                {
                    res.line_search_failed = true;
                    break;
                }
            }

            Eigen::VectorXd s = xNew - x;
            Eigen::VectorXd y = gNew - g;
            x = xNew;
            g = gNew;
            f = fCur;
            if (f <= res.value)
            {
                res.value = f;
                res.x = x;
            }
            const double sy = s.dot(y);
            if (sy > 1e-12 * y.squaredNorm())
            {
                if (static_cast<int>(sHist.size()) == opts.memory)
                {
                    sHist.pop_front();
                    yHist.pop_front();
                    rhoHist.pop_front();
                }
                sHist.push_back(std::move(s));
                yHist.push_back(std::move(y));
                rhoHist.push_back(1.0 / sy);
            }
            if (small(x, g))
            {
                res.converged = true;
                res.x = x;
                res.value = f;
                break;
            }
        }
        return res;
    }

} // namespace partraj
