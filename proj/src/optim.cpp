#include "optim.hpp"

#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace procimp::detail {

namespace {

using Objective = std::function<double(const Eigen::VectorXd&)>;

double trampoline(const gsl_vector* v, void* ctx) {
    const auto& f = *static_cast<const Objective*>(ctx);
    Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
    for (std::size_t i = 0; i < v->size; ++i) x(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
    const double y = f(x);
    return std::isfinite(y) ? y : std::numeric_limits<double>::max() / 4;
}

}  // namespace

SimplexResult nelder_mead(const Objective& f, const Eigen::VectorXd& start, double step, int max_iter,
                          double tol) {
    const auto n = static_cast<std::size_t>(start.size());
    gsl_set_error_handler_off();
    gsl_multimin_function fn{&trampoline, n, const_cast<Objective*>(&f)};
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* ss = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, start(static_cast<Eigen::Index>(i)));
    gsl_vector_set_all(ss, step);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, ss);

    SimplexResult out;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && out.iterations < max_iter) {
        ++out.iterations;
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), tol);
    }
    out.converged = status == GSL_SUCCESS;
    out.x.resize(start.size());
    for (std::size_t i = 0; i < n; ++i) out.x(static_cast<Eigen::Index>(i)) = gsl_vector_get(s->x, i);
    out.value = s->fval;

    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(x);
    gsl_vector_free(ss);
    return out;
}

}  // namespace procimp::detail
