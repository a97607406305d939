#include "scadaguard/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "scadaguard/errors.hpp"

namespace scadaguard {

double finite_diff_check(const LossBuilder& builder, std::vector<Parameter*> params, double h) {
    if (params.empty()) return 0.0;

    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        NodeId loss = builder(tape);
        if (tape.value(loss).size() != 1) {
            throw NumericError("finite_diff_check: builder must produce a scalar loss");
        }
        tape.backward(loss);
    }
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    auto eval = [&]() {
        Tape tape;
        NodeId loss = builder(tape);
        const double v = tape.value(loss).data[0];
        if (!std::isfinite(v)) {
            throw NumericError("finite_diff_check: non-finite loss at perturbed point");
        }
        return v;
    };

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value.data[i];
            p->value.data[i] = orig + h;
            const double fp = eval();
            p->value.data[i] = orig - h;
            const double fm = eval();
            p->value.data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi].data[i];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace scadaguard
