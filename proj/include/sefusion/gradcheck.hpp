#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sefusion/ops.hpp"
#include "sefusion/tape.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

template <typename T>
struct GradCheckResult {
    T max_rel_err = T(0);
    int64_t compared = 0;      // parameter elements checked
    int64_t worst_param = -1;  // index into the params list
    int64_t worst_elem = -1;
    T worst_analytic = T(0);
    T worst_numeric = T(0);

    bool passed(T tol) const { return max_rel_err < tol; }
};

/// Central-difference check of reverse-mode gradients.
///
/// `f(tape, param_nodes) -> scalar loss node` must be deterministic; it is
/// re-run from scratch for every perturbed evaluation. Relative error uses
/// |analytic - numeric| / max(|analytic|, |numeric|) with the denominator
/// floored at 1e-8. Meant to run with T = double.
template <typename T, typename F>
GradCheckResult<T> grad_check(F f, const std::vector<Tensor<T>>& params, T eps) {
    if (!(eps >= T(1e-5) && eps <= T(1e-2)))
        throw ContractError("grad_check: eps must lie in [1e-5, 1e-2]");

    auto eval = [&](const std::vector<Tensor<T>>& ps) {
        GradTape<T> tape;
        std::vector<NodeId> nodes;
        nodes.reserve(ps.size());
        for (const auto& p : ps) nodes.push_back(tape.leaf(p, /*requires_grad=*/false));
        NodeId loss = f(tape, nodes);
        return tape.value(loss).item();
    };

    // Determinism contract: two identical evaluations must agree bit-exactly.
    {
        T l1 = eval(params);
        T l2 = eval(params);
        if (l1 != l2)
            throw ContractError("grad_check: f is not deterministic (repeated calls disagree)");
    }

    // Analytic gradients in one backward pass.
    std::vector<Tensor<T>> analytic;
    {
        GradTape<T> tape;
        std::vector<NodeId> nodes;
        for (const auto& p : params) nodes.push_back(tape.leaf(p, /*requires_grad=*/true));
        NodeId loss = f(tape, nodes);
        Gradients<T> g = tape.backward(loss);
        for (NodeId n : nodes) analytic.push_back(g.leaf_grad(n));
    }

    GradCheckResult<T> res;
    std::vector<Tensor<T>> work = params;
    for (size_t p = 0; p < work.size(); ++p) {
        for (size_t e = 0; e < work[p].v.size(); ++e) {
            const T saved = work[p].v[e];
            work[p].v[e] = saved + eps;
            const T fp = eval(work);
            work[p].v[e] = saved - eps;
            const T fm = eval(work);
            work[p].v[e] = saved;

            const T numeric = (fp - fm) / (T(2) * eps);
            const T a = analytic[p].v[e];
            const T denom = std::max(std::max(std::abs(a), std::abs(numeric)), T(1e-8));
            const T rel = std::abs(a - numeric) / denom;
            ++res.compared;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = static_cast<int64_t>(p);
                res.worst_elem = static_cast<int64_t>(e);
                res.worst_analytic = a;
                res.worst_numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace sefusion
