#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sefusion/errors.hpp"
#include "sefusion/shape.hpp"

namespace sefusion {

/// Dense row-major tensor of reals. T is float in the training/inference
/// build and double in checking mode; the whole library is templated on it.
///
/// Tensors are plain values: copying copies the buffer, and nothing mutates
/// one behind your back. Autodiff bookkeeping lives on the GradTape, not here.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> v;  // flat, row-major
    bool requires_grad = false;

    Tensor() = default;

    Tensor(Shape s, std::vector<T> values, bool rg = false)
        : shape(std::move(s)), v(std::move(values)), requires_grad(rg) {
        if (static_cast<int64_t>(v.size()) != shape.numel())
            throw ShapeError("value count " + std::to_string(v.size()) +
                             " does not match shape " + shape.str());
    }

    static Tensor zeros(Shape s) {
        std::vector<T> buf(static_cast<size_t>(s.numel()), T(0));
        return Tensor(std::move(s), std::move(buf));
    }

    static Tensor full(Shape s, T value) {
        std::vector<T> buf(static_cast<size_t>(s.numel()), value);
        return Tensor(std::move(s), std::move(buf));
    }

    static Tensor scalar(T value) { return Tensor(Shape{1}, {value}); }

    int64_t numel() const { return shape.numel(); }

    T& at(const std::vector<int64_t>& idx) { return v[static_cast<size_t>(shape.offset(idx))]; }
    const T& at(const std::vector<int64_t>& idx) const {
        return v[static_cast<size_t>(shape.offset(idx))];
    }

    bool is_scalar() const { return shape.numel() == 1; }

    T item() const {
        if (!is_scalar()) throw ContractError("item() requires a scalar, got " + shape.str());
        return v[0];
    }

    /// Cast the element type (f32 <-> f64 bridging for the checking mode).
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<U>(v[i]);
        return Tensor<U>(shape, std::move(out), requires_grad);
    }
};

/// NaN/Inf fail-fast policy: every public op runs its result through this.
template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
    for (T x : t.v)
        if (!std::isfinite(x))
            throw DataError(std::string(what) + " produced a non-finite value");
}

template <typename T>
Tensor<T> new_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
    Tensor<T> t(std::move(shape), std::move(values), requires_grad);
    for (T x : t.v)
        if (!std::isfinite(x)) throw DataError("new_tensor given a non-finite value");
    return t;
}

}  // namespace sefusion
