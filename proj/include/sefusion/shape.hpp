#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sefusion/errors.hpp"

namespace sefusion {

/// Dense row-major extents. Every extent is >= 1, so the element count is
/// always positive. Axis order follows [H, W, C] for feature maps and
/// [N, ...] for batched values.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int64_t> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) { validate(); }

    int64_t rank() const { return static_cast<int64_t>(dims_.size()); }
    int64_t dim(int64_t axis) const { return dims_.at(static_cast<size_t>(axis)); }
    const std::vector<int64_t>& dims() const { return dims_; }

    int64_t numel() const {
        return std::accumulate(dims_.begin(), dims_.end(), int64_t{1},
                               std::multiplies<int64_t>());
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return dims_ != o.dims_; }

    /// Flat row-major offset of a multi-index: for [H,W,C] the element
    /// (i,j,k) lives at (i*W + j)*C + k.
    int64_t offset(const std::vector<int64_t>& idx) const {
        if (static_cast<int64_t>(idx.size()) != rank())
            throw ShapeError("index rank " + std::to_string(idx.size()) +
                             " does not match shape " + str());
        int64_t off = 0;
        for (size_t a = 0; a < idx.size(); ++a) {
            if (idx[a] < 0 || idx[a] >= dims_[a])
                throw ShapeError("index out of bounds for shape " + str());
            off = off * dims_[a] + idx[a];
        }
        return off;
    }

    std::string str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) os << ',';
            os << dims_[i];
        }
        os << ']';
        return os.str();
    }

private:
    void validate() const {
        if (dims_.empty())
            throw ShapeError("shape must have at least one extent");
        for (int64_t d : dims_)
            if (d < 1) throw ShapeError("non-positive extent in shape " + str());
    }

    std::vector<int64_t> dims_;
};

}  // namespace sefusion
