#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace crawl::nn {

// Dense row-major tensor of 64-bit reals with an optional gradient buffer of
// the same shape.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> v;
    std::vector<double> g;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
    int64_t dim(int i) const { return shape[i]; }
    bool has_grad() const { return !g.empty(); }
    void ensure_grad() {
        if (g.empty()) g.assign(v.size(), 0.0);
    }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

// Row-index lists used by the gather/scatter kernels.
using RowGroups = std::vector<std::vector<int64_t>>;

TensorPtr make_tensor(std::vector<int64_t> shape);
TensorPtr make_tensor(std::vector<int64_t> shape, std::vector<double> values);

// Reverse-mode tape: kernels append an explicit backward step when recording
// is active; backward() runs them last-to-first and clears the tape.
class Tape {
public:
    void record(std::function<void()> op) { ops_.push_back(std::move(op)); }

    void backward() {
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        ops_.clear();
    }

    void clear() { ops_.clear(); }
    size_t size() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

// When enabled, every kernel validates output values are finite and throws
// NumericalError otherwise. Losses always validate.
void set_strict_finite(bool on);
bool strict_finite();
void check_finite(const Tensor& t, const std::string& where);

}  // namespace crawl::nn
