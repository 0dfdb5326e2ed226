#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crawl/rng.hpp"
#include "crawl/tensor.hpp"

namespace crawl::nn {

// Named parameter list in registration order; the order fixes optimizer
// state alignment and checkpoint layout.
struct ParamMap {
    std::vector<std::pair<std::string, TensorPtr>> items;

    void add(const std::string& name, TensorPtr t) { items.emplace_back(name, std::move(t)); }
    int64_t total_size() const;
    TensorPtr find(const std::string& name) const;
};

// ---- kernels ----------------------------------------------------------
// Every kernel takes the tape first; passing nullptr runs inference-only
// (no gradients recorded, no grad buffers touched).

// x: [m, L, c_in], w: [c_in, c_out, k] -> [m, L-k+1, c_out].
// Valid cross-correlation along the middle axis, no bias.
TensorPtr conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& w);

// x: [m, L, c], w: [c, k] -> [m, L-k+1, c]; each channel convolved with its
// own kernel.
TensorPtr depthwise_conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& w);

// x: [N, in], w: [in, out], optional bias [out] -> [N, out]. Higher-rank
// inputs are treated as [numel/in, in] and reshaped back.
TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

TensorPtr relu(Tape* tape, const TensorPtr& x);

// Inverted dropout; identity when !training or rate == 0. The mask comes
// from the stream's current state, so an identically seeded stream
// reproduces it.
TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, bool training, RngStream rng);

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// out[gid] = sum or mean of x rows in groups[gid]; empty groups give zero
// rows. Groups must be disjoint. x: [R, c] -> [G, c].
TensorPtr group_reduce(Tape* tape, const TensorPtr& x, std::shared_ptr<const RowGroups> groups,
                       bool mean);

// y[r] = x[r] + addend[group_of_row[r]]. x: [N, c], addend: [G, c].
TensorPtr group_broadcast_add(Tape* tape, const TensorPtr& x, const TensorPtr& addend,
                              const std::vector<int>& group_of_row);

// Normalizes over all leading axes per trailing channel.
struct BatchNorm {
    TensorPtr gamma, beta;
    std::vector<double> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNorm(int64_t channels);
    TensorPtr forward(Tape* tape, const TensorPtr& x, bool training);
    void collect(ParamMap& pm, const std::string& prefix);
    int64_t channels() const { return gamma->numel(); }
};

struct Linear {
    TensorPtr w, b;

    Linear() = default;
    Linear(int64_t in, int64_t out, RngStream& rng, bool bias = true);
    TensorPtr forward(Tape* tape, const TensorPtr& x) const { return linear(tape, x, w, b); }
    void collect(ParamMap& pm, const std::string& prefix);
};

// Affine chain with ReLU between layers and none after the last.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(const std::vector<int64_t>& dims, RngStream& rng);
    TensorPtr forward(Tape* tape, const TensorPtr& x) const;
    void collect(ParamMap& pm, const std::string& prefix);
};

// Pointwise-in, depthwise, batch norm, ReLU, pointwise-out, ReLU. The stack
// has receptive field k and applies a two-layer MLP to every length-k
// window.
struct ConvModule {
    Linear point_in;   // c_in -> c_mid, no bias
    TensorPtr w_dw;    // [c_mid, k]
    BatchNorm bn;
    Linear point_out;  // c_mid -> c_mid, no bias
    int k = 1;

    ConvModule(int64_t c_in, int64_t c_mid, int k, RngStream& rng);
    TensorPtr forward(Tape* tape, const TensorPtr& x, bool training);
    void collect(ParamMap& pm, const std::string& prefix);
    // Excluding the batch-norm affine pair.
    int64_t conv_param_count() const;
};

// sum_i coefs[i] * x_i as a scalar; composes arbitrary outputs into a loss.
TensorPtr weighted_sum(Tape* tape, const TensorPtr& x,
                       std::shared_ptr<const std::vector<double>> coefs);

// ---- losses ------------------------------------------------------------

TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits, const std::vector<int>& labels);
TensorPtr l1_loss(Tape* tape, const TensorPtr& pred, const std::vector<double>& target);

// ---- optimizer ---------------------------------------------------------

class Adam {
public:
    Adam(std::vector<TensorPtr> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    int64_t t() const { return t_; }

private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

// ---- initialization ----------------------------------------------------

void init_kaiming_uniform(Tensor& t, int64_t fan_in, RngStream& rng);

// ---- gradient checking -------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    int64_t n_coords = 0;
    std::string worst_param;
    bool passed(double tol) const { return max_rel_err < tol; }
};

// Compares tape gradients of `loss` against central finite differences over
// every coordinate of `inputs`. `loss` must deterministically rebuild the
// computation and return its scalar output tensor. h is the
// central-difference step.
GradCheckReport grad_check(const std::function<TensorPtr(Tape*)>& loss,
                           const std::vector<std::pair<std::string, TensorPtr>>& inputs,
                           double h = 1e-5);

}  // namespace crawl::nn
