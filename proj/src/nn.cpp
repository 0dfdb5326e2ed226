#include "crawl/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "crawl/error.hpp"
#include "crawl/parallel.hpp"

namespace crawl::nn {

namespace {

std::atomic<bool> g_strict_finite{false};

void maybe_check(const TensorPtr& t, const char* where) {
    if (g_strict_finite.load(std::memory_order_relaxed)) check_finite(*t, where);
}

int64_t flat_rows(const Tensor& t, int64_t in) {
    int64_t n = t.numel();
    if (in <= 0 || n % in != 0)
        throw InvalidArgument("linear: input width does not divide tensor size");
    return n / in;
}

}  // namespace

TensorPtr make_tensor(std::vector<int64_t> shape) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->v.assign(t->numel(), 0.0);
    return t;
}

TensorPtr make_tensor(std::vector<int64_t> shape, std::vector<double> values) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->v = std::move(values);
    if (static_cast<int64_t>(t->v.size()) != t->numel())
        throw InvalidArgument("tensor value count does not match shape");
    return t;
}

void set_strict_finite(bool on) { g_strict_finite.store(on, std::memory_order_relaxed); }
bool strict_finite() { return g_strict_finite.load(std::memory_order_relaxed); }

void check_finite(const Tensor& t, const std::string& where) {
    for (double x : t.v) {
        if (!std::isfinite(x)) throw NumericalError("non-finite value in " + where);
    }
}

int64_t ParamMap::total_size() const {
    int64_t n = 0;
    for (const auto& [name, t] : items) n += t->numel();
    return n;
}

TensorPtr ParamMap::find(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return t;
    return nullptr;
}

// ---- conv1d -------------------------------------------------------------

TensorPtr conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& w) {
    if (x->shape.size() != 3 || w->shape.size() != 3)
        throw InvalidArgument("conv1d: x must be [m,L,c_in], w must be [c_in,c_out,k]");
    const int64_t m = x->dim(0), L = x->dim(1), ci = x->dim(2);
    const int64_t co = w->dim(1), k = w->dim(2);
    if (w->dim(0) != ci) throw InvalidArgument("conv1d: channel mismatch");
    if (L < k) throw InvalidArgument("conv1d: sequence shorter than kernel");
    const int64_t Lo = L - k + 1;

    // Repack weights as [k][ci][co] so the inner channel loop is contiguous.
    auto wp = std::make_shared<std::vector<double>>(k * ci * co);
    for (int64_t i = 0; i < ci; ++i)
        for (int64_t o = 0; o < co; ++o)
            for (int64_t j = 0; j < k; ++j)
                (*wp)[(j * ci + i) * co + o] = w->v[(i * co + o) * k + j];

    auto y = make_tensor({m, Lo, co});
    const double* xd = x->v.data();
    const double* wpd = wp->data();
    double* yd = y->v.data();
    parallel_chunks(m, num_threads() * 4, [&](int, int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
            const double* xb = xd + b * L * ci;
            double* yb = yd + b * Lo * co;
            for (int64_t t = 0; t < Lo; ++t) {
                double* yr = yb + t * co;
                for (int64_t j = 0; j < k; ++j) {
                    const double* xr = xb + (t + j) * ci;
                    const double* wj = wpd + j * ci * co;
                    for (int64_t i = 0; i < ci; ++i) {
                        const double xv = xr[i];
                        const double* wr = wj + i * co;
                        for (int64_t o = 0; o < co; ++o) yr[o] += xv * wr[o];
                    }
                }
            }
        }
    });
    maybe_check(y, "conv1d");

    if (tape) {
        x->ensure_grad();
        w->ensure_grad();
        y->ensure_grad();
        tape->record([x, w, y, wp, m, L, Lo, ci, co, k] {
            const double* dyd = y->g.data();
            const double* wpd2 = wp->data();
            double* dxd = x->g.data();
            // dx
            parallel_chunks(m, num_threads() * 4, [&](int, int64_t b0, int64_t b1) {
                for (int64_t b = b0; b < b1; ++b) {
                    const double* dyb = dyd + b * Lo * co;
                    double* dxb = dxd + b * L * ci;
                    for (int64_t t = 0; t < Lo; ++t) {
                        const double* dyr = dyb + t * co;
                        for (int64_t j = 0; j < k; ++j) {
                            double* dxr = dxb + (t + j) * ci;
                            const double* wj = wpd2 + j * ci * co;
                            for (int64_t i = 0; i < ci; ++i) {
                                const double* wr = wj + i * co;
                                double acc = 0.0;
                                for (int64_t o = 0; o < co; ++o) acc += dyr[o] * wr[o];
                                dxr[i] += acc;
                            }
                        }
                    }
                }
            });
            // dw, accumulated per fixed chunk then combined in chunk order
            const int64_t wsz = k * ci * co;
            std::vector<double> bufs(static_cast<size_t>(kReduceChunks) * wsz, 0.0);
            const double* xd2 = x->v.data();
            parallel_chunks(m, kReduceChunks, [&](int chunk, int64_t b0, int64_t b1) {
                double* buf = bufs.data() + static_cast<int64_t>(chunk) * wsz;
                for (int64_t b = b0; b < b1; ++b) {
                    const double* xb = xd2 + b * L * ci;
                    const double* dyb = dyd + b * Lo * co;
                    for (int64_t t = 0; t < Lo; ++t) {
                        const double* dyr = dyb + t * co;
                        for (int64_t j = 0; j < k; ++j) {
                            const double* xr = xb + (t + j) * ci;
                            double* bj = buf + j * ci * co;
                            for (int64_t i = 0; i < ci; ++i) {
                                const double xv = xr[i];
                                double* br = bj + i * co;
                                for (int64_t o = 0; o < co; ++o) br[o] += xv * dyr[o];
                            }
                        }
                    }
                }
            });
            double* dwd = w->g.data();
            for (int chunk = 0; chunk < kReduceChunks; ++chunk) {
                const double* buf = bufs.data() + static_cast<int64_t>(chunk) * wsz;
                for (int64_t j = 0; j < k; ++j)
                    for (int64_t i = 0; i < ci; ++i)
                        for (int64_t o = 0; o < co; ++o)
                            dwd[(i * co + o) * k + j] += buf[(j * ci + i) * co + o];
            }
        });
    }
    return y;
}

// ---- depthwise conv1d ---------------------------------------------------

TensorPtr depthwise_conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& w) {
    if (x->shape.size() != 3 || w->shape.size() != 2)
        throw InvalidArgument("depthwise_conv1d: x must be [m,L,c], w must be [c,k]");
    const int64_t m = x->dim(0), L = x->dim(1), c = x->dim(2), k = w->dim(1);
    if (w->dim(0) != c) throw InvalidArgument("depthwise_conv1d: channel mismatch");
    if (L < k) throw InvalidArgument("depthwise_conv1d: sequence shorter than kernel");
    const int64_t Lo = L - k + 1;

    // [k][c] layout for contiguous channel sweeps.
    auto wp = std::make_shared<std::vector<double>>(k * c);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t j = 0; j < k; ++j) (*wp)[j * c + ch] = w->v[ch * k + j];

    auto y = make_tensor({m, Lo, c});
    const double* xd = x->v.data();
    const double* wpd = wp->data();
    double* yd = y->v.data();
    parallel_chunks(m, num_threads() * 4, [&](int, int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
            const double* xb = xd + b * L * c;
            double* yb = yd + b * Lo * c;
            for (int64_t t = 0; t < Lo; ++t) {
                double* yr = yb + t * c;
                for (int64_t j = 0; j < k; ++j) {
                    const double* xr = xb + (t + j) * c;
                    const double* wj = wpd + j * c;
                    for (int64_t ch = 0; ch < c; ++ch) yr[ch] += xr[ch] * wj[ch];
                }
            }
        }
    });
    maybe_check(y, "depthwise_conv1d");

    if (tape) {
        x->ensure_grad();
        w->ensure_grad();
        y->ensure_grad();
        tape->record([x, w, y, wp, m, L, Lo, c, k] {
            const double* dyd = y->g.data();
            const double* wpd2 = wp->data();
            double* dxd = x->g.data();
            parallel_chunks(m, num_threads() * 4, [&](int, int64_t b0, int64_t b1) {
                for (int64_t b = b0; b < b1; ++b) {
                    const double* dyb = dyd + b * Lo * c;
                    double* dxb = dxd + b * L * c;
                    for (int64_t t = 0; t < Lo; ++t) {
                        const double* dyr = dyb + t * c;
                        for (int64_t j = 0; j < k; ++j) {
                            double* dxr = dxb + (t + j) * c;
                            const double* wj = wpd2 + j * c;
                            for (int64_t ch = 0; ch < c; ++ch) dxr[ch] += dyr[ch] * wj[ch];
                        }
                    }
                }
            });
            const int64_t wsz = k * c;
            std::vector<double> bufs(static_cast<size_t>(kReduceChunks) * wsz, 0.0);
            const double* xd2 = x->v.data();
            parallel_chunks(m, kReduceChunks, [&](int chunk, int64_t b0, int64_t b1) {
                double* buf = bufs.data() + static_cast<int64_t>(chunk) * wsz;
                for (int64_t b = b0; b < b1; ++b) {
                    const double* xb = xd2 + b * L * c;
                    const double* dyb = dyd + b * Lo * c;
                    for (int64_t t = 0; t < Lo; ++t) {
                        const double* dyr = dyb + t * c;
                        for (int64_t j = 0; j < k; ++j) {
                            const double* xr = xb + (t + j) * c;
                            double* bj = buf + j * c;
                            for (int64_t ch = 0; ch < c; ++ch) bj[ch] += xr[ch] * dyr[ch];
                        }
                    }
                }
            });
            double* dwd = w->g.data();
            for (int chunk = 0; chunk < kReduceChunks; ++chunk) {
                const double* buf = bufs.data() + static_cast<int64_t>(chunk) * wsz;
                for (int64_t j = 0; j < k; ++j)
                    for (int64_t ch = 0; ch < c; ++ch) dwd[ch * k + j] += buf[j * c + ch];
            }
        });
    }
    return y;
}

// ---- linear -------------------------------------------------------------

TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    if (w->shape.size() != 2) throw InvalidArgument("linear: w must be [in,out]");
    const int64_t in = w->dim(0), out = w->dim(1);
    const int64_t N = flat_rows(*x, in);
    if (b && b->numel() != out) throw InvalidArgument("linear: bias size mismatch");

    std::vector<int64_t> out_shape(x->shape.begin(), x->shape.end() - 1);
    out_shape.push_back(out);
    auto y = make_tensor(std::move(out_shape));

    const double* xd = x->v.data();
    const double* wd = w->v.data();
    const double* bd = b ? b->v.data() : nullptr;
    double* yd = y->v.data();
    // Four rows per sweep so each weight row load feeds four accumulators.
    parallel_chunks(N, num_threads() * 4, [&](int, int64_t n0, int64_t n1) {
        int64_t n = n0;
        for (; n + 4 <= n1; n += 4) {
            const double* x0 = xd + n * in;
            const double* x1 = x0 + in;
            const double* x2 = x1 + in;
            const double* x3 = x2 + in;
            double* y0 = yd + n * out;
            double* y1 = y0 + out;
            double* y2 = y1 + out;
            double* y3 = y2 + out;
            if (bd) {
                std::copy(bd, bd + out, y0);
                std::copy(bd, bd + out, y1);
                std::copy(bd, bd + out, y2);
                std::copy(bd, bd + out, y3);
            }
            for (int64_t i = 0; i < in; ++i) {
                const double v0 = x0[i], v1 = x1[i], v2 = x2[i], v3 = x3[i];
                const double* wr = wd + i * out;
                for (int64_t o = 0; o < out; ++o) {
                    const double wv = wr[o];
                    y0[o] += v0 * wv;
                    y1[o] += v1 * wv;
                    y2[o] += v2 * wv;
                    y3[o] += v3 * wv;
                }
            }
        }
        for (; n < n1; ++n) {
            const double* xr = xd + n * in;
            double* yr = yd + n * out;
            if (bd) std::copy(bd, bd + out, yr);
            for (int64_t i = 0; i < in; ++i) {
                const double xv = xr[i];
                const double* wr = wd + i * out;
                for (int64_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
            }
        }
    });
    maybe_check(y, "linear");

    if (tape) {
        x->ensure_grad();
        w->ensure_grad();
        if (b) b->ensure_grad();
        y->ensure_grad();
        tape->record([x, w, b, y, N, in, out] {
            const double* dyd = y->g.data();
            const double* wd2 = w->v.data();
            const double* xd2 = x->v.data();
            double* dxd = x->g.data();
            parallel_chunks(N, num_threads() * 4, [&](int, int64_t n0, int64_t n1) {
                int64_t n = n0;
                for (; n + 4 <= n1; n += 4) {
                    const double* d0 = dyd + n * out;
                    const double* d1 = d0 + out;
                    const double* d2 = d1 + out;
                    const double* d3 = d2 + out;
                    double* r0 = dxd + n * in;
                    double* r1 = r0 + in;
                    double* r2 = r1 + in;
                    double* r3 = r2 + in;
                    for (int64_t i = 0; i < in; ++i) {
                        const double* wr = wd2 + i * out;
                        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                        for (int64_t o = 0; o < out; ++o) {
                            const double wv = wr[o];
                            a0 += d0[o] * wv;
                            a1 += d1[o] * wv;
                            a2 += d2[o] * wv;
                            a3 += d3[o] * wv;
                        }
                        r0[i] += a0;
                        r1[i] += a1;
                        r2[i] += a2;
                        r3[i] += a3;
                    }
                }
                for (; n < n1; ++n) {
                    const double* dyr = dyd + n * out;
                    double* dxr = dxd + n * in;
                    for (int64_t i = 0; i < in; ++i) {
                        const double* wr = wd2 + i * out;
                        double acc = 0.0;
                        for (int64_t o = 0; o < out; ++o) acc += dyr[o] * wr[o];
                        dxr[i] += acc;
                    }
                }
            });
            const int64_t wsz = in * out;
            std::vector<double> bufs(static_cast<size_t>(kReduceChunks) * (wsz + out), 0.0);
            parallel_chunks(N, kReduceChunks, [&](int chunk, int64_t n0, int64_t n1) {
                double* buf = bufs.data() + static_cast<int64_t>(chunk) * (wsz + out);
                double* bbuf = buf + wsz;
                int64_t n = n0;
                for (; n + 4 <= n1; n += 4) {
                    const double* x0 = xd2 + n * in;
                    const double* x1 = x0 + in;
                    const double* x2 = x1 + in;
                    const double* x3 = x2 + in;
                    const double* d0 = dyd + n * out;
                    const double* d1 = d0 + out;
                    const double* d2 = d1 + out;
                    const double* d3 = d2 + out;
                    for (int64_t i = 0; i < in; ++i) {
                        const double v0 = x0[i], v1 = x1[i], v2 = x2[i], v3 = x3[i];
                        double* br = buf + i * out;
                        for (int64_t o = 0; o < out; ++o)
                            br[o] += v0 * d0[o] + v1 * d1[o] + v2 * d2[o] + v3 * d3[o];
                    }
                    for (int64_t o = 0; o < out; ++o)
                        bbuf[o] += d0[o] + d1[o] + d2[o] + d3[o];
                }
                for (; n < n1; ++n) {
                    const double* xr = xd2 + n * in;
                    const double* dyr = dyd + n * out;
                    for (int64_t i = 0; i < in; ++i) {
                        const double xv = xr[i];
                        double* br = buf + i * out;
                        for (int64_t o = 0; o < out; ++o) br[o] += xv * dyr[o];
                    }
                    for (int64_t o = 0; o < out; ++o) bbuf[o] += dyr[o];
                }
            });
            double* dwd = w->g.data();
            double* dbd = b ? b->g.data() : nullptr;
            for (int chunk = 0; chunk < kReduceChunks; ++chunk) {
                const double* buf = bufs.data() + static_cast<int64_t>(chunk) * (wsz + out);
                for (int64_t i = 0; i < wsz; ++i) dwd[i] += buf[i];
                if (dbd)
                    for (int64_t o = 0; o < out; ++o) dbd[o] += buf[wsz + o];
            }
        });
    }
    return y;
}

// ---- relu ---------------------------------------------------------------

TensorPtr relu(Tape* tape, const TensorPtr& x) {
    auto y = make_tensor(x->shape);
    const int64_t n = x->numel();
    const double* xd = x->v.data();
    double* yd = y->v.data();
    parallel_chunks(n, num_threads() * 4, [&](int, int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
    });
    if (tape) {
        x->ensure_grad();
        y->ensure_grad();
        tape->record([x, y, n] {
            const double* yd2 = y->v.data();
            const double* dyd = y->g.data();
            double* dxd = x->g.data();
            parallel_chunks(n, num_threads() * 4, [&](int, int64_t i0, int64_t i1) {
                for (int64_t i = i0; i < i1; ++i)
                    if (yd2[i] > 0.0) dxd[i] += dyd[i];
            });
        });
    }
    return y;
}

// ---- dropout ------------------------------------------------------------

TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, bool training, RngStream rng) {
    if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout rate must lie in [0,1)");
    if (!training || rate == 0.0) return x;
    const int64_t n = x->numel();
    auto mask = std::make_shared<std::vector<double>>(n);
    const double scale = 1.0 / (1.0 - rate);
    for (int64_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() < rate ? 0.0 : scale;

    auto y = make_tensor(x->shape);
    for (int64_t i = 0; i < n; ++i) y->v[i] = x->v[i] * (*mask)[i];
    if (tape) {
        x->ensure_grad();
        y->ensure_grad();
        tape->record([x, y, mask, n] {
            for (int64_t i = 0; i < n; ++i) x->g[i] += y->g[i] * (*mask)[i];
        });
    }
    return y;
}

// ---- add ----------------------------------------------------------------

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw InvalidArgument("add: shape mismatch");
    auto y = make_tensor(a->shape);
    const int64_t n = y->numel();
    for (int64_t i = 0; i < n; ++i) y->v[i] = a->v[i] + b->v[i];
    if (tape) {
        a->ensure_grad();
        b->ensure_grad();
        y->ensure_grad();
        tape->record([a, b, y, n] {
            for (int64_t i = 0; i < n; ++i) {
                a->g[i] += y->g[i];
                b->g[i] += y->g[i];
            }
        });
    }
    return y;
}

// ---- group reduce / broadcast --------------------------------------------

TensorPtr group_reduce(Tape* tape, const TensorPtr& x, std::shared_ptr<const RowGroups> groups,
                       bool mean) {
    const int64_t c = x->shape.back();
    const int64_t R = x->numel() / c;
    const int64_t G = static_cast<int64_t>(groups->size());
    for (const auto& grp : *groups)
        for (int64_t r : grp)
            if (r < 0 || r >= R) throw InvalidArgument("group_reduce: row index out of range");

    auto y = make_tensor({G, c});
    const double* xd = x->v.data();
    double* yd = y->v.data();
    parallel_for(G, [&](int64_t gi) {
        const auto& grp = (*groups)[gi];
        double* yr = yd + gi * c;
        for (int64_t r : grp) {
            const double* xr = xd + r * c;
            for (int64_t ch = 0; ch < c; ++ch) yr[ch] += xr[ch];
        }
        if (mean && !grp.empty()) {
            const double inv = 1.0 / static_cast<double>(grp.size());
            for (int64_t ch = 0; ch < c; ++ch) yr[ch] *= inv;
        }
    });
    maybe_check(y, "group_reduce");

    if (tape) {
        x->ensure_grad();
        y->ensure_grad();
        // Disjoint groups: each input row feeds one output row, so the
        // parallel scatter below never races.
        tape->record([x, y, groups, mean, c, G] {
            const double* dyd = y->g.data();
            double* dxd = x->g.data();
            parallel_for(G, [&](int64_t gi) {
                const auto& grp = (*groups)[gi];
                if (grp.empty()) return;
                const double w = mean ? 1.0 / static_cast<double>(grp.size()) : 1.0;
                const double* dyr = dyd + gi * c;
                for (int64_t r : grp) {
                    double* dxr = dxd + r * c;
                    for (int64_t ch = 0; ch < c; ++ch) dxr[ch] += w * dyr[ch];
                }
            });
        });
    }
    return y;
}

TensorPtr group_broadcast_add(Tape* tape, const TensorPtr& x, const TensorPtr& addend,
                              const std::vector<int>& group_of_row) {
    const int64_t c = x->shape.back();
    const int64_t N = x->numel() / c;
    const int64_t G = addend->dim(0);
    if (addend->shape.size() != 2 || addend->dim(1) != c)
        throw InvalidArgument("group_broadcast_add: addend must be [G,c]");
    if (static_cast<int64_t>(group_of_row.size()) != N)
        throw InvalidArgument("group_broadcast_add: row map size mismatch");

    auto y = make_tensor(x->shape);
    const double* xd = x->v.data();
    const double* ad = addend->v.data();
    double* yd = y->v.data();
    for (int64_t r = 0; r < N; ++r) {
        const int g = group_of_row[r];
        if (g < 0 || g >= G) throw InvalidArgument("group_broadcast_add: group out of range");
        const double* ar = ad + static_cast<int64_t>(g) * c;
        const double* xr = xd + r * c;
        double* yr = yd + r * c;
        for (int64_t ch = 0; ch < c; ++ch) yr[ch] = xr[ch] + ar[ch];
    }
    maybe_check(y, "group_broadcast_add");

    if (tape) {
        x->ensure_grad();
        addend->ensure_grad();
        y->ensure_grad();
        auto rows = std::make_shared<std::vector<int>>(group_of_row);
        tape->record([x, addend, y, rows, N, c] {
            const double* dyd = y->g.data();
            double* dxd = x->g.data();
            double* dad = addend->g.data();
            for (int64_t r = 0; r < N; ++r) {
                const double* dyr = dyd + r * c;
                double* dxr = dxd + r * c;
                double* dar = dad + static_cast<int64_t>((*rows)[r]) * c;
                for (int64_t ch = 0; ch < c; ++ch) {
                    dxr[ch] += dyr[ch];
                    dar[ch] += dyr[ch];
                }
            }
        });
    }
    return y;
}

// ---- batch norm -----------------------------------------------------------

BatchNorm::BatchNorm(int64_t channels) {
    gamma = make_tensor({channels}, std::vector<double>(channels, 1.0));
    beta = make_tensor({channels});
    running_mean.assign(channels, 0.0);
    running_var.assign(channels, 1.0);
}

void BatchNorm::collect(ParamMap& pm, const std::string& prefix) {
    pm.add(prefix + ".gamma", gamma);
    pm.add(prefix + ".beta", beta);
}

TensorPtr BatchNorm::forward(Tape* tape, const TensorPtr& x, bool training) {
    const int64_t c = channels();
    if (x->shape.empty() || x->shape.back() != c)
        throw InvalidArgument("batch_norm: trailing axis must match channel count");
    const int64_t N = x->numel() / c;
    auto y = make_tensor(x->shape);

    if (!training) {
        std::vector<double> scale(c), shift(c);
        for (int64_t ch = 0; ch < c; ++ch) {
            scale[ch] = gamma->v[ch] / std::sqrt(running_var[ch] + eps);
            shift[ch] = beta->v[ch] - running_mean[ch] * scale[ch];
        }
        const double* xd = x->v.data();
        double* yd = y->v.data();
        parallel_chunks(N, num_threads() * 4, [&](int, int64_t n0, int64_t n1) {
            for (int64_t n = n0; n < n1; ++n)
                for (int64_t ch = 0; ch < c; ++ch)
                    yd[n * c + ch] = xd[n * c + ch] * scale[ch] + shift[ch];
        });
        maybe_check(y, "batch_norm");
        if (tape) {
            x->ensure_grad();
            gamma->ensure_grad();
            beta->ensure_grad();
            y->ensure_grad();
            auto sc = std::make_shared<std::vector<double>>(scale);
            auto inv = std::make_shared<std::vector<double>>(c);
            auto rm = std::make_shared<std::vector<double>>(running_mean);
            for (int64_t ch = 0; ch < c; ++ch)
                (*inv)[ch] = 1.0 / std::sqrt(running_var[ch] + eps);
            auto gamma_t = gamma;
            auto beta_t = beta;
            tape->record([x, y, sc, inv, rm, gamma_t, beta_t, N, c] {
                for (int64_t n = 0; n < N; ++n) {
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const double dy = y->g[n * c + ch];
                        x->g[n * c + ch] += dy * (*sc)[ch];
                        gamma_t->g[ch] += dy * (x->v[n * c + ch] - (*rm)[ch]) * (*inv)[ch];
                        beta_t->g[ch] += dy;
                    }
                }
            });
        }
        return y;
    }

    if (N < 2) throw InvalidArgument("batch_norm: training needs at least two rows");

    // Two-pass moments with deterministic chunked reduction.
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    const double* xd = x->v.data();
    {
        std::vector<double> bufs(static_cast<size_t>(kReduceChunks) * c, 0.0);
        parallel_chunks(N, kReduceChunks, [&](int chunk, int64_t n0, int64_t n1) {
            double* buf = bufs.data() + static_cast<int64_t>(chunk) * c;
            for (int64_t n = n0; n < n1; ++n) {
                const double* xr = xd + n * c;
                for (int64_t ch = 0; ch < c; ++ch) buf[ch] += xr[ch];
            }
        });
        for (int chunk = 0; chunk < kReduceChunks; ++chunk)
            for (int64_t ch = 0; ch < c; ++ch) mean[ch] += bufs[chunk * c + ch];
        for (int64_t ch = 0; ch < c; ++ch) mean[ch] /= static_cast<double>(N);

        std::fill(bufs.begin(), bufs.end(), 0.0);
        parallel_chunks(N, kReduceChunks, [&](int chunk, int64_t n0, int64_t n1) {
            double* buf = bufs.data() + static_cast<int64_t>(chunk) * c;
            for (int64_t n = n0; n < n1; ++n) {
                const double* xr = xd + n * c;
                for (int64_t ch = 0; ch < c; ++ch) {
                    const double d = xr[ch] - mean[ch];
                    buf[ch] += d * d;
                }
            }
        });
        for (int chunk = 0; chunk < kReduceChunks; ++chunk)
            for (int64_t ch = 0; ch < c; ++ch) var[ch] += bufs[chunk * c + ch];
        for (int64_t ch = 0; ch < c; ++ch) var[ch] /= static_cast<double>(N);
    }

    auto inv_std = std::make_shared<std::vector<double>>(c);
    for (int64_t ch = 0; ch < c; ++ch) (*inv_std)[ch] = 1.0 / std::sqrt(var[ch] + eps);

    auto xhat = std::make_shared<std::vector<double>>(x->numel());
    double* xh = xhat->data();
    double* yd = y->v.data();
    const double* gm = gamma->v.data();
    const double* bt = beta->v.data();
    parallel_chunks(N, num_threads() * 4, [&](int, int64_t n0, int64_t n1) {
        for (int64_t n = n0; n < n1; ++n) {
            const double* xr = xd + n * c;
            double* xhr = xh + n * c;
            double* yr = yd + n * c;
            for (int64_t ch = 0; ch < c; ++ch) {
                xhr[ch] = (xr[ch] - mean[ch]) * (*inv_std)[ch];
                yr[ch] = gm[ch] * xhr[ch] + bt[ch];
            }
        }
    });
    maybe_check(y, "batch_norm");

    // Normalization uses the biased variance; the running estimate keeps the
    // unbiased one.
    const double unbias = static_cast<double>(N) / static_cast<double>(N - 1);
    for (int64_t ch = 0; ch < c; ++ch) {
        running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mean[ch];
        running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var[ch] * unbias;
    }

    if (tape) {
        x->ensure_grad();
        gamma->ensure_grad();
        beta->ensure_grad();
        y->ensure_grad();
        auto gamma_t = gamma;
        auto beta_t = beta;
        tape->record([x, y, gamma_t, beta_t, xhat, inv_std, N, c] {
            const double* dyd = y->g.data();
            const double* xh2 = xhat->data();
            std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
            {
                std::vector<double> bufs(static_cast<size_t>(kReduceChunks) * 2 * c, 0.0);
                parallel_chunks(N, kReduceChunks, [&](int chunk, int64_t n0, int64_t n1) {
                    double* b1 = bufs.data() + static_cast<int64_t>(chunk) * 2 * c;
                    double* b2 = b1 + c;
                    for (int64_t n = n0; n < n1; ++n) {
                        const double* dyr = dyd + n * c;
                        const double* xhr = xh2 + n * c;
                        for (int64_t ch = 0; ch < c; ++ch) {
                            b1[ch] += dyr[ch];
                            b2[ch] += dyr[ch] * xhr[ch];
                        }
                    }
                });
                for (int chunk = 0; chunk < kReduceChunks; ++chunk) {
                    const double* b1 = bufs.data() + static_cast<int64_t>(chunk) * 2 * c;
                    for (int64_t ch = 0; ch < c; ++ch) {
                        sum_dy[ch] += b1[ch];
                        sum_dy_xhat[ch] += b1[c + ch];
                    }
                }
            }
            for (int64_t ch = 0; ch < c; ++ch) {
                beta_t->g[ch] += sum_dy[ch];
                gamma_t->g[ch] += sum_dy_xhat[ch];
            }
            const double invN = 1.0 / static_cast<double>(N);
            double* dxd = x->g.data();
            const double* gm2 = gamma_t->v.data();
            parallel_chunks(N, num_threads() * 4, [&](int, int64_t n0, int64_t n1) {
                for (int64_t n = n0; n < n1; ++n) {
                    const double* dyr = dyd + n * c;
                    const double* xhr = xh2 + n * c;
                    double* dxr = dxd + n * c;
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const double t = dyr[ch] - sum_dy[ch] * invN - xhr[ch] * sum_dy_xhat[ch] * invN;
                        dxr[ch] += gm2[ch] * (*inv_std)[ch] * t;
                    }
                }
            });
        });
    }
    return y;
}

// ---- modules --------------------------------------------------------------

Linear::Linear(int64_t in, int64_t out, RngStream& rng, bool bias) {
    w = make_tensor({in, out});
    init_kaiming_uniform(*w, in, rng);
    if (bias) b = make_tensor({out});
}

void Linear::collect(ParamMap& pm, const std::string& prefix) {
    pm.add(prefix + ".w", w);
    if (b) pm.add(prefix + ".b", b);
}

Mlp::Mlp(const std::vector<int64_t>& dims, RngStream& rng) {
    if (dims.size() < 2) throw InvalidArgument("mlp needs at least two dims");
    for (size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i], dims[i + 1], rng);
}

TensorPtr Mlp::forward(Tape* tape, const TensorPtr& x) const {
    TensorPtr h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(tape, h);
        if (i + 1 < layers.size()) h = relu(tape, h);
    }
    return h;
}

void Mlp::collect(ParamMap& pm, const std::string& prefix) {
    for (size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(pm, prefix + ".l" + std::to_string(i));
}

ConvModule::ConvModule(int64_t c_in, int64_t c_mid, int k_, RngStream& rng)
    : point_in(c_in, c_mid, rng, false),
      bn(c_mid),
      point_out(c_mid, c_mid, rng, false),
      k(k_) {
    w_dw = make_tensor({c_mid, k});
    init_kaiming_uniform(*w_dw, k, rng);
}

TensorPtr ConvModule::forward(Tape* tape, const TensorPtr& x, bool training) {
    TensorPtr z = point_in.forward(tape, x);
    z = depthwise_conv1d(tape, z, w_dw);
    z = bn.forward(tape, z, training);
    z = relu(tape, z);
    z = point_out.forward(tape, z);
    return relu(tape, z);
}

void ConvModule::collect(ParamMap& pm, const std::string& prefix) {
    point_in.collect(pm, prefix + ".pin");
    pm.add(prefix + ".dw", w_dw);
    bn.collect(pm, prefix + ".bn");
    point_out.collect(pm, prefix + ".pout");
}

int64_t ConvModule::conv_param_count() const {
    return point_in.w->numel() + w_dw->numel() + point_out.w->numel();
}

TensorPtr weighted_sum(Tape* tape, const TensorPtr& x,
                       std::shared_ptr<const std::vector<double>> coefs) {
    const int64_t n = x->numel();
    if (static_cast<int64_t>(coefs->size()) != n)
        throw InvalidArgument("weighted_sum: coefficient count mismatch");
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += (*coefs)[i] * x->v[i];
    auto y = make_tensor({1}, {acc});
    if (tape) {
        x->ensure_grad();
        y->ensure_grad();
        tape->record([x, y, coefs, n] {
            const double g = y->g[0];
            for (int64_t i = 0; i < n; ++i) x->g[i] += g * (*coefs)[i];
        });
    }
    return y;
}

// ---- losses ----------------------------------------------------------------

TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits, const std::vector<int>& labels) {
    if (logits->shape.size() != 2) throw InvalidArgument("cross_entropy: logits must be [N,C]");
    const int64_t N = logits->dim(0), C = logits->dim(1);
    if (static_cast<int64_t>(labels.size()) != N)
        throw InvalidArgument("cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= C) throw InvalidArgument("cross_entropy: label out of range");

    auto probs = std::make_shared<std::vector<double>>(logits->v.size());
    double total = 0.0;
    for (int64_t n = 0; n < N; ++n) {
        const double* lr = logits->v.data() + n * C;
        double* pr = probs->data() + n * C;
        double mx = lr[0];
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, lr[c]);
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            pr[c] = std::exp(lr[c] - mx);
            z += pr[c];
        }
        for (int64_t c = 0; c < C; ++c) pr[c] /= z;
        total += std::log(z) + mx - lr[labels[n]];
    }
    auto loss = make_tensor({1}, {total / static_cast<double>(N)});
    check_finite(*loss, "cross_entropy");

    if (tape) {
        logits->ensure_grad();
        loss->ensure_grad();
        auto lab = std::make_shared<std::vector<int>>(labels);
        tape->record([logits, loss, probs, lab, N, C] {
            const double gout = loss->g[0] / static_cast<double>(N);
            for (int64_t n = 0; n < N; ++n) {
                const double* pr = probs->data() + n * C;
                double* gr = logits->g.data() + n * C;
                for (int64_t c = 0; c < C; ++c)
                    gr[c] += gout * (pr[c] - (c == (*lab)[n] ? 1.0 : 0.0));
            }
        });
    }
    return loss;
}

TensorPtr l1_loss(Tape* tape, const TensorPtr& pred, const std::vector<double>& target) {
    const int64_t N = pred->numel();
    if (static_cast<int64_t>(target.size()) != N)
        throw InvalidArgument("l1_loss: target count mismatch");
    double total = 0.0;
    for (int64_t i = 0; i < N; ++i) total += std::abs(pred->v[i] - target[i]);
    auto loss = make_tensor({1}, {total / static_cast<double>(N)});
    check_finite(*loss, "l1_loss");

    if (tape) {
        pred->ensure_grad();
        loss->ensure_grad();
        auto tgt = std::make_shared<std::vector<double>>(target);
        tape->record([pred, loss, tgt, N] {
            const double gout = loss->g[0] / static_cast<double>(N);
            for (int64_t i = 0; i < N; ++i) {
                const double d = pred->v[i] - (*tgt)[i];
                pred->g[i] += gout * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
        });
    }
    return loss;
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(std::vector<TensorPtr> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        p->ensure_grad();
        m_.emplace_back(p->numel(), 0.0);
        v_.emplace_back(p->numel(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = *params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        const int64_t n = p.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double g = p.g[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

// ---- init -------------------------------------------------------------------

void init_kaiming_uniform(Tensor& t, int64_t fan_in, RngStream& rng) {
    if (fan_in <= 0) throw InvalidArgument("fan_in must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& x : t.v) x = rng.uniform_symmetric(bound);
}

// ---- gradient checking --------------------------------------------------------

GradCheckReport grad_check(const std::function<TensorPtr(Tape*)>& loss,
                           const std::vector<std::pair<std::string, TensorPtr>>& inputs,
                           double h) {
    GradCheckReport report;
    // Analytic pass.
    for (const auto& [name, t] : inputs) {
        t->ensure_grad();
        t->zero_grad();
    }
    {
        Tape tape;
        TensorPtr out = loss(&tape);
        if (out->numel() != 1) throw InvalidArgument("grad_check: loss must be scalar");
        out->ensure_grad();
        out->g[0] = 1.0;
        tape.backward();
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& [name, t] : inputs) analytic.push_back(t->g);

    for (size_t pi = 0; pi < inputs.size(); ++pi) {
        Tensor& t = *inputs[pi].second;
        for (int64_t i = 0; i < t.numel(); ++i) {
            const double orig = t.v[i];
            t.v[i] = orig + h;
            const double lp = loss(nullptr)->v[0];
            t.v[i] = orig - h;
            const double lm = loss(nullptr)->v[0];
            t.v[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
            ++report.n_coords;
            report.max_abs_err = std::max(report.max_abs_err, abs_err);
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = inputs[pi].first;
            }
        }
    }
    return report;
}

}  // namespace crawl::nn
