#include "sgmil/diffnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgmil/errors.hpp"
#include "sgmil/kernels/kernels.hpp"

namespace sgmil::diffnet {

using kernels::Trans;

namespace {

void require_same_shape(const DiffValue& a, const DiffValue& b, const char* op) {
    if (a.shape() != b.shape())
        throw UsageError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

// Unfolds one [C, H, W] image into a [C*K*K, OH*OW] patch matrix.
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t oh, std::size_t ow, double* col) {
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = col + ((ch * k + ky) * k + kx) * oh * ow;
                for (std::size_t y = 0; y < oh; ++y) {
                    const double* src = img + (ch * h + y * stride + ky) * w + kx;
                    if (stride == 1) {
                        std::copy_n(src, ow, row + y * ow);
                    } else {
                        for (std::size_t x = 0; x < ow; ++x) row[y * ow + x] = src[x * stride];
                    }
                }
            }
}

void col2im(const double* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t oh, std::size_t ow, double* img) {
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = col + ((ch * k + ky) * k + kx) * oh * ow;
                for (std::size_t y = 0; y < oh; ++y) {
                    double* dst = img + (ch * h + y * stride + ky) * w + kx;
                    const double* src = row + y * ow;
                    if (stride == 1) {
                        for (std::size_t x = 0; x < ow; ++x) dst[x] += src[x];
                    } else {
                        for (std::size_t x = 0; x < ow; ++x) dst[x * stride] += src[x];
                    }
                }
            }
}

}  // namespace

DiffValue add(const DiffValue& a, const DiffValue& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return DiffValue::from_op(std::move(out), {a, b}, [](DiffValue::Node& self) {
        for (auto& p : self.parents)
            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }, "add");
}

DiffValue mul(const DiffValue& a, const DiffValue& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return DiffValue::from_op(std::move(out), {a, b}, [](DiffValue::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            pa.grad[i] += self.grad[i] * pb.value[i];
            pb.grad[i] += self.grad[i] * pa.value[i];
        }
    }, "mul");
}

DiffValue scale(const DiffValue& a, double factor) {
    Tensor out = a.value();
    for (double& v : out.values()) v *= factor;
    return DiffValue::from_op(std::move(out), {a}, [factor](DiffValue::Node& self) {
        auto& p = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += factor * self.grad[i];
    }, "scale");
}

DiffValue sum(const DiffValue& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return DiffValue::from_op(Tensor({1}, s), {a}, [](DiffValue::Node& self) {
        auto& p = *self.parents[0];
        for (double& g : p.grad.values()) g += self.grad[0];
    }, "sum");
}

DiffValue dense(const DiffValue& x, const DiffValue& weight, const DiffValue& bias) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    if (xv.rank() != 2 || wv.rank() != 2 || wv.dim(1) != xv.dim(1) || bias.value().size() != wv.dim(0))
        throw UsageError("dense: incompatible shapes x" + to_string(xv.shape()) + " w" +
                         to_string(wv.shape()) + " b" + to_string(bias.shape()));
    const std::size_t n = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
    Tensor y({n, out});
    for (std::size_t r = 0; r < n; ++r) std::copy_n(bias.value().data(), out, y.data() + r * out);
    kernels::gemm(Trans::no, Trans::yes, n, out, in, xv.data(), in, wv.data(), in, 1.0, y.data(), out);
    return DiffValue::from_op(std::move(y), {x, weight, bias}, [n, in, out](DiffValue::Node& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const double* gy = self.grad.data();
        // dW += gy^T x, dx += gy W, db += column sums of gy
        kernels::gemm(Trans::yes, Trans::no, out, in, n, gy, out, px.value.data(), in, 1.0,
                      pw.grad.data(), in);
        if (px.requires_grad)
            kernels::gemm(Trans::no, Trans::no, n, in, out, gy, out, pw.value.data(), in, 1.0,
                          px.grad.data(), in);
        for (std::size_t r = 0; r < n; ++r) kernels::axpy(out, 1.0, gy + r * out, pb.grad.data());
    }, "dense");
}

DiffValue conv2d(const DiffValue& x, const DiffValue& weight, const DiffValue& bias, std::size_t stride) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3) ||
        bias.value().size() != wv.dim(0) || stride == 0 || wv.dim(2) > xv.dim(2) || wv.dim(3) > xv.dim(3))
        throw UsageError("conv2d: incompatible shapes x" + to_string(xv.shape()) + " w" +
                         to_string(wv.shape()) + " b" + to_string(bias.shape()));
    const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const std::size_t o = wv.dim(0), k = wv.dim(2);
    const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
    const std::size_t patch = c * k * k, pix = oh * ow;

    Tensor y({n, o, oh, ow});
    std::vector<double> col(patch * pix);
    for (std::size_t i = 0; i < n; ++i) {
        im2col(xv.data() + i * c * h * w, c, h, w, k, stride, oh, ow, col.data());
        double* yi = y.data() + i * o * pix;
        for (std::size_t oc = 0; oc < o; ++oc) std::fill_n(yi + oc * pix, pix, bias.value()[oc]);
        kernels::gemm(Trans::no, Trans::no, o, pix, patch, wv.data(), patch, col.data(), pix, 1.0, yi, pix);
    }
    return DiffValue::from_op(std::move(y), {x, weight, bias},
        [=](DiffValue::Node& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            auto& pb = *self.parents[2];
            std::vector<double> col(patch * pix), dcol(patch * pix);
            for (std::size_t i = 0; i < n; ++i) {
                const double* gy = self.grad.data() + i * o * pix;
                im2col(px.value.data() + i * c * h * w, c, h, w, k, stride, oh, ow, col.data());
                kernels::gemm(Trans::no, Trans::yes, o, patch, pix, gy, pix, col.data(), pix, 1.0,
                              pw.grad.data(), patch);
                if (px.requires_grad) {
                    kernels::gemm(Trans::yes, Trans::no, patch, pix, o, pw.value.data(), patch, gy, pix, 0.0,
                                  dcol.data(), pix);
                    col2im(dcol.data(), c, h, w, k, stride, oh, ow, px.grad.data() + i * c * h * w);
                }
                for (std::size_t oc = 0; oc < o; ++oc) pb.grad[oc] += kernels::sum(pix, gy + oc * pix);
            }
        },
        "conv2d");
}

DiffValue maxpool2d(const DiffValue& x, std::size_t window, std::size_t stride) {
    const Tensor& xv = x.value();
    if (xv.rank() != 4 || window == 0 || stride == 0 || window > xv.dim(2) || window > xv.dim(3))
        throw UsageError("maxpool2d: incompatible input " + to_string(xv.shape()));
    const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
    Tensor y({n, c, oh, ow});
    std::vector<std::size_t> argmax(y.size());
    std::size_t out_i = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const double* src = xv.data() + plane * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox, ++out_i) {
                std::size_t best = (oy * stride) * w + ox * stride;
                for (std::size_t dy = 0; dy < window; ++dy)
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        const std::size_t idx = (oy * stride + dy) * w + ox * stride + dx;
                        if (src[idx] > src[best]) best = idx;
                    }
                argmax[out_i] = plane * h * w + best;
                y[out_i] = src[best];
            }
    }
    return DiffValue::from_op(std::move(y), {x}, [argmax = std::move(argmax)](DiffValue::Node& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < argmax.size(); ++i) px.grad[argmax[i]] += self.grad[i];
    }, "maxpool2d");
}

DiffValue relu(const DiffValue& x) {
    Tensor y = x.value();
    for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
    return DiffValue::from_op(std::move(y), {x}, [](DiffValue::Node& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (px.value[i] > 0.0) px.grad[i] += self.grad[i];
    }, "relu");
}

DiffValue sigmoid(const DiffValue& x) {
    Tensor y = x.value();
    for (double& v : y.values()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return DiffValue::from_op(std::move(y), {x}, [](DiffValue::Node& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double s = self.value[i];
            px.grad[i] += self.grad[i] * s * (1.0 - s);
        }
    }, "sigmoid");
}

DiffValue flatten(const DiffValue& x) {
    const Tensor& xv = x.value();
    if (xv.rank() < 1) throw UsageError("flatten: scalar input");
    const std::size_t n = xv.dim(0);
    const std::size_t rest = n == 0 ? 0 : xv.size() / n;
    Tensor y = xv;
    y.reshape({n, rest});
    return DiffValue::from_op(std::move(y), {x}, [](DiffValue::Node& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }, "flatten");
}

DiffValue attach_loss(const DiffValue& input, double value, Tensor grad_wrt_input) {
    if (grad_wrt_input.size() != input.value().size())
        throw UsageError("attach_loss: gradient has " + std::to_string(grad_wrt_input.size()) +
                         " entries, input has " + std::to_string(input.value().size()));
    return DiffValue::from_op(Tensor({1}, value), {input},
        [g = std::move(grad_wrt_input)](DiffValue::Node& self) {
            auto& p = *self.parents[0];
            const double up = self.grad[0];
            for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += up * g[i];
        },
        "loss");
}

}  // namespace sgmil::diffnet
