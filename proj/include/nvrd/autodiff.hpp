#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "nvrd/errors.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd {

// Define-by-run reverse-mode tape over Tensor values. A Graph is built per
// evaluation, backward() fills gradients in reverse creation order. Leaves
// flagged needs_grad receive gradients; everything reachable from such a
// leaf propagates. All math is double precision.
class Graph {
public:
    using Ref = int;

    Ref leaf(Tensor v, bool needs_grad = false) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Ref>(nodes_.size() - 1);
    }

    Ref constant_scalar(double v) { return leaf(Tensor({1}, {v})); }

    const Tensor& value(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }
    const Tensor& grad(Ref r) const { return nodes_[static_cast<std::size_t>(r)].grad; }
    bool needs_grad(Ref r) const { return nodes_[static_cast<std::size_t>(r)].needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    void backward(Ref loss) {
        auto& top = node(loss);
        require_shape(top.value.numel() == 1, "backward needs a scalar loss");
        for (auto& n : nodes_) {
            if (n.needs_grad) {
                n.grad = Tensor::zeros(n.value.shape());
            }
        }
        top.grad = Tensor({1}, {1.0});
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.needs_grad && n.back && n.grad.numel() > 0) n.back(*this, static_cast<Ref>(i));
        }
    }

    // ---- elementwise -----------------------------------------------------

    Ref add(Ref a, Ref b) {
        check_same(a, b, "add");
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
        return make(std::move(out), {a, b}, [](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            g.accum(g.node(self).parents[0], go);
            g.accum(g.node(self).parents[1], go);
        });
    }

    Ref sub(Ref a, Ref b) {
        check_same(a, b, "sub");
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
        return make(std::move(out), {a, b}, [](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            g.accum(g.node(self).parents[0], go);
            Tensor neg = go;
            for (std::size_t i = 0; i < neg.numel(); ++i) neg[i] = -neg[i];
            g.accum(g.node(self).parents[1], neg);
        });
    }

    Ref mul(Ref a, Ref b) {
        check_same(a, b, "mul");
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
        return make(std::move(out), {a, b}, [](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref a = g.node(self).parents[0], b = g.node(self).parents[1];
            if (g.wants(a)) {
                Tensor da = go;
                const Tensor& vb2 = g.value(b);
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= vb2[i];
                g.accum(a, da);
            }
            if (g.wants(b)) {
                Tensor db = go;
                const Tensor& va = g.value(a);
                for (std::size_t i = 0; i < db.numel(); ++i) db[i] *= va[i];
                g.accum(b, db);
            }
        });
    }

    Ref div(Ref a, Ref b) {
        check_same(a, b, "div");
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= vb[i];
        return make(std::move(out), {a, b}, [](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref a = g.node(self).parents[0], b = g.node(self).parents[1];
            const Tensor& va = g.value(a);
            const Tensor& vb2 = g.value(b);
            if (g.wants(a)) {
                Tensor da = go;
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] /= vb2[i];
                g.accum(a, da);
            }
            if (g.wants(b)) {
                Tensor db = go;
                for (std::size_t i = 0; i < db.numel(); ++i) db[i] *= -va[i] / (vb2[i] * vb2[i]);
                g.accum(b, db);
            }
        });
    }

    Ref scale(Ref a, double c) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
        return make(std::move(out), {a}, [c](Graph& g, Ref self) {
            Tensor da = g.node(self).grad;
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= c;
            g.accum(g.node(self).parents[0], da);
        });
    }

    Ref add_scalar(Ref a, double c) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c;
        return make(std::move(out), {a}, [](Graph& g, Ref self) {
            g.accum(g.node(self).parents[0], g.node(self).grad);
        });
    }

    Ref square(Ref a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
        return make(std::move(out), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad;
            const Tensor& va = g.value(a2);
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= 2.0 * va[i];
            g.accum(a2, da);
        });
    }

    Ref relu(Ref a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
        return make(std::move(out), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad;
            const Tensor& va = g.value(a2);
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] = va[i] > 0.0 ? da[i] : 0.0;
            g.accum(a2, da);
        });
    }

    Ref tanh_act(Ref a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
        return make(std::move(out), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad;
            const Tensor& vo = g.node(self).value;
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= 1.0 - vo[i] * vo[i];
            g.accum(a2, da);
        });
    }

    Ref sigmoid(Ref a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
        return make(std::move(out), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad;
            const Tensor& vo = g.node(self).value;
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= vo[i] * (1.0 - vo[i]);
            g.accum(a2, da);
        });
    }

    // Smooth absolute value sqrt(x^2 + eps^2); keeps finite-difference checks
    // well behaved near zero.
    Ref smooth_abs(Ref a, double eps = 1e-6) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(out[i] * out[i] + eps * eps);
        return make(std::move(out), {a}, [eps](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad;
            const Tensor& va = g.value(a2);
            for (std::size_t i = 0; i < da.numel(); ++i) {
                da[i] *= va[i] / std::sqrt(va[i] * va[i] + eps * eps);
            }
            g.accum(a2, da);
        });
    }

    // Elementwise log(x + eps). The shift keeps non-negative inputs (relu
    // activations, energies) differentiable at zero; inputs must not go
    // below -eps.
    Ref log_shift(Ref a, double eps = 1e-6) {
        require(eps > 0.0, "log_shift needs a positive shift");
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            require(out[i] + eps > 0.0, "log_shift input fell below the shift");
            out[i] = std::log(out[i] + eps);
        }
        return make(std::move(out), {a}, [eps](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad;
            const Tensor& va = g.value(a2);
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] /= va[i] + eps;
            g.accum(a2, da);
        });
    }

    // ---- reductions ------------------------------------------------------

    Ref sum(Ref a) {
        double s = 0.0;
        const Tensor& va = value(a);
        for (std::size_t i = 0; i < va.numel(); ++i) s += va[i];
        return make(Tensor({1}, {s}), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            double go = g.node(self).grad[0];
            Tensor da = Tensor::full(g.value(a2).shape(), go);
            g.accum(a2, da);
        });
    }

    Ref mean(Ref a) { return scale(sum(a), 1.0 / static_cast<double>(value(a).numel())); }

    Ref dot(Ref a, Ref b) {
        check_same(a, b, "dot");
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        double s = 0.0;
        for (std::size_t i = 0; i < va.numel(); ++i) s += va[i] * vb[i];
        return make(Tensor({1}, {s}), {a, b}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0], b2 = g.node(self).parents[1];
            double go = g.node(self).grad[0];
            if (g.wants(a2)) {
                Tensor da = g.value(b2);
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= go;
                g.accum(a2, da);
            }
            if (g.wants(b2)) {
                Tensor db = g.value(a2);
                for (std::size_t i = 0; i < db.numel(); ++i) db[i] *= go;
                g.accum(b2, db);
            }
        });
    }

    // Euclidean norm as a scalar. Gradient is x / norm; at an exactly zero
    // input the gradient is defined as zero.
    Ref l2_norm(Ref a) {
        const Tensor& va = value(a);
        double ss = 0.0;
        for (std::size_t i = 0; i < va.numel(); ++i) ss += va[i] * va[i];
        double n = std::sqrt(ss);
        return make(Tensor({1}, {n}), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            double go = g.node(self).grad[0];
            double n2 = g.node(self).value[0];
            Tensor da = g.value(a2);
            if (n2 > 1e-300) {
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= go / n2;
            } else {
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] = 0.0;
            }
            g.accum(a2, da);
        });
    }

    Ref l1_norm(Ref a, double eps = 1e-9) { return sum(smooth_abs(a, eps)); }

    // Mean binary cross entropy between sigmoid(logits) and a constant target
    // in [0,1], fused for stability: softplus(z) - t*z with softplus computed
    // as max(z,0) + log1p(exp(-|z|)). Gradient per element: sigmoid(z) - t.
    Ref logistic_loss(Ref logits, double target) {
        require(target >= 0.0 && target <= 1.0, "logistic_loss target must be in [0,1]");
        const Tensor& vz = value(logits);
        double n = static_cast<double>(vz.numel());
        double acc = 0.0;
        for (std::size_t i = 0; i < vz.numel(); ++i) {
            double z = vz[i];
            acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - target * z;
        }
        return make(Tensor({1}, {acc / n}), {logits}, [target, n](Graph& g, Ref self) {
            Ref z2 = g.node(self).parents[0];
            double go = g.node(self).grad[0];
            Tensor dz = g.value(z2);
            for (std::size_t i = 0; i < dz.numel(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-dz[i]));
                dz[i] = go * (s - target) / n;
            }
            g.accum(z2, dz);
        });
    }

    // ---- shape ops --------------------------------------------------------

    Ref reshape(Ref a, std::vector<std::size_t> shape) {
        Tensor out = value(a).reshaped(std::move(shape));
        return make(std::move(out), {a}, [](Graph& g, Ref self) {
            Ref a2 = g.node(self).parents[0];
            Tensor da = g.node(self).grad.reshaped(g.value(a2).shape());
            g.accum(a2, da);
        });
    }

    Ref concat_last(Ref a, Ref b) {
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        require_shape(va.rank() == vb.rank() && va.rank() >= 1, "concat_last rank mismatch");
        for (std::size_t i = 0; i + 1 < va.rank(); ++i) {
            require_shape(va.dim(i) == vb.dim(i), "concat_last leading dims differ");
        }
        std::size_t ca = va.dim(va.rank() - 1), cb = vb.dim(vb.rank() - 1);
        std::vector<std::size_t> shape = va.shape();
        shape.back() = ca + cb;
        Tensor out(shape);
        std::size_t rows = va.numel() / ca;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < ca; ++i) out[r * (ca + cb) + i] = va[r * ca + i];
            for (std::size_t i = 0; i < cb; ++i) out[r * (ca + cb) + ca + i] = vb[r * cb + i];
        }
        return make(std::move(out), {a, b}, [ca, cb, rows](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref a2 = g.node(self).parents[0], b2 = g.node(self).parents[1];
            if (g.wants(a2)) {
                Tensor da(g.value(a2).shape());
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < ca; ++i) da[r * ca + i] = go[r * (ca + cb) + i];
                g.accum(a2, da);
            }
            if (g.wants(b2)) {
                Tensor db(g.value(b2).shape());
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < cb; ++i) db[r * cb + i] = go[r * (ca + cb) + ca + i];
                g.accum(b2, db);
            }
        });
    }

    // (T,H,W,C) -> (H,W,C) at fixed t.
    Ref slice_frame(Ref x, std::size_t t) {
        const Tensor& v = value(x);
        require_shape(v.rank() == 4 && t < v.dim(0), "slice_frame needs (T,H,W,C) and t < T");
        std::size_t stride = v.numel() / v.dim(0);
        Tensor out({v.dim(1), v.dim(2), v.dim(3)});
        for (std::size_t i = 0; i < stride; ++i) out[i] = v[t * stride + i];
        return make(std::move(out), {x}, [t, stride](Graph& g, Ref self) {
            Ref x2 = g.node(self).parents[0];
            const Tensor& go = g.node(self).grad;
            Tensor dx = Tensor::zeros(g.value(x2).shape());
            for (std::size_t i = 0; i < stride; ++i) dx[t * stride + i] = go[i];
            g.accum(x2, dx);
        });
    }

    // n frames (H,W,C) -> clip (n,H,W,C).
    Ref stack_frames(const std::vector<Ref>& frames) {
        require(!frames.empty(), "stack_frames needs at least one frame");
        const Tensor& f0 = value(frames[0]);
        require_shape(f0.rank() == 3, "stack_frames expects (H,W,C) frames");
        std::size_t stride = f0.numel();
        Tensor out({frames.size(), f0.dim(0), f0.dim(1), f0.dim(2)});
        for (std::size_t t = 0; t < frames.size(); ++t) {
            const Tensor& ft = value(frames[t]);
            require_shape(ft.same_shape(f0), "stack_frames shape mismatch");
            for (std::size_t i = 0; i < stride; ++i) out[t * stride + i] = ft[i];
        }
        return make(std::move(out), frames, [stride](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            const auto& ps = g.node(self).parents;
            for (std::size_t t = 0; t < ps.size(); ++t) {
                if (!g.wants(ps[t])) continue;
                Tensor df(g.value(ps[t]).shape());
                for (std::size_t i = 0; i < stride; ++i) df[i] = go[t * stride + i];
                g.accum(ps[t], df);
            }
        });
    }

    // ---- dense and conv ---------------------------------------------------

    // x (In), W (Out,In), b (Out) -> (Out). Pass b = -1 for no bias.
    Ref dense(Ref x, Ref W, Ref b) {
        const Tensor& vx = value(x);
        const Tensor& vw = value(W);
        require_shape(vw.rank() == 2 && vx.numel() == vw.dim(1), "dense shape mismatch");
        std::size_t out_n = vw.dim(0), in_n = vw.dim(1);
        Tensor out({out_n});
        for (std::size_t o = 0; o < out_n; ++o) {
            double s = 0.0;
            const double* wrow = vw.data() + o * in_n;
            for (std::size_t i = 0; i < in_n; ++i) s += wrow[i] * vx[i];
            out[o] = s;
        }
        if (b >= 0) {
            const Tensor& vb = value(b);
            require_shape(vb.numel() == out_n, "dense bias shape mismatch");
            for (std::size_t o = 0; o < out_n; ++o) out[o] += vb[o];
        }
        std::vector<Ref> parents = b >= 0 ? std::vector<Ref>{x, W, b} : std::vector<Ref>{x, W};
        return make(std::move(out), parents, [out_n, in_n](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            const auto& ps = g.node(self).parents;
            Ref x2 = ps[0], w2 = ps[1];
            const Tensor& vx2 = g.value(x2);
            const Tensor& vw2 = g.value(w2);
            if (g.wants(x2)) {
                Tensor dx(vx2.shape());
                for (std::size_t o = 0; o < out_n; ++o) {
                    const double* wrow = vw2.data() + o * in_n;
                    double go_o = go[o];
                    for (std::size_t i = 0; i < in_n; ++i) dx[i] += go_o * wrow[i];
                }
                g.accum(x2, dx);
            }
            if (g.wants(w2)) {
                Tensor dw(vw2.shape());
                for (std::size_t o = 0; o < out_n; ++o) {
                    double go_o = go[o];
                    double* drow = dw.data() + o * in_n;
                    for (std::size_t i = 0; i < in_n; ++i) drow[i] += go_o * vx2[i];
                }
                g.accum(w2, dw);
            }
            if (ps.size() > 2 && g.wants(ps[2])) g.accum(ps[2], go);
        });
    }

    // 2D convolution, x (H,W,Cin), w (KH,KW,Cin,Cout), optional b (Cout).
    // same_pad uses ceil(H/stride) output size with zero padding, otherwise
    // valid windows only.
    Ref conv2d(Ref x, Ref w, Ref b, std::size_t stride, bool same_pad) {
        const Tensor& vx = value(x);
        const Tensor& vw = value(w);
        require_shape(vx.rank() == 3 && vw.rank() == 4, "conv2d expects (H,W,C) and (KH,KW,Cin,Cout)");
        require_shape(vx.dim(2) == vw.dim(2), "conv2d input channels mismatch");
        ConvDims d = conv_dims(vx.dim(0), vx.dim(1), vw.dim(0), vw.dim(1), stride, same_pad);
        std::size_t cin = vx.dim(2), cout = vw.dim(3);
        Tensor out({d.oh, d.ow, cout});
        conv2d_forward(vx.data(), vw.data(), out.data(), vx.dim(0), vx.dim(1), cin, cout, d, stride);
        if (b >= 0) {
            const Tensor& vb = value(b);
            require_shape(vb.numel() == cout, "conv2d bias shape mismatch");
            for (std::size_t p = 0; p < d.oh * d.ow; ++p)
                for (std::size_t c = 0; c < cout; ++c) out[p * cout + c] += vb[c];
        }
        std::vector<Ref> parents = b >= 0 ? std::vector<Ref>{x, w, b} : std::vector<Ref>{x, w};
        std::size_t H = vx.dim(0), W2 = vx.dim(1);
        return make(std::move(out), parents, [d, stride, H, W2, cin, cout](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            const auto& ps = g.node(self).parents;
            Ref x2 = ps[0], w2 = ps[1];
            const Tensor& vx2 = g.value(x2);
            const Tensor& vw2 = g.value(w2);
            if (g.wants(x2)) {
                Tensor dx = Tensor::zeros(vx2.shape());
                conv2d_backward_input(go.data(), vw2.data(), dx.data(), H, W2, cin, cout, d, stride);
                g.accum(x2, dx);
            }
            if (g.wants(w2)) {
                Tensor dw = Tensor::zeros(vw2.shape());
                conv2d_backward_weight(go.data(), vx2.data(), dw.data(), H, W2, cin, cout, d, stride);
                g.accum(w2, dw);
            }
            if (ps.size() > 2 && g.wants(ps[2])) {
                Tensor db = Tensor::zeros({cout});
                for (std::size_t p = 0; p < d.oh * d.ow; ++p)
                    for (std::size_t c = 0; c < cout; ++c) db[c] += go[p * cout + c];
                g.accum(ps[2], db);
            }
        });
    }

    // Shared 2D convolution applied to every frame of a clip (T,H,W,Cin).
    Ref conv2d_frames(Ref x, Ref w, Ref b, std::size_t stride, bool same_pad) {
        const Tensor& vx = value(x);
        const Tensor& vw = value(w);
        require_shape(vx.rank() == 4 && vw.rank() == 4, "conv2d_frames expects (T,H,W,C) input");
        require_shape(vx.dim(3) == vw.dim(2), "conv2d_frames channels mismatch");
        std::size_t T = vx.dim(0), H = vx.dim(1), W2 = vx.dim(2);
        std::size_t cin = vx.dim(3), cout = vw.dim(3);
        ConvDims d = conv_dims(H, W2, vw.dim(0), vw.dim(1), stride, same_pad);
        Tensor out({T, d.oh, d.ow, cout});
        std::size_t in_stride = H * W2 * cin, out_stride = d.oh * d.ow * cout;
        for (std::size_t t = 0; t < T; ++t) {
            conv2d_forward(vx.data() + t * in_stride, vw.data(), out.data() + t * out_stride, H, W2,
                           cin, cout, d, stride);
        }
        if (b >= 0) {
            const Tensor& vb = value(b);
            require_shape(vb.numel() == cout, "conv2d_frames bias shape mismatch");
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t p = 0; p < d.oh * d.ow; ++p)
                    for (std::size_t c = 0; c < cout; ++c)
                        out[t * out_stride + p * cout + c] += vb[c];
        }
        std::vector<Ref> parents = b >= 0 ? std::vector<Ref>{x, w, b} : std::vector<Ref>{x, w};
        return make(std::move(out), parents,
                    [d, stride, T, H, W2, cin, cout, in_stride, out_stride](Graph& g, Ref self) {
                        const Tensor& go = g.node(self).grad;
                        const auto& ps = g.node(self).parents;
                        Ref x2 = ps[0], w2 = ps[1];
                        const Tensor& vx2 = g.value(x2);
                        const Tensor& vw2 = g.value(w2);
                        if (g.wants(x2)) {
                            Tensor dx = Tensor::zeros(vx2.shape());
                            for (std::size_t t = 0; t < T; ++t) {
                                conv2d_backward_input(go.data() + t * out_stride, vw2.data(),
                                                      dx.data() + t * in_stride, H, W2, cin, cout, d,
                                                      stride);
                            }
                            g.accum(x2, dx);
                        }
                        if (g.wants(w2)) {
                            Tensor dw = Tensor::zeros(vw2.shape());
                            for (std::size_t t = 0; t < T; ++t) {
                                conv2d_backward_weight(go.data() + t * out_stride,
                                                       vx2.data() + t * in_stride, dw.data(), H, W2,
                                                       cin, cout, d, stride);
                            }
                            g.accum(w2, dw);
                        }
                        if (ps.size() > 2 && g.wants(ps[2])) {
                            Tensor db = Tensor::zeros({cout});
                            for (std::size_t t = 0; t < T; ++t)
                                for (std::size_t p = 0; p < d.oh * d.ow; ++p)
                                    for (std::size_t c = 0; c < cout; ++c)
                                        db[c] += go[t * out_stride + p * cout + c];
                            g.accum(ps[2], db);
                        }
                    });
    }

    // Temporal convolution across frames, per pixel, mixing channels.
    // x (T,H,W,Cin), w (KT,Cin,Cout), valid windows -> (T-KT+1,H,W,Cout).
    Ref conv1d_time(Ref x, Ref w) {
        const Tensor& vx = value(x);
        const Tensor& vw = value(w);
        require_shape(vx.rank() == 4 && vw.rank() == 3, "conv1d_time expects (T,H,W,C), (KT,Cin,Cout)");
        require_shape(vx.dim(3) == vw.dim(1), "conv1d_time channels mismatch");
        std::size_t T = vx.dim(0), H = vx.dim(1), W2 = vx.dim(2);
        std::size_t cin = vx.dim(3), kt = vw.dim(0), cout = vw.dim(2);
        require_shape(T >= kt, "conv1d_time clip shorter than kernel");
        std::size_t ot = T - kt + 1, pix = H * W2;
        Tensor out({ot, H, W2, cout});
        for (std::size_t t = 0; t < ot; ++t)
            for (std::size_t p = 0; p < pix; ++p)
                for (std::size_t k = 0; k < kt; ++k) {
                    const double* xin = vx.data() + ((t + k) * pix + p) * cin;
                    const double* wk = vw.data() + k * cin * cout;
                    double* o = out.data() + (t * pix + p) * cout;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        double xv = xin[ci];
                        const double* wrow = wk + ci * cout;
                        for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wrow[co];
                    }
                }
        return make(std::move(out), {x, w}, [T, H, W2, cin, kt, cout, ot, pix](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0], w2 = g.node(self).parents[1];
            const Tensor& vx2 = g.value(x2);
            const Tensor& vw2 = g.value(w2);
            if (g.wants(x2)) {
                Tensor dx = Tensor::zeros(vx2.shape());
                for (std::size_t t = 0; t < ot; ++t)
                    for (std::size_t p = 0; p < pix; ++p)
                        for (std::size_t k = 0; k < kt; ++k) {
                            double* dxi = dx.data() + ((t + k) * pix + p) * cin;
                            const double* wk = vw2.data() + k * cin * cout;
                            const double* goo = go.data() + (t * pix + p) * cout;
                            for (std::size_t ci = 0; ci < cin; ++ci) {
                                const double* wrow = wk + ci * cout;
                                double s = 0.0;
                                for (std::size_t co = 0; co < cout; ++co) s += wrow[co] * goo[co];
                                dxi[ci] += s;
                            }
                        }
                g.accum(x2, dx);
            }
            if (g.wants(w2)) {
                Tensor dw = Tensor::zeros(vw2.shape());
                for (std::size_t t = 0; t < ot; ++t)
                    for (std::size_t p = 0; p < pix; ++p)
                        for (std::size_t k = 0; k < kt; ++k) {
                            const double* xin = vx2.data() + ((t + k) * pix + p) * cin;
                            double* dwk = dw.data() + k * cin * cout;
                            const double* goo = go.data() + (t * pix + p) * cout;
                            for (std::size_t ci = 0; ci < cin; ++ci) {
                                double xv = xin[ci];
                                double* dwrow = dwk + ci * cout;
                                for (std::size_t co = 0; co < cout; ++co) dwrow[co] += xv * goo[co];
                            }
                        }
                g.accum(w2, dw);
            }
        });
    }

    // Per-channel linear combinations over time. x (T,H,W,C), K (M,T),
    // output (H,W,M*C): out[h,w,m*C+c] = sum_t x[t,h,w,c] * K[m,t].
    Ref temporal_collapse(Ref x, Ref K) {
        const Tensor& vx = value(x);
        const Tensor& vk = value(K);
        require_shape(vx.rank() == 4, "temporal_collapse expects (T,H,W,C)");
        require_shape(vk.rank() == 2 && vk.dim(1) == vx.dim(0),
                      "temporal_collapse kernel length must equal clip frame count");
        std::size_t T = vx.dim(0), H = vx.dim(1), W2 = vx.dim(2), C = vx.dim(3), M = vk.dim(0);
        std::size_t pix = H * W2;
        Tensor out({H, W2, M * C});
        for (std::size_t t = 0; t < T; ++t) {
            const double* xt = vx.data() + t * pix * C;
            for (std::size_t m = 0; m < M; ++m) {
                double kv = vk.at(m, t);
                for (std::size_t p = 0; p < pix; ++p) {
                    double* o = out.data() + p * M * C + m * C;
                    const double* xi = xt + p * C;
                    for (std::size_t c = 0; c < C; ++c) o[c] += kv * xi[c];
                }
            }
        }
        return make(std::move(out), {x, K}, [T, H, W2, C, M, pix](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0], k2 = g.node(self).parents[1];
            const Tensor& vx2 = g.value(x2);
            const Tensor& vk2 = g.value(k2);
            if (g.wants(x2)) {
                Tensor dx = Tensor::zeros(vx2.shape());
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t m = 0; m < M; ++m) {
                        double kv = vk2.at(m, t);
                        for (std::size_t p = 0; p < pix; ++p) {
                            double* dxi = dx.data() + (t * pix + p) * C;
                            const double* goo = go.data() + p * M * C + m * C;
                            for (std::size_t c = 0; c < C; ++c) dxi[c] += kv * goo[c];
                        }
                    }
                g.accum(x2, dx);
            }
            if (g.wants(k2)) {
                Tensor dk = Tensor::zeros(vk2.shape());
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t m = 0; m < M; ++m) {
                        double s = 0.0;
                        for (std::size_t p = 0; p < pix; ++p) {
                            const double* xi = vx2.data() + (t * pix + p) * C;
                            const double* goo = go.data() + p * M * C + m * C;
                            for (std::size_t c = 0; c < C; ++c) s += xi[c] * goo[c];
                        }
                        dk.at(m, t) += s;
                    }
                g.accum(k2, dk);
            }
        });
    }

    // ---- resampling -------------------------------------------------------

    Ref upsample2x(Ref x) {
        const Tensor& vx = value(x);
        require_shape(vx.rank() == 3, "upsample2x expects (H,W,C)");
        std::size_t H = vx.dim(0), W2 = vx.dim(1), C = vx.dim(2);
        Tensor out({2 * H, 2 * W2, C});
        for (std::size_t h = 0; h < 2 * H; ++h)
            for (std::size_t w = 0; w < 2 * W2; ++w) {
                const double* src = vx.data() + ((h / 2) * W2 + w / 2) * C;
                double* dst = out.data() + (h * 2 * W2 + w) * C;
                for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
            }
        return make(std::move(out), {x}, [H, W2, C](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0];
            Tensor dx = Tensor::zeros(g.value(x2).shape());
            for (std::size_t h = 0; h < 2 * H; ++h)
                for (std::size_t w = 0; w < 2 * W2; ++w) {
                    double* dst = dx.data() + ((h / 2) * W2 + w / 2) * C;
                    const double* src = go.data() + (h * 2 * W2 + w) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                }
            g.accum(x2, dx);
        });
    }

    // Nearest-neighbour resize of every frame in a clip (T,H,W,C).
    Ref resize_frames_nearest(Ref x, std::size_t oh, std::size_t ow) {
        const Tensor& vx = value(x);
        require_shape(vx.rank() == 4, "resize_frames_nearest expects (T,H,W,C)");
        std::size_t T = vx.dim(0), H = vx.dim(1), W2 = vx.dim(2), C = vx.dim(3);
        Tensor out({T, oh, ow, C});
        std::vector<std::size_t> hmap(oh), wmap(ow);
        for (std::size_t h = 0; h < oh; ++h) hmap[h] = std::min(H - 1, h * H / oh);
        for (std::size_t w = 0; w < ow; ++w) wmap[w] = std::min(W2 - 1, w * W2 / ow);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t h = 0; h < oh; ++h)
                for (std::size_t w = 0; w < ow; ++w) {
                    const double* src = vx.data() + ((t * H + hmap[h]) * W2 + wmap[w]) * C;
                    double* dst = out.data() + ((t * oh + h) * ow + w) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
                }
        return make(std::move(out), {x}, [T, H, W2, C, oh, ow, hmap, wmap](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0];
            Tensor dx = Tensor::zeros(g.value(x2).shape());
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t h = 0; h < oh; ++h)
                    for (std::size_t w = 0; w < ow; ++w) {
                        double* dst = dx.data() + ((t * H + hmap[h]) * W2 + wmap[w]) * C;
                        const double* src = go.data() + ((t * oh + h) * ow + w) * C;
                        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                    }
            g.accum(x2, dx);
        });
    }

    // 2x2 max pooling per frame of a clip (T,H,W,C); H and W must be even.
    Ref maxpool2x_frames(Ref x) {
        const Tensor& vx = value(x);
        require_shape(vx.rank() == 4, "maxpool2x_frames expects (T,H,W,C)");
        std::size_t T = vx.dim(0), H = vx.dim(1), W2 = vx.dim(2), C = vx.dim(3);
        require_shape(H % 2 == 0 && W2 % 2 == 0, "maxpool2x_frames needs even H and W");
        std::size_t oh = H / 2, ow = W2 / 2;
        Tensor out({T, oh, ow, C});
        std::vector<std::size_t> argmax(out.numel());
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t h = 0; h < oh; ++h)
                for (std::size_t w = 0; w < ow; ++w)
                    for (std::size_t c = 0; c < C; ++c) {
                        double best = -1e300;
                        std::size_t bi = 0;
                        for (std::size_t dh = 0; dh < 2; ++dh)
                            for (std::size_t dw = 0; dw < 2; ++dw) {
                                std::size_t idx = ((t * H + 2 * h + dh) * W2 + 2 * w + dw) * C + c;
                                if (vx[idx] > best) {
                                    best = vx[idx];
                                    bi = idx;
                                }
                            }
                        std::size_t oi = ((t * oh + h) * ow + w) * C + c;
                        out[oi] = best;
                        argmax[oi] = bi;
                    }
        return make(std::move(out), {x}, [argmax](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0];
            Tensor dx = Tensor::zeros(g.value(x2).shape());
            for (std::size_t i = 0; i < go.numel(); ++i) dx[argmax[i]] += go[i];
            g.accum(x2, dx);
        });
    }

    // Mean over the leading (time) axis: (T,H,W,C) -> (H,W,C).
    Ref mean_time(Ref x) {
        const Tensor& vx = value(x);
        require_shape(vx.rank() == 4, "mean_time expects (T,H,W,C)");
        std::size_t T = vx.dim(0), stride = vx.numel() / T;
        Tensor out({vx.dim(1), vx.dim(2), vx.dim(3)});
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < stride; ++i) out[i] += vx[t * stride + i];
        for (std::size_t i = 0; i < stride; ++i) out[i] /= static_cast<double>(T);
        return make(std::move(out), {x}, [T, stride](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0];
            Tensor dx(g.value(x2).shape());
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t i = 0; i < stride; ++i)
                    dx[t * stride + i] = go[i] / static_cast<double>(T);
            g.accum(x2, dx);
        });
    }

    // ---- composite helpers -------------------------------------------------

    // Unit L2 normalization of a whole tensor; an all-zero tensor stays zero.
    Ref unit_normalize(Ref a, double eps = 1e-12) {
        Ref n = l2_norm(a);
        Ref n_safe = add_scalar(n, eps);
        Ref inv = div(constant_scalar(1.0), n_safe);
        return scale_by_scalar(a, inv);
    }

    // Multiply tensor a by a scalar node s.
    Ref scale_by_scalar(Ref a, Ref s) {
        const Tensor& va = value(a);
        const Tensor& vs = value(s);
        require_shape(vs.numel() == 1, "scale_by_scalar needs scalar second arg");
        Tensor out = va;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= vs[0];
        return make(std::move(out), {a, s}, [](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref a2 = g.node(self).parents[0], s2 = g.node(self).parents[1];
            const Tensor& va2 = g.value(a2);
            double sv = g.value(s2)[0];
            if (g.wants(a2)) {
                Tensor da = go;
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= sv;
                g.accum(a2, da);
            }
            if (g.wants(s2)) {
                double s = 0.0;
                for (std::size_t i = 0; i < go.numel(); ++i) s += go[i] * va2[i];
                g.accum(s2, Tensor({1}, {s}));
            }
        });
    }

    Ref cosine_similarity(Ref a, Ref b, double eps = 1e-12) {
        Ref num = dot(a, b);
        Ref den = add_scalar(mul(l2_norm(a), l2_norm(b)), eps);
        return div(num, den);
    }

    // Smoothed anisotropic total variation of a frame (H,W,C), averaged over
    // the contributing pixel pairs.
    Ref total_variation(Ref x, double eps = 1e-6) {
        const Tensor& vx = value(x);
        require_shape(vx.rank() == 3, "total_variation expects (H,W,C)");
        require_shape(vx.dim(0) >= 2 && vx.dim(1) >= 2, "total_variation needs at least 2x2 frames");
        std::size_t H = vx.dim(0), W2 = vx.dim(1), C = vx.dim(2);
        std::size_t pairs = (H - 1) * W2 * C + H * (W2 - 1) * C;
        Ref dh = sub(crop(x, 1, 0, H - 1, W2), crop(x, 0, 0, H - 1, W2));
        Ref dw = sub(crop(x, 0, 1, H, W2 - 1), crop(x, 0, 0, H, W2 - 1));
        Ref tv = add(sum(smooth_abs(dh, eps)), sum(smooth_abs(dw, eps)));
        return scale(tv, 1.0 / static_cast<double>(pairs));
    }

    // Mean of row norms of a 2D weight matrix, smoothed near zero rows.
    Ref group_lasso_rows(Ref W, double eps = 1e-9) {
        const Tensor& vw = value(W);
        require_shape(vw.rank() == 2, "group_lasso_rows expects (Out,In)");
        std::size_t out_n = vw.dim(0), in_n = vw.dim(1);
        Tensor val({out_n});
        for (std::size_t o = 0; o < out_n; ++o) {
            double ss = eps * eps;
            const double* row = vw.data() + o * in_n;
            for (std::size_t i = 0; i < in_n; ++i) ss += row[i] * row[i];
            val[o] = std::sqrt(ss);
        }
        Ref node_ref = make(std::move(val), {W}, [out_n, in_n](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref w2 = g.node(self).parents[0];
            const Tensor& vw2 = g.value(w2);
            const Tensor& vo = g.node(self).value;
            Tensor dw(vw2.shape());
            for (std::size_t o = 0; o < out_n; ++o) {
                double f = go[o] / vo[o];
                const double* row = vw2.data() + o * in_n;
                double* drow = dw.data() + o * in_n;
                for (std::size_t i = 0; i < in_n; ++i) drow[i] = f * row[i];
            }
            g.accum(w2, dw);
        });
        return scale(sum(node_ref), 1.0 / static_cast<double>(out_n));
    }

    // Spatial crop of (H,W,C): rows [h0, h0+nh), cols [w0, w0+nw).
    Ref crop(Ref x, std::size_t h0, std::size_t w0, std::size_t nh, std::size_t nw) {
        const Tensor& vx = value(x);
        require_shape(vx.rank() == 3, "crop expects (H,W,C)");
        std::size_t W2 = vx.dim(1), C = vx.dim(2);
        require_shape(h0 + nh <= vx.dim(0) && w0 + nw <= W2, "crop out of range");
        Tensor out({nh, nw, C});
        for (std::size_t h = 0; h < nh; ++h)
            for (std::size_t w = 0; w < nw; ++w) {
                const double* src = vx.data() + ((h0 + h) * W2 + w0 + w) * C;
                double* dst = out.data() + (h * nw + w) * C;
                for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
            }
        return make(std::move(out), {x}, [h0, w0, nh, nw, W2, C](Graph& g, Ref self) {
            const Tensor& go = g.node(self).grad;
            Ref x2 = g.node(self).parents[0];
            Tensor dx = Tensor::zeros(g.value(x2).shape());
            for (std::size_t h = 0; h < nh; ++h)
                for (std::size_t w = 0; w < nw; ++w) {
                    double* dst = dx.data() + ((h0 + h) * W2 + w0 + w) * C;
                    const double* src = go.data() + (h * nw + w) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                }
            g.accum(x2, dx);
        });
    }

    Ref average(const std::vector<Ref>& terms) {
        require(!terms.empty(), "average of no terms");
        Ref acc = terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
        return scale(acc, 1.0 / static_cast<double>(terms.size()));
    }

private:
    struct ConvDims {
        std::size_t oh, ow, kh, kw;
        long ph, pw;  // top/left padding
    };

    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<Ref> parents;
        std::function<void(Graph&, Ref)> back;
        bool needs_grad = false;
    };

    Node& node(Ref r) { return nodes_[static_cast<std::size_t>(r)]; }
    const Node& node(Ref r) const { return nodes_[static_cast<std::size_t>(r)]; }

    bool wants(Ref r) const { return node(r).needs_grad; }

    void accum(Ref r, const Tensor& g) {
        Node& n = node(r);
        if (!n.needs_grad) return;
        if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
    }

    Ref make(Tensor value, std::vector<Ref> parents, std::function<void(Graph&, Ref)> back) {
        bool ng = false;
        for (Ref p : parents) ng = ng || node(p).needs_grad;
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.needs_grad = ng;
        if (ng) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<Ref>(nodes_.size() - 1);
    }

    void check_same(Ref a, Ref b, const char* what) {
        require_shape(value(a).same_shape(value(b)), std::string(what) + ": shape mismatch");
    }

    static ConvDims conv_dims(std::size_t H, std::size_t W, std::size_t kh, std::size_t kw,
                              std::size_t stride, bool same_pad) {
        require(stride >= 1, "conv stride must be >= 1");
        ConvDims d{};
        d.kh = kh;
        d.kw = kw;
        if (same_pad) {
            d.oh = (H + stride - 1) / stride;
            d.ow = (W + stride - 1) / stride;
            long pad_h = std::max<long>(0, static_cast<long>((d.oh - 1) * stride + kh) - static_cast<long>(H));
            long pad_w = std::max<long>(0, static_cast<long>((d.ow - 1) * stride + kw) - static_cast<long>(W));
            d.ph = pad_h / 2;
            d.pw = pad_w / 2;
        } else {
            require_shape(H >= kh && W >= kw, "conv input smaller than kernel");
            d.oh = (H - kh) / stride + 1;
            d.ow = (W - kw) / stride + 1;
            d.ph = 0;
            d.pw = 0;
        }
        return d;
    }

    static void conv2d_forward(const double* x, const double* w, double* out, std::size_t H,
                               std::size_t W, std::size_t cin, std::size_t cout, const ConvDims& d,
                               std::size_t stride) {
        for (std::size_t oh = 0; oh < d.oh; ++oh)
            for (std::size_t ow = 0; ow < d.ow; ++ow) {
                double* o = out + (oh * d.ow + ow) * cout;
                for (std::size_t kh = 0; kh < d.kh; ++kh) {
                    long ih = static_cast<long>(oh * stride + kh) - d.ph;
                    if (ih < 0 || ih >= static_cast<long>(H)) continue;
                    for (std::size_t kw = 0; kw < d.kw; ++kw) {
                        long iw = static_cast<long>(ow * stride + kw) - d.pw;
                        if (iw < 0 || iw >= static_cast<long>(W)) continue;
                        const double* xi = x + (static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw)) * cin;
                        const double* wk = w + (kh * d.kw + kw) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            double xv = xi[ci];
                            const double* wrow = wk + ci * cout;
                            for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wrow[co];
                        }
                    }
                }
            }
    }

    static void conv2d_backward_input(const double* gout, const double* w, double* dx, std::size_t H,
                                      std::size_t W, std::size_t cin, std::size_t cout,
                                      const ConvDims& d, std::size_t stride) {
        for (std::size_t oh = 0; oh < d.oh; ++oh)
            for (std::size_t ow = 0; ow < d.ow; ++ow) {
                const double* goo = gout + (oh * d.ow + ow) * cout;
                for (std::size_t kh = 0; kh < d.kh; ++kh) {
                    long ih = static_cast<long>(oh * stride + kh) - d.ph;
                    if (ih < 0 || ih >= static_cast<long>(H)) continue;
                    for (std::size_t kw = 0; kw < d.kw; ++kw) {
                        long iw = static_cast<long>(ow * stride + kw) - d.pw;
                        if (iw < 0 || iw >= static_cast<long>(W)) continue;
                        double* dxi = dx + (static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw)) * cin;
                        const double* wk = w + (kh * d.kw + kw) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double* wrow = wk + ci * cout;
                            double s = 0.0;
                            for (std::size_t co = 0; co < cout; ++co) s += wrow[co] * goo[co];
                            dxi[ci] += s;
                        }
                    }
                }
            }
    }

    static void conv2d_backward_weight(const double* gout, const double* x, double* dw,
                                       std::size_t H, std::size_t W, std::size_t cin,
                                       std::size_t cout, const ConvDims& d, std::size_t stride) {
        for (std::size_t oh = 0; oh < d.oh; ++oh)
            for (std::size_t ow = 0; ow < d.ow; ++ow) {
                const double* goo = gout + (oh * d.ow + ow) * cout;
                for (std::size_t kh = 0; kh < d.kh; ++kh) {
                    long ih = static_cast<long>(oh * stride + kh) - d.ph;
                    if (ih < 0 || ih >= static_cast<long>(H)) continue;
                    for (std::size_t kw = 0; kw < d.kw; ++kw) {
                        long iw = static_cast<long>(ow * stride + kw) - d.pw;
                        if (iw < 0 || iw >= static_cast<long>(W)) continue;
                        const double* xi = x + (static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw)) * cin;
                        double* dwk = dw + (kh * d.kw + kw) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            double xv = xi[ci];
                            double* dwrow = dwk + ci * cout;
                            for (std::size_t co = 0; co < cout; ++co) dwrow[co] += xv * goo[co];
                        }
                    }
                }
            }
    }

    std::vector<Node> nodes_;
};

// Momentum-free adaptive optimizer: per-parameter step sizes from a running
// mean of squared gradients, no velocity term.
class AdaptiveOptimizer {
public:
    explicit AdaptiveOptimizer(double rho = 0.9, double eps = 1e-8) : rho_(rho), eps_(eps) {}

    void step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
        require(params.size() == grads.size(), "optimizer params/grads size mismatch");
        if (ms_.empty()) {
            for (auto* p : params) ms_.push_back(Tensor::zeros(p->shape()));
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            const Tensor& g = grads[k];
            Tensor& m = ms_[k];
            require_shape(p.same_shape(g), "optimizer grad shape mismatch");
            for (std::size_t i = 0; i < p.numel(); ++i) {
                m[i] = rho_ * m[i] + (1.0 - rho_) * g[i] * g[i];
                p[i] -= lr * g[i] / (std::sqrt(m[i]) + eps_);
            }
        }
    }

private:
    double rho_, eps_;
    std::vector<Tensor> ms_;
};

}  // namespace nvrd
