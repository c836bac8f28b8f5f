#include "skyroute/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace skyroute::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Node = detail::TensorNode;

CMapMat cmap(const Buffer& d, int r, int c) { return CMapMat(d.data(), r, c); }
MapMat map(Buffer& d, int r, int c) { return MapMat(d.data(), r, c); }

void require_matrix(const Tensor& t, const char* what) {
    if (t.shape().size() != 2) throw ShapeMismatch(std::string(what) + " must be a matrix, got " + shape_str(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeMismatch(std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) throw ShapeMismatch("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Buffer out(static_cast<std::size_t>(m) * n);
    map(out, m, n).noalias() = cmap(a.node()->data, m, k) * cmap(b.node()->data, k, n);
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const auto dy = cmap(self.grad, m, n);
        if (pa.requires_grad) map(pa.grad_buffer(), m, k).noalias() += dy * cmap(pb.data, k, n).transpose();
        if (pb.requires_grad) map(pb.grad_buffer(), k, n).noalias() += cmap(pa.data, m, k).transpose() * dy;
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_matrix(x, "linear input");
    require_matrix(w, "linear weight");
    const int m = x.rows(), in = x.cols(), outd = w.cols();
    if (w.rows() != in || b.numel() != static_cast<std::size_t>(outd)) {
        throw ShapeMismatch("linear: x" + shape_str(x.shape()) + " w" + shape_str(w.shape()) + " b" +
                            shape_str(b.shape()));
    }
    Buffer out(static_cast<std::size_t>(m) * outd);
    auto y = map(out, m, outd);
    y.noalias() = cmap(x.node()->data, m, in) * cmap(w.node()->data, in, outd);
    y.rowwise() += cmap(b.node()->data, 1, outd).row(0);
    return make_result({m, outd}, std::move(out), {x, w, b}, [m, in, outd](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        const auto dy = cmap(self.grad, m, outd);
        if (px.requires_grad) map(px.grad_buffer(), m, in).noalias() += dy * cmap(pw.data, in, outd).transpose();
        if (pw.requires_grad) map(pw.grad_buffer(), in, outd).noalias() += cmap(px.data, m, in).transpose() * dy;
        if (pb.requires_grad) map(pb.grad_buffer(), 1, outd) += dy.colwise().sum();
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    Buffer out(a.numel());
    const auto& da = a.node()->data;
    const auto& db = b.node()->data;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mul");
    Buffer out(a.numel());
    const auto& da = a.node()->data;
    const auto& db = b.node()->data;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    Buffer out(a.node()->data);
    for (double& v : out) v *= s;
    return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Tensor relu(const Tensor& x) {
    Buffer out(x.node()->data);
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
        Node& px = *self.parents[0];
        auto& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (px.data[i] > 0.0) g[i] += self.grad[i];
        }
    });
}

Tensor tanh(const Tensor& x) {
    Buffer out(x.node()->data);
    for (double& v : out) v = std::tanh(v);
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (1.0 - self.data[i] * self.data[i]);
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_result({1}, {s}, {x}, [](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (double& v : g) v += self.grad[0];
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_matrix(x, "layer_norm input");
    const int m = x.rows(), d = x.cols();
    if (gamma.numel() != static_cast<std::size_t>(d) || beta.numel() != static_cast<std::size_t>(d)) {
        throw ShapeMismatch("layer_norm affine parameters do not match width " + std::to_string(d));
    }
    const auto& xd = x.node()->data;
    const auto& gd = gamma.node()->data;
    const auto& bd = beta.node()->data;
    Buffer out(xd.size());
    Buffer rstd(static_cast<std::size_t>(m));
    Buffer xhat(xd.size());
    for (int r = 0; r < m; ++r) {
        const double* row = xd.data() + static_cast<std::size_t>(r) * d;
        double mean = 0.0;
        for (int c = 0; c < d; ++c) mean += row[c];
        mean /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= d;
        const double rs = 1.0 / std::sqrt(var + eps);
        rstd[r] = rs;
        for (int c = 0; c < d; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * d + c;
            xhat[i] = (row[c] - mean) * rs;
            out[i] = gd[c] * xhat[i] + bd[c];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gamma, beta},
                       [m, d, rstd = std::move(rstd), xhat = std::move(xhat)](Node& self) {
                           Node& px = *self.parents[0];
                           Node& pg = *self.parents[1];
                           Node& pb = *self.parents[2];
                           const auto& dy = self.grad;
                           if (pg.requires_grad || pb.requires_grad) {
                               auto& gg = pg.grad_buffer();
                               auto& gb = pb.grad_buffer();
                               for (int r = 0; r < m; ++r) {
                                   for (int c = 0; c < d; ++c) {
                                       const std::size_t i = static_cast<std::size_t>(r) * d + c;
                                       gg[c] += dy[i] * xhat[i];
                                       gb[c] += dy[i];
                                   }
                               }
                           }
                           if (!px.requires_grad) return;
                           auto& gx = px.grad_buffer();
                           for (int r = 0; r < m; ++r) {
                               double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                               for (int c = 0; c < d; ++c) {
                                   const std::size_t i = static_cast<std::size_t>(r) * d + c;
                                   const double dxh = dy[i] * pg.data[c];
                                   mean_dxhat += dxh;
                                   mean_dxhat_xhat += dxh * xhat[i];
                               }
                               mean_dxhat /= d;
                               mean_dxhat_xhat /= d;
                               for (int c = 0; c < d; ++c) {
                                   const std::size_t i = static_cast<std::size_t>(r) * d + c;
                                   const double dxh = dy[i] * pg.data[c];
                                   gx[i] += rstd[r] * (dxh - mean_dxhat - xhat[i] * mean_dxhat_xhat);
                               }
                           }
                       });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
    if (!training || p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout probability must be < 1");
    const double keep_scale = 1.0 / (1.0 - p);
    Buffer mask(x.numel());
    Buffer out(x.numel());
    const auto& xd = x.node()->data;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
        out[i] = xd[i] * mask[i];
    }
    return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    require_matrix(table, "embedding table");
    const int vocab = table.rows(), d = table.cols();
    const int m = static_cast<int>(ids.size());
    std::vector<int> idx(ids.begin(), ids.end());
    Buffer out(static_cast<std::size_t>(m) * d);
    const auto& td = table.node()->data;
    for (int r = 0; r < m; ++r) {
        if (idx[r] < 0 || idx[r] >= vocab) throw ShapeMismatch("embedding id " + std::to_string(idx[r]) + " out of range");
        std::copy_n(td.begin() + static_cast<std::ptrdiff_t>(idx[r]) * d, d, out.begin() + static_cast<std::ptrdiff_t>(r) * d);
    }
    return make_result({m, d}, std::move(out), {table}, [d, idx = std::move(idx)](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (int c = 0; c < d; ++c) g[static_cast<std::size_t>(idx[r]) * d + c] += self.grad[r * d + c];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeMismatch("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    return make_result(std::move(shape), x.node()->data, {x}, [](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& x, int start, int count) {
    require_matrix(x, "slice_cols input");
    const int m = x.rows(), n = x.cols();
    if (start < 0 || count < 0 || start + count > n) throw ShapeMismatch("slice_cols out of range");
    Buffer out(static_cast<std::size_t>(m) * count);
    const auto& xd = x.node()->data;
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < count; ++c) {
            out[static_cast<std::size_t>(r) * count + c] = xd[static_cast<std::size_t>(r) * n + start + c];
        }
    }
    return make_result({m, count}, std::move(out), {x}, [m, n, start, count](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < count; ++c) {
                g[static_cast<std::size_t>(r) * n + start + c] += self.grad[static_cast<std::size_t>(r) * count + c];
            }
        }
    });
}

std::vector<double> masked_softmax_rows(std::span<const double> logits, int rows, int cols,
                                        std::span<const std::uint8_t> mask) {
    std::vector<double> p(logits.size(), 0.0);
    for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < cols; ++c) {
            if (mask.empty() || mask[base + c]) mx = std::max(mx, logits[base + c]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) continue;
        double z = 0.0;
        for (int c = 0; c < cols; ++c) {
            if (mask.empty() || mask[base + c]) {
                p[base + c] = std::exp(logits[base + c] - mx);
                z += p[base + c];
            }
        }
        for (int c = 0; c < cols; ++c) p[base + c] /= z;
    }
    return p;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionOptions& opt) {
    require_matrix(q, "attention Q");
    require_matrix(k, "attention K");
    require_matrix(v, "attention V");
    const int B = opt.batch, Lq = opt.query_len, Lk = opt.key_len, H = opt.heads;
    const int d = q.cols();
    if (B < 1 || Lq < 1 || Lk < 1 || H < 1) throw ShapeMismatch("attention: empty batch, sequence or heads");
    if (q.rows() != B * Lq || k.rows() != B * Lk || v.rows() != B * Lk) {
        throw ShapeMismatch("attention: row counts do not match batch layout");
    }
    if (k.cols() != d || v.cols() != d) throw ShapeMismatch("attention: Q/K/V widths differ");
    if (d % H != 0) throw ShapeMismatch("attention: d_model not divisible by heads");
    if (!opt.key_mask.empty() && opt.key_mask.size() != static_cast<std::size_t>(B) * Lk) {
        throw ShapeMismatch("attention: key mask size");
    }
    const int dh = d / H;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool drop = opt.training && opt.dropout_p > 0.0;
    if (drop && opt.rng == nullptr) throw std::invalid_argument("attention dropout needs an rng");
    const double keep_scale = drop ? 1.0 / (1.0 - opt.dropout_p) : 1.0;

    const auto& qd = q.node()->data;
    const auto& kd = k.node()->data;
    const auto& vd = v.node()->data;
    const std::size_t wsize = static_cast<std::size_t>(B) * H * Lq * Lk;
    Buffer probs(wsize, 0.0);   // softmax weights
    Buffer dmask;               // dropout multipliers
    if (drop) dmask.resize(wsize);
    Buffer out(static_cast<std::size_t>(B) * Lq * d, 0.0);
    std::vector<double> scores(static_cast<std::size_t>(Lk));

    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < H; ++h) {
            for (int i = 0; i < Lq; ++i) {
                const double* qi = qd.data() + (static_cast<std::size_t>(b) * Lq + i) * d + h * dh;
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < Lk; ++j) {
                    if (!opt.key_mask.empty() && !opt.key_mask[static_cast<std::size_t>(b) * Lk + j]) continue;
                    const double* kj = kd.data() + (static_cast<std::size_t>(b) * Lk + j) * d + h * dh;
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    scores[j] = s * inv_sqrt;
                    mx = std::max(mx, scores[j]);
                }
                const std::size_t wbase = ((static_cast<std::size_t>(b) * H + h) * Lq + i) * Lk;
                if (mx == -std::numeric_limits<double>::infinity()) continue;  // nothing to attend
                double z = 0.0;
                for (int j = 0; j < Lk; ++j) {
                    if (!opt.key_mask.empty() && !opt.key_mask[static_cast<std::size_t>(b) * Lk + j]) continue;
                    probs[wbase + j] = std::exp(scores[j] - mx);
                    z += probs[wbase + j];
                }
                double* oi = out.data() + (static_cast<std::size_t>(b) * Lq + i) * d + h * dh;
                for (int j = 0; j < Lk; ++j) {
                    probs[wbase + j] /= z;
                    double w = probs[wbase + j];
                    if (drop) {
                        dmask[wbase + j] = opt.rng->uniform() < opt.dropout_p ? 0.0 : keep_scale;
                        w *= dmask[wbase + j];
                    }
                    if (w == 0.0) continue;
                    const double* vj = vd.data() + (static_cast<std::size_t>(b) * Lk + j) * d + h * dh;
                    for (int c = 0; c < dh; ++c) oi[c] += w * vj[c];
                }
            }
        }
    }
    if (opt.weights_out) opt.weights_out->assign(probs.begin(), probs.end());

    return make_result({B * Lq, d}, std::move(out), {q, k, v},
                       [B, Lq, Lk, H, d, dh, inv_sqrt, probs = std::move(probs), dmask = std::move(dmask)](Node& self) {
                           Node& pq = *self.parents[0];
                           Node& pk = *self.parents[1];
                           Node& pv = *self.parents[2];
                           const bool dropped = !dmask.empty();
                           std::vector<double> dp(static_cast<std::size_t>(Lk));
                           Buffer* gq = pq.requires_grad ? &pq.grad_buffer() : nullptr;
                           Buffer* gk = pk.requires_grad ? &pk.grad_buffer() : nullptr;
                           Buffer* gv = pv.requires_grad ? &pv.grad_buffer() : nullptr;
                           for (int b = 0; b < B; ++b) {
                               for (int h = 0; h < H; ++h) {
                                   for (int i = 0; i < Lq; ++i) {
                                       const std::size_t wbase = ((static_cast<std::size_t>(b) * H + h) * Lq + i) * Lk;
                                       const std::size_t qrow = (static_cast<std::size_t>(b) * Lq + i) * d + h * dh;
                                       const double* go = self.grad.data() + qrow;
                                       double dot = 0.0;
                                       for (int j = 0; j < Lk; ++j) {
                                           const double p = probs[wbase + j];
                                           if (p == 0.0) {
                                               dp[j] = 0.0;
                                               continue;
                                           }
                                           const double m = dropped ? dmask[wbase + j] : 1.0;
                                           const std::size_t krow = (static_cast<std::size_t>(b) * Lk + j) * d + h * dh;
                                           const double* vj = pv.data.data() + krow;
                                           double g = 0.0;
                                           for (int c = 0; c < dh; ++c) g += go[c] * vj[c];
                                           dp[j] = g * m;  // d loss / d p_ij
                                           dot += dp[j] * p;
                                           if (gv && m != 0.0) {
                                               double* gvj = gv->data() + krow;
                                               const double w = p * m;
                                               for (int c = 0; c < dh; ++c) gvj[c] += w * go[c];
                                           }
                                       }
                                       for (int j = 0; j < Lk; ++j) {
                                           const double p = probs[wbase + j];
                                           if (p == 0.0) continue;
                                           const double ds = p * (dp[j] - dot) * inv_sqrt;
                                           const std::size_t krow = (static_cast<std::size_t>(b) * Lk + j) * d + h * dh;
                                           if (gq) {
                                               double* gqi = gq->data() + qrow;
                                               const double* kj = pk.data.data() + krow;
                                               for (int c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
                                           }
                                           if (gk) {
                                               double* gkj = gk->data() + krow;
                                               const double* qi = pq.data.data() + qrow;
                                               for (int c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
                                           }
                                       }
                                   }
                               }
                           }
                       });
}

}  // namespace skyroute::nn
