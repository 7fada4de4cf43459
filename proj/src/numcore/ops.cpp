// SPDX-License-Identifier: Apache-2.0
#include "attentrack/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attentrack/error.hpp"

namespace attentrack::numcore {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   const char* op, std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->data = std::move(data);
    node->op = op;
    const bool tracked = grad_enabled() && std::any_of(parents.begin(), parents.end(),
                                     [](const NodePtr& p) { return p->requires_grad; });
    if (tracked) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

// Grad buffer of a parent that wants one, or nullptr.
double* grad_of(Node& parent) {
    if (!parent.requires_grad) {
        return nullptr;
    }
    parent.ensure_grad();
    return parent.grad.data();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                             " vs " + to_string(b.shape()));
    }
}

// out[m×n] += a[m×k] · b[k×n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) {
                continue;
            }
            const double* b_row = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

// out[m×n] += a[m×k] · b[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b_row = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += a_row[p] * b_row[p];
            }
            out[i * n + j] += acc;
        }
    }
}

// out[k×n] += a[m×k]ᵀ · b[m×n]
void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* b_row = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) {
                continue;
            }
            double* out_row = out + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
    std::vector<double> out(a.size());
    const auto in = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(in[i]);
    }
    return make_result(a.shape(), std::move(out), {a.node()}, op, [deriv](Node& self) {
        Node& pa = *self.parents[0];
        double* ga = grad_of(pa);
        if (ga == nullptr) {
            return;
        }
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ga[i] += self.grad[i] * deriv(pa.data[i], self.data[i]);
        }
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " · " +
                             to_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    return make_result({m, n}, std::move(out), {a.node(), b.node()}, "matmul",
                       [m, k, n](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           if (double* ga = grad_of(pa)) {
                               gemm_nt(self.grad.data(), pb.data.data(), ga, m, n, k);
                           }
                           if (double* gb = grad_of(pb)) {
                               gemm_tn(pa.data.data(), self.grad.data(), gb, m, k, n);
                           }
                       });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: widths differ, " + to_string(a.shape()) + " · (" +
                             to_string(b.shape()) + ")^T");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    std::vector<double> out(m * n, 0.0);
    gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
    return make_result({m, n}, std::move(out), {a.node(), b.node()}, "matmul_nt",
                       [m, k, n](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           // d a = g · b ; d b = gᵀ · a
                           if (double* ga = grad_of(pa)) {
                               gemm_nn(self.grad.data(), pb.data.data(), ga, m, n, k);
                           }
                           if (double* gb = grad_of(pb)) {
                               gemm_tn(self.grad.data(), pa.data.data(), gb, m, n, k);
                           }
                       });
}

Tensor transpose(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.size());
    const auto in = a.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[j * r + i] = in[i * c + j];
        }
    }
    return make_result({c, r}, std::move(out), {a.node()}, "transpose", [r, c](Node& self) {
        if (double* ga = grad_of(*self.parents[0])) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    ga[i * c + j] += self.grad[j * r + i];
                }
            }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] + b.data()[i];
    }
    return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "add", [](Node& self) {
        for (auto& parent : self.parents) {
            if (double* g = grad_of(*parent)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] - b.data()[i];
    }
    return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "sub", [](Node& self) {
        if (double* ga = grad_of(*self.parents[0])) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i];
            }
        }
        if (double* gb = grad_of(*self.parents[1])) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                gb[i] -= self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] * b.data()[i];
    }
    return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "mul", [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (double* ga = grad_of(pa)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i] * pb.data[i];
            }
        }
        if (double* gb = grad_of(pb)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                gb[i] += self.grad[i] * pa.data[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        a, "scale", [factor](double x) { return factor * x; },
        [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& a) {
    return unary(
        a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw DimensionError("add_row: bias " + to_string(bias.shape()) + " does not fit " +
                             to_string(x.shape()));
    }
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = x.data()[i * c + j] + bias.data()[j];
        }
    }
    return make_result(x.shape(), std::move(out), {x.node(), bias.node()}, "add_row",
                       [r, c](Node& self) {
                           if (double* gx = grad_of(*self.parents[0])) {
                               for (std::size_t i = 0; i < r * c; ++i) {
                                   gx[i] += self.grad[i];
                               }
                           }
                           if (double* gb = grad_of(*self.parents[1])) {
                               for (std::size_t i = 0; i < r; ++i) {
                                   for (std::size_t j = 0; j < c; ++j) {
                                       gb[j] += self.grad[i * c + j];
                                   }
                               }
                           }
                       });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) {
        total += v;
    }
    return make_result({1, 1}, {total}, {a.node()}, "sum", [](Node& self) {
        if (double* ga = grad_of(*self.parents[0])) {
            const std::size_t n = self.parents[0]->data.size();
            for (std::size_t i = 0; i < n; ++i) {
                ga[i] += self.grad[0];
            }
        }
    });
}

Tensor mean(const Tensor& a) {
    if (a.empty()) {
        throw DimensionError("mean: empty tensor");
    }
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor softmax(const Tensor& x) {
    if (x.cols() == 0) {
        throw DimensionError("softmax: empty last axis in shape " + to_string(x.shape()));
    }
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* in = x.data().data() + i * c;
        double* o = out.data() + i * c;
        const double peak = *std::max_element(in, in + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            o[j] = std::exp(in[j] - peak);
            total += o[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            o[j] /= total;
        }
    }
    return make_result(x.shape(), std::move(out), {x.node()}, "softmax", [r, c](Node& self) {
        double* gx = grad_of(*self.parents[0]);
        if (gx == nullptr) {
            return;
        }
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.data.data() + i * c;
            const double* g = self.grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                dot += y[j] * g[j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                gx[i * c + j] += y[j] * (g[j] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (c == 0) {
        throw DimensionError("layer_norm: empty rows");
    }
    if (gamma.shape() != Shape{1, c} || beta.shape() != Shape{1, c}) {
        throw DimensionError("layer_norm: affine parameters " + to_string(gamma.shape()) + "/" +
                             to_string(beta.shape()) + " do not fit " + to_string(x.shape()));
    }
    std::vector<double> normalized(x.size());
    std::vector<double> inv_std(r);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* in = x.data().data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            mu += in[j];
        }
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            var += (in[j] - mu) * (in[j] - mu);
        }
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            normalized[i * c + j] = (in[j] - mu) * inv_std[i];
            out[i * c + j] = gamma.data()[j] * normalized[i * c + j] + beta.data()[j];
        }
    }
    return make_result(
        x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()}, "layer_norm",
        [r, c, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
            Node& px = *self.parents[0];
            Node& pg = *self.parents[1];
            double* gx = grad_of(px);
            double* gg = grad_of(pg);
            double* gb = grad_of(*self.parents[2]);
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t i = 0; i < r; ++i) {
                const double* g = self.grad.data() + i * c;
                const double* xh = normalized.data() + i * c;
                if (gg != nullptr || gb != nullptr) {
                    for (std::size_t j = 0; j < c; ++j) {
                        if (gg != nullptr) {
                            gg[j] += g[j] * xh[j];
                        }
                        if (gb != nullptr) {
                            gb[j] += g[j];
                        }
                    }
                }
                if (gx != nullptr) {
                    double mean_dxh = 0.0;
                    double mean_dxh_xh = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dxh = g[j] * pg.data[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[j];
                    }
                    mean_dxh *= inv_c;
                    mean_dxh_xh *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dxh = g[j] * pg.data[j];
                        gx[i * c + j] += inv_std[i] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
            }
        });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    if (logits.rows() != 1) {
        throw DimensionError("cross_entropy: expected a 1xk logits row, got " +
                             to_string(logits.shape()));
    }
    const std::size_t t[] = {target};
    return cross_entropy_rows(logits, t);
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets) {
    const std::size_t r = logits.rows(), c = logits.cols();
    if (r == 0 || c == 0) {
        throw DimensionError("cross_entropy: empty logits " + to_string(logits.shape()));
    }
    if (targets.size() != r) {
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(r) + " rows");
    }
    for (std::size_t i = 0; i < r; ++i) {
        if (targets[i] >= c) {
            throw IndexError("cross_entropy: target " + std::to_string(targets[i]) + " in row " +
                             std::to_string(i) + " outside 0.." + std::to_string(c - 1));
        }
    }
    std::vector<double> probs(logits.size());
    std::vector<std::size_t> saved(targets.begin(), targets.end());
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const double* in = logits.data().data() + i * c;
        const double peak = *std::max_element(in, in + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] = std::exp(in[j] - peak);
            z += probs[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] /= z;
        }
        // log-sum-exp form keeps saturated rows exact
        total += std::log(z) + peak - in[saved[i]];
    }
    const double inv_r = 1.0 / static_cast<double>(r);
    return make_result({1, 1}, {total * inv_r}, {logits.node()}, "cross_entropy",
                       [r, c, inv_r, probs = std::move(probs), saved = std::move(saved)](Node& self) {
                           double* gl = grad_of(*self.parents[0]);
                           if (gl == nullptr) {
                               return;
                           }
                           const double g = self.grad[0] * inv_r;
                           for (std::size_t i = 0; i < r; ++i) {
                               for (std::size_t j = 0; j < c; ++j) {
                                   const double onehot = j == saved[i] ? 1.0 : 0.0;
                                   gl[i * c + j] += g * (probs[i * c + j] - onehot);
                               }
                           }
                       });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw DimensionError("concat_rows: nothing to concatenate");
    }
    const std::size_t c = parts.front().cols();
    std::size_t total_rows = 0;
    std::vector<NodePtr> parents;
    std::vector<std::size_t> offsets;
    for (const Tensor& part : parts) {
        if (part.cols() != c) {
            throw DimensionError("concat_rows: width " + std::to_string(part.cols()) +
                                 " does not match " + std::to_string(c));
        }
        offsets.push_back(total_rows * c);
        total_rows += part.rows();
        parents.push_back(part.node());
    }
    std::vector<double> out;
    out.reserve(total_rows * c);
    for (const Tensor& part : parts) {
        out.insert(out.end(), part.data().begin(), part.data().end());
    }
    return make_result({total_rows, c}, std::move(out), std::move(parents), "concat_rows",
                       [offsets = std::move(offsets)](Node& self) {
                           for (std::size_t p = 0; p < self.parents.size(); ++p) {
                               Node& parent = *self.parents[p];
                               if (double* g = grad_of(parent)) {
                                   for (std::size_t i = 0; i < parent.data.size(); ++i) {
                                       g[i] += self.grad[offsets[p] + i];
                                   }
                               }
                           }
                       });
}

Tensor concat_rows(const Tensor& top, const Tensor& bottom) {
    const Tensor parts[] = {top, bottom};
    return concat_rows(std::span<const Tensor>(parts));
}

Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows) {
    const std::size_t c = x.cols();
    std::vector<std::size_t> index(rows.begin(), rows.end());
    std::vector<double> out;
    out.reserve(index.size() * c);
    for (std::size_t r : index) {
        if (r >= x.rows()) {
            throw IndexError("select_rows: row " + std::to_string(r) + " outside " +
                             to_string(x.shape()));
        }
        const auto src = x.row_span(r);
        out.insert(out.end(), src.begin(), src.end());
    }
    const Shape shape{index.size(), c};
    return make_result(shape, std::move(out), {x.node()}, "select_rows",
                       [c, index = std::move(index)](Node& self) {
                           if (double* g = grad_of(*self.parents[0])) {
                               for (std::size_t i = 0; i < index.size(); ++i) {
                                   for (std::size_t j = 0; j < c; ++j) {
                                       g[index[i] * c + j] += self.grad[i * c + j];
                                   }
                               }
                           }
                       });
}

Tensor where_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b) {
    require_same_shape("where_rows", a, b);
    if (take_a.size() != a.rows()) {
        throw DimensionError("where_rows: mask of " + std::to_string(take_a.size()) +
                             " rows for shape " + to_string(a.shape()));
    }
    const std::size_t c = a.cols();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto src = take_a[i] ? a.row_span(i) : b.row_span(i);
        std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "where_rows",
                       [c, take_a](Node& self) {
                           double* ga = grad_of(*self.parents[0]);
                           double* gb = grad_of(*self.parents[1]);
                           for (std::size_t i = 0; i < take_a.size(); ++i) {
                               double* g = take_a[i] ? ga : gb;
                               if (g == nullptr) {
                                   continue;
                               }
                               for (std::size_t j = 0; j < c; ++j) {
                                   g[i * c + j] += self.grad[i * c + j];
                               }
                           }
                       });
}

}  // namespace attentrack::numcore
