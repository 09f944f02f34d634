#include "stssdl/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace stssdl {

namespace {

NodePtr make_node(Tensor value, OpKind kind, std::vector<NodePtr> parents) {
    if (!value.all_finite()) {
        throw NumericError(std::string("op ") + op_name(kind) + " produced a non-finite value");
    }
    auto n = std::make_shared<Node>(std::move(value), kind);
    n->parents = std::move(parents);
    return n;
}

void require_matmul(const Tensor& a, const Tensor& b, std::size_t a_inner, std::size_t b_inner,
                    const char* op) {
    require_rank(a, 2, op);
    require_rank(b, 2, op);
    if (a_inner != b_inner) {
        throw DimensionError(std::string(op) + ": inner extents disagree, " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
    }
}

// Raw dense kernels used by forward values and backward deposits.
// dst is accumulated into, never overwritten.
void mm_acc(const Tensor& a, const Tensor& b, Tensor& dst) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        double* drow = &dst.data[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.data[p * n];
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * brow[j];
        }
    }
}

// dst += a · b^T
void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& dst) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        double* drow = &dst.data[i * n];
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = &b.data[j * k];
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            drow[j] += s;
        }
    }
}

// dst += a^T · b
void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& dst) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        const double* brow = &b.data[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* drow = &dst.data[p * n];
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * brow[j];
        }
    }
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

NodePtr elementwise(const NodePtr& x, OpKind kind, double (*fn)(double)) {
    Tensor out(x->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(x->value[i]);
    return make_node(std::move(out), kind, {x});
}

// Backward deposit for one node; reads n.grad, accumulates into parents.
void backward_step(const Node& n) {
    const Tensor& g = n.grad;
    switch (n.kind) {
        case OpKind::leaf:
        case OpKind::stop_grad:
            break;
        case OpKind::matmul: {
            Node& a = *n.parents[0];
            Node& b = *n.parents[1];
            mm_nt_acc(g, b.value, a.grad);  // dA += G·B^T
            mm_tn_acc(a.value, g, b.grad);  // dB += A^T·G
            break;
        }
        case OpKind::matmul_nt: {
            Node& a = *n.parents[0];
            Node& b = *n.parents[1];
            mm_acc(g, b.value, a.grad);     // dA += G·B
            mm_tn_acc(g, a.value, b.grad);  // dB += G^T·A
            break;
        }
        case OpKind::add: {
            for (int side = 0; side < 2; ++side) {
                Tensor& dst = n.parents[side]->grad;
                for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
            }
            break;
        }
        case OpKind::sub: {
            Tensor& da = n.parents[0]->grad;
            Tensor& db = n.parents[1]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                da[i] += g[i];
                db[i] -= g[i];
            }
            break;
        }
        case OpKind::mul_elementwise: {
            Node& a = *n.parents[0];
            Node& b = *n.parents[1];
            for (std::size_t i = 0; i < g.size(); ++i) {
                a.grad[i] += g[i] * b.value[i];
                b.grad[i] += g[i] * a.value[i];
            }
            break;
        }
        case OpKind::linear: {
            Node& x = *n.parents[0];
            Node& w = *n.parents[1];
            Node& b = *n.parents[2];
            mm_nt_acc(g, w.value, x.grad);
            mm_tn_acc(x.value, g, w.grad);
            const std::size_t rows = g.rows(), cols = g.cols();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) b.grad[j] += g.at(i, j);
            break;
        }
        case OpKind::sigmoid: {
            Tensor& dx = n.parents[0]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value[i];
                dx[i] += g[i] * y * (1.0 - y);
            }
            break;
        }
        case OpKind::tanh: {
            Tensor& dx = n.parents[0]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value[i];
                dx[i] += g[i] * (1.0 - y * y);
            }
            break;
        }
        case OpKind::relu: {
            Node& x = *n.parents[0];
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.value[i] > 0.0) x.grad[i] += g[i];
            break;
        }
        case OpKind::exp: {
            Tensor& dx = n.parents[0]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * n.value[i];
            break;
        }
        case OpKind::sqrt: {
            Tensor& dx = n.parents[0]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * 0.5 / n.value[i];
            break;
        }
        case OpKind::div_elementwise: {
            Node& a = *n.parents[0];
            Node& b = *n.parents[1];
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double bv = b.value[i];
                a.grad[i] += g[i] / bv;
                b.grad[i] -= g[i] * n.value[i] / bv;
            }
            break;
        }
        case OpKind::softmax_rows: {
            Tensor& dx = n.parents[0]->grad;
            const std::size_t rows = n.value.rows(), cols = n.value.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* y = &n.value.data[i * cols];
                const double* gr = &g.data[i * cols];
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
                double* dst = &dx.data[i * cols];
                for (std::size_t j = 0; j < cols; ++j) dst[j] += y[j] * (gr[j] - dot);
            }
            break;
        }
        case OpKind::concat_features: {
            const std::size_t rows = n.value.rows(), total = n.value.cols();
            std::size_t col0 = 0;
            for (const NodePtr& p : n.parents) {
                const std::size_t w = p->value.cols();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        p->grad.at(i, j) += g.data[i * total + col0 + j];
                col0 += w;
            }
            break;
        }
        case OpKind::l1_norm_rows: {
            Node& x = *n.parents[0];
            const std::size_t rows = x.value.rows(), cols = x.value.cols();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    x.grad.at(i, j) += g[i] * sign_of(x.value.at(i, j));
            break;
        }
        case OpKind::sq_l2_norm_rows: {
            Node& x = *n.parents[0];
            const std::size_t rows = x.value.rows(), cols = x.value.cols();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    x.grad.at(i, j) += g[i] * 2.0 * x.value.at(i, j);
            break;
        }
        case OpKind::sum_rows: {
            Node& x = *n.parents[0];
            const std::size_t rows = x.value.rows(), cols = x.value.cols();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) x.grad.at(i, j) += g[i];
            break;
        }
        case OpKind::abs: {
            Node& x = *n.parents[0];
            for (std::size_t i = 0; i < g.size(); ++i)
                x.grad[i] += g[i] * sign_of(x.value[i]);
            break;
        }
        case OpKind::mean_all: {
            Tensor& dx = n.parents[0]->grad;
            const double w = g[0] / static_cast<double>(dx.size());
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += w;
            break;
        }
        case OpKind::scale: {
            Tensor& dx = n.parents[0]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * n.attr_scalar;
            break;
        }
        case OpKind::shift: {
            Tensor& dx = n.parents[0]->grad;
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
            break;
        }
        case OpKind::gather_rows: {
            Node& m = *n.parents[0];
            const std::size_t cols = m.value.cols();
            for (std::size_t r = 0; r < n.attr_indices.size(); ++r) {
                double* dst = &m.grad.data[n.attr_indices[r] * cols];
                const double* src = &g.data[r * cols];
                for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
            }
            break;
        }
    }
}

}  // namespace

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::matmul_nt: return "matmul_nt";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul_elementwise: return "mul_elementwise";
        case OpKind::linear: return "linear";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::tanh: return "tanh";
        case OpKind::relu: return "relu";
        case OpKind::exp: return "exp";
        case OpKind::sqrt: return "sqrt";
        case OpKind::div_elementwise: return "div_elementwise";
        case OpKind::softmax_rows: return "softmax_rows";
        case OpKind::concat_features: return "concat_features";
        case OpKind::l1_norm_rows: return "l1_norm_rows";
        case OpKind::sq_l2_norm_rows: return "sq_l2_norm_rows";
        case OpKind::sum_rows: return "sum_rows";
        case OpKind::abs: return "abs";
        case OpKind::mean_all: return "mean_all";
        case OpKind::scale: return "scale";
        case OpKind::shift: return "shift";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::stop_grad: return "stop_grad";
    }
    return "?";
}

NodePtr leaf(Tensor value) { return std::make_shared<Node>(std::move(value)); }

NodePtr constant(Tensor value) { return leaf(std::move(value)); }

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    require_matmul(a->value, b->value, a->value.cols(), b->value.rows(), "matmul");
    Tensor out({a->value.rows(), b->value.cols()});
    mm_acc(a->value, b->value, out);
    return make_node(std::move(out), OpKind::matmul, {a, b});
}

NodePtr matmul_nt(const NodePtr& a, const NodePtr& b) {
    require_matmul(a->value, b->value, a->value.cols(), b->value.cols(), "matmul_nt");
    Tensor out({a->value.rows(), b->value.rows()});
    mm_nt_acc(a->value, b->value, out);
    return make_node(std::move(out), OpKind::matmul_nt, {a, b});
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return make_node(std::move(out), OpKind::add, {a, b});
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
    return make_node(std::move(out), OpKind::sub, {a, b});
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a->value, b->value, "mul_elementwise");
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    return make_node(std::move(out), OpKind::mul_elementwise, {a, b});
}

NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
    require_matmul(x->value, w->value, x->value.cols(), w->value.rows(), "linear");
    require_rank(b->value, 1, "linear");
    if (b->value.shape[0] != w->value.cols()) {
        throw DimensionError("linear: bias extent " + shape_str(b->value.shape) +
                             " does not match weight " + shape_str(w->value.shape));
    }
    const std::size_t rows = x->value.rows(), cols = w->value.cols();
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = b->value[j];
    mm_acc(x->value, w->value, out);
    return make_node(std::move(out), OpKind::linear, {x, w, b});
}

NodePtr sigmoid(const NodePtr& x) {
    return elementwise(x, OpKind::sigmoid, +[](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

NodePtr tanh(const NodePtr& x) {
    return elementwise(x, OpKind::tanh, +[](double v) { return std::tanh(v); });
}

NodePtr relu(const NodePtr& x) {
    return elementwise(x, OpKind::relu, +[](double v) { return v > 0.0 ? v : 0.0; });
}

NodePtr max_with_zero(const NodePtr& x) { return relu(x); }

NodePtr exp(const NodePtr& x) {
    return elementwise(x, OpKind::exp, +[](double v) { return std::exp(v); });
}

NodePtr sqrt(const NodePtr& x) {
    return elementwise(x, OpKind::sqrt, +[](double v) { return std::sqrt(v); });
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a->value, b->value, "div_elementwise");
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] / b->value[i];
    return make_node(std::move(out), OpKind::div_elementwise, {a, b});
}

NodePtr softmax_rows(const NodePtr& x) {
    require_rank(x->value, 2, "softmax_rows");
    const std::size_t rows = x->value.rows(), cols = x->value.cols();
    if (cols == 0) throw DomainError("softmax_rows: empty row");
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = &x->value.data[i * cols];
        double* dst = &out.data[i * cols];
        double mx = src[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, src[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < cols; ++j) dst[j] /= sum;
    }
    return make_node(std::move(out), OpKind::softmax_rows, {x});
}

NodePtr concat_features(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw ContractError("concat_features: no inputs");
    const std::size_t rows = parts[0]->value.rows();
    std::size_t total = 0;
    for (const NodePtr& p : parts) {
        require_rank(p->value, 2, "concat_features");
        if (p->value.rows() != rows) {
            throw DimensionError("concat_features: row counts disagree, " +
                                 shape_str(parts[0]->value.shape) + " vs " +
                                 shape_str(p->value.shape));
        }
        total += p->value.cols();
    }
    Tensor out({rows, total});
    std::size_t col0 = 0;
    for (const NodePtr& p : parts) {
        const std::size_t w = p->value.cols();
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < w; ++j) out.data[i * total + col0 + j] = p->value.at(i, j);
        col0 += w;
    }
    return make_node(std::move(out), OpKind::concat_features, parts);
}

NodePtr l1_norm_rows(const NodePtr& x) {
    require_rank(x->value, 2, "l1_norm_rows");
    const std::size_t rows = x->value.rows(), cols = x->value.cols();
    Tensor out({rows});
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += std::abs(x->value.at(i, j));
        out[i] = s;
    }
    return make_node(std::move(out), OpKind::l1_norm_rows, {x});
}

NodePtr sq_l2_norm_rows(const NodePtr& x) {
    require_rank(x->value, 2, "sq_l2_norm_rows");
    const std::size_t rows = x->value.rows(), cols = x->value.cols();
    Tensor out({rows});
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = x->value.at(i, j);
            s += v * v;
        }
        out[i] = s;
    }
    return make_node(std::move(out), OpKind::sq_l2_norm_rows, {x});
}

NodePtr sum_rows(const NodePtr& x) {
    require_rank(x->value, 2, "sum_rows");
    const std::size_t rows = x->value.rows(), cols = x->value.cols();
    Tensor out({rows});
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += x->value.at(i, j);
        out[i] = s;
    }
    return make_node(std::move(out), OpKind::sum_rows, {x});
}

NodePtr abs(const NodePtr& x) {
    return elementwise(x, OpKind::abs, +[](double v) { return std::abs(v); });
}

NodePtr mean_all(const NodePtr& x) {
    if (x->value.size() == 0) throw ContractError("mean_all: empty tensor");
    double s = 0.0;
    for (double v : x->value.data) s += v;
    return make_node(Tensor::scalar(s / static_cast<double>(x->value.size())), OpKind::mean_all,
                     {x});
}

NodePtr scale(const NodePtr& x, double factor) {
    Tensor out(x->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * factor;
    auto n = make_node(std::move(out), OpKind::scale, {x});
    n->attr_scalar = factor;
    return n;
}

NodePtr shift(const NodePtr& x, double offset) {
    Tensor out(x->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] + offset;
    auto n = make_node(std::move(out), OpKind::shift, {x});
    n->attr_scalar = offset;
    return n;
}

NodePtr gather_rows(const NodePtr& m, std::vector<std::size_t> indices) {
    require_rank(m->value, 2, "gather_rows");
    const std::size_t src_rows = m->value.rows(), cols = m->value.cols();
    for (std::size_t idx : indices) {
        if (idx >= src_rows) {
            throw ContractError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                                shape_str(m->value.shape));
        }
    }
    Tensor out({indices.size(), cols});
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (std::size_t j = 0; j < cols; ++j) out.at(r, j) = m->value.at(indices[r], j);
    auto n = make_node(std::move(out), OpKind::gather_rows, {m});
    n->attr_indices = std::move(indices);
    return n;
}

namespace {

struct StopTapeState {
    bool active = false;
    StopTapeMode mode = StopTapeMode::record;
    std::vector<Tensor>* storage = nullptr;
    std::size_t cursor = 0;
};

thread_local StopTapeState g_stop_tape;

}  // namespace

StopTape::StopTape(StopTapeMode mode, std::vector<Tensor>* storage) {
    if (g_stop_tape.active) throw ContractError("stop tape: already active");
    g_stop_tape = {true, mode, storage, 0};
    if (mode == StopTapeMode::record) storage->clear();
}

StopTape::~StopTape() { g_stop_tape = {}; }

NodePtr stop_gradient(const NodePtr& x) {
    Tensor value = x->value;
    if (g_stop_tape.active) {
        if (g_stop_tape.mode == StopTapeMode::record) {
            g_stop_tape.storage->push_back(value);
        } else {
            if (g_stop_tape.cursor >= g_stop_tape.storage->size()) {
                throw ContractError("stop tape: playback exhausted, graph structure changed");
            }
            value = (*g_stop_tape.storage)[g_stop_tape.cursor++];
        }
    }
    auto n = std::make_shared<Node>(std::move(value), OpKind::stop_grad);
    n->stop = true;
    n->parents = {x};
    return n;
}

void backward(const NodePtr& root) {
    if (shape_numel(root->value.shape) != 1) {
        throw ContractError("backward: root must be scalar-shaped, got " +
                            shape_str(root->value.shape));
    }

    // Iterative post-order DFS; parents visited in insertion order so the
    // resulting topological order is deterministic. Visit stamps avoid a
    // per-node hash lookup.
    static thread_local std::uint64_t mark_counter = 0;
    const std::uint64_t mark = ++mark_counter;
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.reserve(64);
    stack.emplace_back(root.get(), 0);
    root->visit_mark = mark;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->visit_mark != mark) {
                parent->visit_mark = mark;
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->zero_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->stop) backward_step(*n);
    }
}

}  // namespace stssdl
