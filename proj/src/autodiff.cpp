#include "maflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "maflow/errors.hpp"

namespace maflow {

int Tape::push(Node n) {
    n.val = vals_.size();
    vals_.resize(n.val + static_cast<size_t>(n.rows) * n.cols, 0.0);
    nodes_.push_back(n);
    const int id = static_cast<int>(nodes_.size()) - 1;
    compute(nodes_[id], vals_.data() + nodes_[id].val);
    return id;
}

int Tape::const_matrix(int rows, int cols, const double* data) {
    Node n;
    n.op = Op::kConst;
    n.rows = rows;
    n.cols = cols;
    n.val = vals_.size();
    vals_.insert(vals_.end(), data, data + static_cast<size_t>(rows) * cols);
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::linear(int x, size_t w_offset, size_t b_offset, int in_dim, int out_dim) {
    if (store_ == nullptr) throw UsageError("linear() on a tape with no parameter store");
    if (nodes_[x].cols != in_dim) throw ConfigError("linear(): input width mismatch");
    Node n;
    n.op = Op::kLinear;
    n.in0 = x;
    n.rows = nodes_[x].rows;
    n.cols = out_dim;
    n.w_off = w_offset;
    n.b_off = b_offset;
    n.in_dim = in_dim;
    n.out_dim = out_dim;
    return push(n);
}

int Tape::tanh_act(int x) {
    Node n;
    n.op = Op::kTanh;
    n.in0 = x;
    n.rows = nodes_[x].rows;
    n.cols = nodes_[x].cols;
    return push(n);
}

int Tape::relu_act(int x) {
    Node n;
    n.op = Op::kRelu;
    n.in0 = x;
    n.rows = nodes_[x].rows;
    n.cols = nodes_[x].cols;
    return push(n);
}

int Tape::logsumexp_col(int x) {
    if (nodes_[x].cols != 1) throw UsageError("logsumexp_col(): input must be a column");
    Node n;
    n.op = Op::kLogSumExpCol;
    n.in0 = x;
    n.rows = 1;
    n.cols = 1;
    return push(n);
}

int Tape::sum_scalars(std::span<const int> nodes) {
    for (int id : nodes) {
        if (nodes_[id].rows != 1 || nodes_[id].cols != 1) {
            throw UsageError("sum_scalars(): all inputs must be scalar");
        }
    }
    Node n;
    n.op = Op::kSumScalars;
    n.rows = 1;
    n.cols = 1;
    n.aux = extra_in_.size();
    n.aux_n = static_cast<int>(nodes.size());
    extra_in_.insert(extra_in_.end(), nodes.begin(), nodes.end());
    return push(n);
}

int Tape::sub(int a, int b) {
    Node n;
    n.op = Op::kSub;
    n.in0 = a;
    n.in1 = b;
    n.rows = 1;
    n.cols = 1;
    return push(n);
}

int Tape::square(int a) {
    Node n;
    n.op = Op::kSquare;
    n.in0 = a;
    n.rows = 1;
    n.cols = 1;
    return push(n);
}

int Tape::scale(int a, double k) {
    Node n;
    n.op = Op::kScale;
    n.in0 = a;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    n.c = k;
    return push(n);
}

int Tape::log_add_exp(double c, int x) {
    if (c <= 0.0) throw UsageError("log_add_exp(): constant must be positive");
    Node n;
    n.op = Op::kLogAddExp;
    n.in0 = x;
    n.rows = 1;
    n.cols = 1;
    n.c = c;
    return push(n);
}

int Tape::mean_sq_error(int pred, const double* target) {
    Node n;
    n.op = Op::kMeanSqError;
    n.in0 = pred;
    n.rows = 1;
    n.cols = 1;
    n.aux = const_data_.size();
    const size_t count = static_cast<size_t>(nodes_[pred].rows) * nodes_[pred].cols;
    n.aux_n = static_cast<int>(count);
    const_data_.insert(const_data_.end(), target, target + count);
    return push(n);
}

void Tape::mark_output(int node) { outputs_.push_back(node); }

double Tape::value(int node) const {
    const Node& n = nodes_[node];
    if (n.rows != 1 || n.cols != 1) throw UsageError("value(): node is not scalar");
    return vals_[n.val];
}

std::span<const double> Tape::values(int node) const {
    const Node& n = nodes_[node];
    return {vals_.data() + n.val, static_cast<size_t>(n.rows) * n.cols};
}

void Tape::compute(const Node& n, double* out) {
    switch (n.op) {
        case Op::kConst:
            break;
        case Op::kLinear: {
            const Node& x = nodes_[n.in0];
            const double* xv = val_ptr(x);
            const double* w = store_->values().data() + n.w_off;
            const double* b = store_->values().data() + n.b_off;
            for (int k = 0; k < n.rows; ++k) {
                const double* xr = xv + static_cast<size_t>(k) * n.in_dim;
                double* yr = out + static_cast<size_t>(k) * n.out_dim;
                for (int o = 0; o < n.out_dim; ++o) {
                    const double* wr = w + static_cast<size_t>(o) * n.in_dim;
                    double acc = b[o];
                    for (int i = 0; i < n.in_dim; ++i) acc += xr[i] * wr[i];
                    yr[o] = acc;
                }
            }
            break;
        }
        case Op::kTanh: {
            const double* xv = val_ptr(nodes_[n.in0]);
            const size_t count = static_cast<size_t>(n.rows) * n.cols;
            for (size_t i = 0; i < count; ++i) out[i] = std::tanh(xv[i]);
            break;
        }
        case Op::kRelu: {
            const double* xv = val_ptr(nodes_[n.in0]);
            const size_t count = static_cast<size_t>(n.rows) * n.cols;
            for (size_t i = 0; i < count; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
            break;
        }
        case Op::kLogSumExpCol: {
            const Node& x = nodes_[n.in0];
            const double* xv = val_ptr(x);
            double m = xv[0];
            for (int k = 1; k < x.rows; ++k) m = std::max(m, xv[k]);
            double s = 0.0;
            for (int k = 0; k < x.rows; ++k) s += std::exp(xv[k] - m);
            out[0] = m + std::log(s);
            break;
        }
        case Op::kSumScalars: {
            double s = 0.0;
            for (int j = 0; j < n.aux_n; ++j) {
                s += vals_[nodes_[extra_in_[n.aux + j]].val];
            }
            out[0] = s;
            break;
        }
        case Op::kSub:
            out[0] = vals_[nodes_[n.in0].val] - vals_[nodes_[n.in1].val];
            break;
        case Op::kSquare: {
            const double v = vals_[nodes_[n.in0].val];
            out[0] = v * v;
            break;
        }
        case Op::kScale: {
            const double* xv = val_ptr(nodes_[n.in0]);
            const size_t count = static_cast<size_t>(n.rows) * n.cols;
            for (size_t i = 0; i < count; ++i) out[i] = n.c * xv[i];
            break;
        }
        case Op::kLogAddExp: {
            // log(c + e^x) = m + log(e^{x-m} + e^{log c - m}), m = max(x, log c)
            const double x = vals_[nodes_[n.in0].val];
            const double lc = std::log(n.c);
            const double m = std::max(x, lc);
            out[0] = m + std::log(std::exp(x - m) + std::exp(lc - m));
            break;
        }
        case Op::kMeanSqError: {
            const Node& p = nodes_[n.in0];
            const double* pv = val_ptr(p);
            const double* tv = const_data_.data() + n.aux;
            double s = 0.0;
            const size_t count = static_cast<size_t>(p.rows) * p.cols;
            for (size_t i = 0; i < count; ++i) {
                const double d = pv[i] - tv[i];
                s += d * d;
            }
            out[0] = s / p.rows;
            break;
        }
    }
}

void Tape::replay() {
    for (auto& n : nodes_) compute(n, vals_.data() + n.val);
}

void Tape::backward(std::span<double> grad_out, double seed_grad) {
    if (outputs_.size() != 1) {
        throw UsageError("backward(): tape must have exactly one output");
    }
    const int out_id = outputs_[0];
    if (nodes_[out_id].rows != 1 || nodes_[out_id].cols != 1) {
        throw UsageError("backward(): output must be scalar");
    }
    if (store_ != nullptr && grad_out.size() != store_->size()) {
        throw UsageError("backward(): gradient buffer size mismatch");
    }

    adjoints_.assign(vals_.size(), 0.0);
    adjoints_[nodes_[out_id].val] = seed_grad;

    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        const Node& n = nodes_[id];
        const double* adj = adjoints_.data() + n.val;
        switch (n.op) {
            case Op::kConst:
                break;
            case Op::kLinear: {
                const Node& x = nodes_[n.in0];
                const double* xv = val_ptr(x);
                const double* w = store_->values().data() + n.w_off;
                double* dx = adjoints_.data() + x.val;
                for (int k = 0; k < n.rows; ++k) {
                    const double* ar = adj + static_cast<size_t>(k) * n.out_dim;
                    const double* xr = xv + static_cast<size_t>(k) * n.in_dim;
                    double* dxr = dx + static_cast<size_t>(k) * n.in_dim;
                    for (int o = 0; o < n.out_dim; ++o) {
                        const double a = ar[o];
                        if (a == 0.0) continue;
                        const double* wr = w + static_cast<size_t>(o) * n.in_dim;
                        double* gw = grad_out.data() + n.w_off + static_cast<size_t>(o) * n.in_dim;
                        for (int i = 0; i < n.in_dim; ++i) {
                            dxr[i] += a * wr[i];
                            gw[i] += a * xr[i];
                        }
                        grad_out[n.b_off + o] += a;
                    }
                }
                break;
            }
            case Op::kTanh: {
                const double* yv = val_ptr(n);
                double* dx = adjoints_.data() + nodes_[n.in0].val;
                const size_t count = static_cast<size_t>(n.rows) * n.cols;
                for (size_t i = 0; i < count; ++i) dx[i] += adj[i] * (1.0 - yv[i] * yv[i]);
                break;
            }
            case Op::kRelu: {
                const double* xv = val_ptr(nodes_[n.in0]);
                double* dx = adjoints_.data() + nodes_[n.in0].val;
                const size_t count = static_cast<size_t>(n.rows) * n.cols;
                for (size_t i = 0; i < count; ++i) {
                    if (xv[i] > 0.0) dx[i] += adj[i];
                }
                break;
            }
            case Op::kLogSumExpCol: {
                const Node& x = nodes_[n.in0];
                const double* xv = val_ptr(x);
                double* dx = adjoints_.data() + x.val;
                const double y = vals_[n.val];
                for (int k = 0; k < x.rows; ++k) dx[k] += adj[0] * std::exp(xv[k] - y);
                break;
            }
            case Op::kSumScalars: {
                for (int j = 0; j < n.aux_n; ++j) {
                    adjoints_[nodes_[extra_in_[n.aux + j]].val] += adj[0];
                }
                break;
            }
            case Op::kSub:
                adjoints_[nodes_[n.in0].val] += adj[0];
                adjoints_[nodes_[n.in1].val] -= adj[0];
                break;
            case Op::kSquare:
                adjoints_[nodes_[n.in0].val] += adj[0] * 2.0 * vals_[nodes_[n.in0].val];
                break;
            case Op::kScale: {
                double* dx = adjoints_.data() + nodes_[n.in0].val;
                const size_t count = static_cast<size_t>(n.rows) * n.cols;
                for (size_t i = 0; i < count; ++i) dx[i] += adj[i] * n.c;
                break;
            }
            case Op::kLogAddExp: {
                // d/dx log(c + e^x) = sigmoid(x - log c)
                const double x = vals_[nodes_[n.in0].val];
                const double z = x - std::log(n.c);
                const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                            : std::exp(z) / (1.0 + std::exp(z));
                adjoints_[nodes_[n.in0].val] += adj[0] * sig;
                break;
            }
            case Op::kMeanSqError: {
                const Node& p = nodes_[n.in0];
                const double* pv = val_ptr(p);
                const double* tv = const_data_.data() + n.aux;
                double* dx = adjoints_.data() + p.val;
                const double scale = 2.0 * adj[0] / p.rows;
                const size_t count = static_cast<size_t>(p.rows) * p.cols;
                for (size_t i = 0; i < count; ++i) dx[i] += scale * (pv[i] - tv[i]);
                break;
            }
        }
    }
}

void Tape::reset() {
    nodes_.clear();
    vals_.clear();
    adjoints_.clear();
    extra_in_.clear();
    const_data_.clear();
    outputs_.clear();
}

}  // namespace maflow
