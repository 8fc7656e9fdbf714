#include "maflow/nn.hpp"

#include <cmath>

#include "maflow/errors.hpp"

namespace maflow {

std::string to_string(Activation a) {
    return a == Activation::tanh ? "tanh" : "relu";
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation: " + s);
}

size_t Mlp::param_count_for(const std::vector<int>& dims) {
    size_t n = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        n += static_cast<size_t>(dims[l] + 1) * dims[l + 1];
    }
    return n;
}

Mlp Mlp::create(ParamStore& store, const std::string& name,
                std::vector<int> dims, Activation act) {
    if (dims.size() < 2) throw ConfigError("Mlp: need at least input and output dims");
    for (int d : dims) {
        if (d <= 0) throw ConfigError("Mlp: layer dims must be positive");
    }
    Mlp mlp;
    mlp.store_ = &store;
    mlp.name_ = name;
    mlp.dims_ = std::move(dims);
    mlp.act_ = act;
    mlp.count_ = param_count_for(mlp.dims_);
    mlp.offset_ = store.add_segment(name, mlp.count_);
    return mlp;
}

Mlp Mlp::attach(ParamStore& store, const std::string& name,
                std::vector<int> dims, Activation act) {
    const auto& seg = store.segment(name);
    if (seg.size != param_count_for(dims)) {
        throw ConfigError("Mlp: segment size does not match dims for " + name);
    }
    Mlp mlp;
    mlp.store_ = &store;
    mlp.name_ = name;
    mlp.dims_ = std::move(dims);
    mlp.act_ = act;
    mlp.count_ = seg.size;
    mlp.offset_ = seg.offset;
    return mlp;
}

void Mlp::init_uniform(RngStream& rng) {
    double* p = store_->value_ptr(offset_);
    for (size_t l = 0; l + 1 < dims_.size(); ++l) {
        const int fan_in = dims_[l];
        const int fan_out = dims_[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int i = 0; i < fan_out * fan_in; ++i) *p++ = rng.uniform(-bound, bound);
        for (int i = 0; i < fan_out; ++i) *p++ = 0.0;
    }
}

int Mlp::emit(Tape& tape, int input_node) const {
    if (tape.cols(input_node) != dims_[0]) {
        throw ConfigError("Mlp::emit: input width " + std::to_string(tape.cols(input_node)) +
                          " != " + std::to_string(dims_[0]));
    }
    int node = input_node;
    size_t off = offset_;
    for (size_t l = 0; l + 1 < dims_.size(); ++l) {
        const int in = dims_[l];
        const int out = dims_[l + 1];
        const size_t w_off = off;
        const size_t b_off = off + static_cast<size_t>(out) * in;
        node = tape.linear(node, w_off, b_off, in, out);
        off = b_off + out;
        if (l + 2 < dims_.size()) {
            node = act_ == Activation::tanh ? tape.tanh_act(node) : tape.relu_act(node);
        }
    }
    return node;
}

std::pair<std::vector<double>, Tape> Mlp::forward(std::span<const double> input) const {
    if (static_cast<int>(input.size()) != dims_[0]) {
        throw ConfigError("Mlp::forward: input size mismatch");
    }
    Tape tape(store_);
    const int in_node = tape.const_matrix(1, dims_[0], input.data());
    const int out_node = emit(tape, in_node);
    tape.mark_output(out_node);
    auto vals = tape.values(out_node);
    return {std::vector<double>(vals.begin(), vals.end()), std::move(tape)};
}

void Mlp::forward_into(std::span<const double> input, std::span<double> out,
                       std::vector<double>& scratch) const {
    if (static_cast<int>(input.size()) != dims_[0]) {
        throw ConfigError("Mlp::forward_into: input size mismatch");
    }
    int max_dim = 0;
    for (int d : dims_) max_dim = std::max(max_dim, d);
    scratch.resize(2 * static_cast<size_t>(max_dim));
    double* cur = scratch.data();
    double* nxt = scratch.data() + max_dim;
    std::copy(input.begin(), input.end(), cur);

    const double* p = store_->value_ptr(offset_);
    for (size_t l = 0; l + 1 < dims_.size(); ++l) {
        const int in = dims_[l];
        const int n_out = dims_[l + 1];
        const double* w = p;
        const double* b = p + static_cast<size_t>(n_out) * in;
        for (int o = 0; o < n_out; ++o) {
            const double* wr = w + static_cast<size_t>(o) * in;
            double acc = b[o];
            for (int i = 0; i < in; ++i) acc += cur[i] * wr[i];
            nxt[o] = acc;
        }
        if (l + 2 < dims_.size()) {
            if (act_ == Activation::tanh) {
                for (int o = 0; o < n_out; ++o) nxt[o] = std::tanh(nxt[o]);
            } else {
                for (int o = 0; o < n_out; ++o) nxt[o] = nxt[o] > 0.0 ? nxt[o] : 0.0;
            }
        }
        std::swap(cur, nxt);
        p = b + n_out;
    }
    std::copy(cur, cur + dims_.back(), out.begin());
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw UsageError("adam_step: size mismatch");
    }
    for (size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw DivergedError("adam_step: non-finite gradient at index " + std::to_string(i));
        }
    }
    state.step_count += 1;
    const double b1t = std::pow(state.beta1, static_cast<double>(state.step_count));
    const double b2t = std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / (1.0 - b1t);
        const double v_hat = state.v[i] / (1.0 - b2t);
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_adam);
    }
}

}  // namespace maflow
