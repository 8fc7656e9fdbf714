#pragma once

#include <span>
#include <vector>

#include "maflow/param_store.hpp"

namespace maflow {

// Reverse-mode tape over dense matrix-valued nodes.
//
// Values are row-major matrices held in one flat arena; scalars are 1x1.
// Candidate actions for one agent are evaluated as the rows of a single
// matrix, so an MLP pass over K candidates costs a handful of nodes instead
// of K separate chains. Parameters live in an external ParamStore and are
// the only differentiable leaves; network inputs enter as constants.
//
// Nodes are appended in topological order (inputs always precede users) and
// replay() recomputes every cached value from the leaves in that order.
// A tape is single-threaded; distinct tapes over the same (read-only) store
// may run concurrently.
class Tape {
public:
    explicit Tape(const ParamStore* store = nullptr) : store_(store) {}

    // Leaf: copies data (rows*cols, row-major) into the arena.
    int const_matrix(int rows, int cols, const double* data);

    // y = x * W^T + b with W (out x in, row-major) and b (out) taken from
    // the bound ParamStore at the given offsets.
    int linear(int x, size_t w_offset, size_t b_offset, int in_dim, int out_dim);

    int tanh_act(int x);
    int relu_act(int x);

    // (K x 1) -> 1x1: log sum_k exp(x_k), max-shifted.
    int logsumexp_col(int x);

    // Sum of 1x1 nodes.
    int sum_scalars(std::span<const int> nodes);

    int sub(int a, int b);     // 1x1 nodes
    int square(int a);         // 1x1 node
    int scale(int a, double k);

    // 1x1 -> 1x1: log(c + exp(x)), c > 0, overflow-safe in both directions.
    int log_add_exp(double c, int x);

    // Sum of squared differences against a constant target, divided by the
    // number of rows: (1/K) * sum_{k,c} (pred[k,c] - t[k,c])^2.
    int mean_sq_error(int pred, const double* target);

    void mark_output(int node);

    int rows(int node) const { return nodes_[node].rows; }
    int cols(int node) const { return nodes_[node].cols; }
    double value(int node) const;                 // 1x1 nodes
    std::span<const double> values(int node) const;

    size_t node_count() const { return nodes_.size(); }

    // Accumulates d(output)/d(param) into grad_out (size = store size).
    // Requires exactly one marked output, which must be scalar.
    void backward(std::span<double> grad_out, double seed_grad = 1.0);

    // Recomputes all cached values from the leaves in tape order.
    void replay();

    void reset();

    const ParamStore* store() const { return store_; }

private:
    enum class Op : uint8_t {
        kConst,
        kLinear,
        kTanh,
        kRelu,
        kLogSumExpCol,
        kSumScalars,
        kSub,
        kSquare,
        kScale,
        kLogAddExp,
        kMeanSqError,
    };

    struct Node {
        Op op;
        int in0 = -1;
        int in1 = -1;
        int rows = 0;
        int cols = 0;
        size_t val = 0;   // offset into vals_
        size_t aux = 0;   // offset into extra_in_ or const_data_
        int aux_n = 0;
        size_t w_off = 0; // linear
        size_t b_off = 0;
        int in_dim = 0;
        int out_dim = 0;
        double c = 0.0;   // constant for kScale / kLogAddExp
    };

    int push(Node n);
    void compute(const Node& n, double* out);
    double* val_ptr(const Node& n) { return vals_.data() + n.val; }
    const double* val_ptr(const Node& n) const { return vals_.data() + n.val; }

    const ParamStore* store_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> adjoints_;
    std::vector<int> extra_in_;       // variadic scalar inputs
    std::vector<double> const_data_;  // targets for kMeanSqError
    std::vector<int> outputs_;
};

}  // namespace maflow
