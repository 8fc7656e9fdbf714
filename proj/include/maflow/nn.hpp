#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maflow/autodiff.hpp"
#include "maflow/param_store.hpp"
#include "maflow/rng.hpp"

namespace maflow {

enum class Activation { tanh, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected net over a ParamStore segment. Layer l holds W (dims[l+1]
// x dims[l], row-major) followed by b (dims[l+1]); hidden layers apply the
// activation, the last layer is linear.
class Mlp {
public:
    Mlp() = default;

    // Allocates a fresh segment in the store. dims = {in, hidden..., out}.
    static Mlp create(ParamStore& store, const std::string& name,
                      std::vector<int> dims, Activation act);

    // Reattaches to an existing segment (checkpoint load).
    static Mlp attach(ParamStore& store, const std::string& name,
                      std::vector<int> dims, Activation act);

    // Per-layer uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
    void init_uniform(RngStream& rng);

    // Appends this net's ops to a tape; input_node must be (K x dims[0]).
    int emit(Tape& tape, int input_node) const;

    // Single forward pass. The returned tape records the whole evaluation.
    std::pair<std::vector<double>, Tape> forward(std::span<const double> input) const;

    // Forward without keeping a tape, for hot read-only paths.
    void forward_into(std::span<const double> input, std::span<double> out,
                      std::vector<double>& scratch) const;

    const std::vector<int>& dims() const { return dims_; }
    Activation activation() const { return act_; }
    size_t param_offset() const { return offset_; }
    size_t param_count() const { return count_; }
    const std::string& name() const { return name_; }
    const ParamStore* store() const { return store_; }

    static size_t param_count_for(const std::vector<int>& dims);

private:
    ParamStore* store_ = nullptr;
    std::string name_;
    std::vector<int> dims_;
    Activation act_ = Activation::tanh;
    size_t offset_ = 0;
    size_t count_ = 0;
};

// Adam with bias correction. lr default 3e-4.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step_count = 0;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;

    explicit AdamState(size_t n = 0, double lr_ = 3e-4)
        : m(n, 0.0), v(n, 0.0), lr(lr_) {}
};

// Throws DivergedError (naming the offending index) on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace maflow
