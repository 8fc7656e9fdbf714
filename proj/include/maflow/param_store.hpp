#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maflow/errors.hpp"

namespace maflow {

// Flat storage for every trainable parameter in a model bundle, with a
// parallel gradient buffer. Networks hold (offset, size) segments into it.
class ParamStore {
public:
    struct Segment {
        std::string name;
        size_t offset = 0;
        size_t size = 0;
    };

    size_t add_segment(const std::string& name, size_t size) {
        const size_t offset = values_.size();
        segments_.push_back({name, offset, size});
        values_.resize(offset + size, 0.0);
        grads_.resize(offset + size, 0.0);
        return offset;
    }

    const Segment& segment(const std::string& name) const {
        for (const auto& s : segments_) {
            if (s.name == name) return s;
        }
        throw UsageError("parameter segment not found: " + name);
    }

    const std::vector<Segment>& segments() const { return segments_; }

    size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> grads() { return grads_; }
    std::span<const double> grads() const { return grads_; }

    double* value_ptr(size_t offset) { return values_.data() + offset; }
    const double* value_ptr(size_t offset) const { return values_.data() + offset; }

    void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

private:
    std::vector<Segment> segments_;
    std::vector<double> values_;
    std::vector<double> grads_;
};

}  // namespace maflow
