#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "divrank/matrix.hpp"

namespace divrank {

struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
};

/// Named parameters with gradient accumulators of identical shape.
/// Insertion order is stable and defines serialization order.
class ParamStore {
public:
    Param& add(const std::string& name, Matrix value);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Matrix& value(const std::string& name);
    const Matrix& value(const std::string& name) const;
    Matrix& grad(const std::string& name);
    const Matrix& grad(const std::string& name) const;

    std::vector<Param>& params() noexcept { return params_; }
    const std::vector<Param>& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t total_elements() const;

    void zero_grad();
    void scale_grad(double s);
    bool all_finite() const;

    // Equal names, shapes and values (gradients ignored).
    bool same_values(const ParamStore& other) const;

private:
    std::size_t index_of(const std::string& name) const;

    std::vector<Param> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over every parameter of one store. Moment buffers are bound to the
/// store layout at construction.
class Adam {
public:
    Adam(const ParamStore& params, AdamConfig cfg);

    void step(ParamStore& params);
    long steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

}  // namespace divrank
