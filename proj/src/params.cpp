#include "divrank/params.hpp"

#include <cmath>

#include "divrank/error.hpp"

namespace divrank {

Param& ParamStore::add(const std::string& name, Matrix value) {
    require(!contains(name), "ParamStore: duplicate parameter '" + name + "'");
    Matrix g(value.rows(), value.cols());
    index_.emplace(name, params_.size());
    params_.push_back(Param{name, std::move(value), std::move(g)});
    return params_.back();
}

std::size_t ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

Matrix& ParamStore::value(const std::string& name) { return params_[index_of(name)].value; }
const Matrix& ParamStore::value(const std::string& name) const { return params_[index_of(name)].value; }
Matrix& ParamStore::grad(const std::string& name) { return params_[index_of(name)].grad; }
const Matrix& ParamStore::grad(const std::string& name) const { return params_[index_of(name)].grad; }

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double s) {
    for (auto& p : params_)
        for (double& g : p.grad.flat()) g *= s;
}

bool ParamStore::all_finite() const {
    for (const auto& p : params_)
        if (!p.value.all_finite()) return false;
    return true;
}

bool ParamStore::same_values(const ParamStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name) return false;
        if (!(params_[i].value == other.params_[i].value)) return false;
    }
    return true;
}

Adam::Adam(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params.params()) {
        m_.emplace_back(p.value.rows(), p.value.cols());
        v_.emplace_back(p.value.rows(), p.value.cols());
    }
}

void Adam::step(ParamStore& params) {
    require(params.size() == m_.size(), "Adam: parameter store layout changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        auto w = params.params()[i].value.flat();
        auto g = params.params()[i].grad.flat();
        auto m = m_[i].flat();
        auto v = v_[i].flat();
        require(w.size() == m.size(), "Adam: parameter shape changed");
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            w[j] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

}  // namespace divrank
