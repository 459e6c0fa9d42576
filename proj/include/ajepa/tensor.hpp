#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "ajepa/errors.hpp"

namespace ajepa {

// Dense row-major tensor. Rank is dynamic but almost everything in this
// project is a matrix [rows x cols] or a vector.
template <typename T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> dims)
        : shape(std::move(dims)), v(element_count(shape), T(0)) {}

    static size_t element_count(const std::vector<size_t>& dims) {
        size_t n = 1;
        for (size_t d : dims) n *= d;
        return n;
    }

    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T& operator()(size_t i, size_t j) { return v[i * cols() + j]; }
    const T& operator()(size_t i, size_t j) const { return v[i * cols() + j]; }
    T& operator[](size_t i) { return v[i]; }
    const T& operator[](size_t i) const { return v[i]; }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

template <typename T, typename U>
Tensor<U> tensor_cast(const Tensor<T>& t) {
    Tensor<U> out(t.shape);
    for (size_t i = 0; i < t.size(); ++i) out.v[i] = static_cast<U>(t.v[i]);
    return out;
}

// Ordered collection of named tensors. Iteration order is insertion order,
// which fixes the (reproducibility-relevant) traversal order of parameters,
// gradients and optimizer moments.
template <typename T>
struct ParameterSet {
    struct Entry {
        std::string name;
        Tensor<T> tensor;
    };

    std::vector<Entry> entries;

    Tensor<T>& add(const std::string& name, std::vector<size_t> dims) {
        if (index_.count(name) != 0) throw Error("duplicate parameter name: " + name);
        index_[name] = entries.size();
        entries.push_back({name, Tensor<T>(std::move(dims))});
        return entries.back().tensor;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error("no parameter named: " + name);
        return entries[it->second].tensor;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error("no parameter named: " + name);
        return entries[it->second].tensor;
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.tensor.size();
        return n;
    }

    auto begin() { return entries.begin(); }
    auto end() { return entries.end(); }
    auto begin() const { return entries.begin(); }
    auto end() const { return entries.end(); }
    size_t size() const { return entries.size(); }

private:
    std::unordered_map<std::string, size_t> index_;
};

template <typename T, typename U>
ParameterSet<U> parameter_set_cast(const ParameterSet<T>& p) {
    ParameterSet<U> out;
    for (const auto& e : p.entries) {
        out.add(e.name, e.tensor.shape).v = tensor_cast<T, U>(e.tensor).v;
    }
    return out;
}

// y[n x p] = x[n x m] * w[m x p]; y must be pre-sized, it is overwritten.
template <typename T>
void matmul_nn(const T* x, const T* w, T* y, size_t n, size_t m, size_t p) {
    std::fill(y, y + n * p, T(0));
    for (size_t i = 0; i < n; ++i) {
        const T* xi = x + i * m;
        T* yi = y + i * p;
        for (size_t k = 0; k < m; ++k) {
            const T a = xi[k];
            const T* wk = w + k * p;
            for (size_t j = 0; j < p; ++j) yi[j] += a * wk[j];
        }
    }
}

// y[n x p] = x[n x m] * w^T where w is stored [p x m].
template <typename T>
void matmul_nt(const T* x, const T* w, T* y, size_t n, size_t m, size_t p) {
    for (size_t i = 0; i < n; ++i) {
        const T* xi = x + i * m;
        T* yi = y + i * p;
        for (size_t j = 0; j < p; ++j) {
            const T* wj = w + j * m;
            T acc = T(0);
            for (size_t k = 0; k < m; ++k) acc += xi[k] * wj[k];
            yi[j] = acc;
        }
    }
}

// y[m x p] += x^T * g where x is stored [n x m] and g is [n x p].
// Accumulating variant used for weight gradients.
template <typename T>
void matmul_tn_accum(const T* x, const T* g, T* y, size_t n, size_t m, size_t p) {
    for (size_t k = 0; k < n; ++k) {
        const T* xk = x + k * m;
        const T* gk = g + k * p;
        for (size_t i = 0; i < m; ++i) {
            const T a = xk[i];
            if (a == T(0)) continue;
            T* yi = y + i * p;
            for (size_t j = 0; j < p; ++j) yi[j] += a * gk[j];
        }
    }
}

}  // namespace ajepa
