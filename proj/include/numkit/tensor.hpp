#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "numkit/errors.hpp"

namespace numkit {

// Dense row-major tensor of 64-bit floats. Rank 1 and 2 cover everything
// the layer algebra needs; a rank-1 tensor acts as a single row.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty unless a tape allocated it

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(int rows, int cols);
    static Tensor zeros_like(const Tensor& other);
    static Tensor full(int rows, int cols, double value);
    static Tensor identity(int n);
    static Tensor scalar(double value);
    static Tensor row(std::vector<double> values);
    static Tensor column(std::vector<double> values);
    static Tensor matrix(int rows, int cols, std::vector<double> values);

    int rows() const { return shape.size() == 1 ? 1 : shape[0]; }
    int cols() const { return shape.size() == 1 ? shape[0] : shape[1]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    bool is_scalar() const { return data.size() == 1; }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    std::string shape_str() const;
};

bool all_finite(const std::vector<double>& values);

// Throws NumericError naming `where` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const std::string& where);

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& where);

// Glorot/Xavier uniform init over [-sqrt(6/(fan_in+fan_out)), +].
Tensor xavier_uniform(int rows, int cols, std::mt19937_64& rng);

Tensor gaussian(int rows, int cols, double mean, double stddev, std::mt19937_64& rng);

// Stable child-seed derivation so independent substreams never share state.
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag);

}  // namespace numkit
