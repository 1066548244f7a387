#include "numkit/tensor.hpp"

#include <cmath>
#include <sstream>

namespace numkit {

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    std::int64_t n = 1;
    for (int dim : shape) {
        if (dim <= 0) throw NumericError("Tensor: non-positive dimension in shape " + shape_str());
        n *= dim;
    }
    if (n != size()) {
        std::ostringstream os;
        os << "Tensor: shape " << shape_str() << " expects " << n << " values, got " << data.size();
        throw NumericError(os.str());
    }
}

Tensor Tensor::zeros(int rows, int cols) {
    return Tensor({rows, cols}, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0));
}

Tensor Tensor::zeros_like(const Tensor& other) {
    return Tensor(other.shape, std::vector<double>(other.data.size(), 0.0));
}

Tensor Tensor::full(int rows, int cols, double value) {
    return Tensor({rows, cols}, std::vector<double>(static_cast<std::size_t>(rows) * cols, value));
}

Tensor Tensor::identity(int n) {
    Tensor t = zeros(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({n, 1}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

bool all_finite(const std::vector<double>& values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Tensor& t, const std::string& where) {
    if (!all_finite(t.data)) throw NumericError(where + ": non-finite value in tensor " + t.shape_str());
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& where) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw NumericError(where + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Tensor xavier_uniform(int rows, int cols, std::mt19937_64& rng) {
    double bound = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::zeros(rows, cols);
    for (double& v : t.data) v = dist(rng);
    return t;
}

Tensor gaussian(int rows, int cols, double mean, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    Tensor t = Tensor::zeros(rows, cols);
    for (double& v : t.data) v = dist(rng);
    return t;
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
    // FNV-1a over the tag, mixed with the base seed.
    std::uint64_t h = 14695981039346656037ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace numkit
