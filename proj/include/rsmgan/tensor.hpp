#ifndef RSMGAN_TENSOR_HPP
#define RSMGAN_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsmgan {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major double tensor of arbitrary rank. All model math flows
/// through Eigen maps over the flat buffer.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<long> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<long> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<long>(data_.size()) != count(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<long> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor ones(std::vector<long> shape) { return full(std::move(shape), 1.0); }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<long>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    long dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    long numel() const { return static_cast<long>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    // Row-major index helpers for the common ranks.
    double& at2(long i, long j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double at2(long i, long j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double& at3(long a, long b, long c) {
        return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
    }
    double at3(long a, long b, long c) const {
        return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
    }
    double& at4(long a, long b, long c, long d) {
        return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }
    double at4(long a, long b, long c, long d) const {
        return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }

    Eigen::Map<RowMat> mat(long rows, long cols) {
        if (rows * cols != numel()) throw std::invalid_argument("Tensor::mat: bad view size");
        return Eigen::Map<RowMat>(data_.data(), rows, cols);
    }
    Eigen::Map<const RowMat> mat(long rows, long cols) const {
        if (rows * cols != numel()) throw std::invalid_argument("Tensor::mat: bad view size");
        return Eigen::Map<const RowMat>(data_.data(), rows, cols);
    }

    Eigen::Map<Eigen::ArrayXd> array() {
        return Eigen::Map<Eigen::ArrayXd>(data_.data(), numel());
    }
    Eigen::Map<const Eigen::ArrayXd> array() const {
        return Eigen::Map<const Eigen::ArrayXd>(data_.data(), numel());
    }

    Tensor reshaped(std::vector<long> shape) const {
        if (count(shape) != numel()) throw std::invalid_argument("Tensor::reshaped: size mismatch");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static long count(const std::vector<long>& shape) {
        long n = 1;
        for (long d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static std::string shape_str(const std::vector<long>& shape) {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }

private:
    std::vector<long> shape_;
    std::vector<double> data_;
};

} // namespace rsmgan

#endif
