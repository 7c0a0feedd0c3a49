#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace segtrack {

// Dense N-d array, row-major (C order). Channel-major images are [C,H,W].
template <typename Scalar>
class Tensor {
public:
    using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstMatrixMap =
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.setZero(numel(shape_));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor from_data(std::vector<int> shape, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> data) {
        if (data.size() != numel(shape))
            throw std::invalid_argument("Tensor::from_data: size mismatch");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    Eigen::Index size() const { return data_.size(); }
    bool empty() const { return data_.size() == 0; }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& vec() { return data_; }
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& vec() const { return data_; }

    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> array() {
        return {data_.data(), data_.size()};
    }
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> array() const {
        return {data_.data(), data_.size()};
    }

    // 3-d accessors for [C,H,W] tensors.
    Scalar& operator()(int c, int y, int x) {
        assert(rank() == 3);
        return data_[(static_cast<Eigen::Index>(c) * shape_[1] + y) * shape_[2] + x];
    }
    const Scalar& operator()(int c, int y, int x) const {
        assert(rank() == 3);
        return data_[(static_cast<Eigen::Index>(c) * shape_[1] + y) * shape_[2] + x];
    }

    Scalar& operator[](Eigen::Index i) { return data_[i]; }
    Scalar operator[](Eigen::Index i) const { return data_[i]; }

    // View of one channel of a [C,H,W] tensor as an HxW matrix.
    MatrixMap channel(int c) {
        assert(rank() == 3);
        return MatrixMap(data_.data() + static_cast<Eigen::Index>(c) * shape_[1] * shape_[2],
                         shape_[1], shape_[2]);
    }
    ConstMatrixMap channel(int c) const {
        assert(rank() == 3);
        return ConstMatrixMap(data_.data() + static_cast<Eigen::Index>(c) * shape_[1] * shape_[2],
                              shape_[1], shape_[2]);
    }

    // View of a [C,H,W] tensor as a C x (H*W) matrix (one row per channel).
    MatrixMap as_channel_matrix() {
        assert(rank() == 3);
        return MatrixMap(data_.data(), shape_[0], static_cast<Eigen::Index>(shape_[1]) * shape_[2]);
    }
    ConstMatrixMap as_channel_matrix() const {
        assert(rank() == 3);
        return ConstMatrixMap(data_.data(), shape_[0],
                              static_cast<Eigen::Index>(shape_[1]) * shape_[2]);
    }

    void set_zero() { data_.setZero(); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const { return data_.allFinite(); }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> t;
        t = Tensor<Other>::from_data(shape_, data_.template cast<Other>());
        return t;
    }

    static Eigen::Index numel(const std::vector<int>& shape) {
        Eigen::Index n = 1;
        for (int e : shape) {
            if (e <= 0) throw std::invalid_argument("Tensor: non-positive extent");
            n *= e;
        }
        return n;
    }

private:
    std::vector<int> shape_;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace segtrack
