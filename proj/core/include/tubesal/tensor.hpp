// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tubesal/common.hpp"

namespace tubesal {

/// Dense row-major n-d array with optional participation in reverse-mode
/// autodiff. Copying a Tensor copies the handle; the payload (values and
/// gradient buffer) is shared. Use clone() for a detached deep copy.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t ndim() const;
    std::size_t numel() const;
    std::size_t extent(std::size_t axis) const;

    std::span<T> values();
    std::span<const T> values() const;

    bool requires_grad() const;
    void set_requires_grad(bool rg);
    /// Gradient buffer, allocated zero-filled on first access.
    std::span<T> grad();
    bool has_grad() const;
    void zero_grad();

    /// Value of a one-element tensor.
    T item() const;
    T& at(std::initializer_list<std::size_t> idx);
    T at(std::initializer_list<std::size_t> idx) const;

    /// Deep copy detached from any gradient history.
    Tensor clone() const;

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out{Shape(shape())};
        auto src = values();
        auto dst = out.values();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<U>(src[i]);
        return out;
    }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    struct Node {
        Shape shape;
        std::vector<T> value;
        std::vector<T> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Node> node_;

    Node& n();
    const Node& n() const;
};

/// Records backward closures during a forward pass and replays them in
/// reverse. One tape is active per thread at a time; ops consult
/// Tape::current() to decide whether to record.
template <typename T>
class Tape {
public:
    void record(std::function<void()> backward);
    /// Seeds d(loss)/d(loss) = 1 and runs all recorded closures in reverse.
    void backward(Tensor<T>& loss);
    void clear();
    std::size_t size() const { return ops_.size(); }

    static Tape* current() { return current_tape; }

    class Scope {
    public:
        explicit Scope(Tape& tape) : prev_(current_tape) { current_tape = &tape; }
        ~Scope() { current_tape = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

private:
    static inline thread_local Tape* current_tape = nullptr;
    std::vector<std::function<void()>> ops_;
};

/// True when a tape is active on this thread and the tensor feeds gradients.
template <typename T>
inline bool traced(const Tensor<T>& t) {
    return Tape<T>::current() != nullptr && t.requires_grad();
}

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace tubesal
