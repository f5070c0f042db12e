// SPDX-License-Identifier: Apache-2.0
#include "tubesal/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace tubesal {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << ")";
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> strides(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) strides[i - 1] = strides[i] * s[i];
    return strides;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) si = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::trunc_normal(double stddev, double clip) {
    double z;
    do {
        z = normal();
    } while (std::abs(z) > clip);
    return z * stddev;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (0x9E3779B97F4A7C15ull + (b << 6) + (b >> 2));
    std::uint64_t m = splitmix64(x);
    return m ^ b;
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t acc = 0x243F6A8885A308D3ull;
    for (auto p : parts) acc = mix_seed(acc, p);
    return acc;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad)
    : node_(std::make_shared<Node>()) {
    node_->shape = std::move(shape);
    node_->value.assign(shape_numel(node_->shape), T(0));
    node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return Tensor(std::move(shape), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    for (auto& v : t.node_->value) v = value;
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw DimensionError("Tensor::from: " + std::to_string(values.size()) +
                             " values do not fill shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
}

template <typename T>
typename Tensor<T>::Node& Tensor<T>::n() {
    if (!node_) throw Error("Tensor: use of undefined tensor");
    return *node_;
}

template <typename T>
const typename Tensor<T>::Node& Tensor<T>::n() const {
    if (!node_) throw Error("Tensor: use of undefined tensor");
    return *node_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
    return n().shape;
}

template <typename T>
std::size_t Tensor<T>::ndim() const {
    return n().shape.size();
}

template <typename T>
std::size_t Tensor<T>::numel() const {
    return n().value.size();
}

template <typename T>
std::size_t Tensor<T>::extent(std::size_t axis) const {
    if (axis >= ndim())
        throw DimensionError("Tensor::extent: axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(shape()));
    return n().shape[axis];
}

template <typename T>
std::span<T> Tensor<T>::values() {
    return {n().value.data(), n().value.size()};
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
    return {n().value.data(), n().value.size()};
}

template <typename T>
bool Tensor<T>::requires_grad() const {
    return n().requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool rg) {
    n().requires_grad = rg;
}

template <typename T>
std::span<T> Tensor<T>::grad() {
    auto& node = n();
    if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), T(0));
    return {node.grad.data(), node.grad.size()};
}

template <typename T>
bool Tensor<T>::has_grad() const {
    return n().grad.size() == n().value.size();
}

template <typename T>
void Tensor<T>::zero_grad() {
    auto& node = n();
    node.grad.assign(node.value.size(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1)
        throw DimensionError("Tensor::item: tensor of shape " + shape_str(shape()) +
                             " is not a scalar");
    return n().value[0];
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> idx) {
    const auto& node = n();
    if (idx.size() != node.shape.size())
        throw DimensionError("Tensor::at: index rank " + std::to_string(idx.size()) +
                             " does not match shape " + shape_str(node.shape));
    auto strides = row_major_strides(node.shape);
    std::size_t off = 0, d = 0;
    for (auto i : idx) {
        if (i >= node.shape[d])
            throw RangeError("Tensor::at: index out of range in axis " + std::to_string(d));
        off += i * strides[d++];
    }
    return n().value[off];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::size_t> idx) const {
    return const_cast<Tensor*>(this)->at(idx);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = n().shape;
    t.node_->value = n().value;
    t.node_->requires_grad = false;
    return t;
}

template <typename T>
void Tape<T>::record(std::function<void()> backward) {
    ops_.push_back(std::move(backward));
}

template <typename T>
void Tape<T>::backward(Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw DimensionError("Tape::backward: loss has shape " + shape_str(loss.shape()) +
                             ", expected a scalar");
    if (!loss.requires_grad())
        throw Error("Tape::backward: loss does not require grad (no ops recorded?)");
    loss.grad()[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <typename T>
void Tape<T>::clear() {
    ops_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace tubesal
