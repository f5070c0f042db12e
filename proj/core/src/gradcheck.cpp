// SPDX-License-Identifier: Apache-2.0
#include "tubesal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tubesal {

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(void)>& f, std::vector<Tensor<T>> inputs,
                           double step, std::size_t max_coords_per_input, std::uint64_t seed) {
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }

    std::vector<std::vector<T>> analytic(inputs.size());
    {
        Tape<T> tape;
        typename Tape<T>::Scope scope(tape);
        Tensor<T> loss = f();
        if (!std::isfinite(double(loss.item())))
            throw Error("grad_check: non-finite loss value");
        tape.backward(loss);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            auto g = inputs[i].grad();
            analytic[i].assign(g.begin(), g.end());
        }
    }

    GradCheckResult res;
    Rng rng(mix_seed(seed, 0x67726164u));
    const double h = step;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto vals = inputs[i].values();
        std::vector<std::size_t> coords(vals.size());
        for (std::size_t c = 0; c < coords.size(); ++c) coords[c] = c;
        if (max_coords_per_input > 0 && coords.size() > max_coords_per_input) {
            // Partial Fisher-Yates: first max_coords entries become the sample.
            for (std::size_t c = 0; c < max_coords_per_input; ++c) {
                const std::size_t j = c + rng.uniform_int(coords.size() - c);
                std::swap(coords[c], coords[j]);
            }
            coords.resize(max_coords_per_input);
        }
        for (const std::size_t c : coords) {
            const T orig = vals[c];
            vals[c] = orig + T(h);
            const double fp = double(f().item());
            vals[c] = orig - T(h);
            const double fm = double(f().item());
            vals[c] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw Error("grad_check: non-finite intermediate during finite differences");
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = double(analytic[i][c]);
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1.0});
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.coords_checked;
        }
    }
    return res;
}

template GradCheckResult grad_check<float>(const std::function<Tensor<float>(void)>&,
                                           std::vector<Tensor<float>>, double, std::size_t,
                                           std::uint64_t);
template GradCheckResult grad_check<double>(const std::function<Tensor<double>(void)>&,
                                            std::vector<Tensor<double>>, double, std::size_t,
                                            std::uint64_t);

}  // namespace tubesal
