#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "rfcloak/nn/model.hpp"
#include "rfcloak/rng.hpp"

namespace oracle {

using rfcloak::nn::ClassifierModel;
using rfcloak::nn::Tensor;

struct TinyCase {
    ClassifierModel model;
    Tensor batch;
    std::vector<int> labels;
};

// Small random architecture, parameters and batch. Biases are randomized too so
// that every parameter receives a non-trivial gradient.
inline TinyCase random_tiny_case(rfcloak::Rng& rng) {
    using namespace rfcloak::nn;
    std::uniform_int_distribution<int> pick(0, 1 << 20);
    auto between = [&](int lo, int hi) { return lo + pick(rng) % (hi - lo + 1); };

    Architecture arch;
    arch.in_channels = between(1, 2);
    arch.in_h = between(4, 7);
    arch.in_w = between(2, 5);
    const int n_convs = between(1, 2);
    int h = arch.in_h, w = arch.in_w;
    for (int i = 0; i < n_convs; ++i) {
        ConvSpec c;
        c.out_channels = between(1, 3);
        c.kernel_h = between(1, 3);
        c.kernel_w = between(1, 2);
        c.padding = between(0, 1) ? Padding::same : Padding::valid;
        const int oh = c.padding == Padding::same ? h : h - c.kernel_h + 1;
        const int ow = c.padding == Padding::same ? w : w - c.kernel_w + 1;
        if (oh < 1 || ow < 1) {
            c.padding = Padding::same;
        }
        const int eh = c.padding == Padding::same ? h : oh;
        const int ew = c.padding == Padding::same ? w : ow;
        c.pool_h = eh >= 2 ? between(1, 2) : 1;
        c.pool_w = ew >= 2 ? between(1, 2) : 1;
        h = eh / c.pool_h;
        w = ew / c.pool_w;
        arch.convs.push_back(c);
    }
    const int n_hidden = between(0, 2);
    for (int i = 0; i < n_hidden; ++i) arch.hidden.push_back(between(2, 5));
    arch.n_classes = between(2, 4);

    TinyCase t;
    t.model = ClassifierModel::create(arch, rng());
    std::normal_distribution<double> gauss(0.0, 0.3);
    for (Tensor* p : t.model.parameters()) {
        if (p->rank() == 1) {
            for (auto& v : p->data) v = gauss(rng);
        }
    }
    const int batch = between(1, 3);
    t.batch = Tensor({batch, arch.in_channels, arch.in_h, arch.in_w});
    std::normal_distribution<double> unit(0.0, 1.0);
    for (auto& v : t.batch.data) v = unit(rng);
    for (int b = 0; b < batch; ++b) t.labels.push_back(between(0, arch.n_classes - 1));
    return t;
}

// True when a central difference of half-width `step` could straddle a ReLU or
// max-pool switching point: some ReLU pre-activation lies within `guard` of zero,
// or some pooling window with a positive maximum has a runner-up within `guard`.
inline bool near_kink(const ClassifierModel& model, const Tensor& batch, double guard) {
    using namespace rfcloak::nn;
    Tape tape;
    forward(model, batch, &tape);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Tensor& in = tape.inputs[l];
        if (std::holds_alternative<Relu>(model.layers[l])) {
            for (double v : in.data) {
                if (std::abs(v) < guard) return true;
            }
        } else if (const auto* pool = std::get_if<MaxPool>(&model.layers[l])) {
            const int n = in.dim(0);
            for (int b = 0; b < n; ++b) {
                for (int c = 0; c < pool->channels; ++c) {
                    for (int oy = 0; oy < pool->out_h; ++oy) {
                        for (int ox = 0; ox < pool->out_w; ++ox) {
                            std::vector<double> window;
                            for (int dy = 0; dy < pool->ph; ++dy) {
                                for (int dx = 0; dx < pool->pw; ++dx) {
                                    const int y = oy * pool->ph + dy, x = ox * pool->pw + dx;
                                    window.push_back(
                                        in.data[((std::size_t(b) * pool->channels + c) * pool->in_h + y) * pool->in_w + x]);
                                }
                            }
                            std::sort(window.begin(), window.end(), std::greater<>());
                            if (window.size() > 1 && window[0] > 0.0 && window[0] - window[1] < guard) return true;
                        }
                    }
                }
            }
        }
    }
    return false;
}

struct GradCheck {
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst_excess = 0.0;  // max of |a - n| - tolerance, when positive
};

inline bool close(double analytic, double numeric, double rel, double abs_floor) {
    const double tol = std::max(rel * std::max(std::abs(analytic), std::abs(numeric)), abs_floor);
    return std::abs(analytic - numeric) <= tol;
}

// Central differences of the mean cross-entropy for every parameter and input
// element, compared with the supplied analytic gradients.
inline GradCheck finite_difference_check(const ClassifierModel& model, const Tensor& batch, std::span<const int> labels,
                                         const std::vector<Tensor>& param_grads, const Tensor& input_grad,
                                         double step, double rel, double abs_floor) {
    using namespace rfcloak::nn;
    GradCheck out;
    auto loss_at = [&](const ClassifierModel& m, const Tensor& x) { return loss_ce(forward(m, x), labels); };
    auto record = [&](double a, double n) {
        ++out.checked;
        if (!close(a, n, rel, abs_floor)) {
            ++out.failures;
            const double tol = std::max(rel * std::max(std::abs(a), std::abs(n)), abs_floor);
            out.worst_excess = std::max(out.worst_excess, std::abs(a - n) - tol);
        }
    };

    ClassifierModel probe = model;
    auto params = probe.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p]->data.size(); ++i) {
            const double saved = params[p]->data[i];
            params[p]->data[i] = saved + step;
            const double up = loss_at(probe, batch);
            params[p]->data[i] = saved - step;
            const double down = loss_at(probe, batch);
            params[p]->data[i] = saved;
            record(param_grads[p].data[i], (up - down) / (2.0 * step));
        }
    }
    Tensor x = batch;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double saved = x.data[i];
        x.data[i] = saved + step;
        const double up = loss_at(model, x);
        x.data[i] = saved - step;
        const double down = loss_at(model, x);
        x.data[i] = saved;
        record(input_grad.data[i], (up - down) / (2.0 * step));
    }
    return out;
}

// Index set of size k maximizing the sum of weights, by exhaustive enumeration.
// Among sums equal up to rounding the lexicographically smallest set wins.
inline std::vector<std::size_t> best_subset(const std::vector<double>& weights, std::size_t k) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> best;
    double best_sum = -1.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
        std::vector<std::size_t> set;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                set.push_back(i);
                sum += weights[i];
            }
        }
        const double tol = 1e-12 * std::max(1.0, std::abs(best_sum));
        if (sum > best_sum + tol) {
            best_sum = sum;
            best = set;
        } else if (std::abs(sum - best_sum) <= tol && set < best) {
            best = set;
        }
    }
    return best;
}

}  // namespace oracle
