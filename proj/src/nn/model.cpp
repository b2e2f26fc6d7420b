#include "rfcloak/nn/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

int out_extent(int in, int k, Padding p) { return p == Padding::same ? in : in - k + 1; }

}  // namespace

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Architecture Architecture::fingerprint_cnn(int n_classes, int in_h, int in_w) {
    Architecture a;
    a.in_channels = 2;
    a.in_h = in_h;
    a.in_w = in_w;
    a.convs = {
        {8, 3, 2, 2, 2, Padding::same},  {16, 3, 2, 2, 2, Padding::same},
        {32, 3, 2, 2, 1, Padding::same}, {32, 3, 1, 2, 1, Padding::same},
        {64, 3, 1, 2, 1, Padding::same},
    };
    a.hidden = {128, 64};
    a.n_classes = n_classes;
    return a;
}

void Architecture::validate() const {
    auto fail = [](const std::string& what) { throw ShapeError("architecture: " + what); };
    if (in_channels <= 0 || in_h <= 0 || in_w <= 0) fail("input shape must be positive");
    if (n_classes < 1) fail("n_classes must be positive");
    int h = in_h, w = in_w;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const auto& c = convs[i];
        if (c.out_channels <= 0 || c.kernel_h <= 0 || c.kernel_w <= 0 || c.pool_h <= 0 ||
            c.pool_w <= 0) {
            fail("conv stage " + std::to_string(i) + " has non-positive sizes");
        }
        h = out_extent(h, c.kernel_h, c.padding) / c.pool_h;
        w = out_extent(w, c.kernel_w, c.padding) / c.pool_w;
        if (h < 1 || w < 1) fail("conv stage " + std::to_string(i) + " output collapses to zero");
    }
    for (int width : hidden) {
        if (width <= 0) fail("dense widths must be positive");
    }
}

ClassifierModel ClassifierModel::create(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    ClassifierModel m;
    m.arch = arch;
    m.meta.seed = seed;
    auto rng = make_rng(seed, "init");
    auto init = [&](Tensor& w, int fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : w.data) v = dist(rng);
    };

    int c = arch.in_channels, h = arch.in_h, w = arch.in_w;
    for (const auto& spec : arch.convs) {
        Conv2d conv;
        conv.in_c = c;
        conv.out_c = spec.out_channels;
        conv.kh = spec.kernel_h;
        conv.kw = spec.kernel_w;
        conv.pad_top = spec.padding == Padding::same ? (spec.kernel_h - 1) / 2 : 0;
        conv.pad_left = spec.padding == Padding::same ? (spec.kernel_w - 1) / 2 : 0;
        conv.in_h = h;
        conv.in_w = w;
        conv.out_h = out_extent(h, spec.kernel_h, spec.padding);
        conv.out_w = out_extent(w, spec.kernel_w, spec.padding);
        conv.weight = Tensor({conv.out_c, conv.in_c, conv.kh, conv.kw});
        conv.bias = Tensor({conv.out_c});
        init(conv.weight, conv.in_c * conv.kh * conv.kw);
        c = conv.out_c;
        h = conv.out_h;
        w = conv.out_w;
        m.layers.emplace_back(std::move(conv));
        m.layers.emplace_back(Relu{});
        if (spec.pool_h > 1 || spec.pool_w > 1) {
            MaxPool pool{spec.pool_h, spec.pool_w, c, h, w, h / spec.pool_h, w / spec.pool_w};
            h = pool.out_h;
            w = pool.out_w;
            m.layers.emplace_back(pool);
        }
    }
    int features = c * h * w;
    auto add_dense = [&](int out, bool relu) {
        Dense d;
        d.in = features;
        d.out = out;
        d.weight = Tensor({out, features});
        d.bias = Tensor({out});
        init(d.weight, features);
        features = out;
        m.layers.emplace_back(std::move(d));
        if (relu) m.layers.emplace_back(Relu{});
    };
    for (int width : arch.hidden) add_dense(width, true);
    add_dense(arch.n_classes, false);
    return m;
}

std::vector<Tensor*> ClassifierModel::parameters() {
    std::vector<Tensor*> out;
    for (auto& layer : layers) {
        std::visit(Overloaded{[&](Conv2d& l) { out.insert(out.end(), {&l.weight, &l.bias}); },
                              [&](Dense& l) { out.insert(out.end(), {&l.weight, &l.bias}); },
                              [](auto&) {}},
                   layer);
    }
    return out;
}

std::vector<const Tensor*> ClassifierModel::parameters() const {
    auto ptrs = const_cast<ClassifierModel*>(this)->parameters();
    return {ptrs.begin(), ptrs.end()};
}

std::size_t ClassifierModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
}

namespace {

Tensor conv_forward(const Conv2d& l, const Tensor& x, std::vector<double>* cols_out) {
    const int batch = x.dim(0);
    const int hw = l.out_h * l.out_w;
    const int ck = l.in_c * l.kh * l.kw;
    Tensor y({batch, l.out_c, l.out_h, l.out_w});
    std::vector<double> local;
    std::vector<double>& cols = cols_out ? *cols_out : local;
    cols.assign(static_cast<std::size_t>(batch) * ck * hw, 0.0);
    const ConstMapMat wmat(l.weight.ptr(), l.out_c, ck);
    const Eigen::Map<const Eigen::VectorXd> bias(l.bias.ptr(), l.out_c);
    const std::size_t in_plane = static_cast<std::size_t>(l.in_h) * l.in_w;

    for (int b = 0; b < batch; ++b) {
        double* cb = cols.data() + static_cast<std::size_t>(b) * ck * hw;
        const double* xb = x.ptr() + static_cast<std::size_t>(b) * l.in_c * in_plane;
        for (int c = 0; c < l.in_c; ++c) {
            for (int i = 0; i < l.kh; ++i) {
                for (int j = 0; j < l.kw; ++j) {
                    double* row = cb + static_cast<std::size_t>((c * l.kh + i) * l.kw + j) * hw;
                    for (int oy = 0; oy < l.out_h; ++oy) {
                        const int iy = oy + i - l.pad_top;
                        if (iy < 0 || iy >= l.in_h) continue;
                        const double* src = xb + c * in_plane + static_cast<std::size_t>(iy) * l.in_w;
                        for (int ox = 0; ox < l.out_w; ++ox) {
                            const int ix = ox + j - l.pad_left;
                            if (ix >= 0 && ix < l.in_w) row[oy * l.out_w + ox] = src[ix];
                        }
                    }
                }
            }
        }
        MapMat yb(y.ptr() + static_cast<std::size_t>(b) * l.out_c * hw, l.out_c, hw);
        yb.noalias() = wmat * ConstMapMat(cb, ck, hw);
        yb.colwise() += bias;
    }
    return y;
}

Tensor conv_backward(const Conv2d& l, const Tensor& dy, const std::vector<double>& cols,
                     Tensor& dw, Tensor& db) {
    const int batch = dy.dim(0);
    const int hw = l.out_h * l.out_w;
    const int ck = l.in_c * l.kh * l.kw;
    const std::size_t in_plane = static_cast<std::size_t>(l.in_h) * l.in_w;
    Tensor dx({batch, l.in_c, l.in_h, l.in_w});
    const ConstMapMat wmat(l.weight.ptr(), l.out_c, ck);
    MapMat dwmat(dw.ptr(), l.out_c, ck);
    RowMat dcols(ck, hw);

    for (int b = 0; b < batch; ++b) {
        const ConstMapMat dyb(dy.ptr() + static_cast<std::size_t>(b) * l.out_c * hw, l.out_c, hw);
        const ConstMapMat cb(cols.data() + static_cast<std::size_t>(b) * ck * hw, ck, hw);
        dwmat.noalias() += dyb * cb.transpose();
        // Plain loops: Eigen's vectorized reductions peel by address, which would
        // make the summation order depend on heap alignment.
        for (int o = 0; o < l.out_c; ++o) {
            const double* row = dyb.data() + static_cast<std::size_t>(o) * hw;
            double acc = 0.0;
            for (int p = 0; p < hw; ++p) acc += row[p];
            db[static_cast<std::size_t>(o)] += acc;
        }
        dcols.noalias() = wmat.transpose() * dyb;
        double* dxb = dx.ptr() + static_cast<std::size_t>(b) * l.in_c * in_plane;
        for (int c = 0; c < l.in_c; ++c) {
            for (int i = 0; i < l.kh; ++i) {
                for (int j = 0; j < l.kw; ++j) {
                    const double* row = dcols.data() + static_cast<std::size_t>((c * l.kh + i) * l.kw + j) * hw;
                    for (int oy = 0; oy < l.out_h; ++oy) {
                        const int iy = oy + i - l.pad_top;
                        if (iy < 0 || iy >= l.in_h) continue;
                        double* dst = dxb + c * in_plane + static_cast<std::size_t>(iy) * l.in_w;
                        for (int ox = 0; ox < l.out_w; ++ox) {
                            const int ix = ox + j - l.pad_left;
                            if (ix >= 0 && ix < l.in_w) dst[ix] += row[oy * l.out_w + ox];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

Tensor pool_forward(const MaxPool& l, const Tensor& x, std::vector<int>* argmax_out) {
    const int batch = x.dim(0);
    Tensor y({batch, l.channels, l.out_h, l.out_w});
    if (argmax_out) argmax_out->assign(y.size(), 0);
    std::size_t o = 0;
    for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < l.channels; ++c) {
            const std::size_t plane = (static_cast<std::size_t>(b) * l.channels + c) * l.in_h * l.in_w;
            for (int oy = 0; oy < l.out_h; ++oy) {
                for (int ox = 0; ox < l.out_w; ++ox, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (int i = 0; i < l.ph; ++i) {
                        for (int j = 0; j < l.pw; ++j) {
                            const std::size_t idx =
                                plane + static_cast<std::size_t>(oy * l.ph + i) * l.in_w + ox * l.pw + j;
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y[o] = best;
                    if (argmax_out) (*argmax_out)[o] = static_cast<int>(best_idx);
                }
            }
        }
    }
    return y;
}

Tensor dense_forward(const Dense& l, const Tensor& x) {
    const int batch = x.dim(0);
    if (static_cast<int>(x.size() / batch) != l.in) throw ShapeError("dense: input width mismatch");
    Tensor y({batch, l.out});
    const ConstMapMat xm(x.ptr(), batch, l.in);
    const ConstMapMat wm(l.weight.ptr(), l.out, l.in);
    MapMat ym(y.ptr(), batch, l.out);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(l.bias.ptr(), l.out);
    return y;
}

void check_input(const ClassifierModel& model, const Tensor& batch) {
    const auto& a = model.arch;
    if (batch.rank() != 4 || batch.dim(0) < 1 || batch.dim(1) != a.in_channels ||
        batch.dim(2) != a.in_h || batch.dim(3) != a.in_w) {
        std::ostringstream os;
        os << "forward: expected batch of (" << a.in_channels << ',' << a.in_h << ',' << a.in_w
           << ") samples, got shape [";
        for (std::size_t i = 0; i < batch.shape.size(); ++i) os << (i ? "," : "") << batch.shape[i];
        os << ']';
        throw ShapeError(os.str());
    }
}

Tensor run_layers(const ClassifierModel& model, const Tensor& batch, std::size_t n_layers,
                  Tape* tape) {
    check_input(model, batch);
    if (tape) {
        tape->inputs.assign(n_layers, Tensor{});
        tape->cols.assign(n_layers, {});
        tape->argmax.assign(n_layers, {});
    }
    Tensor x = batch;
    for (std::size_t i = 0; i < n_layers; ++i) {
        Tensor y = std::visit(
            Overloaded{
                [&](const Conv2d& l) { return conv_forward(l, x, tape ? &tape->cols[i] : nullptr); },
                [&](const Relu&) {
                    Tensor r = x;
                    for (auto& v : r.data) v = v > 0.0 ? v : 0.0;
                    return r;
                },
                [&](const MaxPool& l) { return pool_forward(l, x, tape ? &tape->argmax[i] : nullptr); },
                [&](const Dense& l) { return dense_forward(l, x); }},
            model.layers[i]);
        if (tape) tape->inputs[i] = std::move(x);
        x = std::move(y);
    }
    return x;
}

}  // namespace

Tensor forward(const ClassifierModel& model, const Tensor& batch, Tape* tape) {
    return run_layers(model, batch, model.layers.size(), tape);
}

Tensor softmax(const Tensor& logits) {
    Tensor p = logits;
    const int batch = logits.dim(0);
    const int n = logits.dim(1);
    for (int b = 0; b < batch; ++b) {
        double* row = p.ptr() + static_cast<std::size_t>(b) * n;
        const double mx = *std::max_element(row, row + n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += (row[i] = std::exp(row[i] - mx));
        for (int i = 0; i < n; ++i) row[i] /= sum;
    }
    return p;
}

double loss_ce(const Tensor& logits, std::span<const int> labels) {
    const int batch = logits.dim(0);
    const int n = logits.dim(1);
    if (labels.size() != static_cast<std::size_t>(batch)) throw ShapeError("loss_ce: label count mismatch");
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const double* row = logits.ptr() + static_cast<std::size_t>(b) * n;
        const int y = labels[static_cast<std::size_t>(b)];
        if (y < 0 || y >= n) throw ShapeError("loss_ce: label out of range");
        const double mx = *std::max_element(row, row + n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += std::exp(row[i] - mx);
        total += mx + std::log(sum) - row[y];
    }
    return total / batch;
}

Gradients backward(const ClassifierModel& model, const Tensor& batch, std::span<const int> labels) {
    Tape tape;
    Gradients g;
    g.logits = forward(model, batch, &tape);
    g.loss = loss_ce(g.logits, labels);

    const int nb = batch.dim(0);
    const int n = g.logits.dim(1);
    Tensor dy = softmax(g.logits);
    for (int b = 0; b < nb; ++b) {
        dy[static_cast<std::size_t>(b) * n + labels[static_cast<std::size_t>(b)]] -= 1.0;
    }
    for (auto& v : dy.data) v /= nb;

    for (const auto* p : model.parameters()) g.params.emplace_back(p->shape);
    std::size_t param_slot = g.params.size();
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        const Tensor& x = tape.inputs[i];
        dy = std::visit(
            Overloaded{
                [&](const Conv2d& l) {
                    param_slot -= 2;
                    return conv_backward(l, dy, tape.cols[i], g.params[param_slot],
                                         g.params[param_slot + 1]);
                },
                [&](const Relu&) {
                    Tensor dx = dy;
                    for (std::size_t j = 0; j < dx.size(); ++j) {
                        if (!(x[j] > 0.0)) dx[j] = 0.0;
                    }
                    return dx;
                },
                [&](const MaxPool&) {
                    Tensor dx(x.shape);
                    const auto& am = tape.argmax[i];
                    for (std::size_t j = 0; j < dy.size(); ++j) {
                        dx[static_cast<std::size_t>(am[j])] += dy[j];
                    }
                    return dx;
                },
                [&](const Dense& l) {
                    param_slot -= 2;
                    const ConstMapMat dym(dy.ptr(), nb, l.out);
                    const ConstMapMat xm(x.ptr(), nb, l.in);
                    MapMat(g.params[param_slot].ptr(), l.out, l.in).noalias() += dym.transpose() * xm;
                    Tensor& dbias = g.params[param_slot + 1];
                    for (int b = 0; b < nb; ++b) {
                        for (int o = 0; o < l.out; ++o) dbias[static_cast<std::size_t>(o)] += dym(b, o);
                    }
                    Tensor dx(x.shape);
                    MapMat(dx.ptr(), nb, l.in).noalias() =
                        dym * ConstMapMat(l.weight.ptr(), l.out, l.in);
                    return dx;
                }},
            model.layers[i]);
    }
    g.input = std::move(dy);
    return g;
}

int argmax(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

Tensor as_batch(const PilotTensor& sample) {
    Tensor t({1, 2, sample.n_pilot_symbols, sample.pilots_per_symbol});
    if (sample.values.size() != t.size()) throw ShapeError("pilot tensor has inconsistent size");
    t.data = sample.values;
    return t;
}

Tensor stack(std::span<const PilotTensor> samples) {
    if (samples.empty()) throw ShapeError("stack: empty sample list");
    const auto& first = samples.front();
    Tensor t({static_cast<int>(samples.size()), 2, first.n_pilot_symbols, first.pilots_per_symbol});
    const std::size_t per = first.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].values.size() != per) throw ShapeError("stack: samples differ in shape");
        std::copy(samples[i].values.begin(), samples[i].values.end(), t.data.begin() + i * per);
    }
    return t;
}

std::vector<int> predict_batch(const ClassifierModel& model, const Tensor& batch) {
    const Tensor logits = forward(model, batch);
    const int n = logits.dim(1);
    std::vector<int> out(static_cast<std::size_t>(logits.dim(0)));
    for (std::size_t b = 0; b < out.size(); ++b) {
        out[b] = argmax(std::span<const double>(logits.ptr() + b * n, static_cast<std::size_t>(n)));
    }
    return out;
}

int predict(const ClassifierModel& model, const PilotTensor& sample) {
    return predict_batch(model, as_batch(sample)).front();
}

std::vector<double> penultimate_features(const ClassifierModel& model, const PilotTensor& sample) {
    if (model.arch.hidden.empty()) {
        throw ShapeError("penultimate_features: model needs at least two dense layers");
    }
    // Everything except the output Dense layer.
    const Tensor act = run_layers(model, as_batch(sample), model.layers.size() - 1, nullptr);
    return act.data;
}

std::string describe(const Architecture& arch) {
    std::ostringstream os;
    os << "input(" << arch.in_channels << 'x' << arch.in_h << 'x' << arch.in_w << ')';
    for (const auto& c : arch.convs) {
        os << " -> conv" << c.out_channels << '(' << c.kernel_h << ',' << c.kernel_w << ")+pool("
           << c.pool_h << ',' << c.pool_w << ')';
    }
    for (int h : arch.hidden) os << " -> dense" << h;
    os << " -> dense" << arch.n_classes;
    return os.str();
}

}  // namespace rfcloak::nn
