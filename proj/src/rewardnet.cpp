#include "foresight/rewardnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>

#include "foresight/errors.hpp"

namespace foresight
{

namespace
{

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

int out_size(int in, const ConvLayer& l)
{
    if (in < l.kernel)
    {
        throw Error(ErrorCode::ShapeMismatch, "activation smaller than kernel");
    }
    return (in - l.kernel) / l.stride + 1;
}

RowMat im2col(const Tensor& in, const ConvLayer& l, int ho, int wo)
{
    const int k = l.kernel;
    const int s = l.stride;
    RowMat cols(static_cast<Eigen::Index>(in.c) * k * k, static_cast<Eigen::Index>(in.n) * ho * wo);
    for (int c = 0; c < in.c; ++c)
    {
        for (int ky = 0; ky < k; ++ky)
        {
            for (int kx = 0; kx < k; ++kx)
            {
                double* row = cols.row((c * k + ky) * k + kx).data();
                for (int b = 0; b < in.n; ++b)
                {
                    for (int oy = 0; oy < ho; ++oy)
                    {
                        const double* src = &in.v[in.offset(c, b, oy * s + ky, kx)];
                        double* dst = row + (static_cast<size_t>(b) * ho + oy) * wo;
                        for (int ox = 0; ox < wo; ++ox)
                        {
                            dst[ox] = src[ox * s];
                        }
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_add(const RowMat& dcols, const ConvLayer& l, int ho, int wo, Tensor& din)
{
    const int k = l.kernel;
    const int s = l.stride;
    for (int c = 0; c < din.c; ++c)
    {
        for (int ky = 0; ky < k; ++ky)
        {
            for (int kx = 0; kx < k; ++kx)
            {
                const double* row = dcols.row((c * k + ky) * k + kx).data();
                for (int b = 0; b < din.n; ++b)
                {
                    for (int oy = 0; oy < ho; ++oy)
                    {
                        double* dst = &din.v[din.offset(c, b, oy * s + ky, kx)];
                        const double* src = row + (static_cast<size_t>(b) * ho + oy) * wo;
                        for (int ox = 0; ox < wo; ++ox)
                        {
                            dst[ox * s] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

double activate(double x, const ConvLayer& l)
{
    switch (l.activation)
    {
        case Activation::identity: return x;
        case Activation::leaky_relu: return x > 0.0 ? x : l.leak * x;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

// Derivative expressed through the post-activation value.
double activation_slope(double y, const ConvLayer& l)
{
    switch (l.activation)
    {
        case Activation::identity: return 1.0;
        case Activation::leaky_relu: return y > 0.0 ? 1.0 : l.leak;
        case Activation::sigmoid: return y * (1.0 - y);
    }
    return 1.0;
}

// Pre-activation output of one layer.
Tensor conv_linear(const Tensor& in, const ConvLayer& l, RowMat* cols_out)
{
    if (in.c != l.in_channels)
    {
        throw Error(ErrorCode::ShapeMismatch, "channel count does not match layer");
    }
    const int ho = out_size(in.h, l);
    const int wo = out_size(in.w, l);
    RowMat cols = im2col(in, l, ho, wo);
    Tensor out(l.out_channels, in.n, ho, wo);
    MapMat om(out.v.data(), l.out_channels, cols.cols());
    om.noalias() = CMapMat(l.weight.data(), l.out_channels, cols.rows()) * cols;
    for (int o = 0; o < l.out_channels; ++o)
    {
        om.row(o).array() += l.bias[static_cast<size_t>(o)];
    }
    if (cols_out)
    {
        *cols_out = std::move(cols);
    }
    return out;
}

// Gradient with respect to the layer input, given the gradient at its pre-activation.
Tensor conv_backward_input(const Tensor& dpre, const ConvLayer& l, int in_h, int in_w)
{
    const Eigen::Index np = static_cast<Eigen::Index>(dpre.n) * dpre.h * dpre.w;
    const RowMat dcols =
        CMapMat(l.weight.data(), l.out_channels, static_cast<Eigen::Index>(l.fan_in())).transpose() *
        CMapMat(dpre.v.data(), l.out_channels, np);
    Tensor din(l.in_channels, dpre.n, in_h, in_w);
    col2im_add(dcols, l, dpre.h, dpre.w, din);
    return din;
}

Tensor slice(const Tensor& t, int x0, int y0, int h, int w)
{
    Tensor out(t.c, t.n, h, w);
    for (int c = 0; c < t.c; ++c)
    {
        for (int b = 0; b < t.n; ++b)
        {
            for (int y = 0; y < h; ++y)
            {
                const double* src = &t.v[t.offset(c, b, y0 + y, x0)];
                std::copy(src, src + w, &out.v[out.offset(c, b, y, 0)]);
            }
        }
    }
    return out;
}

const char* activation_name(Activation a)
{
    switch (a)
    {
        case Activation::identity: return "identity";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation activation_from_name(const std::string& s)
{
    if (s == "identity") return Activation::identity;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw Error(ErrorCode::ParseError, "unknown activation '" + s + "'");
}

}  // namespace

int ModelWeights::receptive_field() const
{
    int rf = 1;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    {
        rf = (rf - 1) * it->stride + it->kernel;
    }
    return rf;
}

int ModelWeights::output_stride() const
{
    int s = 1;
    for (const ConvLayer& l : layers)
    {
        s *= l.stride;
    }
    return s;
}

void ModelWeights::check_invariants() const
{
    if (layers.empty())
    {
        throw Error(ErrorCode::InvalidArgument, "model has no layers");
    }
    if (!(input_scale > 0.0) || !std::isfinite(input_scale))
    {
        throw Error(ErrorCode::InvalidArgument, "input scale must be positive");
    }
    int channels = 1;
    for (const ConvLayer& l : layers)
    {
        if (l.in_channels != channels || l.out_channels <= 0 || l.kernel <= 0 || l.stride <= 0)
        {
            throw Error(ErrorCode::InvalidArgument, "inconsistent layer shapes");
        }
        if (l.weight.size() != l.fan_in() * l.out_channels || l.bias.size() != static_cast<size_t>(l.out_channels))
        {
            throw Error(ErrorCode::InvalidArgument, "parameter count does not match layer shape");
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(l.weight.begin(), l.weight.end(), finite) || !std::all_of(l.bias.begin(), l.bias.end(), finite))
        {
            throw Error(ErrorCode::InvalidArgument, "non-finite model parameter");
        }
        channels = l.out_channels;
    }
}

ModelWeights make_default_model(uint64_t seed, bool multi_object)
{
    ModelWeights w;
    w.multi_object = multi_object;
    const int out = kNumPrimitives + (multi_object ? 1 : 0);
    w.layers = {
        {1, 8, 6, 2, Activation::leaky_relu, 0.1, {}, {}},
        {8, 16, 6, 2, Activation::leaky_relu, 0.1, {}, {}},
        {16, out, 5, 1, Activation::sigmoid, 0.1, {}, {}},
    };
    Rng rng(seed);
    for (size_t i = 0; i < w.layers.size(); ++i)
    {
        ConvLayer& l = w.layers[i];
        const bool last = i + 1 == w.layers.size();
        const double stddev = last ? std::sqrt(1.0 / l.fan_in()) : std::sqrt(2.0 / l.fan_in());
        std::normal_distribution<double> normal(0.0, stddev);
        l.weight.resize(l.fan_in() * l.out_channels);
        for (double& v : l.weight)
        {
            v = normal(rng);
        }
        l.bias.assign(static_cast<size_t>(l.out_channels), last ? -2.0 : 0.0);
    }
    return w;
}

void to_json(nlohmann::json& j, const ModelWeights& w)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const ConvLayer& l : w.layers)
    {
        layers.push_back({{"in_channels", l.in_channels},
                          {"out_channels", l.out_channels},
                          {"kernel", l.kernel},
                          {"stride", l.stride},
                          {"activation", activation_name(l.activation)},
                          {"leak", l.leak},
                          {"weight_shape", {l.out_channels, l.in_channels, l.kernel, l.kernel}},
                          {"weight", l.weight},
                          {"bias", l.bias}});
    }
    j = {{"version", w.version},
         {"input_scale", w.input_scale},
         {"num_primitives", w.num_primitives},
         {"multi_object", w.multi_object},
         {"layers", layers}};
}

void from_json(const nlohmann::json& j, ModelWeights& w)
{
    if (!j.contains("version"))
    {
        throw Error(ErrorCode::ParseError, "model document lacks a version field");
    }
    w.version = j.at("version").get<int>();
    if (w.version != 1)
    {
        throw Error(ErrorCode::ParseError, "unsupported model version " + std::to_string(w.version));
    }
    w.input_scale = j.at("input_scale").get<double>();
    w.num_primitives = j.value("num_primitives", kNumPrimitives);
    w.multi_object = j.value("multi_object", false);
    w.layers.clear();
    for (const auto& jl : j.at("layers"))
    {
        ConvLayer l;
        l.in_channels = jl.at("in_channels").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
        l.kernel = jl.at("kernel").get<int>();
        l.stride = jl.at("stride").get<int>();
        l.activation = activation_from_name(jl.at("activation").get<std::string>());
        l.leak = jl.value("leak", 0.1);
        const auto weight = jl.at("weight").get<std::vector<double>>();
        l.weight.assign(weight.begin(), weight.end());
        l.bias = jl.at("bias").get<std::vector<double>>();
        w.layers.push_back(std::move(l));
    }
    w.check_invariants();
}

void save_model(const std::string& path, const ModelWeights& w)
{
    std::ofstream out(path);
    if (!out)
    {
        throw Error(ErrorCode::InvalidArgument, "cannot write model to " + path);
    }
    out << nlohmann::json(w).dump() << '\n';
}

ModelWeights load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw Error(ErrorCode::ParseError, "cannot open model " + path);
    }
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(ErrorCode::ParseError, std::string("model is not valid JSON: ") + e.what());
    }
    return j.get<ModelWeights>();
}

Tensor window_input(const ModelWeights& w, const DepthImage& window)
{
    Tensor t(1, 1, window.height(), window.width());
    const auto data = window.data();
    const auto valid = window.valid_mask();
    for (size_t i = 0; i < data.size(); ++i)
    {
        t.v[i] = valid[i] ? w.input_scale * data[i] : 0.0;
    }
    return t;
}

ForwardTrace forward_trace(const ModelWeights& w, Tensor input)
{
    ForwardTrace trace;
    trace.acts.reserve(w.layers.size() + 1);
    trace.acts.push_back(std::move(input));
    for (const ConvLayer& l : w.layers)
    {
        Tensor out = conv_linear(trace.acts.back(), l, nullptr);
        for (double& v : out.v)
        {
            v = activate(v, l);
        }
        trace.acts.push_back(std::move(out));
    }
    return trace;
}

Tensor backward_to_input(const ModelWeights& w, const ForwardTrace& trace, const Tensor& grad_top)
{
    Tensor grad = grad_top;
    for (size_t li = w.layers.size(); li-- > 0;)
    {
        const ConvLayer& l = w.layers[li];
        const Tensor& post = trace.acts[li + 1];
        for (size_t i = 0; i < grad.v.size(); ++i)
        {
            grad.v[i] *= activation_slope(post.v[i], l);
        }
        const Tensor& in = trace.acts[li];
        grad = conv_backward_input(grad, l, in.h, in.w);
    }
    return grad;
}

ForwardTrace slice_trace(const ModelWeights& w, const ForwardTrace& full, int ox, int oy)
{
    const size_t nl = w.layers.size();
    std::vector<int> size(nl + 1);
    size[0] = w.receptive_field();
    for (size_t l = 0; l < nl; ++l)
    {
        size[l + 1] = (size[l] - w.layers[l].kernel) / w.layers[l].stride + 1;
    }
    std::vector<int> offx(nl + 1);
    std::vector<int> offy(nl + 1);
    offx[nl] = ox;
    offy[nl] = oy;
    for (size_t l = nl; l-- > 0;)
    {
        offx[l] = offx[l + 1] * w.layers[l].stride;
        offy[l] = offy[l + 1] * w.layers[l].stride;
    }
    ForwardTrace out;
    out.acts.reserve(nl + 1);
    for (size_t l = 0; l <= nl; ++l)
    {
        out.acts.push_back(slice(full.acts[l], offx[l], offy[l], size[l], size[l]));
    }
    return out;
}

namespace
{

void check_window(const ModelWeights& w, const DepthImage& window)
{
    const int rf = w.receptive_field();
    if (window.width() != rf || window.height() != rf)
    {
        throw Error(ErrorCode::ShapeMismatch, "window must be " + std::to_string(rf) + "x" + std::to_string(rf));
    }
}

}  // namespace

std::vector<double> forward_window_all(const ModelWeights& w, const DepthImage& window)
{
    check_window(w, window);
    const ForwardTrace trace = forward_trace(w, window_input(w, window));
    const AlignedVector& out = trace.acts.back().v;
    return {out.begin(), out.end()};
}

double forward_window(const ModelWeights& w, const DepthImage& window, int channel)
{
    if (channel < 0 || channel >= w.output_channels())
    {
        throw Error(ErrorCode::InvalidArgument, "channel out of range");
    }
    return forward_window_all(w, window)[static_cast<size_t>(channel)];
}

std::vector<double> input_gradient(const ModelWeights& w, const DepthImage& window, int channel)
{
    check_window(w, window);
    if (channel < 0 || channel >= w.output_channels())
    {
        throw Error(ErrorCode::InvalidArgument, "channel out of range");
    }
    const ForwardTrace trace = forward_trace(w, window_input(w, window));
    Tensor top(w.output_channels(), 1, 1, 1);
    top.v[static_cast<size_t>(channel)] = 1.0;
    Tensor g = backward_to_input(w, trace, top);
    const auto valid = window.valid_mask();
    std::vector<double> out(g.v.size());
    for (size_t i = 0; i < out.size(); ++i)
    {
        // Invalid pixels enter the model as constant zeros.
        out[i] = valid[i] ? w.input_scale * g.v[i] : 0.0;
    }
    return out;
}

namespace
{

struct BatchPass
{
    std::vector<RowMat> cols;
    std::vector<Tensor> post;  // post[0] = input
    Tensor logits;
};

BatchPass forward_batch(const ModelWeights& w, Tensor input, bool keep_cols)
{
    BatchPass pass;
    pass.post.push_back(std::move(input));
    for (size_t li = 0; li < w.layers.size(); ++li)
    {
        const ConvLayer& l = w.layers[li];
        RowMat cols;
        Tensor out = conv_linear(pass.post.back(), l, keep_cols ? &cols : nullptr);
        if (li + 1 == w.layers.size())
        {
            pass.logits = out;
        }
        for (double& v : out.v)
        {
            v = activate(v, l);
        }
        if (keep_cols)
        {
            pass.cols.push_back(std::move(cols));
        }
        pass.post.push_back(std::move(out));
    }
    return pass;
}

// Numerically stable BCE from a logit.
double bce_logit(double z, double r)
{
    return std::max(z, 0.0) - r * z + std::log1p(std::exp(-std::abs(z)));
}

struct Term
{
    size_t sample;
    int channel;
    double target;
};

std::vector<Term> loss_terms(const std::vector<TrainingSample>& samples, const ModelWeights& w)
{
    std::vector<Term> terms;
    for (size_t i = 0; i < samples.size(); ++i)
    {
        const TrainingSample& s = samples[i];
        if (s.primitive < 0 || s.primitive >= w.output_channels())
        {
            throw Error(ErrorCode::InvalidArgument, "sample primitive out of range");
        }
        terms.push_back({i, s.primitive, std::clamp(s.reward, 0.0, 1.0)});
        if (w.multi_object && s.multi_label >= 0 && w.output_channels() > kMultiObjectChannel)
        {
            terms.push_back({i, kMultiObjectChannel, static_cast<double>(s.multi_label)});
        }
    }
    return terms;
}

Tensor pack_inputs(const ModelWeights& w, const std::vector<TrainingSample>& samples, const std::vector<size_t>& idx)
{
    const int rf = w.receptive_field();
    Tensor t(1, static_cast<int>(idx.size()), rf, rf);
    for (size_t b = 0; b < idx.size(); ++b)
    {
        const DepthImage& win = samples[idx[b]].window;
        const auto data = win.data();
        const auto valid = win.valid_mask();
        double* dst = &t.v[t.offset(0, static_cast<int>(b), 0, 0)];
        for (size_t i = 0; i < data.size(); ++i)
        {
            dst[i] = valid[i] ? w.input_scale * data[i] : 0.0;
        }
    }
    return t;
}

}  // namespace

std::pair<double, double> evaluate_dataset(const ModelWeights& w, const std::vector<TrainingSample>& samples)
{
    if (samples.empty())
    {
        throw Error(ErrorCode::EmptyDataset, "no samples");
    }
    const std::vector<Term> terms = loss_terms(samples, w);
    std::vector<std::vector<double>> logits(samples.size());
    constexpr size_t kChunk = 256;
    for (size_t start = 0; start < samples.size(); start += kChunk)
    {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(samples.size(), start + kChunk); ++i)
        {
            idx.push_back(i);
        }
        const BatchPass pass = forward_batch(w, pack_inputs(w, samples, idx), false);
        for (size_t b = 0; b < idx.size(); ++b)
        {
            logits[idx[b]].resize(static_cast<size_t>(w.output_channels()));
            for (int c = 0; c < w.output_channels(); ++c)
            {
                logits[idx[b]][static_cast<size_t>(c)] = pass.logits.at(c, static_cast<int>(b), 0, 0);
            }
        }
    }
    double loss = 0.0;
    double correct = 0.0;
    for (const Term& t : terms)
    {
        const double z = logits[t.sample][static_cast<size_t>(t.channel)];
        loss += bce_logit(z, t.target);
        correct += ((z > 0.0) == (t.target > 0.5)) ? 1.0 : 0.0;
    }
    return {loss / terms.size(), correct / terms.size()};
}

TrainResult train_sgd(const std::vector<TrainingSample>& samples, const TrainConfig& cfg, const ModelWeights* init)
{
    if (samples.empty())
    {
        throw Error(ErrorCode::EmptyDataset, "training needs at least one sample");
    }
    if (cfg.batch_size <= 0 || cfg.epochs < 0 || !(cfg.label_smoothing >= 0.0 && cfg.label_smoothing < 1.0))
    {
        throw Error(ErrorCode::InvalidArgument, "batch size and epochs must be positive, label smoothing in [0, 1)");
    }
    TrainResult result;
    result.weights = init ? *init : make_default_model(cfg.seed);
    ModelWeights& w = result.weights;
    w.check_invariants();
    if (w.layers.back().activation != Activation::sigmoid)
    {
        throw Error(ErrorCode::InvalidArgument, "training expects a sigmoid output layer");
    }
    const int rf = w.receptive_field();
    for (const TrainingSample& s : samples)
    {
        if (s.window.width() != rf || s.window.height() != rf)
        {
            throw Error(ErrorCode::ShapeMismatch, "training window has the wrong size");
        }
    }

    // Per-sample term lists, so a batch of samples maps to its loss terms.
    const std::vector<Term> all_terms = loss_terms(samples, w);
    std::vector<std::vector<Term>> by_sample(samples.size());
    for (const Term& t : all_terms)
    {
        by_sample[t.sample].push_back(t);
    }

    std::vector<std::vector<double>> vel_w(w.layers.size());
    std::vector<std::vector<double>> vel_b(w.layers.size());
    for (size_t l = 0; l < w.layers.size(); ++l)
    {
        vel_w[l].assign(w.layers[l].weight.size(), 0.0);
        vel_b[l].assign(w.layers[l].bias.size(), 0.0);
    }

    Rng rng(derive_seed(cfg.seed, 0x7A11));
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    double lr = cfg.learning_rate;
    const int oc = w.output_channels();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        double epoch_correct = 0.0;
        size_t epoch_terms = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size))
        {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            const std::vector<size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
            BatchPass pass = forward_batch(w, pack_inputs(w, samples, idx), true);

            size_t nterms = 0;
            for (size_t i : idx)
            {
                nterms += by_sample[i].size();
            }
            Tensor grad(oc, static_cast<int>(idx.size()), 1, 1);
            double batch_loss = 0.0;
            for (size_t b = 0; b < idx.size(); ++b)
            {
                for (const Term& t : by_sample[idx[b]])
                {
                    const double z = pass.logits.at(t.channel, static_cast<int>(b), 0, 0);
                    const double psi = pass.post.back().at(t.channel, static_cast<int>(b), 0, 0);
                    const double y = t.target * (1.0 - cfg.label_smoothing) + 0.5 * cfg.label_smoothing;
                    batch_loss += bce_logit(z, y);
                    epoch_correct += ((z > 0.0) == (t.target > 0.5)) ? 1.0 : 0.0;
                    grad.at(t.channel, static_cast<int>(b), 0, 0) += (psi - y) / static_cast<double>(nterms);
                }
            }
            if (!std::isfinite(batch_loss))
            {
                throw Error(ErrorCode::NonFiniteLoss, "training loss became non-finite");
            }
            epoch_loss += batch_loss;
            epoch_terms += nterms;

            // grad holds dL/d(pre-activation) of the output layer.
            for (size_t li = w.layers.size(); li-- > 0;)
            {
                ConvLayer& l = w.layers[li];
                if (li + 1 < w.layers.size())
                {
                    const Tensor& post = pass.post[li + 1];
                    for (size_t i = 0; i < grad.v.size(); ++i)
                    {
                        grad.v[i] *= activation_slope(post.v[i], l);
                    }
                }
                const Eigen::Index np = static_cast<Eigen::Index>(grad.n) * grad.h * grad.w;
                const CMapMat dpre(grad.v.data(), l.out_channels, np);
                const RowMat dw = dpre * pass.cols[li].transpose();
                const Eigen::VectorXd db = dpre.rowwise().sum();
                Tensor next;
                if (li > 0)
                {
                    const Tensor& in = pass.post[li];
                    next = conv_backward_input(grad, l, in.h, in.w);
                }
                for (size_t k = 0; k < l.weight.size(); ++k)
                {
                    const double g = dw.data()[k] + cfg.weight_decay * l.weight[k];
                    vel_w[li][k] = cfg.momentum * vel_w[li][k] - lr * g;
                    l.weight[k] += vel_w[li][k];
                }
                for (size_t k = 0; k < l.bias.size(); ++k)
                {
                    vel_b[li][k] = cfg.momentum * vel_b[li][k] - lr * db[static_cast<Eigen::Index>(k)];
                    l.bias[k] += vel_b[li][k];
                }
                grad = std::move(next);
            }
        }
        result.final_loss = epoch_loss / static_cast<double>(std::max<size_t>(1, epoch_terms));
        result.final_accuracy = epoch_correct / static_cast<double>(std::max<size_t>(1, epoch_terms));
        if (!std::isfinite(result.final_loss))
        {
            throw Error(ErrorCode::NonFiniteLoss, "training loss became non-finite");
        }
        if (cfg.verbose)
        {
            std::fprintf(stderr, "epoch %d  loss %.5f  acc %.4f  lr %.4g\n", epoch, result.final_loss,
                         result.final_accuracy, lr);
        }
        lr *= cfg.lr_decay;
    }
    w.check_invariants();
    return result;
}

}  // namespace foresight
