#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace walkclip {

// Concatenation in fixed order: satellite, street view, pdfm.
inline Eigen::VectorXd fuse(const Eigen::VectorXd& sat, const Eigen::VectorXd& street,
                            const Eigen::VectorXd& pdfm) {
    Eigen::VectorXd h(sat.size() + street.size() + pdfm.size());
    h << sat, street, pdfm;
    return h;
}

enum class ForwardMode { Train, Inference };

struct MlpModel {
    std::vector<int> layer_sizes;        // input, hidden..., 1
    std::vector<Eigen::MatrixXd> weights; // [l]: out x in
    std::vector<Eigen::VectorXd> biases;
    double dropout_rate = 0.0;

    int input_dim() const { return layer_sizes.front(); }
    std::size_t n_layers() const { return weights.size(); }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double dropout_rate = 0.3;
    double weight_decay = 1e-3;
    int epochs = 150;
    int batch_size = 64;
    std::uint64_t seed = 0;
    std::vector<int> hidden_sizes = {256, 64};

    void check() const {
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
        if (dropout_rate < 0 || dropout_rate >= 1)
            throw std::invalid_argument("dropout_rate must be in [0, 1)");
        if (weight_decay < 0) throw std::invalid_argument("weight_decay must be nonnegative");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (hidden_sizes.empty()) throw std::invalid_argument("need at least one hidden layer");
    }
};

inline MlpModel init_mlp(int input_dim, const std::vector<int>& hidden_sizes,
                         double dropout_rate, std::uint64_t seed) {
    MlpModel m;
    m.dropout_rate = dropout_rate;
    m.layer_sizes.push_back(input_dim);
    for (int h : hidden_sizes) m.layer_sizes.push_back(h);
    m.layer_sizes.push_back(1);

    auto rng = make_rng(seed, 201);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int fan_in = m.layer_sizes[l];
        const int fan_out = m.layer_sizes[l + 1];
        const double scale = std::sqrt(2.0 / fan_in); // He init for rectifiers
        m.weights.push_back(Eigen::MatrixXd::NullaryExpr(
            fan_out, fan_in, [&] { return scale * gauss(rng); }));
        m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return m;
}

namespace detail {

struct MlpTrace {
    std::vector<Eigen::MatrixXd> activations; // post-nonlinearity (and dropout), per layer input
    std::vector<Eigen::MatrixXd> pre_acts;    // pre-nonlinearity, per layer
    std::vector<Eigen::MatrixXd> masks;       // inverted-dropout multipliers on hidden outputs
};

// Batch forward (rows are samples). Train mode applies inverted dropout to
// hidden activations so inference needs no rescaling.
inline Eigen::VectorXd mlp_forward_batch(const MlpModel& m, const Eigen::MatrixXd& x,
                                         ForwardMode mode, std::mt19937_64* rng,
                                         MlpTrace* trace = nullptr) {
    if (x.cols() != m.input_dim())
        throw std::invalid_argument("mlp_forward: input dim mismatch");
    const double keep = 1.0 - m.dropout_rate;
    std::bernoulli_distribution coin(keep);
    Eigen::MatrixXd a = x;
    if (trace) trace->activations.push_back(a);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        Eigen::MatrixXd z =
            (a * m.weights[l].transpose()).rowwise() + m.biases[l].transpose();
        if (trace) trace->pre_acts.push_back(z);
        if (l + 1 < m.n_layers()) {
            a = z.cwiseMax(0.0);
            if (mode == ForwardMode::Train && m.dropout_rate > 0.0) {
                Eigen::MatrixXd mask(a.rows(), a.cols());
                for (Eigen::Index r = 0; r < a.rows(); ++r)
                    for (Eigen::Index c = 0; c < a.cols(); ++c)
                        mask(r, c) = coin(*rng) ? 1.0 / keep : 0.0;
                a = a.cwiseProduct(mask);
                if (trace) trace->masks.push_back(std::move(mask));
            } else if (trace) {
                trace->masks.push_back(Eigen::MatrixXd::Ones(a.rows(), a.cols()));
            }
            if (trace) trace->activations.push_back(a);
        } else {
            a = z; // identity output
        }
    }
    return a.col(0);
}

} // namespace detail

inline double mlp_forward(const MlpModel& m, const Eigen::VectorXd& input,
                          ForwardMode mode = ForwardMode::Inference,
                          std::uint64_t dropout_seed = 0) {
    auto rng = make_rng(dropout_seed, 202);
    return detail::mlp_forward_batch(m, input.transpose(), mode, &rng)[0];
}

inline Eigen::VectorXd mlp_predict(const MlpModel& m, const Eigen::MatrixXd& x) {
    return detail::mlp_forward_batch(m, x, ForwardMode::Inference, nullptr);
}

struct MlpGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Gradients of the batch MSE loss under the same dropout masks as the
// paired forward pass (same seed).
inline MlpGrads mlp_backward(const MlpModel& m, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets,
                             std::uint64_t dropout_seed = 0,
                             ForwardMode mode = ForwardMode::Inference,
                             double* loss_out = nullptr) {
    if (inputs.rows() != targets.size())
        throw std::invalid_argument("mlp_backward: inputs/targets mismatch");
    auto rng = make_rng(dropout_seed, 202);
    detail::MlpTrace trace;
    const Eigen::VectorXd preds =
        detail::mlp_forward_batch(m, inputs, mode, &rng, &trace);
    const double n = static_cast<double>(inputs.rows());
    if (loss_out) *loss_out = (preds - targets).squaredNorm() / n;

    MlpGrads g;
    g.weights.resize(m.n_layers());
    g.biases.resize(m.n_layers());
    // d(mean (y - yhat)^2)/d yhat = 2 (yhat - y) / n
    Eigen::MatrixXd delta = (2.0 / n) * (preds - targets);
    for (std::size_t li = m.n_layers(); li-- > 0;) {
        g.weights[li] = delta.transpose() * trace.activations[li];
        g.biases[li] = delta.colwise().sum().transpose();
        if (li > 0) {
            Eigen::MatrixXd back = delta * m.weights[li];
            // through dropout, then through the rectifier
            back = back.cwiseProduct(trace.masks[li - 1]);
            delta = back.cwiseProduct(
                (trace.pre_acts[li - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

// --- AdamW ------------------------------------------------------------

struct AdamTensorState {
    Eigen::MatrixXd m, v;
};

// One decoupled-weight-decay Adam update on a single tensor. Decay is
// applied directly to the parameter, not folded into the gradient.
inline void adamw_update(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                         AdamTensorState& st, long t, double lr, double weight_decay,
                         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (st.m.size() == 0) {
        st.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
        st.v = st.m;
    }
    param -= lr * weight_decay * param;
    st.m = beta1 * st.m + (1.0 - beta1) * grad;
    st.v = beta2 * st.v + (1.0 - beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    param.array() -=
        lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + eps);
}

struct AdamWState {
    std::vector<AdamTensorState> weights, biases;
    long t = 0;
};

inline void adamw_step(MlpModel& model, const MlpGrads& grads, AdamWState& state,
                       const TrainConfig& cfg) {
    if (state.weights.empty()) {
        state.weights.resize(model.n_layers());
        state.biases.resize(model.n_layers());
    }
    ++state.t;
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        adamw_update(model.weights[l], grads.weights[l], state.weights[l], state.t,
                     cfg.learning_rate, cfg.weight_decay);
        Eigen::MatrixXd bgrad = grads.biases[l];
        Eigen::Map<Eigen::MatrixXd> bias(model.biases[l].data(), model.biases[l].size(), 1);
        adamw_update(bias, bgrad, state.biases[l], state.t, cfg.learning_rate,
                     cfg.weight_decay);
    }
}

struct RegressorTrainResult {
    MlpModel model;
    std::vector<double> epoch_losses;
};

// Minibatch AdamW on the MSE loss over fused features. Deterministic given
// the seed; dropout masks are reseeded per step from the run seed.
inline RegressorTrainResult train_regressor(const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& y,
                                            const TrainConfig& cfg) {
    cfg.check();
    if (x.rows() != y.size()) throw std::invalid_argument("train_regressor: x/y mismatch");
    if (x.rows() < cfg.batch_size && x.rows() < 1)
        throw std::invalid_argument("train_regressor: empty training set");

    MlpModel model = init_mlp(static_cast<int>(x.cols()), cfg.hidden_sizes,
                              cfg.dropout_rate, cfg.seed);
    AdamWState state;
    auto shuffle_rng = make_rng(cfg.seed, 203);
    std::vector<int> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), 0);

    RegressorTrainResult result;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (Eigen::Index start = 0; start < x.rows(); start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, x.rows() - start);
            Eigen::MatrixXd xb(bs, x.cols());
            Eigen::VectorXd yb(bs);
            for (Eigen::Index r = 0; r < bs; ++r) {
                xb.row(r) = x.row(order[static_cast<std::size_t>(start + r)]);
                yb[r] = y[order[static_cast<std::size_t>(start + r)]];
            }
            double loss = 0.0;
            const std::uint64_t mask_seed = split_seed(cfg.seed, 300 + static_cast<std::uint64_t>(step));
            const MlpGrads grads = mlp_backward(model, xb, yb, mask_seed,
                                                cfg.dropout_rate > 0 ? ForwardMode::Train
                                                                     : ForwardMode::Inference,
                                                &loss);
            adamw_step(model, grads, state, cfg);
            epoch_loss += loss;
            ++n_batches;
            ++step;
        }
        result.epoch_losses.push_back(epoch_loss / n_batches);
    }
    result.model = std::move(model);
    return result;
}

// --- Grid search -------------------------------------------------------

struct HyperGrid {
    std::vector<double> learning_rates = {1e-3, 1e-4};
    std::vector<double> dropout_rates = {0.3, 0.5};
    std::vector<double> weight_decays = {1e-3, 1e-4};
};

struct GridCellScore {
    TrainConfig config;
    std::vector<double> fold_r2;
    std::vector<double> fold_rmse;
    double mean_r2 = 0.0;
    double mean_rmse = 0.0;
};

struct GridSearchResult {
    TrainConfig best;
    std::vector<GridCellScore> table; // declaration order: lr, dropout, decay
};

// One fit per (cell x fold): train on the other folds, score this fold.
// Selection: highest mean validation R^2, ties by lower mean RMSE, then
// declaration order.
inline GridSearchResult grid_search(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const std::vector<std::vector<int>>& folds,
                                    const HyperGrid& grid, const TrainConfig& base) {
    if (grid.learning_rates.empty() || grid.dropout_rates.empty() ||
        grid.weight_decays.empty())
        throw std::invalid_argument("grid_search: empty grid");
    if (folds.size() < 2) throw std::invalid_argument("grid_search: needs >= 2 folds");

    GridSearchResult result;
    for (double lr : grid.learning_rates) {
        for (double dr : grid.dropout_rates) {
            for (double wd : grid.weight_decays) {
                GridCellScore cell;
                cell.config = base;
                cell.config.learning_rate = lr;
                cell.config.dropout_rate = dr;
                cell.config.weight_decay = wd;
                for (std::size_t f = 0; f < folds.size(); ++f) {
                    std::vector<int> train_idx;
                    for (std::size_t g = 0; g < folds.size(); ++g)
                        if (g != f)
                            train_idx.insert(train_idx.end(), folds[g].begin(),
                                             folds[g].end());
                    Eigen::MatrixXd xt(train_idx.size(), x.cols());
                    Eigen::VectorXd yt(train_idx.size());
                    for (std::size_t r = 0; r < train_idx.size(); ++r) {
                        xt.row(static_cast<Eigen::Index>(r)) = x.row(train_idx[r]);
                        yt[static_cast<Eigen::Index>(r)] = y[train_idx[r]];
                    }
                    const auto fit = train_regressor(xt, yt, cell.config);
                    Eigen::MatrixXd xv(folds[f].size(), x.cols());
                    Eigen::VectorXd yv(folds[f].size());
                    for (std::size_t r = 0; r < folds[f].size(); ++r) {
                        xv.row(static_cast<Eigen::Index>(r)) = x.row(folds[f][r]);
                        yv[static_cast<Eigen::Index>(r)] = y[folds[f][r]];
                    }
                    const Eigen::VectorXd pv = mlp_predict(fit.model, xv);
                    cell.fold_r2.push_back(r_squared(pv, yv));
                    cell.fold_rmse.push_back(rmse(pv, yv));
                }
                cell.mean_r2 =
                    std::accumulate(cell.fold_r2.begin(), cell.fold_r2.end(), 0.0) /
                    cell.fold_r2.size();
                cell.mean_rmse =
                    std::accumulate(cell.fold_rmse.begin(), cell.fold_rmse.end(), 0.0) /
                    cell.fold_rmse.size();
                result.table.push_back(std::move(cell));
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.table.size(); ++i) {
        const auto& a = result.table[i];
        const auto& b = result.table[best];
        if (a.mean_r2 > b.mean_r2 ||
            (a.mean_r2 == b.mean_r2 && a.mean_rmse < b.mean_rmse))
            best = i;
    }
    result.best = result.table[best].config;
    return result;
}

// --- Checkpoint IO -----------------------------------------------------

// Line-delimited checkpoint: layer sizes, dropout, fusion dims, seed, then
// one line per tensor with flattened row-major values.
inline void write_checkpoint(const MlpModel& m, const EmbeddingDims& dims,
                             std::uint64_t seed, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write checkpoint '" + path + "'");
    out << "layers=";
    for (std::size_t i = 0; i < m.layer_sizes.size(); ++i)
        out << (i ? "," : "") << m.layer_sizes[i];
    out << '\n';
    out << "dropout=" << detail::format_double(m.dropout_rate) << '\n';
    out << "dims=" << dims.sat << ',' << dims.street << ',' << dims.pdfm << '\n';
    out << "seed=" << seed << '\n';
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        std::string buf = "W" + std::to_string(l) + "=";
        for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) {
                if (r + c > 0) buf += ',';
                buf += detail::format_double(m.weights[l](r, c));
            }
        out << buf << '\n';
        buf = "b" + std::to_string(l) + "=";
        for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) {
            if (r > 0) buf += ',';
            buf += detail::format_double(m.biases[l][r]);
        }
        out << buf << '\n';
    }
}

inline MlpModel read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open checkpoint '" + path + "'");
    auto expect = [&](const char* key) {
        std::string line;
        if (!std::getline(in, line) || line.rfind(key, 0) != 0)
            throw DatasetError(path + ": expected '" + key + "' line");
        return line.substr(std::string(key).size());
    };
    MlpModel m;
    const std::string layers = expect("layers=");
    for (auto part : detail::split(layers, ','))
        m.layer_sizes.push_back(static_cast<int>(detail::parse_double(part, "layers")));
    m.dropout_rate = detail::parse_double(expect("dropout="), "dropout");
    expect("dims=");
    expect("seed=");
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int rows = m.layer_sizes[l + 1];
        const int cols = m.layer_sizes[l];
        const std::string wline = expect(("W" + std::to_string(l) + "=").c_str());
        auto wvals = detail::split(wline, ',');
        if (static_cast<int>(wvals.size()) != rows * cols)
            throw DatasetError(path + ": weight size mismatch at layer " + std::to_string(l));
        Eigen::MatrixXd w(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                w(r, c) = detail::parse_double(wvals[static_cast<std::size_t>(r * cols + c)], "W");
        m.weights.push_back(std::move(w));
        const std::string bline = expect(("b" + std::to_string(l) + "=").c_str());
        auto bvals = detail::split(bline, ',');
        if (static_cast<int>(bvals.size()) != rows)
            throw DatasetError(path + ": bias size mismatch at layer " + std::to_string(l));
        Eigen::VectorXd b(rows);
        for (int r = 0; r < rows; ++r)
            b[r] = detail::parse_double(bvals[static_cast<std::size_t>(r)], "b");
        m.biases.push_back(std::move(b));
    }
    return m;
}

} // namespace walkclip
