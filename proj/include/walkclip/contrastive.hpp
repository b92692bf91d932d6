#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace walkclip {

struct EmbeddingPairBatch {
    Eigen::MatrixXd image_embs; // N x p, row i pairs with text row i
    Eigen::MatrixXd text_embs;  // N x q
};

struct ProjectionHead {
    Eigen::MatrixXd image_proj; // p x k
    Eigen::MatrixXd text_proj;  // q x k
    double log_tau = 0.0;       // temperature trained in log space

    double tau() const { return std::exp(log_tau); }
};

struct ContrastiveTrainConfig {
    int epochs = 10;
    double learning_rate = 1e-2;
    int batch_size = 32;
    std::uint64_t seed = 0;
    bool symmetric = false;
    int proj_dim = 16;

    void check() const {
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
        if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
        if (proj_dim < 1) throw std::invalid_argument("proj_dim must be >= 1");
    }
};

inline double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return u.dot(v) / (nu * nv);
}

struct InfoNceGrads {
    Eigen::MatrixXd image_proj;
    Eigen::MatrixXd text_proj;
    double log_tau = 0.0;
};

namespace detail {

struct NceForward {
    Eigen::MatrixXd u_hat, v_hat; // row-normalized projections
    Eigen::VectorXd u_norm, v_norm;
    Eigen::MatrixXd cos;   // u_hat * v_hat^T
    Eigen::MatrixXd logit; // cos / tau
};

inline NceForward nce_forward(const ProjectionHead& head, const EmbeddingPairBatch& b) {
    if (b.image_embs.rows() != b.text_embs.rows() || b.image_embs.rows() < 1)
        throw std::invalid_argument("info_nce: batch rows mismatch or empty");
    NceForward f;
    Eigen::MatrixXd u = b.image_embs * head.image_proj;
    Eigen::MatrixXd v = b.text_embs * head.text_proj;
    f.u_norm = u.rowwise().norm();
    f.v_norm = v.rowwise().norm();
    if (f.u_norm.minCoeff() == 0.0 || f.v_norm.minCoeff() == 0.0)
        throw std::invalid_argument("info_nce: zero-norm projected row");
    f.u_hat = u.array().colwise() / f.u_norm.array();
    f.v_hat = v.array().colwise() / f.v_norm.array();
    f.cos = f.u_hat * f.v_hat.transpose();
    f.logit = f.cos / head.tau();
    return f;
}

// Row-wise log-sum-exp, numerically stable.
inline Eigen::VectorXd row_lse(const Eigen::MatrixXd& m) {
    Eigen::VectorXd mx = m.rowwise().maxCoeff();
    return mx.array() +
           (m.colwise() - mx).array().exp().rowwise().sum().log();
}

// dL/dlogit for the image->text direction: (softmax over columns - I) / N.
inline Eigen::MatrixXd i2t_logit_grad(const Eigen::MatrixXd& logit) {
    const Eigen::Index n = logit.rows();
    Eigen::VectorXd mx = logit.rowwise().maxCoeff();
    Eigen::MatrixXd p = (logit.colwise() - mx).array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    p -= Eigen::MatrixXd::Identity(n, n);
    return p / static_cast<double>(n);
}

} // namespace detail

// InfoNCE over projected pairs: positives on the diagonal, denominator over
// all text rows for each image row. The symmetric flag averages in the
// text->image direction.
inline double info_nce_loss(const ProjectionHead& head, const EmbeddingPairBatch& b,
                            bool symmetric = false) {
    const auto f = detail::nce_forward(head, b);
    const double n = static_cast<double>(f.logit.rows());
    const Eigen::VectorXd diag = f.logit.diagonal();
    double loss = (detail::row_lse(f.logit) - diag).sum() / n;
    if (symmetric) {
        const double t2i = (detail::row_lse(f.logit.transpose()) - diag).sum() / n;
        loss = 0.5 * (loss + t2i);
    }
    return loss;
}

inline InfoNceGrads info_nce_grad(const ProjectionHead& head, const EmbeddingPairBatch& b,
                                  bool symmetric = false) {
    const auto f = detail::nce_forward(head, b);
    Eigen::MatrixXd g = detail::i2t_logit_grad(f.logit);
    if (symmetric)
        g = 0.5 * (g + detail::i2t_logit_grad(f.logit.transpose()).transpose());

    const double tau = head.tau();
    InfoNceGrads out;
    // logit = cos * exp(-log_tau), so d logit / d log_tau = -logit.
    out.log_tau = -(g.array() * f.cos.array()).sum() / tau;

    const Eigen::MatrixXd dcos = g / tau;
    // Through row normalization: d(u_hat_i . v_hat_j)/du_i = (v_hat_j - cos_ij u_hat_i)/|u_i|.
    Eigen::MatrixXd du = dcos * f.v_hat -
                         (f.u_hat.array().colwise() *
                          (dcos.array() * f.cos.array()).rowwise().sum())
                             .matrix();
    du.array().colwise() /= f.u_norm.array();
    Eigen::MatrixXd dv = dcos.transpose() * f.u_hat -
                         (f.v_hat.array().colwise() *
                          (dcos.array() * f.cos.array()).colwise().sum().transpose())
                             .matrix();
    dv.array().colwise() /= f.v_norm.array();

    out.image_proj = b.image_embs.transpose() * du;
    out.text_proj = b.text_embs.transpose() * dv;
    return out;
}

struct ContrastiveTrainResult {
    ProjectionHead head;
    std::vector<double> epoch_losses; // mean minibatch loss per epoch
};

// Minibatch Adam on the InfoNCE loss. Deterministic given the seed.
inline ContrastiveTrainResult train_projection_head(const EmbeddingPairBatch& pairs,
                                                    const ContrastiveTrainConfig& cfg) {
    cfg.check();
    const Eigen::Index n = pairs.image_embs.rows();
    if (n < cfg.batch_size)
        throw std::invalid_argument("train_projection_head: fewer pairs than batch_size");
    const Eigen::Index p = pairs.image_embs.cols();
    const Eigen::Index q = pairs.text_embs.cols();
    const Eigen::Index k = cfg.proj_dim;

    auto init_rng = make_rng(cfg.seed, 101);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ProjectionHead head;
    head.image_proj = Eigen::MatrixXd::NullaryExpr(
        p, k, [&] { return gauss(init_rng) / std::sqrt(static_cast<double>(p)); });
    head.text_proj = Eigen::MatrixXd::NullaryExpr(
        q, k, [&] { return gauss(init_rng) / std::sqrt(static_cast<double>(q)); });
    head.log_tau = std::log(0.07);

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    Eigen::MatrixXd m_i = Eigen::MatrixXd::Zero(p, k), v_i = m_i;
    Eigen::MatrixXd m_t = Eigen::MatrixXd::Zero(q, k), v_t = m_t;
    double m_tau = 0.0, v_tau = 0.0;
    long step = 0;

    auto shuffle_rng = make_rng(cfg.seed, 102);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    ContrastiveTrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
            EmbeddingPairBatch batch;
            batch.image_embs.resize(bs, p);
            batch.text_embs.resize(bs, q);
            for (Eigen::Index r = 0; r < bs; ++r) {
                batch.image_embs.row(r) = pairs.image_embs.row(order[start + r]);
                batch.text_embs.row(r) = pairs.text_embs.row(order[start + r]);
            }
            epoch_loss += info_nce_loss(head, batch, cfg.symmetric);
            ++n_batches;
            const auto g = info_nce_grad(head, batch, cfg.symmetric);

            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, step);
            const double bc2 = 1.0 - std::pow(kBeta2, step);
            auto adam = [&](Eigen::MatrixXd& param, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                            const Eigen::MatrixXd& grad) {
                m = kBeta1 * m + (1.0 - kBeta1) * grad;
                v = kBeta2 * v + (1.0 - kBeta2) * grad.array().square().matrix();
                param.array() -= cfg.learning_rate * (m.array() / bc1) /
                                 ((v.array() / bc2).sqrt() + kEps);
            };
            adam(head.image_proj, m_i, v_i, g.image_proj);
            adam(head.text_proj, m_t, v_t, g.text_proj);
            m_tau = kBeta1 * m_tau + (1.0 - kBeta1) * g.log_tau;
            v_tau = kBeta2 * v_tau + (1.0 - kBeta2) * g.log_tau * g.log_tau;
            head.log_tau -= cfg.learning_rate * (m_tau / bc1) /
                            (std::sqrt(v_tau / bc2) + kEps);
        }
        result.epoch_losses.push_back(epoch_loss / n_batches);
    }
    result.head = std::move(head);
    return result;
}

// Pair fixture file: `dims=<p>,<q>` header, then `pair_id|image_emb|text_emb`.
inline EmbeddingPairBatch parse_pair_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open pair fixture '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("dims=", 0) != 0)
        throw DatasetError(path + ":1: expected 'dims=<p>,<q>' header");
    auto dims = detail::split(std::string_view(line).substr(5), ',');
    if (dims.size() != 2) throw DatasetError(path + ":1: dims header needs 2 values");
    const int p = static_cast<int>(detail::parse_double(dims[0], "dims"));
    const int q = static_cast<int>(detail::parse_double(dims[1], "dims"));

    std::vector<Eigen::VectorXd> imgs, txts;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split(line, '|');
        const std::string where = path + ":" + std::to_string(lineno);
        if (fields.size() != 3)
            throw DatasetError(where + ": expected 3 '|' fields");
        imgs.push_back(detail::parse_vector(fields[1], where + " image_emb"));
        txts.push_back(detail::parse_vector(fields[2], where + " text_emb"));
        if (imgs.back().size() != p || txts.back().size() != q)
            throw DatasetError(where + ": embedding dims mismatch");
    }
    EmbeddingPairBatch b;
    b.image_embs.resize(static_cast<Eigen::Index>(imgs.size()), p);
    b.text_embs.resize(static_cast<Eigen::Index>(txts.size()), q);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        b.image_embs.row(static_cast<Eigen::Index>(i)) = imgs[i];
        b.text_embs.row(static_cast<Eigen::Index>(i)) = txts[i];
    }
    return b;
}

inline void write_projection_head(const ProjectionHead& head,
                                  const std::vector<double>& epoch_losses,
                                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write projection head '" + path + "'");
    out << "shape=" << head.image_proj.rows() << ',' << head.text_proj.rows() << ','
        << head.image_proj.cols() << '\n';
    out << "log_tau=" << detail::format_double(head.log_tau) << '\n';
    auto dump = [&](const char* key, const Eigen::MatrixXd& m) {
        std::string buf = key;
        buf += '=';
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (r + c > 0) buf += ',';
                buf += detail::format_double(m(r, c));
            }
        out << buf << '\n';
    };
    dump("image_proj", head.image_proj);
    dump("text_proj", head.text_proj);
    out << "epoch_losses=";
    for (std::size_t i = 0; i < epoch_losses.size(); ++i)
        out << (i ? "," : "") << detail::format_double(epoch_losses[i]);
    out << '\n';
}

inline void write_pair_fixture(const EmbeddingPairBatch& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write pair fixture '" + path + "'");
    out << "dims=" << b.image_embs.cols() << ',' << b.text_embs.cols() << '\n';
    for (Eigen::Index i = 0; i < b.image_embs.rows(); ++i) {
        std::string buf = "pair" + std::to_string(i) + "|";
        detail::append_vector(buf, b.image_embs.row(i).transpose());
        buf += '|';
        detail::append_vector(buf, b.text_embs.row(i).transpose());
        out << buf << '\n';
    }
}

} // namespace walkclip
