#include "pseudopose/mlp.hpp"

#include <cmath>

#include "pseudopose/errors.hpp"
#include "pseudopose/jsonio.hpp"
#include "pseudopose/kernels.hpp"

namespace pseudopose {

void MlpGrads::add_scaled(const MlpGrads& other, double s) {
    for (size_t i = 0; i < dw.size(); ++i) {
        kernels::axpy(s, other.dw[i].data(), dw[i].data(), dw[i].size());
        kernels::axpy(s, other.db[i].data(), db[i].data(), db[i].size());
    }
}

Mlp Mlp::create(const std::vector<int>& dims, Rng& rng, double last_layer_scale) {
    if (dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
    Mlp m;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        Linear l;
        const int in = dims[i], out = dims[i + 1];
        l.w.resize(in, out);
        const double limit = std::sqrt(6.0 / (in + out));
        const double scale = (i + 2 == dims.size()) ? last_layer_scale : 1.0;
        for (int r = 0; r < in; ++r)
            for (int c = 0; c < out; ++c) l.w(r, c) = scale * rng.uniform(-limit, limit);
        l.b = Eigen::VectorXd::Zero(out);
        m.layers.push_back(std::move(l));
    }
    return m;
}

RowMat Mlp::forward(const RowMat& x, std::vector<RowMat>* acts) const {
    if (x.cols() != input_dim()) throw ShapeError("mlp input width mismatch");
    if (acts) {
        acts->clear();
        acts->push_back(x);
    }
    RowMat cur = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        const Linear& l = layers[i];
        RowMat y(cur.rows(), l.w.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) y.row(r) = l.b.transpose();
        kernels::gemm_nn(cur.data(), l.w.data(), y.data(), static_cast<int>(cur.rows()),
                         static_cast<int>(cur.cols()), static_cast<int>(l.w.cols()));
        if (i + 1 < layers.size()) {
            double* p = y.data();
            for (Eigen::Index k = 0; k < y.size(); ++k) p[k] = std::tanh(p[k]);
        }
        cur = std::move(y);
        if (acts) acts->push_back(cur);
    }
    return cur;
}

RowMat Mlp::backward(const std::vector<RowMat>& acts, const RowMat& dy, MlpGrads& grads) const {
    if (acts.size() != layers.size() + 1) throw ShapeError("activation cache size mismatch");
    RowMat cur = dy;
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        const Linear& l = layers[i];
        RowMat dz;
        if (i + 1 < static_cast<int>(layers.size())) {
            const RowMat& a = acts[i + 1];
            dz.resize(cur.rows(), cur.cols());
            kernels::tanh_backward(a.data(), cur.data(), dz.data(), cur.size());
        } else {
            dz = std::move(cur);
        }
        const RowMat& x = acts[i];
        kernels::gemm_tn(x.data(), dz.data(), grads.dw[i].data(),
                         static_cast<int>(x.rows()), static_cast<int>(x.cols()),
                         static_cast<int>(dz.cols()));
        grads.db[i] += dz.colwise().sum().transpose();
        RowMat dx(x.rows(), x.cols());
        dx.setZero();
        kernels::gemm_nt(dz.data(), l.w.data(), dx.data(), static_cast<int>(dz.rows()),
                         static_cast<int>(dz.cols()), static_cast<int>(l.w.rows()));
        cur = std::move(dx);
    }
    return cur;
}

MlpGrads Mlp::zero_grads() const {
    MlpGrads g;
    for (const auto& l : layers) {
        g.dw.push_back(RowMat::Zero(l.w.rows(), l.w.cols()));
        g.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    return g;
}

nlohmann::json Mlp::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& l : layers) {
        nlohmann::json lj;
        lj["in"] = l.w.rows();
        lj["out"] = l.w.cols();
        lj["w"] = jsonio::matrix_to_json(Eigen::MatrixXd(l.w));
        lj["b"] = jsonio::vector_to_json(l.b);
        arr.push_back(lj);
    }
    return nlohmann::json{{"layers", arr}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    Mlp m;
    for (const auto& lj : j.at("layers")) {
        Linear l;
        const int in = lj.at("in").get<int>(), out = lj.at("out").get<int>();
        l.w = jsonio::matrix_from_json(lj.at("w"), in, out);
        l.b = jsonio::vector_from_json(lj.at("b"));
        if (l.b.size() != out) throw FormatError("mlp bias arity mismatch");
        m.layers.push_back(std::move(l));
    }
    return m;
}

size_t Mlp::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

Adam Adam::for_mlp(const Mlp& mlp) {
    Adam a;
    for (const auto& l : mlp.layers) {
        a.mw.push_back(RowMat::Zero(l.w.rows(), l.w.cols()));
        a.vw.push_back(RowMat::Zero(l.w.rows(), l.w.cols()));
        a.mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
        a.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    return a;
}

void Adam::update(Mlp& mlp, const MlpGrads& grads, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (size_t i = 0; i < mlp.layers.size(); ++i) {
        Linear& l = mlp.layers[i];
        kernels::adam_update(l.w.data(), mw[i].data(), vw[i].data(), grads.dw[i].data(),
                             l.w.size(), lr, beta1, beta2, eps, c1, c2);
        kernels::adam_update(l.b.data(), mb[i].data(), vb[i].data(), grads.db[i].data(),
                             l.b.size(), lr, beta1, beta2, eps, c1, c2);
    }
}

}  // namespace pseudopose
