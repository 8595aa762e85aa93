#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <vector>

#include "pseudopose/rng.hpp"

namespace pseudopose {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense MLP with tanh hidden activations and a linear output layer. All
// heavy products go through the kernels backend.
struct Linear {
    RowMat w;            // in x out
    Eigen::VectorXd b;   // out
};

struct MlpGrads {
    std::vector<RowMat> dw;
    std::vector<Eigen::VectorXd> db;
    void add_scaled(const MlpGrads& other, double s);
};

struct Mlp {
    std::vector<Linear> layers;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.rows()); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w.cols()); }

    // dims = {in, h1, ..., out}; Xavier-uniform init, final layer scaled by
    // last_layer_scale (small head initializations).
    static Mlp create(const std::vector<int>& dims, Rng& rng, double last_layer_scale = 1.0);

    // acts (optional, required for backward): acts[0] = x, acts[i+1] = output
    // of layer i after its activation.
    RowMat forward(const RowMat& x, std::vector<RowMat>* acts = nullptr) const;

    // Returns dL/dx; accumulates parameter grads into `grads` (must be
    // zero-initialized or carry a running sum).
    RowMat backward(const std::vector<RowMat>& acts, const RowMat& dy, MlpGrads& grads) const;

    MlpGrads zero_grads() const;

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);

    size_t param_count() const;
};

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<RowMat> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;

    static Adam for_mlp(const Mlp& mlp);
    void update(Mlp& mlp, const MlpGrads& grads, double lr);
};

}  // namespace pseudopose
