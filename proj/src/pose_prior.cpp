#include "pseudopose/pose_prior.hpp"

#include <cmath>
#include <numeric>

#include "pseudopose/errors.hpp"
#include "pseudopose/jsonio.hpp"

namespace pseudopose {

namespace {

RowMat poses_to_rows(const std::vector<Eigen::MatrixXd>& poses) {
    const int n = static_cast<int>(poses.size());
    const int dim = static_cast<int>(poses[0].size());
    RowMat x(n, dim);
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd& p = poses[i];
        int k = 0;
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (int c = 0; c < 3; ++c) x(i, k++) = p(r, c);
    }
    return x;
}

}  // namespace

std::vector<Eigen::MatrixXd> generate_pose_corpus(const KinematicModel& model, int count,
                                                  uint64_t seed) {
    Rng rng(seed);
    const int jb = model.joint_count - 1;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        Eigen::MatrixXd pose(jb, 3);
        double extremity = 0.0;
        for (int j = 0; j < jb; ++j) {
            const auto& lim = model.joint_limits[j];
            for (int c = 0; c < 3; ++c) {
                pose(j, c) = rng.uniform(lim.lo[c], lim.hi[c]);
                const double half = 0.5 * (lim.hi[c] - lim.lo[c]);
                if (half > 0) extremity += std::abs(pose(j, c)) / half;
            }
        }
        extremity /= 3.0 * jb;
        if (extremity > 0.45) continue;  // reject extreme articulations
        out.push_back(std::move(pose));
    }
    return out;
}

PosePriorVAE train_prior(const std::vector<Eigen::MatrixXd>& corpus,
                         const PriorTrainConfig& cfg, uint64_t seed, int latent_dim,
                         PriorTrainLog* log) {
    if (corpus.size() < 1000)
        throw DataError("pose corpus too small: " + std::to_string(corpus.size()) +
                        " (need >= 1000)");
    const int jb = static_cast<int>(corpus[0].rows());
    const int dim = 3 * jb;
    const int D = latent_dim;

    Rng rng(seed);
    PosePriorVAE prior;
    prior.latent_dim = D;
    prior.body_joint_count = jb;
    prior.seed = seed;
    prior.kl_weight = cfg.kl_weight;
    prior.corpus_id = cfg.corpus_id;
    prior.encoder = Mlp::create({dim, 128, 128, 2 * D}, rng);
    prior.decoder = Mlp::create({D, 128, 128, dim}, rng);

    Adam enc_opt = Adam::for_mlp(prior.encoder);
    Adam dec_opt = Adam::for_mlp(prior.decoder);

    const RowMat x_all = poses_to_rows(corpus);
    const int n = static_cast<int>(x_all.rows());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_elbo = 0.0, epoch_kl = 0.0, kl_min = 1e300;
        int batches = 0;
        for (int start = 0; start + cfg.batch_size <= n; start += cfg.batch_size) {
            const int bs = cfg.batch_size;
            RowMat x(bs, dim);
            for (int i = 0; i < bs; ++i) x.row(i) = x_all.row(order[start + i]);

            std::vector<RowMat> enc_acts;
            const RowMat enc_out = prior.encoder.forward(x, &enc_acts);
            const RowMat mu = enc_out.leftCols(D);
            const RowMat logvar = enc_out.rightCols(D);

            RowMat eps(bs, D);
            for (int i = 0; i < bs; ++i)
                for (int d = 0; d < D; ++d) eps(i, d) = rng.normal();
            const RowMat sigma = (0.5 * logvar).array().exp().matrix();
            const RowMat z = mu + sigma.cwiseProduct(eps);

            std::vector<RowMat> dec_acts;
            const RowMat recon = prior.decoder.forward(z, &dec_acts);

            const RowMat diff = recon - x;
            const double recon_loss = diff.squaredNorm() / (bs * dim);
            const double kl =
                0.5 *
                (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum() /
                bs;
            epoch_elbo += recon_loss + cfg.kl_weight * kl;
            epoch_kl += kl;
            kl_min = std::min(kl_min, kl);
            ++batches;

            // backward
            MlpGrads dec_grads = prior.decoder.zero_grads();
            const RowMat drecon = (2.0 / (bs * dim)) * diff;
            const RowMat dz = prior.decoder.backward(dec_acts, drecon, dec_grads);

            RowMat denc(bs, 2 * D);
            // d/dmu: reparam path + KL path
            denc.leftCols(D) = dz + (cfg.kl_weight / bs) * mu;
            // d/dlogvar: z = mu + exp(lv/2) eps, KL term 0.5(e^lv - 1 - lv)
            denc.rightCols(D) = dz.cwiseProduct(eps).cwiseProduct(0.5 * sigma) +
                                (cfg.kl_weight / bs) * 0.5 *
                                    (logvar.array().exp() - 1.0).matrix();

            MlpGrads enc_grads = prior.encoder.zero_grads();
            prior.encoder.backward(enc_acts, denc, enc_grads);

            enc_opt.update(prior.encoder, enc_grads, cfg.learning_rate);
            dec_opt.update(prior.decoder, dec_grads, cfg.learning_rate);
        }
        if (log && batches > 0) {
            log->epoch_elbo.push_back(epoch_elbo / batches);
            log->epoch_kl.push_back(epoch_kl / batches);
            log->step_kl_min.push_back(kl_min);
        }
    }
    return prior;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const PosePriorVAE& prior,
                                                   const Eigen::MatrixXd& body_pose) {
    if (body_pose.rows() != prior.body_joint_count || body_pose.cols() != 3)
        throw ShapeError("body_pose must be (J-1) x 3");
    RowMat x(1, 3 * prior.body_joint_count);
    int k = 0;
    for (Eigen::Index r = 0; r < body_pose.rows(); ++r)
        for (int c = 0; c < 3; ++c) x(0, k++) = body_pose(r, c);
    const RowMat out = prior.encoder.forward(x);
    const int D = prior.latent_dim;
    return {out.leftCols(D).transpose().col(0), out.rightCols(D).transpose().col(0)};
}

Eigen::MatrixXd decode(const PosePriorVAE& prior, const LatentCode& z) {
    if (z.z.size() != prior.latent_dim)
        throw ShapeError("latent code has length " + std::to_string(z.z.size()) +
                         ", expected " + std::to_string(prior.latent_dim));
    RowMat zin(1, prior.latent_dim);
    zin.row(0) = z.z.transpose();
    const RowMat out = prior.decoder.forward(zin);
    Eigen::MatrixXd pose(prior.body_joint_count, 3);
    int k = 0;
    for (int r = 0; r < prior.body_joint_count; ++r)
        for (int c = 0; c < 3; ++c) pose(r, c) = out(0, k++);
    return pose;
}

RowMat decode_batch(const PosePriorVAE& prior, const RowMat& z, std::vector<RowMat>* acts) {
    return prior.decoder.forward(z, acts);
}

RowMat decode_backward(const PosePriorVAE& prior, const std::vector<RowMat>& acts,
                       const RowMat& dpose) {
    MlpGrads scratch = prior.decoder.zero_grads();
    return prior.decoder.backward(acts, dpose, scratch);
}

double l2_penalty(const LatentCode& z, const ShapeParams& beta, double weight) {
    if (weight < 0) throw ConfigError("l2 penalty weight must be >= 0");
    return weight * (z.z.squaredNorm() + beta.beta.squaredNorm());
}

void PosePriorVAE::save(const std::string& path) const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "pose_prior_vae";
    j["latent_dim"] = latent_dim;
    j["body_joint_count"] = body_joint_count;
    j["seed"] = seed;
    j["kl_weight"] = kl_weight;
    j["corpus_id"] = corpus_id;
    j["encoder"] = encoder.to_json();
    j["decoder"] = decoder.to_json();
    jsonio::write_file(path, j);
}

PosePriorVAE PosePriorVAE::load(const std::string& path) {
    const nlohmann::json j = jsonio::read_file(path);
    if (jsonio::require(j, "kind", path) != "pose_prior_vae")
        throw FormatError(path + ": not a pose_prior_vae asset");
    PosePriorVAE p;
    p.latent_dim = j.at("latent_dim").get<int>();
    p.body_joint_count = j.at("body_joint_count").get<int>();
    p.seed = j.at("seed").get<uint64_t>();
    p.kl_weight = j.at("kl_weight").get<double>();
    p.corpus_id = j.at("corpus_id").get<std::string>();
    p.encoder = Mlp::from_json(j.at("encoder"));
    p.decoder = Mlp::from_json(j.at("decoder"));
    if (p.encoder.output_dim() != 2 * p.latent_dim ||
        p.decoder.input_dim() != p.latent_dim ||
        p.decoder.output_dim() != 3 * p.body_joint_count)
        throw IntegrityError(path + ": inconsistent prior shapes");
    return p;
}

}  // namespace pseudopose
