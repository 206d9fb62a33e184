#include <cmath>
#include <iostream>

#include <Eigen/Dense>

#include "bidda/metrics.hpp"

namespace bidda {

namespace {

// PCA via the covariance (D <= N) or Gram (N < D) route; rows are centered.
Eigen::MatrixXd pca_project(const Eigen::MatrixXd& x, int k) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    if (d <= n) {
        Eigen::MatrixXd cov = centered.transpose() * centered / double(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        Eigen::MatrixXd basis = es.eigenvectors().rightCols(k).rowwise().reverse();
        return centered * basis;
    }
    Eigen::MatrixXd gram = centered * centered.transpose() / double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::MatrixXd u = es.eigenvectors().rightCols(k).rowwise().reverse();
    Eigen::VectorXd lam = es.eigenvalues().tail(k).reverse();
    for (int j = 0; j < k; ++j) {
        const double s = std::sqrt(std::max(lam(j), 1e-12) * n);
        u.col(j) *= s;  // scores = U * sqrt(lambda * n)
    }
    return u;
}

}  // namespace

std::vector<std::array<double, 2>> tsne_2d(const std::vector<std::vector<double>>& rows,
                                           double perplexity, int iterations, uint64_t seed) {
    const int n = static_cast<int>(rows.size());
    require(n >= 3, "tsne: need at least 3 points");
    const int d = static_cast<int>(rows[0].size());
    // perplexity must satisfy 3*perp < n
    const double perp = std::min(perplexity, (n - 1) / 3.0);

    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rows[i][j];

    // pairwise squared distances
    Eigen::VectorXd sq = x.rowwise().squaredNorm();
    Eigen::MatrixXd dist = (-2.0 * x * x.transpose());
    dist.colwise() += sq;
    dist.rowwise() += sq.transpose();
    dist.diagonal().setZero();

    // conditional distributions via per-point precision search
    Eigen::MatrixXd p(n, n);
    p.setZero();
    const double log_perp = std::log(perp);
    for (int i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        Eigen::VectorXd pi(n);
        for (int it = 0; it < 64; ++it) {
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                pi(j) = j == i ? 0.0 : std::exp(-beta * dist(i, j));
                sum += pi(j);
            }
            sum = std::max(sum, 1e-300);
            double h = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i && pi(j) > 0) {
                    const double q = pi(j) / sum;
                    h -= q * std::log(std::max(q, 1e-300));
                }
            const double diff = h - log_perp;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2 : (beta + beta_hi) / 2;
            } else {
                beta_hi = beta;
                beta = (beta + beta_lo) / 2;
            }
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += pi(j);
        p.row(i) = pi.transpose() / std::max(sum, 1e-300);
    }
    p = (p + p.transpose()).eval() / (2.0 * n);
    p = p.cwiseMax(1e-12);

    Rng rng(seed, 0x75e3ull);
    Eigen::MatrixXd y(n, 2), inc(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j) y(i, j) = rng.normal() * 1e-4;
    inc.setZero();

    const double exaggeration = 12.0;
    const int exag_until = std::min(250, iterations / 2);
    const double lr = 200.0;
    for (int it = 0; it < iterations; ++it) {
        const double ex = it < exag_until ? exaggeration : 1.0;
        const double momentum = it < 250 ? 0.5 : 0.8;

        Eigen::VectorXd ysq = y.rowwise().squaredNorm();
        Eigen::MatrixXd num = (-2.0 * y * y.transpose());
        num.colwise() += ysq;
        num.rowwise() += ysq.transpose();
        num = (1.0 + num.array()).inverse().matrix();
        num.diagonal().setZero();
        const double qsum = std::max(num.sum(), 1e-300);

        Eigen::MatrixXd grad(n, 2);
        grad.setZero();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double coef = (ex * p(i, j) - num(i, j) / qsum) * num(i, j);
                grad(i, 0) += 4.0 * coef * (y(i, 0) - y(j, 0));
                grad(i, 1) += 4.0 * coef * (y(i, 1) - y(j, 1));
            }
        }
        inc = momentum * inc - lr * grad;
        y += inc;
        y.rowwise() -= y.colwise().mean();
    }

    std::vector<std::array<double, 2>> out(n);
    for (int i = 0; i < n; ++i) out[i] = {y(i, 0), y(i, 1)};
    return out;
}

std::vector<std::array<double, 2>> embed_2d(const ImageBatch& images, const EmbedConfig& cfg,
                                            uint64_t seed) {
    const auto& t = images.data;
    const int n = t.n;
    require(n >= 3, "embed_2d: need at least 3 images");
    const int d = t.h * t.w * t.c;
    const double lo = images.range.lo, hi = images.range.hi;

    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            x(i, j) = 2.0 * (t.v[static_cast<size_t>(i) * d + j] - lo) / (hi - lo) - 1.0;

    int k = std::min(cfg.n_pca, std::min(d, n - 1));
    if (k < cfg.n_pca)
        std::cerr << "embed_2d: reducing PCA components from " << cfg.n_pca << " to " << k
                  << " (data rank limit)\n";
    Eigen::MatrixXd reduced = pca_project(x, k);

    std::vector<std::vector<double>> rows(n, std::vector<double>(k));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) rows[i][j] = reduced(i, j);
    return tsne_2d(rows, cfg.perplexity, cfg.iterations, seed);
}

}  // namespace bidda
