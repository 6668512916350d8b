#include "faceqan/training.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include <Eigen/Dense>

#include "faceqan/error.hpp"
#include "faceqan/random.hpp"

namespace faceqan {

Network train_embedding_head(const Network& base, std::span<const FaceImage> images,
                             std::span<const std::size_t> labels, const HeadTrainingOptions& options) {
    if (images.empty() || images.size() != labels.size()) {
        throw Error("head training needs one label per image and at least one image");
    }
    if (!(options.ridge > 0.0)) {
        throw Error("ridge penalty must be positive");
    }
    if (!std::holds_alternative<Linear>(base.layers().back())) {
        throw Error("head training expects the network to end in a linear layer");
    }
    const std::size_t dim = base.output_dim();
    const std::size_t identities = *std::max_element(labels.begin(), labels.end()) + 1;

    // One random unit-norm target code per identity.
    Rng rng(mix64(options.seed ^ 0x636f646573ULL));
    Eigen::MatrixXd codes(static_cast<Eigen::Index>(identities), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < codes.rows(); ++i) {
        for (Eigen::Index j = 0; j < codes.cols(); ++j) {
            codes(i, j) = rng.normal();
        }
        codes.row(i).normalize();
    }

    const std::size_t n = images.size();
    const std::vector<double> first = base.features(images[0].pixels());
    const std::size_t f = first.size();
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f + 1));
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> feat = i == 0 ? first : base.features(images[i].pixels());
        for (std::size_t j = 0; j < f; ++j) {
            phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feat[j];
        }
        phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = 1.0;
        targets.row(static_cast<Eigen::Index>(i)) = codes.row(static_cast<Eigen::Index>(labels[i]));
    }

    Eigen::MatrixXd gram = phi.transpose() * phi;
    gram.diagonal().array() += options.ridge * static_cast<double>(n);
    const Eigen::MatrixXd solution = gram.ldlt().solve(phi.transpose() * targets);  // (f+1) x dim

    Linear head;
    head.in_features = f;
    head.out_features = dim;
    head.weights.resize(f * dim);
    head.bias.resize(dim);
    for (std::size_t o = 0; o < dim; ++o) {
        for (std::size_t j = 0; j < f; ++j) {
            head.weights[o * f + j] = solution(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(o));
        }
        head.bias[o] = solution(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(o));
    }
    return base.with_last_layer(std::move(head));
}

}  // namespace faceqan
