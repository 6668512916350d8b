#pragma once

#include <span>
#include <vector>

namespace faceqan {

/// Output vector of an embedding model. Always finite with a nonzero L2 norm.
class Embedding {
public:
    /// Throws faceqan::Error if the vector is empty, non-finite or zero.
    explicit Embedding(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double norm() const noexcept { return norm_; }

    Embedding scaled(double factor) const;

    friend bool operator==(const Embedding& a, const Embedding& b) noexcept { return a.values_ == b.values_; }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);

/// Cosine similarity, clamped to [-1, 1].
///
/// Computed as a.b / sqrt((a.a)(b.b)) so that cosine(a, a) is exactly 1.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Angular dissimilarity 1 - cos(pred, target), in [0, 2].
double dissimilarity_loss(const Embedding& pred, const Embedding& target);

}  // namespace faceqan
