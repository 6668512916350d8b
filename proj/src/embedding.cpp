#include "faceqan/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "faceqan/error.hpp"

namespace faceqan {

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw Error("embedding must have at least one dimension");
    }
    if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
        throw Error("embedding contains non-finite values");
    }
    norm_ = std::sqrt(dot(values_, values_));
    if (!(norm_ > 0.0) || !std::isfinite(norm_)) {
        throw Error("embedding has zero norm");
    }
}

Embedding Embedding::scaled(double factor) const {
    std::vector<double> v = values_;
    for (double& x : v) {
        x *= factor;
    }
    return Embedding(std::move(v));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
    const double num = dot(a.values(), b.values());
    const double den = std::sqrt(dot(a.values(), a.values()) * dot(b.values(), b.values()));
    return std::clamp(num / den, -1.0, 1.0);
}

double dissimilarity_loss(const Embedding& pred, const Embedding& target) {
    return 1.0 - cosine_similarity(pred, target);
}

}  // namespace faceqan
