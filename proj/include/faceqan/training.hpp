#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "faceqan/image.hpp"
#include "faceqan/network.hpp"

namespace faceqan {

struct HeadTrainingOptions {
    double ridge = 1e-2;  // L2 penalty on the head weights
    std::uint64_t seed = 0;  // seeds the per-identity target codes
};

/// Refits the final linear layer by ridge regression from the penultimate features onto
/// one random unit code per identity; earlier layers stay fixed. labels[i] is the identity
/// of images[i].
Network train_embedding_head(const Network& base, std::span<const FaceImage> images,
                             std::span<const std::size_t> labels, const HeadTrainingOptions& options = {});

}  // namespace faceqan
