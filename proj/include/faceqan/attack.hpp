#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "faceqan/embedding.hpp"
#include "faceqan/image.hpp"
#include "faceqan/model.hpp"

namespace faceqan {

/// Open hyperparameters of the attack and scoring pipeline.
struct AttackParams {
    double eps_init = 0.001;    // bound of the uniform initialization noise
    double eps_attack = 0.001;  // total BIM budget, split into iterations steps
    std::size_t iterations = 5;
    std::size_t batch_size = 10;
    double exponent = 5.0;  // power-law exponent applied to the aggregated quality
    std::uint64_t seed = 0;

    /// Throws faceqan::Error when any field is out of its valid range.
    void validate() const;
};

/// The k noisy seeds, their adversarial counterparts and the adversarial embeddings.
struct AdversarialBatch {
    std::vector<FaceImage> seeds;
    std::vector<FaceImage> adversaries;
    std::vector<Embedding> adv_embeddings;
};

/// k independently perturbed copies clip(image + U(-eps_init, eps_init)).
///
/// Sample i draws from its own stream keyed by (params.seed, image.id(), i), so
/// the batch does not depend on the order in which samples are produced.
std::vector<FaceImage> init_noisy_batch(const FaceImage& image, const AttackParams& params);

/// One sample of the noisy batch.
FaceImage noisy_sample(const FaceImage& image, double eps_init, std::uint64_t seed, std::size_t index);

/// clip(image + step * sign(grad L(M(image), target))), with sign(0) = 0.
FaceImage fgsm_step(const FaceImage& image, const Embedding& target, const ModelHandle& model, double step);

/// Basic iterative method: params.iterations FGSM steps of size eps_attack / iterations.
///
/// `target` is the clean image embedding and stays fixed. If `losses` is given it
/// receives the loss before the first step followed by the loss after each step.
FaceImage bim_attack(const FaceImage& seed_image, const Embedding& target, const ModelHandle& model,
                     const AttackParams& params, std::vector<double>* losses = nullptr);

/// Full attack for one image. `jobs` > 1 attacks the k seeds on a worker pool;
/// the result is identical for every value of `jobs`.
AdversarialBatch generate_adversarial_batch(const FaceImage& image, const ModelHandle& model,
                                            const AttackParams& params, std::size_t jobs = 1);

/// Same as above with a precomputed clean embedding y = M(image).
AdversarialBatch generate_adversarial_batch(const FaceImage& image, const Embedding& clean, const ModelHandle& model,
                                            const AttackParams& params, std::size_t jobs = 1);

}  // namespace faceqan
