#include "faceqan/attack.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "faceqan/error.hpp"
#include "faceqan/parallel.hpp"
#include "faceqan/random.hpp"

namespace faceqan {

void AttackParams::validate() const {
    if (!(eps_init >= 0.0 && eps_init <= 2.0)) {
        throw Error("eps_init must lie in [0, 2]");
    }
    if (!(eps_attack >= 0.0 && eps_attack <= 2.0)) {
        throw Error("eps_attack must lie in [0, 2]");
    }
    if (iterations < 1) {
        throw Error("BIM iterations must be at least 1");
    }
    if (batch_size < 1) {
        throw Error("batch size k must be at least 1");
    }
    if (!(exponent > 0.0) || !std::isfinite(exponent)) {
        throw Error("power-law exponent p must be positive");
    }
}

FaceImage noisy_sample(const FaceImage& image, double eps_init, std::uint64_t seed, std::size_t index) {
    FaceImage out = image;
    if (eps_init == 0.0) {
        return out;
    }
    Rng rng(stream_seed(seed, image.id(), index));
    for (double& v : out.pixels()) {
        v += rng.uniform(-eps_init, eps_init);
    }
    out.clip();
    return out;
}

std::vector<FaceImage> init_noisy_batch(const FaceImage& image, const AttackParams& params) {
    params.validate();
    if (image.empty() || !image.in_range()) {
        throw Error("invalid input image '" + image.id() + "'");
    }
    std::vector<FaceImage> batch;
    batch.reserve(params.batch_size);
    for (std::size_t i = 0; i < params.batch_size; ++i) {
        batch.push_back(noisy_sample(image, params.eps_init, params.seed, i));
    }
    return batch;
}

FaceImage fgsm_step(const FaceImage& image, const Embedding& target, const ModelHandle& model, double step) {
    if (!(step >= 0.0) || !std::isfinite(step)) {
        throw Error("FGSM step must be non-negative");
    }
    FaceImage out = image;
    if (step == 0.0) {
        return out;
    }
    const LossGradient lg = model.loss_input_gradient(image, target);
    auto px = out.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double g = lg.grad[i];
        if (g > 0.0) {
            px[i] += step;
        } else if (g < 0.0) {
            px[i] -= step;
        }
    }
    out.clip();
    return out;
}

FaceImage bim_attack(const FaceImage& seed_image, const Embedding& target, const ModelHandle& model,
                     const AttackParams& params, std::vector<double>* losses) {
    params.validate();
    const double step = params.eps_attack / static_cast<double>(params.iterations);
    FaceImage current = seed_image;
    if (losses) {
        losses->clear();
        losses->push_back(dissimilarity_loss(model.embed(current), target));
    }
    for (std::size_t it = 0; it < params.iterations; ++it) {
        current = fgsm_step(current, target, model, step);
        if (losses) {
            losses->push_back(dissimilarity_loss(model.embed(current), target));
        }
    }
    return current;
}

AdversarialBatch generate_adversarial_batch(const FaceImage& image, const ModelHandle& model,
                                            const AttackParams& params, std::size_t jobs) {
    return generate_adversarial_batch(image, model.embed(image), model, params, jobs);
}

AdversarialBatch generate_adversarial_batch(const FaceImage& image, const Embedding& clean, const ModelHandle& model,
                                            const AttackParams& params, std::size_t jobs) {
    params.validate();
    if (image.empty() || !image.in_range()) {
        throw Error("invalid input image '" + image.id() + "'");
    }
    const std::size_t k = params.batch_size;
    std::vector<std::optional<FaceImage>> seeds(k), adversaries(k);
    std::vector<std::optional<Embedding>> embeddings(k);
    parallel_for(k, jobs, [&](std::size_t i) {
        seeds[i] = noisy_sample(image, params.eps_init, params.seed, i);
        adversaries[i] = bim_attack(*seeds[i], clean, model, params);
        embeddings[i] = model.embed(*adversaries[i]);
    });
    AdversarialBatch batch;
    batch.seeds.reserve(k);
    batch.adversaries.reserve(k);
    batch.adv_embeddings.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        batch.seeds.push_back(std::move(*seeds[i]));
        batch.adversaries.push_back(std::move(*adversaries[i]));
        batch.adv_embeddings.push_back(std::move(*embeddings[i]));
    }
    return batch;
}

}  // namespace faceqan
