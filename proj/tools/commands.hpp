#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "faceqan/attack.hpp"
#include "faceqan/model.hpp"

namespace faceqan::cli {

/// Process exit codes shared by every command.
enum ExitCode : int {
    kSuccess = 0,
    kPartialFailure = 1,  // some images failed, the rest were processed
    kConfigError = 2,     // bad flags, unreadable config, missing paths
    kRunFailure = 3,      // the run could not complete (e.g. missing scores for protocol ids)
};

struct RunConfig {
    std::optional<std::filesystem::path> model;  // key=value model config; built-in toy model when absent
    std::filesystem::path images;
    std::filesystem::path protocol;
    std::filesystem::path out;
    AttackParams attack;
    bool no_symmetry = false;
    std::size_t jobs = 1;
    double fmr = 0.001;
    std::vector<double> drops{0.1, 0.2, 0.4, 0.8};

    // evaluate
    std::vector<std::string> scores;  // "NAME=PATH" or "PATH" (name = file stem)
    std::vector<std::string> negate;  // method names whose scores are lower-is-better

    // noise-mask
    std::filesystem::path image;
    std::size_t sample_index = 0;

    // bench
    std::vector<std::size_t> ks{2, 5, 10, 50};
    std::size_t repeat = 1;
    std::size_t limit = 0;  // 0 = every image

    // synth
    std::size_t identities = 20;
    std::size_t per_identity = 4;
    std::size_t size = 32;
    double blur_max = 1.5;
    double noise_max = 0.15;
    double yaw_max = 0.5;
    bool clean = false;
    std::size_t max_nonmated = 0;

    // train-toy
    double ridge = 1e-3;

    bool quiet = false;
};

ModelHandle load_configured_model(const RunConfig& config);

int cmd_score(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_noise_mask(const RunConfig& config, std::ostream& log);
int cmd_bench(const RunConfig& config, std::ostream& log);
int cmd_synth(const RunConfig& config, std::ostream& log);
int cmd_train_toy(const RunConfig& config, std::ostream& log);

/// 8-bit interleaved RGB rendering of a perturbation: 0 maps to 127.5 and the largest
/// absolute component to 0 or 255. An all-zero perturbation yields uniform mid-gray (128).
struct NoiseMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> rgb;
    double min_delta = 0.0;
    double max_delta = 0.0;
};

NoiseMask render_noise_mask(const FaceImage& seed, const FaceImage& adversary);

/// Parses argv into a verb and config. Returns the exit code to use when parsing
/// did not produce a runnable command (help, usage errors).
struct ParsedCommand {
    std::string verb;
    RunConfig config;
    std::optional<int> exit_code;
};

ParsedCommand parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace faceqan::cli
