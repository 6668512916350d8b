#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "faceqan/error.hpp"
#include "faceqan/evaluation.hpp"
#include "faceqan/io.hpp"
#include "faceqan/parallel.hpp"
#include "faceqan/quality.hpp"
#include "faceqan/synthetic.hpp"
#include "faceqan/training.hpp"

namespace faceqan::cli {
namespace fs = std::filesystem;
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

class ConfigError : public Error {
public:
    using Error::Error;
};

void require_path(const fs::path& p, const char* flag, bool directory) {
    if (p.empty()) {
        throw ConfigError(std::string("missing required option ") + flag);
    }
    if (directory ? !fs::is_directory(p) : !fs::is_regular_file(p)) {
        throw ConfigError(std::string(flag) + " " + p.string() + (directory ? " is not a directory" : " does not exist"));
    }
}

void require_out(const fs::path& p) {
    if (p.empty()) {
        throw ConfigError("missing required option --out");
    }
}

void validate_attack(const AttackParams& params) {
    try {
        params.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

template <class F>
int guarded(std::ostream& log, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kRunFailure;
    }
}

FaceImage load_for_model(const fs::path& root, const std::string& id, const ModelHandle& model) {
    return load_image(root / id, model.input_width(), model.input_height(), id);
}

// Loads every image in parallel; failures are reported per id.
std::map<std::string, Embedding> embed_all(const std::vector<std::string>& ids, const fs::path& root,
                                           const ModelHandle& model, std::size_t jobs) {
    std::vector<std::optional<Embedding>> slots(ids.size());
    parallel_for(ids.size(), jobs, [&](std::size_t i) { slots[i] = model.embed(load_for_model(root, ids[i], model)); });
    std::map<std::string, Embedding> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.emplace(ids[i], std::move(*slots[i]));
    }
    return out;
}

void write_erc_plot(const ComparisonReport& report, const fs::path& path) {
    constexpr int kW = 720, kH = 480, kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;
    cv::Mat canvas(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
    double y_max = 1e-3;
    for (const auto& row : report.rows) {
        for (const auto& p : row.curve.points) {
            y_max = std::max(y_max, p.fnmr);
        }
    }
    y_max *= 1.05;
    const int plot_w = kW - kLeft - kRight;
    const int plot_h = kH - kTop - kBottom;
    auto to_px = [&](double x, double y) {
        return cv::Point(kLeft + static_cast<int>(std::lround(x * plot_w)),
                         kTop + plot_h - static_cast<int>(std::lround(y / y_max * plot_h)));
    };
    const cv::Scalar black(0, 0, 0), grid(220, 220, 220);
    for (int i = 0; i <= 5; ++i) {
        const double fx = i / 5.0;
        const double fy = y_max * i / 5.0;
        cv::line(canvas, to_px(fx, 0), to_px(fx, y_max), grid, 1);
        cv::line(canvas, to_px(0, fy), to_px(1, fy), grid, 1);
        std::ostringstream lx, ly;
        lx << std::setprecision(2) << fx;
        ly << std::setprecision(3) << fy;
        cv::putText(canvas, lx.str(), to_px(fx, 0) + cv::Point(-10, 20), cv::FONT_HERSHEY_SIMPLEX, 0.4, black);
        cv::putText(canvas, ly.str(), to_px(0, fy) + cv::Point(-55, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, black);
    }
    cv::rectangle(canvas, to_px(0, y_max), to_px(1, 0), black, 1);
    cv::putText(canvas, "ratio of unconsidered images", cv::Point(kLeft + plot_w / 2 - 100, kH - 15),
                cv::FONT_HERSHEY_SIMPLEX, 0.45, black);
    std::ostringstream title;
    title << "FNMR at FMR=" << report.fmr_target;
    cv::putText(canvas, title.str(), cv::Point(kLeft, 20), cv::FONT_HERSHEY_SIMPLEX, 0.5, black);

    static const cv::Scalar palette[] = {{200, 60, 20},  {30, 30, 200}, {30, 150, 30}, {160, 40, 160},
                                         {20, 140, 200}, {90, 90, 90},  {150, 120, 0}};
    for (std::size_t m = 0; m < report.rows.size(); ++m) {
        const auto& row = report.rows[m];
        const cv::Scalar colour = palette[m % std::size(palette)];
        std::vector<cv::Point> pts;
        for (const auto& p : row.curve.points) {
            pts.push_back(to_px(p.drop_fraction, p.fnmr));
        }
        cv::polylines(canvas, pts, false, colour, 2, cv::LINE_AA);
        const cv::Point legend(kW - kRight + 15, kTop + 20 + static_cast<int>(m) * 20);
        cv::line(canvas, legend, legend + cv::Point(20, 0), colour, 2);
        cv::putText(canvas, row.name, legend + cv::Point(26, 4), cv::FONT_HERSHEY_SIMPLEX, 0.45, black);
    }
    if (!cv::imwrite(path.string(), canvas)) {
        throw Error("cannot write plot " + path.string());
    }
}

std::string sanitize(const std::string& name) {
    std::string s = name;
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
            c = '_';
        }
    }
    return s;
}

}  // namespace

ModelHandle load_configured_model(const RunConfig& config) {
    if (!config.model) {
        return load_model(ModelConfig{});
    }
    ModelConfig mc;
    try {
        mc = parse_model_config(*config.model);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (mc.kind == ModelKind::external && !fs::exists(mc.weights_path)) {
        throw ConfigError("weights not found: " + mc.weights_path.string());
    }
    return load_model(mc);
}

int cmd_score(const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        require_path(config.images, "--images", true);
        require_out(config.out);
        validate_attack(config.attack);
        const ModelHandle model = load_configured_model(config);
        const std::vector<std::string> ids = list_images(config.images);
        if (ids.empty()) {
            throw ConfigError("no images found under " + config.images.string());
        }
        if (!config.quiet) {
            log << "scoring " << ids.size() << " images with " << model.descriptor() << " (k=" << config.attack.batch_size
                << ", l=" << config.attack.iterations << ", jobs=" << config.jobs << ")\n";
        }
        std::vector<std::optional<ScoreRecord>> records(ids.size());
        std::vector<std::string> failures(ids.size());
        std::mutex log_mutex;
        std::size_t done = 0;
        const auto start = Clock::now();
        parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
            try {
                const FaceImage img = load_for_model(config.images, ids[i], model);
                records[i] = score_image(img, model, config.attack, !config.no_symmetry);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
            std::lock_guard lock(log_mutex);
            ++done;
            if (!config.quiet && (done % 50 == 0 || done == ids.size())) {
                log << "  " << done << "/" << ids.size() << " images\n";
            }
        });
        const double elapsed = seconds_since(start);

        std::vector<ScoreRecord> ok;
        std::size_t failed = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (records[i]) {
                ok.push_back(std::move(*records[i]));
            } else {
                ++failed;
                log << "failed: " << ids[i] << ": " << failures[i] << "\n";
            }
        }
        write_scores(make_score_table(ok), config.out);
        if (!config.quiet) {
            log << "wrote " << ok.size() << " scores to " << config.out.string() << " in " << std::fixed
                << std::setprecision(2) << elapsed << " s (" << std::setprecision(4)
                << elapsed / static_cast<double>(ids.size()) << " s/image)\n";
            log.unsetf(std::ios::fixed);
        }
        return failed == 0 ? kSuccess : kPartialFailure;
    });
}

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        require_path(config.protocol, "--protocol", false);
        require_path(config.images, "--images", true);
        require_out(config.out);
        if (config.scores.empty()) {
            throw ConfigError("evaluate needs at least one --scores file");
        }
        if (!(config.fmr >= 0.0 && config.fmr <= 1.0)) {
            throw ConfigError("--fmr must lie in [0, 1]");
        }
        std::vector<MethodScores> methods;
        for (const std::string& spec : config.scores) {
            const auto eq = spec.find('=');
            const fs::path path = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
            const std::string name = eq == std::string::npos ? path.stem().string() : spec.substr(0, eq);
            require_path(path, "--scores", false);
            MethodScores m;
            m.name = name;
            m.negate = std::find(config.negate.begin(), config.negate.end(), name) != config.negate.end();
            for (const auto& [id, row] : read_scores(path)) {
                m.quality.emplace(id, row.q);
            }
            if (std::any_of(methods.begin(), methods.end(), [&](const auto& o) { return o.name == name; })) {
                throw ConfigError("duplicate method name '" + name + "'");
            }
            methods.push_back(std::move(m));
        }
        const PairProtocol protocol = load_pair_protocol(config.protocol);
        const ModelHandle model = load_configured_model(config);

        std::vector<std::string> ids;
        for (const auto& p : protocol.pairs) {
            ids.push_back(p.id_a);
            ids.push_back(p.id_b);
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        const auto embeddings = embed_all(ids, config.images, model, config.jobs);

        const ComparisonReport report = compare_methods(methods, protocol.pairs, embeddings, config.fmr, config.drops);
        fs::create_directories(config.out);
        write_report_csv(report, config.out / "report.csv");
        for (const auto& row : report.rows) {
            write_erc_csv(row.curve, config.out / ("erc_" + sanitize(row.name) + ".csv"));
        }
        write_erc_plot(report, config.out / "erc.png");

        log << "protocol " << protocol.name << ": " << report.mated << " mated, " << report.nonmated
            << " non-mated; threshold " << report.threshold << " at FMR " << report.fmr_target << "\n";
        log << "AUC@FMR" << report.fmr_target << " [x1e-3]\n";
        log << std::left << std::setw(20) << "method";
        for (double d : report.drops) {
            log << std::right << std::setw(10) << d;
        }
        log << "\n";
        for (const auto& row : report.rows) {
            log << std::left << std::setw(20) << row.name;
            for (double v : row.auc_e3) {
                log << std::right << std::setw(10) << std::fixed << std::setprecision(3) << v;
            }
            log.unsetf(std::ios::fixed);
            log << "\n";
        }
        return kSuccess;
    });
}

NoiseMask render_noise_mask(const FaceImage& seed, const FaceImage& adversary) {
    if (!seed.same_geometry(adversary)) {
        throw Error("noise mask inputs differ in geometry");
    }
    NoiseMask mask;
    mask.width = seed.width();
    mask.height = seed.height();
    mask.rgb.resize(seed.size());
    std::vector<double> delta(seed.size());
    double scale = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] = adversary.pixels()[i] - seed.pixels()[i];
        scale = std::max(scale, std::abs(delta[i]));
    }
    if (!delta.empty()) {
        auto [mn, mx] = std::minmax_element(delta.begin(), delta.end());
        mask.min_delta = *mn;
        mask.max_delta = *mx;
    }
    const std::size_t plane = seed.width() * seed.height();
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            const double d = delta[c * plane + p];
            const double v = scale > 0.0 ? 127.5 * (1.0 + d / scale) : 127.5;
            mask.rgb[p * 3 + c] = static_cast<unsigned char>(std::clamp(std::round(v), 0.0, 255.0));
        }
    }
    return mask;
}

int cmd_noise_mask(const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        require_path(config.image, "--image", false);
        require_out(config.out);
        validate_attack(config.attack);
        const ModelHandle model = load_configured_model(config);
        const FaceImage img =
            load_image(config.image, model.input_width(), model.input_height(), config.image.filename().string());
        const Embedding clean = model.embed(img);
        const FaceImage seed = noisy_sample(img, config.attack.eps_init, config.attack.seed, config.sample_index);
        const FaceImage adv = bim_attack(seed, clean, model, config.attack);
        const NoiseMask mask = render_noise_mask(seed, adv);
        cv::Mat bgr(static_cast<int>(mask.height), static_cast<int>(mask.width), CV_8UC3);
        for (std::size_t y = 0; y < mask.height; ++y) {
            auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
            for (std::size_t x = 0; x < mask.width; ++x) {
                const unsigned char* px = &mask.rgb[(y * mask.width + x) * 3];
                row[x] = cv::Vec3b(px[2], px[1], px[0]);
            }
        }
        if (config.out.has_parent_path()) {
            fs::create_directories(config.out.parent_path());
        }
        if (!cv::imwrite(config.out.string(), bgr)) {
            throw Error("cannot write mask " + config.out.string());
        }
        if (!config.quiet) {
            log << "perturbation range [" << mask.min_delta << ", " << mask.max_delta << "] written to "
                << config.out.string() << "\n";
        }
        return kSuccess;
    });
}

int cmd_bench(const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        require_path(config.images, "--images", true);
        if (config.ks.empty() || config.repeat == 0) {
            throw ConfigError("bench needs at least one k and one repetition");
        }
        const ModelHandle model = load_configured_model(config);
        std::vector<std::string> ids = list_images(config.images);
        if (config.limit > 0 && ids.size() > config.limit) {
            ids.resize(config.limit);
        }
        if (ids.empty()) {
            throw ConfigError("no images found under " + config.images.string());
        }
        std::vector<FaceImage> images;
        for (const auto& id : ids) {
            images.push_back(load_for_model(config.images, id, model));
        }
        std::string csv = "k,mean_s,std_s,samples\n";
        for (std::size_t k : config.ks) {
            AttackParams params = config.attack;
            params.batch_size = k;
            validate_attack(params);
            std::vector<double> times;
            for (std::size_t r = 0; r < config.repeat; ++r) {
                for (const FaceImage& img : images) {
                    const auto start = Clock::now();
                    (void)score_image(img, model, params, !config.no_symmetry);
                    times.push_back(seconds_since(start));
                }
            }
            double mean = 0.0;
            for (double t : times) {
                mean += t;
            }
            mean /= static_cast<double>(times.size());
            double var = 0.0;
            for (double t : times) {
                var += (t - mean) * (t - mean);
            }
            const double stddev = std::sqrt(var / static_cast<double>(times.size()));
            csv += std::to_string(k) + "," + format_double(mean) + "," + format_double(stddev) + "," +
                   std::to_string(times.size()) + "\n";
            if (!config.quiet) {
                log << "k=" << std::setw(4) << k << "  " << std::fixed << std::setprecision(4) << mean << " +- "
                    << stddev << " s/image\n";
                log.unsetf(std::ios::fixed);
            }
        }
        if (config.out.empty()) {
            log << csv;
        } else {
            write_text_file(config.out, csv);
        }
        return kSuccess;
    });
}

int cmd_synth(const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        require_out(config.out);
        synthetic::DatasetOptions opts;
        opts.identities = config.identities;
        opts.images_per_identity = config.per_identity;
        opts.width = opts.height = config.size;
        opts.seed = config.attack.seed;
        opts.blur_max = config.blur_max;
        opts.noise_max = config.noise_max;
        opts.yaw_max = config.yaw_max;
        opts.clean = config.clean;
        const auto samples = synthetic::make_dataset(opts);
        const fs::path image_dir = config.out / "images";
        std::string meta = "id,identity,blur_sigma,noise_std,yaw\n";
        for (const auto& s : samples) {
            write_image(s.image, image_dir / s.image.id());
            meta += s.image.id() + "," + std::to_string(s.identity) + "," + format_double(s.blur_sigma) + "," +
                    format_double(s.noise_std) + "," + format_double(s.yaw) + "\n";
        }
        write_text_file(config.out / "degradations.csv", meta);
        PairProtocol protocol{"synthetic", synthetic::make_protocol(samples, config.max_nonmated, opts.seed)};
        write_pair_protocol(protocol, config.out / "protocol.txt");
        if (!config.quiet) {
            log << "wrote " << samples.size() << " images and " << protocol.pairs.size() << " pairs ("
                << protocol.mated_count() << " mated) to " << config.out.string() << "\n";
        }
        return kSuccess;
    });
}

int cmd_train_toy(const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        require_path(config.images, "--images", true);
        require_out(config.out);
        const ModelHandle base = load_configured_model(config);
        const auto ids = list_images(config.images);
        std::vector<FaceImage> images;
        std::vector<std::size_t> labels;
        std::map<std::string, std::size_t> identity_index;
        for (const auto& id : ids) {
            const auto slash = id.find('/');
            if (slash == std::string::npos) {
                throw ConfigError("training image '" + id + "' is not inside an identity directory");
            }
            const auto [it, inserted] = identity_index.emplace(id.substr(0, slash), identity_index.size());
            labels.push_back(it->second);
            images.push_back(load_for_model(config.images, id, base));
        }
        if (identity_index.size() < 2) {
            throw ConfigError("training needs at least two identities");
        }
        const Network trained = train_embedding_head(base.network(), images, labels,
                                                     HeadTrainingOptions{config.ridge, config.attack.seed});
        if (config.out.has_parent_path()) {
            fs::create_directories(config.out.parent_path());
        }
        save_network(trained, config.out);
        if (!config.quiet) {
            log << "trained head on " << images.size() << " images of " << identity_index.size()
                << " identities; weights written to " << config.out.string() << "\n"
                << "model config:\n  kind=external\n  weights_path=" << config.out.filename().string() << "\n";
        }
        return kSuccess;
    });
}

ParsedCommand parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    ParsedCommand parsed;
    RunConfig& c = parsed.config;
    CLI::App app{"faceqan: face image quality from adversarial noise"};
    app.set_config("--config", "", "run config file (key=value; CLI flags take precedence)");
    app.require_subcommand(1);

    std::string model_path;
    app.add_option("--model", model_path, "model config file (key=value); default: built-in toy model");
    app.add_option("--images", c.images, "image root directory");
    app.add_option("--protocol", c.protocol, "pair protocol file");
    app.add_option("--out", c.out, "output path");
    app.add_option("--eps-init", c.attack.eps_init, "bound of the uniform initialization noise")->capture_default_str();
    app.add_option("--eps-attack", c.attack.eps_attack, "total BIM perturbation budget")->capture_default_str();
    app.add_option("--iters", c.attack.iterations, "BIM iterations l")->capture_default_str();
    app.add_option("--k", c.attack.batch_size, "adversarial batch size k")->capture_default_str();
    app.add_option("--p", c.attack.exponent, "power-law exponent p")->capture_default_str();
    app.add_option("--seed", c.attack.seed, "global random seed")->capture_default_str();
    app.add_flag("--no-symmetry", c.no_symmetry, "drop the flip symmetry term (s_f := 1)");
    app.add_option("--jobs", c.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--fmr", c.fmr, "false match rate for the ERC threshold")->capture_default_str();
    app.add_option("--drops", c.drops, "pAUC drop rates")->delimiter(',')->capture_default_str();
    app.add_option("--scores", c.scores, "quality file NAME=PATH or PATH (repeatable)");
    app.add_option("--negate", c.negate, "method names whose scores are lower-is-better");
    app.add_option("--image", c.image, "single input image");
    app.add_option("--index", c.sample_index, "sample index i of the batch to visualize")->capture_default_str();
    app.add_option("--ks", c.ks, "batch sizes to benchmark")->delimiter(',')->capture_default_str();
    app.add_option("--repeat", c.repeat, "benchmark repetitions per image")->capture_default_str();
    app.add_option("--limit", c.limit, "benchmark at most this many images (0 = all)")->capture_default_str();
    app.add_option("--identities", c.identities, "synthetic identities")->capture_default_str();
    app.add_option("--per-identity", c.per_identity, "synthetic images per identity")->capture_default_str();
    app.add_option("--size", c.size, "synthetic image size")->capture_default_str();
    app.add_option("--blur-max", c.blur_max, "largest synthetic blur sigma")->capture_default_str();
    app.add_option("--noise-max", c.noise_max, "largest synthetic noise std")->capture_default_str();
    app.add_option("--yaw-max", c.yaw_max, "largest synthetic yaw")->capture_default_str();
    app.add_flag("--clean", c.clean, "synthesize undegraded frontal images");
    app.add_option("--max-nonmated", c.max_nonmated, "cap on synthetic non-mated pairs (0 = all)")
        ->capture_default_str();
    app.add_option("--ridge", c.ridge, "ridge penalty for toy head training")->capture_default_str();
    app.add_flag("--quiet", c.quiet, "suppress progress output");

    const std::pair<const char*, const char*> verbs[] = {
        {"score", "score every image under --images, write a score CSV to --out"},
        {"evaluate", "ERC curves and pAUC table for --scores files on --protocol"},
        {"noise-mask", "write the adversarial noise of one sample of --image as a PNG"},
        {"bench", "per-image scoring time for each k in --ks"},
        {"synth", "generate a synthetic face dataset and pair protocol"},
        {"train-toy", "fit the toy model head on identity folders under --images"},
    };
    for (const auto& [name, help] : verbs) {
        app.add_subcommand(name, help)->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        parsed.exit_code = code == 0 ? kSuccess : kConfigError;
        return parsed;
    }
    if (!model_path.empty()) {
        c.model = model_path;
    }
    parsed.verb = app.get_subcommands().front()->get_name();
    return parsed;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    ParsedCommand parsed = parse_command_line(argc, argv, out, err);
    if (parsed.exit_code) {
        return *parsed.exit_code;
    }
    const RunConfig& c = parsed.config;
    if (parsed.verb == "score") {
        return cmd_score(c, err);
    }
    if (parsed.verb == "evaluate") {
        return cmd_evaluate(c, out);
    }
    if (parsed.verb == "noise-mask") {
        return cmd_noise_mask(c, err);
    }
    if (parsed.verb == "bench") {
        return cmd_bench(c, out);
    }
    if (parsed.verb == "synth") {
        return cmd_synth(c, err);
    }
    if (parsed.verb == "train-toy") {
        return cmd_train_toy(c, err);
    }
    err << "unknown command " << parsed.verb << "\n";
    return kConfigError;
}

}  // namespace faceqan::cli
