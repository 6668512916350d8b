#include <doctest.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "commands.hpp"
#include "faceqan/io.hpp"
#include "support.hpp"

using namespace faceqan;
using namespace faceqan::cli;
namespace fs = std::filesystem;

namespace {

/// Small synthetic dataset shared by the tests in this file.
const fs::path& dataset() {
    static const fs::path root = [] {
        const fs::path dir = faceqan::test::scratch_dir("cli_data");
        RunConfig c;
        c.out = dir;
        c.identities = 4;
        c.per_identity = 3;
        c.size = 32;
        c.quiet = true;
        std::ostringstream log;
        REQUIRE(cmd_synth(c, log) == kSuccess);
        return dir;
    }();
    return root;
}

RunConfig score_config(const fs::path& out) {
    RunConfig c;
    c.images = dataset() / "images";
    c.out = out;
    c.quiet = true;
    return c;
}

int call(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::vector<const char*> argv{"faceqan"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) {
        *out_text = out.str() + err.str();
    }
    return code;
}

}  // namespace

TEST_CASE("synth writes images, metadata and a protocol") {
    const fs::path& d = dataset();
    CHECK(list_images(d / "images").size() == 12);
    CHECK(fs::exists(d / "degradations.csv"));
    const auto p = load_pair_protocol(d / "protocol.txt");
    CHECK(p.mated_count() == 4 * 3);
    CHECK(p.nonmated_count() > 0);
}

TEST_CASE("score is deterministic across reruns and job counts") {
    const fs::path dir = faceqan::test::scratch_dir("cli_score");
    std::ostringstream log;
    RunConfig a = score_config(dir / "a.csv");
    RunConfig b = score_config(dir / "b.csv");
    b.jobs = 3;
    RunConfig c = score_config(dir / "c.csv");
    REQUIRE(cmd_score(a, log) == kSuccess);
    REQUIRE(cmd_score(b, log) == kSuccess);
    REQUIRE(cmd_score(c, log) == kSuccess);
    const std::string sa = read_text_file(dir / "a.csv");
    CHECK(sa == read_text_file(dir / "b.csv"));
    CHECK(sa == read_text_file(dir / "c.csv"));

    const ScoreTable t = read_scores(dir / "a.csv");
    CHECK(t.size() == 12);
    for (const auto& [id, row] : t) {
        CHECK(row.q >= 0.0);
        CHECK(row.q <= 1.0);
        REQUIRE(row.s_f.has_value());
    }

    RunConfig other = score_config(dir / "d.csv");
    other.attack.seed = 99;
    REQUIRE(cmd_score(other, log) == kSuccess);
    CHECK(read_text_file(dir / "d.csv") != sa);
}

TEST_CASE("score --no-symmetry records s_f = 1") {
    const fs::path dir = faceqan::test::scratch_dir("cli_nosym");
    std::ostringstream log;
    RunConfig c = score_config(dir / "s.csv");
    c.no_symmetry = true;
    REQUIRE(cmd_score(c, log) == kSuccess);
    for (const auto& [id, row] : read_scores(dir / "s.csv")) {
        CHECK(row.s_f == 1.0);
    }
}

TEST_CASE("score reports partial failure for unreadable images") {
    const fs::path dir = faceqan::test::scratch_dir("cli_partial");
    fs::copy(dataset() / "images", dir / "images", fs::copy_options::recursive);
    std::ofstream(dir / "images" / "broken.png") << "garbage";
    RunConfig c = score_config(dir / "s.csv");
    c.images = dir / "images";
    std::ostringstream log;
    CHECK(cmd_score(c, log) == kPartialFailure);
    CHECK(read_scores(dir / "s.csv").size() == 12);
}

TEST_CASE("larger batches take longer") {
    const fs::path dir = faceqan::test::scratch_dir("cli_timing");
    std::ostringstream log;
    auto timed = [&](std::size_t k) {
        RunConfig c = score_config(dir / ("k" + std::to_string(k) + ".csv"));
        c.attack.batch_size = k;
        const auto start = std::chrono::steady_clock::now();
        REQUIRE(cmd_score(c, log) == kSuccess);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    CHECK(timed(2) < timed(100));
}

TEST_CASE("evaluate single and identical methods") {
    const fs::path dir = faceqan::test::scratch_dir("cli_eval");
    std::ostringstream log;
    REQUIRE(cmd_score(score_config(dir / "faceqan.csv"), log) == kSuccess);
    fs::copy_file(dir / "faceqan.csv", dir / "copy.csv");

    RunConfig e;
    e.images = dataset() / "images";
    e.protocol = dataset() / "protocol.txt";
    e.out = dir / "single";
    e.fmr = 0.1;
    e.scores = {(dir / "faceqan.csv").string()};
    REQUIRE(cmd_evaluate(e, log) == kSuccess);
    const CsvTable single = read_csv(dir / "single" / "report.csv");
    REQUIRE(single.rows.size() == 1);
    CHECK(single.rows[0][0] == "faceqan");
    CHECK(fs::exists(dir / "single" / "erc_faceqan.csv"));
    CHECK(fs::exists(dir / "single" / "erc.png"));

    e.out = dir / "pair";
    e.scores = {"a=" + (dir / "faceqan.csv").string(), "b=" + (dir / "copy.csv").string()};
    REQUIRE(cmd_evaluate(e, log) == kSuccess);
    const CsvTable pair = read_csv(dir / "pair" / "report.csv");
    REQUIRE(pair.rows.size() == 2);
    for (std::size_t j = 1; j < pair.rows[0].size(); ++j) {
        CHECK(pair.rows[0][j] == pair.rows[1][j]);
        CHECK(pair.rows[0][j] == single.rows[0][j]);
    }
    CHECK(read_text_file(dir / "pair" / "erc_a.csv") == read_text_file(dir / "pair" / "erc_b.csv"));
}

TEST_CASE("evaluate rejects missing ids and bad inputs") {
    const fs::path dir = faceqan::test::scratch_dir("cli_eval_err");
    write_text_file(dir / "partial.csv", "id,Q\nid000/000.png,0.5\n");
    RunConfig e;
    e.images = dataset() / "images";
    e.protocol = dataset() / "protocol.txt";
    e.out = dir / "out";
    e.scores = {(dir / "partial.csv").string()};
    std::ostringstream log;
    CHECK(cmd_evaluate(e, log) == kRunFailure);
    CHECK(log.str().find("has no quality for image") != std::string::npos);

    e.scores = {(dir / "missing.csv").string()};
    CHECK(cmd_evaluate(e, log) == kConfigError);
}

TEST_CASE("noise mask rendering") {
    const FaceImage seed = faceqan::test::random_image(4, 3, 1, 0.5);
    const NoiseMask gray = render_noise_mask(seed, seed);
    for (unsigned char v : gray.rgb) {
        CHECK(v == 128);
    }
    FaceImage adv = seed;
    adv.at(0, 0, 0) += 0.002;
    adv.at(1, 0, 0) -= 0.001;
    const NoiseMask m = render_noise_mask(seed, adv);
    CHECK(m.rgb[0] == 255);
    CHECK(m.max_delta == doctest::Approx(0.002));
    CHECK(m.min_delta == doctest::Approx(-0.001));

    const fs::path dir = faceqan::test::scratch_dir("cli_mask");
    const std::string image = (dataset() / "images" / "id000" / "000.png").string();
    REQUIRE(call({"noise-mask", "--image", image, "--out", (dir / "a.png").string(), "--quiet"}) == kSuccess);
    REQUIRE(call({"noise-mask", "--image", image, "--out", (dir / "b.png").string(), "--quiet"}) == kSuccess);
    CHECK(read_text_file(dir / "a.png") == read_text_file(dir / "b.png"));
    const cv::Mat mask = cv::imread((dir / "a.png").string(), cv::IMREAD_UNCHANGED);
    double lo = 0, hi = 0;
    cv::minMaxLoc(mask.reshape(1), &lo, &hi);
    CHECK(lo <= 1.0);
    CHECK(hi >= 254.0);

    REQUIRE(call({"noise-mask", "--image", image, "--out", (dir / "z.png").string(), "--eps-init", "0",
                  "--eps-attack", "0", "--quiet"}) == kSuccess);
    const cv::Mat zero = cv::imread((dir / "z.png").string(), cv::IMREAD_UNCHANGED);
    cv::minMaxLoc(zero.reshape(1), &lo, &hi);
    CHECK(lo == 128);
    CHECK(hi == 128);
}

TEST_CASE("bench on a single image") {
    const fs::path dir = faceqan::test::scratch_dir("cli_bench");
    RunConfig c;
    c.images = dataset() / "images";
    c.limit = 1;
    c.ks = {2, 5};
    c.out = dir / "bench.csv";
    c.quiet = true;
    std::ostringstream log;
    REQUIRE(cmd_bench(c, log) == kSuccess);
    const CsvTable t = read_csv(c.out);
    CHECK(t.header == std::vector<std::string>{"k", "mean_s", "std_s", "samples"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][2] == "0");
    CHECK(t.rows[0][3] == "1");
}

TEST_CASE("command line exit codes") {
    std::string text;
    CHECK(call({}, &text) == kConfigError);
    CHECK(call({"score", "--images", dataset().string(), "--out", "/tmp/x.csv", "--k", "0"}) == kConfigError);
    CHECK(call({"score", "--images", "/nonexistent/dir", "--out", "/tmp/x.csv"}) == kConfigError);
    CHECK(call({"score", "--bogus-flag"}) == kConfigError);
    CHECK(call({"--help"}, &text) == kSuccess);
    CHECK(text.find("noise-mask") != std::string::npos);
}

TEST_CASE("config file values yield to explicit flags") {
    const fs::path dir = faceqan::test::scratch_dir("cli_config");
    write_text_file(dir / "run.toml", "k = 3\nseed = 7\n");
    std::ostringstream out, err;
    const char* argv[] = {"faceqan", "score", "--config", nullptr, "--seed", "11"};
    const std::string cfg = (dir / "run.toml").string();
    argv[3] = cfg.c_str();
    const ParsedCommand p = parse_command_line(6, argv, out, err);
    REQUIRE_FALSE(p.exit_code.has_value());
    CHECK(p.config.attack.batch_size == 3);
    CHECK(p.config.attack.seed == 11);
}
