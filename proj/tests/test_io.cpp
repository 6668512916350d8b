#include <doctest.h>

#include <cmath>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "faceqan/error.hpp"
#include "faceqan/io.hpp"
#include "faceqan/random.hpp"
#include "support.hpp"

using namespace faceqan;

namespace {

std::filesystem::path write_raster(const std::filesystem::path& dir, const std::string& name, int channels,
                                   unsigned char value, int w = 6, int h = 4) {
    cv::Mat m(h, w, CV_8UC(channels), cv::Scalar::all(value));
    const auto p = dir / name;
    REQUIRE(cv::imwrite(p.string(), m));
    return p;
}

}  // namespace

TEST_CASE("image loading maps [0, 255] onto [-1, 1]") {
    const auto dir = faceqan::test::scratch_dir("io_images");
    const FaceImage black = load_image(write_raster(dir, "black.png", 3, 0));
    CHECK(black.width() == 6);
    CHECK(black.height() == 4);
    CHECK(black.id() == "black.png");
    for (double v : black.pixels()) {
        CHECK(v == -1.0);
    }
    const FaceImage white = load_image(write_raster(dir, "white.png", 3, 255));
    for (double v : white.pixels()) {
        CHECK(v == 1.0);
    }
    const FaceImage gray = load_image(write_raster(dir, "gray.png", 3, 128));
    for (double v : gray.pixels()) {
        CHECK(v == doctest::Approx(128 / 127.5 - 1).epsilon(1e-15));
        CHECK(v == doctest::Approx(0.00392).epsilon(1e-3));
    }
    CHECK(load_image(write_raster(dir, "rgba.png", 4, 255)).pixels()[0] == 1.0);
}

TEST_CASE("image loading resizes and reports errors") {
    const auto dir = faceqan::test::scratch_dir("io_resize");
    const FaceImage img = load_image(write_raster(dir, "big.png", 3, 255, 20, 10), 8, 8, "custom");
    CHECK(img.width() == 8);
    CHECK(img.height() == 8);
    CHECK(img.id() == "custom");
    CHECK_THROWS_WITH_AS(load_image(write_raster(dir, "gray1.png", 1, 10)), doctest::Contains("channels"), Error);
    CHECK_THROWS_AS(load_image(dir / "nope.png"), Error);
    std::ofstream(dir / "junk.png") << "not an image";
    CHECK_THROWS_AS(load_image(dir / "junk.png"), Error);
}

TEST_CASE("write_image inverts the normalization") {
    const auto dir = faceqan::test::scratch_dir("io_write");
    std::vector<double> px(5 * 3 * 3);
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<double>(i % 256) / 127.5 - 1.0;
    }
    const FaceImage img(5, 3, px, "x");
    write_image(img, dir / "sub" / "x.png");
    const FaceImage back = load_image(dir / "sub" / "x.png");
    CHECK(back == img);
    CHECK(list_images(dir) == std::vector<std::string>{"sub/x.png"});
}

TEST_CASE("pair protocol parsing") {
    const auto p = parse_pair_protocol("a.png, b.png, mated\n# comment\n\nc.png,d.png,nonmated\n");
    REQUIRE(p.pairs.size() == 2);
    CHECK(p.pairs[0].mated);
    CHECK(p.pairs[1].id_a == "c.png");
    CHECK_FALSE(p.pairs[1].mated);
    CHECK(p.mated_count() == 1);
    CHECK(p.nonmated_count() == 1);

    CHECK_THROWS_WITH_AS(parse_pair_protocol(""), doctest::Contains("empty protocol"), Error);
    try {
        parse_pair_protocol("a,b,mated\na,c,genuine\n", "pairs.txt");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("genuine") != std::string::npos);
        CHECK(std::string(e.what()).find("pairs.txt:2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_pair_protocol("a,b\n"), ParseError);
    CHECK_THROWS_AS(parse_pair_protocol("a,a,nonmated\n"), ParseError);
}

TEST_CASE("pair protocol file round-trip") {
    const auto dir = faceqan::test::scratch_dir("io_protocol");
    PairProtocol p{"x", {{"a", "b", true}, {"a", "c", false}}};
    write_pair_protocol(p, dir / "lfw_pairs.txt");
    const auto back = load_pair_protocol(dir / "lfw_pairs.txt");
    CHECK(back.name == "lfw_pairs");
    REQUIRE(back.pairs.size() == 2);
    CHECK(back.pairs[1].id_b == "c");
    CHECK_FALSE(back.pairs[1].mated);
    std::ofstream(dir / "empty.txt").flush();
    CHECK_THROWS_WITH_AS(load_pair_protocol(dir / "empty.txt"), doctest::Contains("empty protocol"), Error);
}

TEST_CASE("score tables round-trip exactly") {
    const auto dir = faceqan::test::scratch_dir("io_scores");
    faceqan::Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        ScoreTable table;
        const std::size_t n = 1 + rng.below(30);
        for (std::size_t i = 0; i < n; ++i) {
            ScoreRow row{rng.uniform01(), rng.uniform(-1, 1), rng.uniform01() * 1e-7, rng.uniform(-1, 1)};
            if (rng.uniform01() < 0.2) {
                row.sigma.reset();
            }
            table.emplace("dir/img" + std::to_string(rng.next() % 1000) + ".png", row);
        }
        write_scores(table, dir / "s.csv");
        const ScoreTable back = read_scores(dir / "s.csv");
        REQUIRE(back.size() == table.size());
        for (const auto& [id, row] : table) {
            const ScoreRow& b = back.at(id);
            CHECK(b.q == row.q);
            CHECK(b.mu == row.mu);
            CHECK(b.sigma == row.sigma);
            CHECK(b.s_f == row.s_f);
        }
    }
}

TEST_CASE("score files: minimal schema, header and duplicate errors") {
    const ScoreTable minimal = parse_scores("id,Q\na.png,0.5\nb.png,-3.25\n");
    CHECK(minimal.at("b.png").q == -3.25);
    CHECK_FALSE(minimal.at("a.png").mu.has_value());
    CHECK_THROWS_AS(parse_scores("name,quality\na,1\n"), ParseError);
    try {
        parse_scores("id,Q\na,0.1\nb,0.2\na,0.3\n", "dup.csv");
        FAIL("expected a duplicate error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_scores("id,Q\na,abc\n"), ParseError);
    CHECK_THROWS_AS(parse_scores("id,Q\na,0.1,0.2\n"), ParseError);
    CHECK(format_scores(minimal).rfind("id,Q,mu_S,sigma_S,s_f\n", 0) == 0);
}

TEST_CASE("ERC and report CSV") {
    const auto dir = faceqan::test::scratch_dir("io_erc");
    ErcCurve c;
    c.points = {{0, 0.1}, {0.5, 1.0 / 3}};
    write_erc_csv(c, dir / "erc.csv");
    const ErcCurve back = read_erc_csv(dir / "erc.csv");
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[1].fnmr == 1.0 / 3);

    ComparisonReport r;
    r.drops = {0.1, 0.2};
    r.rows.push_back({"faceqan", {}, {0.43, 1.5}});
    write_report_csv(r, dir / "report.csv");
    const CsvTable t = read_csv(dir / "report.csv");
    CHECK(t.header == std::vector<std::string>{"method", "auc@0.1", "auc@0.2"});
    CHECK(t.rows[0] == std::vector<std::string>{"faceqan", "0.43", "1.5"});
}
