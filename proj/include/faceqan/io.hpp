#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faceqan/evaluation.hpp"
#include "faceqan/image.hpp"
#include "faceqan/quality.hpp"

namespace faceqan {

// Images -----------------------------------------------------------------

/// Decodes an RGB (or RGBA, alpha dropped) raster and maps v in [0, 255] to v / 127.5 - 1.
/// Resizes to target_width x target_height when both are nonzero and differ from the file.
FaceImage load_image(const std::filesystem::path& path, std::size_t target_width = 0, std::size_t target_height = 0,
                     std::string id = {});

/// Inverse mapping to 8-bit RGB, rounded to nearest. Format follows the file extension.
void write_image(const FaceImage& image, const std::filesystem::path& path);

/// Relative paths (generic '/' form) of every PNG/JPEG/BMP file under root, sorted.
std::vector<std::string> list_images(const std::filesystem::path& root);

// Pair protocol ----------------------------------------------------------

struct PairProtocol {
    std::string name;
    std::vector<VerificationPair> pairs;

    std::size_t mated_count() const;
    std::size_t nonmated_count() const;
};

/// One pair per line: "id_a, id_b, label" with label mated or nonmated.
/// Blank lines and '#' comments are ignored.
PairProtocol parse_pair_protocol(const std::string& text, const std::string& source = "<protocol>");
PairProtocol load_pair_protocol(const std::filesystem::path& path);
void write_pair_protocol(const PairProtocol& protocol, const std::filesystem::path& path);

// Score tables -----------------------------------------------------------

struct ScoreRow {
    double q = 0.0;
    std::optional<double> mu;
    std::optional<double> sigma;
    std::optional<double> s_f;
};

/// Keyed by image id; iteration order is the canonical output order.
using ScoreTable = std::map<std::string, ScoreRow>;

ScoreTable make_score_table(std::span<const ScoreRecord> records);

/// CSV with header "id,Q,mu_S,sigma_S,s_f"; absent statistics are written as empty fields.
void write_scores(const ScoreTable& table, const std::filesystem::path& path);
std::string format_scores(const ScoreTable& table);

/// Accepts the full header or the minimal "id,Q". Throws faceqan::ParseError naming the
/// line on malformed rows and on duplicate ids.
ScoreTable read_scores(const std::filesystem::path& path);
ScoreTable parse_scores(const std::string& text, const std::string& source = "<scores>");

// Generic CSV ------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Minimal comma-separated reader (no quoting). Every row must match the header width.
CsvTable parse_csv(const std::string& text, const std::string& source = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Header "drop_fraction,fnmr".
void write_erc_csv(const ErcCurve& curve, const std::filesystem::path& path);
ErcCurve read_erc_csv(const std::filesystem::path& path);

/// Header "method,auc@<drop>..." with pAUC x 10^3 values.
void write_report_csv(const ComparisonReport& report, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace faceqan
