#include "faceqan/io.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "faceqan/error.hpp"

namespace faceqan {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) {
        return std::nullopt;
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

double require_double(const std::string& s, const std::string& source, std::size_t line, const std::string& what) {
    auto v = parse_double(s);
    if (!v) {
        throw ParseError(source, line, "invalid " + what + " '" + s + "'");
    }
    return *v;
}

}  // namespace

// Images -----------------------------------------------------------------

FaceImage load_image(const std::filesystem::path& path, std::size_t target_width, std::size_t target_height,
                     std::string id) {
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) {
        throw Error("cannot read image " + path.string());
    }
    if (raw.depth() != CV_8U) {
        throw Error("image " + path.string() + " is not an 8-bit raster");
    }
    cv::Mat rgb;
    switch (raw.channels()) {
        case 3:
            cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
            break;
        case 4:
            cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
            break;
        default:
            throw Error("image " + path.string() + " has " + std::to_string(raw.channels()) +
                        " channels, expected an RGB raster");
    }
    if (target_width > 0 && target_height > 0 &&
        (static_cast<std::size_t>(rgb.cols) != target_width || static_cast<std::size_t>(rgb.rows) != target_height)) {
        cv::Mat resized;
        const bool shrinking = static_cast<std::size_t>(rgb.cols) > target_width;
        cv::resize(rgb, resized, cv::Size(static_cast<int>(target_width), static_cast<int>(target_height)), 0, 0,
                   shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
        rgb = resized;
    }
    const auto w = static_cast<std::size_t>(rgb.cols);
    const auto h = static_cast<std::size_t>(rgb.rows);
    std::vector<double> px(w * h * 3);
    for (std::size_t y = 0; y < h; ++y) {
        const auto* row = rgb.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                px[(c * h + y) * w + x] = static_cast<double>(row[x][static_cast<int>(c)]) / 127.5 - 1.0;
            }
        }
    }
    return FaceImage(w, h, std::move(px), id.empty() ? path.filename().string() : std::move(id));
}

void write_image(const FaceImage& image, const std::filesystem::path& path) {
    const auto w = image.width();
    const auto h = image.height();
    cv::Mat bgr(static_cast<int>(h), static_cast<int>(w), CV_8UC3);
    for (std::size_t y = 0; y < h; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::round((image.at(x, y, c) + 1.0) * 127.5);
                row[x][static_cast<int>(2 - c)] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), bgr)) {
        throw Error("cannot write image " + path.string());
    }
}

std::vector<std::string> list_images(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
        throw Error("image root " + root.string() + " is not a directory");
    }
    static const std::set<std::string> kExtensions{".png", ".jpg", ".jpeg", ".bmp"};
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (kExtensions.count(ext)) {
            ids.push_back(std::filesystem::relative(entry.path(), root).generic_string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

// Pair protocol ----------------------------------------------------------

std::size_t PairProtocol::mated_count() const {
    return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.mated; }));
}

std::size_t PairProtocol::nonmated_count() const {
    return pairs.size() - mated_count();
}

PairProtocol parse_pair_protocol(const std::string& text, const std::string& source) {
    PairProtocol protocol;
    protocol.name = source;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const auto fields = split_commas(line);
        if (fields.size() != 3) {
            throw ParseError(source, line_no, "expected 'id_a, id_b, label', got " + std::to_string(fields.size()) +
                                                  " fields");
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError(source, line_no, "empty image id");
        }
        VerificationPair pair{fields[0], fields[1], false};
        if (fields[2] == "mated") {
            pair.mated = true;
        } else if (fields[2] != "nonmated") {
            throw ParseError(source, line_no, "unknown label '" + fields[2] + "' (expected mated or nonmated)");
        }
        if (!pair.mated && pair.id_a == pair.id_b) {
            throw ParseError(source, line_no, "non-mated pair compares image '" + pair.id_a + "' with itself");
        }
        protocol.pairs.push_back(std::move(pair));
    }
    if (protocol.pairs.empty()) {
        throw Error(source + ": empty protocol");
    }
    return protocol;
}

PairProtocol load_pair_protocol(const std::filesystem::path& path) {
    PairProtocol p = parse_pair_protocol(read_text_file(path), path.string());
    p.name = path.stem().string();
    return p;
}

void write_pair_protocol(const PairProtocol& protocol, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& p : protocol.pairs) {
        out << p.id_a << ", " << p.id_b << ", " << (p.mated ? "mated" : "nonmated") << "\n";
    }
    write_text_file(path, out.str());
}

// Score tables -----------------------------------------------------------

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) {
        throw Error("cannot format number");
    }
    return std::string(buf.data(), ptr);
}

ScoreTable make_score_table(std::span<const ScoreRecord> records) {
    ScoreTable table;
    for (const ScoreRecord& r : records) {
        if (!table.emplace(r.id, ScoreRow{r.quality.value, r.stats.mu, r.stats.sigma, r.stats.s_f}).second) {
            throw Error("duplicate image id '" + r.id + "'");
        }
    }
    return table;
}

std::string format_scores(const ScoreTable& table) {
    std::string out = "id,Q,mu_S,sigma_S,s_f\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& [id, row] : table) {
        if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos) {
            throw Error("image id '" + id + "' cannot be stored in a score CSV");
        }
        out += id + "," + format_double(row.q) + "," + opt(row.mu) + "," + opt(row.sigma) + "," + opt(row.s_f) + "\n";
    }
    return out;
}

void write_scores(const ScoreTable& table, const std::filesystem::path& path) {
    write_text_file(path, format_scores(table));
}

ScoreTable parse_scores(const std::string& text, const std::string& source) {
    const CsvTable csv = parse_csv(text, source);
    const auto& h = csv.header;
    const bool full = h == std::vector<std::string>{"id", "Q", "mu_S", "sigma_S", "s_f"};
    const bool minimal = h == std::vector<std::string>{"id", "Q"};
    if (!full && !minimal) {
        throw ParseError(source, 1, "score header must be 'id,Q,mu_S,sigma_S,s_f' or 'id,Q'");
    }
    ScoreTable table;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::size_t line = r + 2;
        const auto& f = csv.rows[r];
        if (f[0].empty()) {
            throw ParseError(source, line, "empty image id");
        }
        ScoreRow row;
        row.q = require_double(f[1], source, line, "quality");
        if (full) {
            auto stat = [&](std::size_t i, const char* name) -> std::optional<double> {
                if (f[i].empty()) {
                    return std::nullopt;
                }
                return require_double(f[i], source, line, name);
            };
            row.mu = stat(2, "mu_S");
            row.sigma = stat(3, "sigma_S");
            row.s_f = stat(4, "s_f");
        }
        if (!table.emplace(f[0], row).second) {
            throw ParseError(source, line, "duplicate image id '" + f[0] + "'");
        }
    }
    return table;
}

ScoreTable read_scores(const std::filesystem::path& path) {
    return parse_scores(read_text_file(path), path.string());
}

// Generic CSV ------------------------------------------------------------

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable table;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') {
            raw.pop_back();
        }
        if (trim(raw).empty()) {
            continue;
        }
        auto fields = split_commas(raw);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(source, line_no, "expected " + std::to_string(table.header.size()) + " fields, got " +
                                                  std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) {
        throw ParseError(source, 1, "missing CSV header");
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    return parse_csv(read_text_file(path), path.string());
}

void write_erc_csv(const ErcCurve& curve, const std::filesystem::path& path) {
    std::string out = "drop_fraction,fnmr\n";
    for (const ErcPoint& p : curve.points) {
        out += format_double(p.drop_fraction) + "," + format_double(p.fnmr) + "\n";
    }
    write_text_file(path, out);
}

ErcCurve read_erc_csv(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header != std::vector<std::string>{"drop_fraction", "fnmr"}) {
        throw ParseError(path.string(), 1, "ERC header must be 'drop_fraction,fnmr'");
    }
    ErcCurve curve;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        curve.points.push_back({require_double(csv.rows[r][0], path.string(), r + 2, "drop fraction"),
                                require_double(csv.rows[r][1], path.string(), r + 2, "fnmr")});
    }
    return curve;
}

void write_report_csv(const ComparisonReport& report, const std::filesystem::path& path) {
    std::string out = "method";
    for (double d : report.drops) {
        out += ",auc@" + format_double(d);
    }
    out += "\n";
    for (const MethodResult& row : report.rows) {
        out += row.name;
        for (double v : row.auc_e3) {
            out += "," + format_double(v);
        }
        out += "\n";
    }
    write_text_file(path, out);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

}  // namespace faceqan
