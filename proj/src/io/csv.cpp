#include "dfecs/io/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dfecs/error.hpp"
#include "dfecs/layout.hpp"

namespace dfecs::io {

namespace {

constexpr std::size_t kColumns = 3 + kKpmDim;

std::string location(std::string_view source, std::size_t line, std::size_t column) {
    return std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(column);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line, std::string_view source, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    if (quoted) throw Error(ErrorKind::ParseError, location(source, line_no, fields.size() + 1) + ": unterminated quote");
    fields.push_back(std::move(current));
    return fields;
}

struct Lines {
    std::vector<std::string_view> lines;
    std::vector<std::size_t> numbers;
};

Lines split_lines(std::string_view text) {
    Lines out;
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t end = text.find('\n');
        std::string_view line = text.substr(0, end);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (!trim(line).empty()) {
            out.lines.push_back(line);
            out.numbers.push_back(line_no);
        }
        if (end == std::string_view::npos) break;
        text.remove_prefix(end + 1);
    }
    return out;
}

std::optional<double> parse_coordinate(std::string_view cell, std::string_view source, std::size_t line,
                                       std::size_t column) {
    cell = trim(cell);
    if (cell.empty()) return std::nullopt;
    const std::string low = lower(cell);
    if (low == "nan" || low == "-nan" || low == "na") return std::nullopt;
    double value = 0.0;
    const char* begin = cell.data();
    if (*begin == '+') ++begin;
    const auto res = std::from_chars(begin, cell.data() + cell.size(), value);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw Error(ErrorKind::ParseError, location(source, line, column) + ": not a number: '" + std::string(cell) + "'");
    }
    if (std::isnan(value)) return std::nullopt;
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::ParseError, location(source, line, column) + ": coordinate is infinite");
    }
    return value;
}

bool parse_flag(std::string_view cell, std::string_view source, std::size_t line, std::size_t column) {
    const std::string low = lower(trim(cell));
    if (low == "1" || low == "true" || low == "yes" || low == "y") return true;
    if (low == "0" || low == "false" || low == "no" || low == "n" || low.empty()) return false;
    throw Error(ErrorKind::ParseError, location(source, line, column) + ": is_neutral must be 0/1 or true/false");
}

std::size_t parse_index(std::string_view cell, std::string_view source, std::size_t line, std::size_t column) {
    cell = trim(cell);
    std::size_t value = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw Error(ErrorKind::ParseError,
                    location(source, line, column) + ": frame must be a nonnegative integer, got '" + std::string(cell) + "'");
    }
    return value;
}

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::vector<RawFrame> parse_keypoints_csv(std::string_view text, std::string_view source) {
    const Lines lines = split_lines(text);
    std::size_t first = 0;
    for (; first < lines.lines.size() && trim(lines.lines[first]).front() == '#'; ++first) {
        std::string_view meta = trim(lines.lines[first]);
        meta.remove_prefix(1);
        meta = trim(meta);
        const std::size_t eq = meta.find('=');
        if (eq == std::string_view::npos) continue;
        if (trim(meta.substr(0, eq)) == "layout" && trim(meta.substr(eq + 1)) != kLayoutTag) {
            throw Error(ErrorKind::SchemaError, std::string(source) + ": layout '" +
                                                    std::string(trim(meta.substr(eq + 1))) + "' is not " +
                                                    std::string(kLayoutTag));
        }
    }
    if (first >= lines.lines.size()) throw Error(ErrorKind::SchemaError, std::string(source) + ": missing header row");

    const auto header = split_record(lines.lines[first], source, lines.numbers[first]);
    if (header.size() != kColumns) {
        throw Error(ErrorKind::SchemaError, std::string(source) + ": header has " + std::to_string(header.size()) +
                                                " columns, expected " + std::to_string(kColumns));
    }
    for (std::size_t c = 0; c < kColumns; ++c) {
        std::string expected;
        if (c == 0) expected = "subject";
        else if (c == 1) expected = "frame";
        else if (c == 2) expected = "is_neutral";
        else expected = ((c - 3) % 2 == 0 ? "x" : "y") + std::to_string((c - 3) / 2);
        if (lower(trim(header[c])) != expected) {
            throw Error(ErrorKind::SchemaError, location(source, lines.numbers[first], c + 1) + ": expected column '" +
                                                    expected + "', found '" + header[c] + "'");
        }
    }

    std::vector<RawFrame> frames;
    for (std::size_t l = first + 1; l < lines.lines.size(); ++l) {
        const std::size_t line_no = lines.numbers[l];
        const auto fields = split_record(lines.lines[l], source, line_no);
        if (fields.size() != kColumns) {
            throw Error(ErrorKind::SchemaError, location(source, line_no, 1) + ": row has " +
                                                    std::to_string(fields.size()) + " columns, expected " +
                                                    std::to_string(kColumns));
        }
        RawFrame frame;
        frame.subject_id = std::string(trim(fields[0]));
        frame.frame_index = parse_index(fields[1], source, line_no, 2);
        frame.is_neutral = parse_flag(fields[2], source, line_no, 3);
        for (int i = 0; i < kNumKeypoints; ++i) {
            const std::size_t cx = 3 + 2 * static_cast<std::size_t>(i);
            const auto x = parse_coordinate(fields[cx], source, line_no, cx + 1);
            const auto y = parse_coordinate(fields[cx + 1], source, line_no, cx + 2);
            const bool valid = x && y && !(*x == 0.0 && *y == 0.0);
            frame.validity[i] = valid;
            if (valid) frame.coords.col(i) << *x, *y;
            else frame.coords.col(i).setZero();
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<RawFrame> load_keypoints(const std::filesystem::path& path) {
    return parse_keypoints_csv(read_text_file(path), path.string());
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.value("dataset", std::string());
        m.keypoint_template = j.value("template", std::string("68-point"));
        if (j.contains("frame_rate")) m.frame_rate = j.at("frame_rate").get<double>();
        const auto base = path.parent_path();
        for (const auto& s : j.at("subjects")) {
            Subject subject;
            subject.id = s.at("id").get<std::string>();
            for (const auto& f : s.at("files")) {
                std::filesystem::path p = f.get<std::string>();
                subject.files.push_back(p.is_absolute() ? p : base / p);
            }
            if (s.contains("neutral_frame")) subject.neutral_frame = s.at("neutral_frame").get<std::size_t>();
            m.subjects.push_back(std::move(subject));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

void DatasetManifest::validate() const {
    if (keypoint_template != "68-point") {
        throw Error(ErrorKind::SchemaError, "unsupported keypoint template '" + keypoint_template + "'");
    }
    for (const Subject& s : subjects) {
        if (s.files.empty()) throw Error(ErrorKind::SchemaError, "subject '" + s.id + "' has no frame files");
    }
}

std::vector<RawFrame> load_keypoints(const DatasetManifest& manifest) {
    manifest.validate();
    std::vector<RawFrame> out;
    for (const DatasetManifest::Subject& subject : manifest.subjects) {
        for (const auto& file : subject.files) {
            for (RawFrame& frame : load_keypoints(file)) {
                if (frame.subject_id != subject.id) continue;
                if (subject.neutral_frame) frame.is_neutral = frame.frame_index == *subject.neutral_frame;
                out.push_back(std::move(frame));
            }
        }
    }
    return out;
}

void write_keypoints_csv(std::ostream& out, const std::vector<StandardizedFrame>& frames) {
    out << "# layout=" << kLayoutTag << '\n';
    out << "subject,frame,is_neutral";
    for (int i = 0; i < kNumKeypoints; ++i) out << ",x" << i << ",y" << i;
    out << '\n';
    for (const StandardizedFrame& f : frames) {
        out << csv_escape(f.subject_id) << ',' << f.frame_index << ',' << (f.is_neutral ? 1 : 0);
        for (int i = 0; i < kNumKeypoints; ++i) {
            if (f.validity[i]) out << ',' << format_number(f.coords(0, i)) << ',' << format_number(f.coords(1, i));
            else out << ",,";
        }
        out << '\n';
    }
}

InterpretabilityRecord parse_interpretability_labels(std::string_view text, std::string_view source) {
    const Lines lines = split_lines(text);
    if (lines.lines.empty()) throw Error(ErrorKind::SchemaError, std::string(source) + ": empty label file");
    InterpretabilityRecord record;
    for (std::size_t l = 1; l < lines.lines.size(); ++l) {
        const auto fields = split_record(lines.lines[l], source, lines.numbers[l]);
        if (fields.empty() || trim(fields[0]).empty()) {
            throw Error(ErrorKind::ParseError, location(source, lines.numbers[l], 1) + ": missing unit name");
        }
        record.unit_names.emplace_back(trim(fields[0]));
        std::vector<bool> votes;
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const std::string v = lower(trim(fields[c]));
            if (v.empty()) continue;
            if (v == "interpretable" || v == "i" || v == "1" || v == "yes" || v == "y") {
                votes.push_back(true);
            } else if (v == "non-interpretable" || v == "ni" || v == "0" || v == "no" || v == "n") {
                votes.push_back(false);
            } else {
                throw Error(ErrorKind::ParseError,
                            location(source, lines.numbers[l], c + 1) + ": unknown label '" + v + "'");
            }
        }
        record.labels.push_back(std::move(votes));
    }
    return record;
}

InterpretabilityRecord load_interpretability_labels(const std::filesystem::path& path) {
    return parse_interpretability_labels(read_text_file(path), path.string());
}

VarianceCurve parse_curve_delimited(std::string_view text, std::string_view source) {
    const Lines lines = split_lines(text);
    if (lines.lines.empty()) throw Error(ErrorKind::SchemaError, std::string(source) + ": empty curve file");
    const auto header = split_record(lines.lines[0], source, lines.numbers[0]);
    VarianceCurve curve;
    if (header.size() != 3 || trim(header[1]) != "mean_ve" || trim(header[2]) != "sample_count") {
        throw Error(ErrorKind::SchemaError, std::string(source) + ": expected header 'k|l1,mean_ve,sample_count'");
    }
    if (trim(header[0]) == "k") curve.axis = CurveAxis::NumComponents;
    else if (trim(header[0]) == "l1") curve.axis = CurveAxis::L1Norm;
    else throw Error(ErrorKind::SchemaError, std::string(source) + ": unknown curve axis '" + header[0] + "'");
    for (std::size_t l = 1; l < lines.lines.size(); ++l) {
        const std::size_t line_no = lines.numbers[l];
        const auto fields = split_record(lines.lines[l], source, line_no);
        if (fields.size() != 3) throw Error(ErrorKind::SchemaError, location(source, line_no, 1) + ": expected 3 columns");
        const auto x = parse_coordinate(fields[0], source, line_no, 1);
        const auto y = parse_coordinate(fields[1], source, line_no, 2);
        if (!x || !y) throw Error(ErrorKind::ParseError, location(source, line_no, 1) + ": missing value");
        curve.axis_values.push_back(*x);
        curve.mean_ve.push_back(*y);
        curve.sample_counts.push_back(parse_index(fields[2], source, line_no, 3));
    }
    return curve;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace dfecs::io
