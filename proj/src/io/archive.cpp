#include "dfecs/io/archive.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <vector>

#include "dfecs/error.hpp"
#include "dfecs/io/csv.hpp"
#include "dfecs/layout.hpp"

namespace dfecs::io {

namespace {

constexpr std::string_view kMagic = "dfecs-archive";

std::string num(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

class Writer {
public:
    Writer(std::string_view kind) {
        out_ += std::string(kMagic) + " " + std::to_string(kArchiveVersion) + "\n";
        field("layout", kLayoutTag);
        field("kind", kind);
    }

    void field(std::string_view key, std::string_view value) {
        out_ += key;
        out_ += ": ";
        out_ += value;
        out_ += '\n';
    }

    void matrix(std::string_view name, const Eigen::MatrixXd& m) {
        out_ += "matrix " + std::string(name) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
        std::string body;
        if (m.cols() > 0) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    if (j > 0) body += ' ';
                    body += num(m(i, j));
                }
                body += '\n';
            }
        }
        out_ += body;
        out_ += "checksum " + hex64(checksum(body)) + "\n";
    }

    std::string finish() {
        out_ += "end\n";
        return std::move(out_);
    }

private:
    std::string out_;
};

struct Parsed {
    std::vector<std::pair<std::string, std::string>> fields;
    std::map<std::string, Eigen::MatrixXd> matrices;

    const std::string* find(std::string_view key) const {
        for (const auto& [k, v] : fields) {
            if (k == key) return &v;
        }
        return nullptr;
    }

    const std::string& require(std::string_view key) const {
        if (const std::string* v = find(key)) return *v;
        throw Error(ErrorKind::SchemaError, "archive header lacks '" + std::string(key) + "'");
    }

    const Eigen::MatrixXd& matrix(const std::string& name) const {
        const auto it = matrices.find(name);
        if (it == matrices.end()) throw Error(ErrorKind::SchemaError, "archive lacks matrix block " + name);
        return it->second;
    }
};

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

double parse_double(std::string_view token, std::string_view what) {
    double value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw Error(ErrorKind::ParseError, std::string(what) + ": bad number '" + std::string(token) + "'");
    }
    return value;
}

long long parse_int(std::string_view token, std::string_view what) {
    long long value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw Error(ErrorKind::ParseError, std::string(what) + ": bad integer '" + std::string(token) + "'");
    }
    return value;
}

std::uint64_t parse_u64(std::string_view token, std::string_view what) {
    std::uint64_t value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw Error(ErrorKind::ParseError, std::string(what) + ": bad integer '" + std::string(token) + "'");
    }
    return value;
}

Parsed parse_archive(std::string_view text, std::string_view source) {
    std::vector<std::string_view> lines;
    while (!text.empty()) {
        const std::size_t end = text.find('\n');
        std::string_view line = text.substr(0, end);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (end == std::string_view::npos) break;
        text.remove_prefix(end + 1);
    }
    const std::string src(source);
    if (lines.empty()) throw Error(ErrorKind::SchemaError, src + ": empty archive");

    const auto magic = split_ws(lines[0]);
    if (magic.size() != 2 || magic[0] != kMagic) {
        throw Error(ErrorKind::SchemaError, src + ": not a dfecs archive");
    }
    const long long version = parse_int(magic[1], src + ":1");
    if (version != kArchiveVersion) {
        throw Error(ErrorKind::VersionUnsupported,
                    src + ": archive version " + std::to_string(version) + " (supported: " +
                        std::to_string(kArchiveVersion) + ")");
    }

    Parsed parsed;
    bool ended = false;
    std::size_t l = 1;
    while (l < lines.size()) {
        const std::string_view line = lines[l];
        const std::string where = src + ":" + std::to_string(l + 1);
        if (line.empty()) {
            ++l;
            continue;
        }
        if (line == "end") {
            ended = true;
            break;
        }
        if (line.starts_with("matrix ")) {
            const auto head = split_ws(line);
            if (head.size() != 4) throw Error(ErrorKind::ParseError, where + ": malformed matrix header");
            const std::string name(head[1]);
            const long long rows = parse_int(head[2], where);
            const long long cols = parse_int(head[3], where);
            if (rows < 0 || cols < 0) throw Error(ErrorKind::ParseError, where + ": negative dimensions");
            const std::size_t body_lines = cols > 0 ? static_cast<std::size_t>(rows) : 0;
            if (l + 1 + body_lines >= lines.size()) {
                throw Error(ErrorKind::ChecksumMismatch, where + ": matrix " + name + " is truncated");
            }
            std::string body;
            for (std::size_t r = 0; r < body_lines; ++r) {
                body += lines[l + 1 + r];
                body += '\n';
            }
            const auto check = split_ws(lines[l + 1 + body_lines]);
            if (check.size() != 2 || check[0] != "checksum" || check[1] != hex64(checksum(body))) {
                throw Error(ErrorKind::ChecksumMismatch, where + ": matrix " + name + " fails its checksum");
            }
            Eigen::MatrixXd m(rows, cols);
            for (std::size_t r = 0; r < body_lines; ++r) {
                const auto tokens = split_ws(lines[l + 1 + r]);
                const std::string row_where = src + ":" + std::to_string(l + 2 + r);
                if (tokens.size() != static_cast<std::size_t>(cols)) {
                    throw Error(ErrorKind::ShapeError, row_where + ": expected " + std::to_string(cols) + " values");
                }
                for (long long c = 0; c < cols; ++c) {
                    m(static_cast<Eigen::Index>(r), c) = parse_double(tokens[static_cast<std::size_t>(c)], row_where);
                }
            }
            parsed.matrices[name] = std::move(m);
            l += body_lines + 2;
            continue;
        }
        const std::size_t colon = line.find(": ");
        if (colon == std::string_view::npos) throw Error(ErrorKind::ParseError, where + ": expected 'key: value'");
        parsed.fields.emplace_back(std::string(line.substr(0, colon)), std::string(line.substr(colon + 2)));
        ++l;
    }
    if (!ended) throw Error(ErrorKind::ChecksumMismatch, src + ": archive is truncated (no 'end' line)");

    const std::string& layout = parsed.require("layout");
    if (layout != kLayoutTag) {
        throw Error(ErrorKind::SchemaError, src + ": layout '" + layout + "' is not " + std::string(kLayoutTag));
    }
    return parsed;
}

/// "key=value key=value" into a lookup.
std::map<std::string, std::string, std::less<>> attributes(std::string_view text) {
    std::map<std::string, std::string, std::less<>> out;
    for (std::string_view token : split_ws(text)) {
        const std::size_t eq = token.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorKind::ParseError, "bad attribute '" + std::string(token) + "'");
        out.emplace(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
    }
    return out;
}

const std::string& attr(const std::map<std::string, std::string, std::less<>>& a, std::string_view key) {
    const auto it = a.find(key);
    if (it == a.end()) throw Error(ErrorKind::SchemaError, "missing attribute '" + std::string(key) + "'");
    return it->second;
}

FacePart part_from_name(std::string_view name) {
    for (FacePart p : kAllParts) {
        if (part_name(p) == name) return p;
    }
    throw Error(ErrorKind::SchemaError, "unknown face part '" + std::string(name) + "'");
}

std::string_view anchor_name(AnchorChoice choice) { return choice == AnchorChoice::Default ? "default" : "no-jawline"; }

}  // namespace

std::uint64_t checksum(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string serialize_model(const FullFaceModel& model) {
    Writer w("model");
    w.field("software_version", DFECS_VERSION);
    w.field("beta", num(model.beta));
    w.field("ve_train", num(model.ve_train));
    w.field("seed", std::to_string(model.seed));
    w.field("grid_preset", model.grid_preset);
    w.field("anchors", anchor_name(model.anchors));
    w.field("train_columns", std::to_string(model.train_columns));
    w.field("num_atoms", std::to_string(model.part_basis.cols()));
    w.field("num_aus", std::to_string(model.aus.cols()));
    for (FacePart p : kAllParts) {
        const KeypointRange r = part_keypoints(p);
        w.field("partition." + std::string(part_name(p)), std::to_string(r.first) + "-" + std::to_string(r.last));
    }
    for (const PartSummary& p : model.parts) {
        w.field("part." + std::string(part_name(p.part)),
                "rank=" + std::to_string(p.rank) + " alpha=" + num(p.alpha) + " ve=" + num(p.ve) +
                    " exhausted=" + (p.grid_exhausted ? "1" : "0") + " skipped=" + (p.skipped ? "1" : "0"));
    }
    w.field("hier", "rank=" + std::to_string(model.hier.rank) + " alpha_basis=" + num(model.hier.alpha_basis) +
                        " alpha_encoding=" + num(model.hier.alpha_encoding) + " ve_full=" + num(model.hier.ve_full) +
                        " ve_codes=" + num(model.hier.ve_codes) +
                        " exhausted=" + (model.hier.grid_exhausted ? "1" : "0"));
    std::string validity(kNumKeypoints, '0');
    for (int i = 0; i < kNumKeypoints; ++i) validity[static_cast<std::size_t>(i)] = model.face_template.validity[i] ? '1' : '0';
    w.field("template_validity", validity);

    w.matrix("TEMPLATE", model.face_template.coords);
    w.matrix("U", model.part_basis);
    w.matrix("A", model.hier_basis);
    w.matrix("B", model.encoding);
    w.matrix("U_PRIME", model.aus);
    if (model.pca_expanded) w.matrix("PCA_EXPANDED", *model.pca_expanded);
    return w.finish();
}

FullFaceModel parse_model(std::string_view text) {
    const Parsed a = parse_archive(text, "model archive");
    if (a.require("kind") != "model") throw Error(ErrorKind::SchemaError, "archive does not hold a model");

    FullFaceModel m;
    m.beta = parse_double(a.require("beta"), "beta");
    m.ve_train = parse_double(a.require("ve_train"), "ve_train");
    m.seed = parse_u64(a.require("seed"), "seed");
    m.grid_preset = a.require("grid_preset");
    const std::string& anchors = a.require("anchors");
    if (anchors == "default") m.anchors = AnchorChoice::Default;
    else if (anchors == "no-jawline") m.anchors = AnchorChoice::NoJawline;
    else throw Error(ErrorKind::SchemaError, "unknown anchor set '" + anchors + "'");
    m.train_columns = static_cast<std::size_t>(parse_u64(a.require("train_columns"), "train_columns"));

    for (FacePart p : kAllParts) {
        const KeypointRange r = part_keypoints(p);
        const std::string expected = std::to_string(r.first) + "-" + std::to_string(r.last);
        if (a.require("partition." + std::string(part_name(p))) != expected) {
            throw Error(ErrorKind::SchemaError, "archive uses a different partition for " + std::string(part_name(p)));
        }
    }
    for (const auto& [key, value] : a.fields) {
        if (!key.starts_with("part.")) continue;
        const auto at = attributes(value);
        PartSummary s;
        s.part = part_from_name(std::string_view(key).substr(5));
        s.rank = static_cast<int>(parse_int(attr(at, "rank"), key));
        s.alpha = parse_double(attr(at, "alpha"), key);
        s.ve = parse_double(attr(at, "ve"), key);
        s.grid_exhausted = attr(at, "exhausted") == "1";
        s.skipped = attr(at, "skipped") == "1";
        m.parts.push_back(s);
    }
    {
        const auto at = attributes(a.require("hier"));
        m.hier.rank = static_cast<int>(parse_int(attr(at, "rank"), "hier"));
        m.hier.alpha_basis = parse_double(attr(at, "alpha_basis"), "hier");
        m.hier.alpha_encoding = parse_double(attr(at, "alpha_encoding"), "hier");
        m.hier.ve_full = parse_double(attr(at, "ve_full"), "hier");
        m.hier.ve_codes = parse_double(attr(at, "ve_codes"), "hier");
        m.hier.grid_exhausted = attr(at, "exhausted") == "1";
    }
    const std::string& validity = a.require("template_validity");
    if (validity.size() != static_cast<std::size_t>(kNumKeypoints)) {
        throw Error(ErrorKind::SchemaError, "template_validity must have 68 flags");
    }
    for (int i = 0; i < kNumKeypoints; ++i) m.face_template.validity[i] = validity[static_cast<std::size_t>(i)] == '1';

    const Eigen::MatrixXd& tpl = a.matrix("TEMPLATE");
    if (tpl.rows() != 2 || tpl.cols() != kNumKeypoints) throw Error(ErrorKind::ShapeError, "TEMPLATE must be 2 x 68");
    m.face_template.coords = tpl;
    m.part_basis = a.matrix("U");
    m.hier_basis = a.matrix("A");
    m.encoding = a.matrix("B");
    m.aus = a.matrix("U_PRIME");
    if (a.matrices.count("PCA_EXPANDED")) m.pca_expanded = a.matrix("PCA_EXPANDED");

    if (parse_int(a.require("num_aus"), "num_aus") != m.aus.cols() ||
        parse_int(a.require("num_atoms"), "num_atoms") != m.part_basis.cols()) {
        throw Error(ErrorKind::SchemaError, "declared component counts disagree with the matrix blocks");
    }
    check_model_consistency(m);
    return m;
}

void save_model(const FullFaceModel& model, const std::filesystem::path& path) {
    write_text_file(path, serialize_model(model));
}

FullFaceModel load_model(const std::filesystem::path& path) {
    try {
        return parse_model(read_text_file(path));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.detail());
    }
}

std::string serialize_au_matrix(const AuMatrix& aus) {
    Writer w("au-matrix");
    w.field("name", aus.name);
    w.field("provenance", to_string(aus.provenance));
    w.matrix("AU", aus.units);
    return w.finish();
}

AuMatrix parse_au_matrix(std::string_view text, std::string_view source) {
    const Parsed a = parse_archive(text, source);
    AuMatrix out;
    const std::string& kind = a.require("kind");
    if (kind == "au-matrix") {
        out.units = a.matrix("AU");
        out.name = a.find("name") ? *a.find("name") : std::string(source);
        out.provenance = a.find("provenance") ? provenance_from_string(*a.find("provenance")) : AuProvenance::ExternalFacs;
    } else if (kind == "model") {
        out.units = a.matrix("U_PRIME");
        out.name = "dfecs";
        out.provenance = AuProvenance::Dfecs;
    } else {
        throw Error(ErrorKind::SchemaError, std::string(source) + ": unknown archive kind '" + kind + "'");
    }
    if (out.units.rows() != kKpmDim) {
        throw Error(ErrorKind::ShapeError, std::string(source) + ": AU matrix has " + std::to_string(out.units.rows()) +
                                               " rows, expected " + std::to_string(kKpmDim));
    }
    if (!out.units.allFinite()) throw Error(ErrorKind::NonFinite, std::string(source) + ": AU matrix is not finite");
    return out;
}

void save_au_matrix(const AuMatrix& aus, const std::filesystem::path& path) {
    write_text_file(path, serialize_au_matrix(aus));
}

AuMatrix load_external_au_matrix(const std::filesystem::path& path) {
    return parse_au_matrix(read_text_file(path), path.string());
}

}  // namespace dfecs::io
