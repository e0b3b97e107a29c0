#include "diwr/pcio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary PLY paths assume a little-endian host");

namespace diwr {
namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

FileFormat resolve_format(const std::string& path, FileFormat format) {
    if (format != FileFormat::Auto) return format;
    const std::string ext = lower_ext(path);
    if (ext == "xyz" || ext == "txt" || ext == "pts") return FileFormat::Xyz;
    if (ext == "ply") return FileFormat::Ply;
    if (ext == "obj") return FileFormat::Obj;
    throw Error("cannot infer file format from extension: " + path);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed: " + path);
}

// Splits on '\n', stripping a trailing '\r'. Returns false at end of input.
struct LineReader {
    const std::string& data;
    std::size_t pos = 0;
    std::size_t line_no = 0;

    bool next(std::string& out) {
        if (pos >= data.size()) return false;
        const auto nl = data.find('\n', pos);
        const auto end = nl == std::string::npos ? data.size() : nl;
        out.assign(data, pos, end - pos);
        if (!out.empty() && out.back() == '\r') out.pop_back();
        pos = end + 1;
        ++line_no;
        return true;
    }
};

double parse_double(const std::string& path, std::size_t line, const char*& cursor) {
    char* end = nullptr;
    const double v = std::strtod(cursor, &end);
    if (end == cursor) throw ParseError(path, line, "expected a number");
    if (!std::isfinite(v)) throw ParseError(path, line, "non-finite value");
    cursor = end;
    return v;
}

// ---------------------------------------------------------------------------
// XYZ

PointCloud load_xyz(const std::string& path, const std::string& data) {
    PointCloud cloud;
    LineReader lines{data};
    std::string line;
    while (lines.next(line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const char* c = line.c_str();
        while (*c && std::isspace(static_cast<unsigned char>(*c))) ++c;
        if (!*c) continue;
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = parse_double(path, lines.line_no, c);
        cloud.positions.push_back(p);
    }
    return cloud;
}

std::string dump_xyz(const PointCloud& cloud) {
    std::string out;
    out.reserve(cloud.size() * 60);
    char buf[128];
    for (const Vec3& p : cloud.positions) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// PLY

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::I8:
        case PlyType::U8: return 1;
        case PlyType::I16:
        case PlyType::U16: return 2;
        case PlyType::I32:
        case PlyType::U32:
        case PlyType::F32: return 4;
        case PlyType::F64: return 8;
    }
    return 0;
}

PlyType ply_type_from(const std::string& path, std::size_t line, const std::string& s) {
    if (s == "char" || s == "int8") return PlyType::I8;
    if (s == "uchar" || s == "uint8") return PlyType::U8;
    if (s == "short" || s == "int16") return PlyType::I16;
    if (s == "ushort" || s == "uint16") return PlyType::U16;
    if (s == "int" || s == "int32") return PlyType::I32;
    if (s == "uint" || s == "uint32") return PlyType::U32;
    if (s == "float" || s == "float32") return PlyType::F32;
    if (s == "double" || s == "float64") return PlyType::F64;
    throw ParseError(path, line, "unknown property type '" + s + "'");
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::F32;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

struct PlyHeader {
    bool binary = false;
    std::vector<PlyElement> elements;
    std::size_t body_offset = 0;
    std::size_t header_lines = 0;
};

PlyHeader parse_ply_header(const std::string& path, const std::string& data) {
    PlyHeader header;
    LineReader lines{data};
    std::string line;
    if (!lines.next(line) || line != "ply") throw ParseError(path, 1, "missing 'ply' magic");
    bool format_seen = false;
    bool done = false;
    while (lines.next(line)) {
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word.empty() || word == "comment" || word == "obj_info") continue;
        if (word == "format") {
            std::string fmt, version;
            ss >> fmt >> version;
            if (fmt == "ascii") header.binary = false;
            else if (fmt == "binary_little_endian") header.binary = true;
            else throw ParseError(path, lines.line_no, "unsupported format '" + fmt + "'");
            format_seen = true;
        } else if (word == "element") {
            PlyElement elem;
            if (!(ss >> elem.name >> elem.count))
                throw ParseError(path, lines.line_no, "malformed element line");
            header.elements.push_back(elem);
        } else if (word == "property") {
            if (header.elements.empty())
                throw ParseError(path, lines.line_no, "property before any element");
            PlyProperty prop;
            std::string t;
            ss >> t;
            if (t == "list") {
                std::string ct, vt;
                ss >> ct >> vt >> prop.name;
                prop.is_list = true;
                prop.count_type = ply_type_from(path, lines.line_no, ct);
                prop.type = ply_type_from(path, lines.line_no, vt);
            } else {
                prop.type = ply_type_from(path, lines.line_no, t);
                ss >> prop.name;
            }
            if (prop.name.empty())
                throw ParseError(path, lines.line_no, "property without a name");
            header.elements.back().props.push_back(prop);
        } else if (word == "end_header") {
            done = true;
            break;
        } else {
            throw ParseError(path, lines.line_no, "unexpected header keyword '" + word + "'");
        }
    }
    if (!done) throw ParseError(path, lines.line_no, "missing end_header");
    if (!format_seen) throw ParseError(path, lines.line_no, "missing format line");
    header.body_offset = lines.pos;
    header.header_lines = lines.line_no;
    return header;
}

struct BinaryCursor {
    const std::string& path;
    const std::string& data;
    std::size_t pos;

    double read(PlyType t) {
        const std::size_t size = ply_type_size(t);
        if (pos + size > data.size()) throw ParseError(path, 0, "unexpected end of binary data");
        const char* src = data.data() + pos;
        pos += size;
        switch (t) {
            case PlyType::I8: return static_cast<double>(static_cast<std::int8_t>(src[0]));
            case PlyType::U8: return static_cast<double>(static_cast<std::uint8_t>(src[0]));
            case PlyType::I16: { std::int16_t v; std::memcpy(&v, src, 2); return v; }
            case PlyType::U16: { std::uint16_t v; std::memcpy(&v, src, 2); return v; }
            case PlyType::I32: { std::int32_t v; std::memcpy(&v, src, 4); return v; }
            case PlyType::U32: { std::uint32_t v; std::memcpy(&v, src, 4); return v; }
            case PlyType::F32: { float v; std::memcpy(&v, src, 4); return v; }
            case PlyType::F64: { double v; std::memcpy(&v, src, 8); return v; }
        }
        return 0.0;
    }
};

struct AsciiCursor {
    const std::string& path;
    LineReader lines;
    std::string line;
    const char* cursor = nullptr;

    double read(PlyType) {
        while (true) {
            if (cursor && *cursor) {
                const char* probe = cursor;
                while (*probe && std::isspace(static_cast<unsigned char>(*probe))) ++probe;
                if (*probe) return parse_double(path, lines.line_no, cursor);
            }
            if (!lines.next(line)) throw ParseError(path, lines.line_no, "unexpected end of data");
            cursor = line.c_str();
        }
    }
};

// Parsed PLY body: per-element rows of scalars plus face index lists.
struct PlyContent {
    // vertex element data, one vector per known channel; empty if absent
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    std::vector<double> area, conf, density;
    std::vector<std::array<std::uint32_t, 3>> faces;
};

template <class Cursor>
void read_ply_body(const std::string& path, const PlyHeader& header, Cursor& cur,
                   PlyContent& out) {
    for (const PlyElement& elem : header.elements) {
        if (elem.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
            int iarea = -1, iconf = -1, idens = -1;
            for (std::size_t p = 0; p < elem.props.size(); ++p) {
                const std::string& n = elem.props[p].name;
                const int idx = static_cast<int>(p);
                if (n == "x") ix = idx;
                else if (n == "y") iy = idx;
                else if (n == "z") iz = idx;
                else if (n == "nx") inx = idx;
                else if (n == "ny") iny = idx;
                else if (n == "nz") inz = idx;
                else if (n == "area") iarea = idx;
                else if (n == "conf" || n == "confidence") iconf = idx;
                else if (n == "density") idens = idx;
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw ParseError(path, header.header_lines, "vertex element lacks x/y/z");
            const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
            std::vector<double> row(elem.props.size());
            for (std::size_t v = 0; v < elem.count; ++v) {
                for (std::size_t p = 0; p < elem.props.size(); ++p) {
                    if (elem.props[p].is_list) {
                        const auto n = static_cast<std::size_t>(cur.read(elem.props[p].count_type));
                        for (std::size_t j = 0; j < n; ++j) cur.read(elem.props[p].type);
                        row[p] = 0;
                    } else {
                        row[p] = cur.read(elem.props[p].type);
                    }
                }
                out.positions.emplace_back(row[ix], row[iy], row[iz]);
                if (has_normals) out.normals.emplace_back(row[inx], row[iny], row[inz]);
                if (iarea >= 0) out.area.push_back(row[iarea]);
                if (iconf >= 0) out.conf.push_back(row[iconf]);
                if (idens >= 0) out.density.push_back(row[idens]);
            }
        } else if (elem.name == "face") {
            int ilist = -1;
            for (std::size_t p = 0; p < elem.props.size(); ++p)
                if (elem.props[p].is_list &&
                    (elem.props[p].name == "vertex_indices" || elem.props[p].name == "vertex_index"))
                    ilist = static_cast<int>(p);
            for (std::size_t f = 0; f < elem.count; ++f) {
                std::vector<std::uint32_t> poly;
                for (std::size_t p = 0; p < elem.props.size(); ++p) {
                    const PlyProperty& prop = elem.props[p];
                    if (prop.is_list) {
                        const auto n = static_cast<std::size_t>(cur.read(prop.count_type));
                        for (std::size_t j = 0; j < n; ++j) {
                            const double v = cur.read(prop.type);
                            if (static_cast<int>(p) == ilist)
                                poly.push_back(static_cast<std::uint32_t>(v));
                        }
                    } else {
                        cur.read(prop.type);
                    }
                }
                for (std::size_t k = 2; k < poly.size(); ++k)
                    out.faces.push_back({poly[0], poly[k - 1], poly[k]});
            }
        } else {
            // unknown element: consume it so later elements stay aligned
            for (std::size_t r = 0; r < elem.count; ++r) {
                for (const PlyProperty& prop : elem.props) {
                    if (prop.is_list) {
                        const auto n = static_cast<std::size_t>(cur.read(prop.count_type));
                        for (std::size_t j = 0; j < n; ++j) cur.read(prop.type);
                    } else {
                        cur.read(prop.type);
                    }
                }
            }
        }
    }
}

PlyContent load_ply(const std::string& path, const std::string& data) {
    const PlyHeader header = parse_ply_header(path, data);
    PlyContent content;
    if (header.binary) {
        BinaryCursor cur{path, data, header.body_offset};
        read_ply_body(path, header, cur, content);
    } else {
        AsciiCursor cur{path, LineReader{data, header.body_offset, header.header_lines}, {}, nullptr};
        read_ply_body(path, header, cur, content);
    }
    return content;
}

template <class T>
void append_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

std::string dump_ply_points(const PointCloud& cloud) {
    std::string out;
    out += "ply\nformat binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(cloud.size()) + "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "area", "conf"})
        out += std::string("property double ") + n + "\n";
    out += "property int density\nend_header\n";
    const bool has_n = cloud.normals.size() == cloud.size();
    const bool has_a = cloud.area_weights.size() == cloud.size();
    const bool has_c = cloud.confidences.size() == cloud.size();
    const bool has_d = cloud.densities.size() == cloud.size();
    out.reserve(out.size() + cloud.size() * (8 * 8 + 4));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        const Vec3 n = has_n ? cloud.normals[i] : Vec3::Zero();
        append_raw(out, p.x());
        append_raw(out, p.y());
        append_raw(out, p.z());
        append_raw(out, n.x());
        append_raw(out, n.y());
        append_raw(out, n.z());
        append_raw(out, has_a ? cloud.area_weights[i] : 1.0);
        append_raw(out, has_c ? cloud.confidences[i] : 1.0);
        append_raw(out, static_cast<std::int32_t>(has_d ? cloud.densities[i] : 0));
    }
    return out;
}

std::string dump_ply_mesh(const TriMesh& mesh) {
    std::string out;
    out += "ply\nformat binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(mesh.vertex_count()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    out += "element face " + std::to_string(mesh.face_count()) + "\n";
    out += "property list uchar int vertex_indices\nend_header\n";
    out.reserve(out.size() + mesh.vertex_count() * 24 + mesh.face_count() * 13);
    for (const Vec3& v : mesh.vertices) {
        append_raw(out, v.x());
        append_raw(out, v.y());
        append_raw(out, v.z());
    }
    for (const auto& f : mesh.faces) {
        append_raw(out, static_cast<std::uint8_t>(3));
        for (std::uint32_t vi : f) append_raw(out, static_cast<std::int32_t>(vi));
    }
    return out;
}

// ---------------------------------------------------------------------------
// OBJ

void load_obj(const std::string& path, const std::string& data, std::vector<Vec3>& vertices,
              std::vector<std::array<std::uint32_t, 3>>* faces) {
    LineReader lines{data};
    std::string line;
    while (lines.next(line)) {
        if (line.size() < 2) continue;
        if (line[0] == 'v' && std::isspace(static_cast<unsigned char>(line[1]))) {
            const char* c = line.c_str() + 1;
            Vec3 p;
            for (int a = 0; a < 3; ++a) p[a] = parse_double(path, lines.line_no, c);
            vertices.push_back(p);
        } else if (faces && line[0] == 'f' &&
                   std::isspace(static_cast<unsigned char>(line[1]))) {
            std::istringstream ss(line.substr(1));
            std::vector<std::uint32_t> poly;
            std::string tok;
            while (ss >> tok) {
                const auto slash = tok.find('/');
                if (slash != std::string::npos) tok.erase(slash);
                long idx = 0;
                try {
                    idx = std::stol(tok);
                } catch (const std::exception&) {
                    throw ParseError(path, lines.line_no, "bad face index '" + tok + "'");
                }
                if (idx < 0) idx = static_cast<long>(vertices.size()) + idx + 1;
                if (idx <= 0 || idx > static_cast<long>(vertices.size()))
                    throw ParseError(path, lines.line_no, "face index out of range");
                poly.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            for (std::size_t k = 2; k < poly.size(); ++k)
                (*faces).push_back({poly[0], poly[k - 1], poly[k]});
        }
    }
}

std::string dump_obj_mesh(const TriMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertex_count() * 60 + mesh.face_count() * 24);
    char buf[160];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out += buf;
    }
    for (const auto& f : mesh.faces) {
        std::snprintf(buf, sizeof(buf), "f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out += buf;
    }
    return out;
}

}  // namespace

PointCloud load_points(const std::string& path, FileFormat format) {
    format = resolve_format(path, format);
    const std::string data = slurp(path);
    PointCloud cloud;
    if (format == FileFormat::Xyz) {
        cloud = load_xyz(path, data);
        cloud.reset_state();
    } else if (format == FileFormat::Ply) {
        PlyContent content = load_ply(path, data);
        cloud.positions = std::move(content.positions);
        cloud.reset_state();
        if (content.normals.size() == cloud.size()) cloud.normals = std::move(content.normals);
        if (content.area.size() == cloud.size()) cloud.area_weights = std::move(content.area);
        if (content.conf.size() == cloud.size()) cloud.confidences = std::move(content.conf);
        if (content.density.size() == cloud.size()) {
            for (std::size_t i = 0; i < cloud.size(); ++i)
                cloud.densities[i] = static_cast<int>(std::lround(content.density[i]));
        }
    } else {
        load_obj(path, data, cloud.positions, nullptr);
        cloud.reset_state();
    }
    for (const Vec3& p : cloud.positions)
        if (!p.allFinite()) throw ParseError(path, 0, "non-finite position");
    if (cloud.size() < 4) throw TooFewPoints(cloud.size());
    return cloud;
}

void save_points(const PointCloud& cloud, const std::string& path, FileFormat format) {
    format = resolve_format(path, format);
    if (format == FileFormat::Xyz) write_file(path, dump_xyz(cloud));
    else if (format == FileFormat::Ply) write_file(path, dump_ply_points(cloud));
    else throw Error("point clouds are saved as XYZ or PLY, not OBJ");
}

TriMesh load_mesh(const std::string& path, FileFormat format) {
    format = resolve_format(path, format);
    const std::string data = slurp(path);
    TriMesh mesh;
    if (format == FileFormat::Obj) {
        load_obj(path, data, mesh.vertices, &mesh.faces);
    } else if (format == FileFormat::Ply) {
        PlyContent content = load_ply(path, data);
        mesh.vertices = std::move(content.positions);
        mesh.faces = std::move(content.faces);
    } else {
        throw Error("meshes are loaded from OBJ or PLY files");
    }
    for (const auto& f : mesh.faces)
        for (std::uint32_t vi : f)
            if (vi >= mesh.vertices.size()) throw ParseError(path, 0, "face index out of range");
    return mesh;
}

void save_mesh(const TriMesh& mesh, const std::string& path, FileFormat format) {
    format = resolve_format(path, format);
    if (format == FileFormat::Obj) write_file(path, dump_obj_mesh(mesh));
    else if (format == FileFormat::Ply) write_file(path, dump_ply_mesh(mesh));
    else throw Error("meshes are saved as OBJ or PLY");
}

ScaleRecord normalize_unit_cube(PointCloud& cloud) {
    if (cloud.empty()) throw DegenerateExtent();
    const Box3 box = Box3::of_points(cloud.positions);
    const double longest = box.longest_axis();
    if (!(longest > 0.0) || !std::isfinite(longest)) throw DegenerateExtent();
    for (Vec3& p : cloud.positions) p = (p - box.lo) / longest;
    // compose with any normalization already applied so the record still
    // targets the original input frame
    cloud.scale.offset += cloud.scale.scale * box.lo;
    cloud.scale.scale *= longest;
    cloud.bump();
    return cloud.scale;
}

void mesh_to_original_frame(TriMesh& mesh, const ScaleRecord& scale) {
    for (Vec3& v : mesh.vertices) v = scale.to_original(v);
}

}  // namespace diwr
