#include "mvr/ply_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace mvr {

namespace {

struct Property {
    std::string name;
    std::string type;       // scalar type, or value type for lists
    std::string count_type; // non-empty for list properties
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

std::size_t type_size(const std::string& t, int line_no) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32") {
        return 4;
    }
    if (t == "double" || t == "float64") return 8;
    throw ParseError("ply: unknown property type '" + t + "' at header line " +
                     std::to_string(line_no));
}

// istream's operator>> rejects "nan"/"inf" tokens; parse via strtod so that
// non-finite coordinates reach the finiteness check and its error message.
double parse_ascii_number(std::istringstream& ls, std::size_t row) {
    std::string token;
    if (!(ls >> token)) throw ParseError("ply: malformed vertex row " + std::to_string(row));
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
        throw ParseError("ply: malformed vertex row " + std::to_string(row));
    }
    return value;
}

double read_binary_scalar(std::istream& in, const std::string& type) {
    unsigned char buf[8];
    const std::size_t n = type_size(type, 0);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
    if (!in) throw ParseError("ply: unexpected end of binary data");
    if (type == "float" || type == "float32") {
        float f;
        std::memcpy(&f, buf, 4);
        return static_cast<double>(f);
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, buf, 8);
        return d;
    }
    // Integer types, little-endian.
    uint64_t raw = 0;
    for (std::size_t i = 0; i < n; ++i) raw |= static_cast<uint64_t>(buf[i]) << (8 * i);
    const bool is_signed = type[0] == 'c' || type[0] == 's' || (type[0] == 'i');
    if (is_signed) {
        const uint64_t sign_bit = 1ULL << (8 * n - 1);
        if (raw & sign_bit) {
            return static_cast<double>(static_cast<int64_t>(raw | ~((sign_bit << 1) - 1)));
        }
    }
    return static_cast<double>(raw);
}

}  // namespace

PointCloud load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("ply: cannot open " + path.string());

    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) {
            throw ParseError("ply: truncated header at line " + std::to_string(line_no + 1));
        }
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "ply") throw ParseError("ply: missing magic at line 1");

    bool binary = false;
    bool have_format = false;
    std::vector<Element> elements;
    for (;;) {
        std::istringstream ls(next_line());
        std::string keyword;
        ls >> keyword;
        if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
        if (keyword == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt == "ascii") {
                binary = false;
            } else if (fmt == "binary_little_endian") {
                binary = true;
            } else {
                throw ParseError("ply: unsupported format '" + fmt + "' at line " +
                                 std::to_string(line_no));
            }
            have_format = true;
        } else if (keyword == "element") {
            Element e;
            long long count = -1;
            ls >> e.name >> count;
            if (e.name.empty() || count < 0) {
                throw ParseError("ply: malformed element at line " + std::to_string(line_no));
            }
            e.count = static_cast<std::size_t>(count);
            elements.push_back(std::move(e));
        } else if (keyword == "property") {
            if (elements.empty()) {
                throw ParseError("ply: property before any element at line " +
                                 std::to_string(line_no));
            }
            Property p;
            std::string first;
            ls >> first;
            if (first == "list") {
                ls >> p.count_type >> p.type >> p.name;
                type_size(p.count_type, line_no);
            } else {
                p.type = first;
                ls >> p.name;
            }
            if (p.name.empty()) {
                throw ParseError("ply: malformed property at line " + std::to_string(line_no));
            }
            type_size(p.type, line_no);
            elements.back().properties.push_back(std::move(p));
        } else if (keyword == "end_header") {
            break;
        } else {
            throw ParseError("ply: unknown header keyword '" + keyword + "' at line " +
                             std::to_string(line_no));
        }
    }
    if (!have_format) throw ParseError("ply: header has no format line");

    PointCloud cloud;
    for (const Element& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t i = 0; i < e.properties.size(); ++i) {
                const Property& p = e.properties[i];
                if (!p.count_type.empty()) continue;
                if (p.name == "x") ix = static_cast<int>(i);
                if (p.name == "y") iy = static_cast<int>(i);
                if (p.name == "z") iz = static_cast<int>(i);
            }
            if (ix < 0 || iy < 0 || iz < 0) {
                throw ParseError("ply: vertex element lacks x/y/z properties");
            }
            if (e.count == 0) throw DataError("ply: N must be >= 1 (empty vertex element)");
            cloud.points.reserve(e.count);
            std::vector<double> row(e.properties.size());
            for (std::size_t v = 0; v < e.count; ++v) {
                if (binary) {
                    for (std::size_t i = 0; i < e.properties.size(); ++i) {
                        const Property& p = e.properties[i];
                        if (!p.count_type.empty()) {
                            const auto n =
                                static_cast<std::size_t>(read_binary_scalar(in, p.count_type));
                            for (std::size_t k = 0; k < n; ++k) read_binary_scalar(in, p.type);
                            row[i] = 0.0;
                        } else {
                            row[i] = read_binary_scalar(in, p.type);
                        }
                    }
                } else {
                    std::string data_line;
                    if (!std::getline(in, data_line)) {
                        throw ParseError("ply: missing vertex row " + std::to_string(v));
                    }
                    std::istringstream ls(data_line);
                    for (std::size_t i = 0; i < e.properties.size(); ++i) {
                        const Property& p = e.properties[i];
                        if (!p.count_type.empty()) {
                            const auto n = static_cast<std::size_t>(parse_ascii_number(ls, v));
                            for (std::size_t k = 0; k < n; ++k) parse_ascii_number(ls, v);
                            row[i] = 0.0;
                        } else {
                            row[i] = parse_ascii_number(ls, v);
                        }
                    }
                }
                const Vec3 p(row[static_cast<std::size_t>(ix)],
                             row[static_cast<std::size_t>(iy)],
                             row[static_cast<std::size_t>(iz)]);
                if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !std::isfinite(p.z())) {
                    throw DataError("ply: non-finite coordinate at vertex " + std::to_string(v));
                }
                cloud.points.push_back(p);
            }
        } else {
            // Skip this element's data block.
            for (std::size_t v = 0; v < e.count; ++v) {
                if (binary) {
                    for (const Property& p : e.properties) {
                        if (!p.count_type.empty()) {
                            const auto n =
                                static_cast<std::size_t>(read_binary_scalar(in, p.count_type));
                            for (std::size_t k = 0; k < n; ++k) read_binary_scalar(in, p.type);
                        } else {
                            read_binary_scalar(in, p.type);
                        }
                    }
                } else {
                    std::string skip_line;
                    if (!std::getline(in, skip_line)) {
                        throw ParseError("ply: truncated element '" + e.name + "'");
                    }
                }
            }
        }
    }
    if (cloud.points.empty()) throw ParseError("ply: no vertex element found");
    return cloud;
}

namespace {

void write_ply(const PointCloud& cloud, const std::vector<std::array<uint8_t, 3>>* colors,
               const std::filesystem::path& path) {
    std::string blob;
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n"
           << "element vertex " << cloud.size() << "\n"
           << "property float x\nproperty float y\nproperty float z\n";
    if (colors) {
        header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    header << "end_header\n";
    blob = header.str();
    blob.reserve(blob.size() + cloud.size() * (12 + (colors ? 3 : 0)));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        float xyz[3] = {static_cast<float>(cloud.points[i].x()),
                        static_cast<float>(cloud.points[i].y()),
                        static_cast<float>(cloud.points[i].z())};
        blob.append(reinterpret_cast<const char*>(xyz), 12);
        if (colors) {
            blob.append(reinterpret_cast<const char*>((*colors)[i].data()), 3);
        }
    }
    atomic_write_file(path, blob);
}

}  // namespace

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
    cloud.validate();
    write_ply(cloud, nullptr, path);
}

void save_ply_colored(const PointCloud& cloud, const std::vector<double>& scores,
                      const std::filesystem::path& path) {
    cloud.validate();
    if (scores.size() != cloud.size()) {
        throw DataError("ply: score count does not match point count");
    }
    const auto [mn_it, mx_it] = std::minmax_element(scores.begin(), scores.end());
    const double mn = *mn_it, mx = *mx_it;
    const double range = mx - mn;
    std::vector<std::array<uint8_t, 3>> colors(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double t = range > 0.0 ? (scores[i] - mn) / range : 0.0;
        colors[i] = {static_cast<uint8_t>(round_half_up(255.0 * t)), 0,
                     static_cast<uint8_t>(round_half_up(255.0 * (1.0 - t)))};
    }
    write_ply(cloud, &colors, path);
}

}  // namespace mvr
