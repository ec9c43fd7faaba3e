#include "artrecon/ply.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "artrecon/error.hpp"

namespace artrecon {

namespace {

enum class Encoding { Ascii, BinaryLe, BinaryBe };

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> parse_type(std::string_view s) {
  if (s == "char" || s == "int8") return ScalarType::Int8;
  if (s == "uchar" || s == "uint8") return ScalarType::UInt8;
  if (s == "short" || s == "int16") return ScalarType::Int16;
  if (s == "ushort" || s == "uint16") return ScalarType::UInt16;
  if (s == "int" || s == "int32") return ScalarType::Int32;
  if (s == "uint" || s == "uint32") return ScalarType::UInt32;
  if (s == "float" || s == "float32") return ScalarType::Float32;
  if (s == "double" || s == "float64") return ScalarType::Float64;
  return std::nullopt;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  // Scalar properties, row-major [item][property]; list properties land in
  // `lists` in item order.
  std::vector<double> scalars;
  std::vector<std::vector<double>> lists;

  int property_index(std::string_view name) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == name && !properties[i].is_list) return static_cast<int>(i);
    }
    return -1;
  }
  int list_index(std::string_view name) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == name && properties[i].is_list) return static_cast<int>(i);
    }
    return -1;
  }
};

class Reader {
 public:
  Reader(std::string data, std::size_t pos, Encoding enc, std::string source)
      : data_(std::move(data)), pos_(pos), enc_(enc), source_(std::move(source)) {}

  // Returns false on end of data.
  bool read(ScalarType t, double& out) {
    return enc_ == Encoding::Ascii ? read_ascii(out) : read_binary(t, out);
  }

 private:
  bool read_ascii(double& out) {
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (pos_ >= data_.size()) return false;
    const char* begin = data_.data() + pos_;
    const char* end = data_.data() + data_.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc()) {
      throw FormatError("malformed number in PLY body of '" + source_ + "'");
    }
    pos_ += static_cast<std::size_t>(ptr - begin);
    return true;
  }

  template <typename T>
  T load() {
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    const bool file_little = enc_ == Encoding::BinaryLe;
    if (file_little != (std::endian::native == std::endian::little)) {
      auto* bytes = reinterpret_cast<unsigned char*>(&v);
      std::reverse(bytes, bytes + sizeof(T));
    }
    pos_ += sizeof(T);
    return v;
  }

  bool read_binary(ScalarType t, double& out) {
    if (pos_ + type_size(t) > data_.size()) return false;
    switch (t) {
      case ScalarType::Int8: out = load<std::int8_t>(); break;
      case ScalarType::UInt8: out = load<std::uint8_t>(); break;
      case ScalarType::Int16: out = load<std::int16_t>(); break;
      case ScalarType::UInt16: out = load<std::uint16_t>(); break;
      case ScalarType::Int32: out = load<std::int32_t>(); break;
      case ScalarType::UInt32: out = load<std::uint32_t>(); break;
      case ScalarType::Float32: out = load<float>(); break;
      case ScalarType::Float64: out = load<double>(); break;
    }
    return true;
  }

  std::string data_;
  std::size_t pos_;
  Encoding enc_;
  std::string source_;
};

std::vector<Element> parse_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string source = path.string();

  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= data.size()) return std::nullopt;
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(pos, end - pos);
    pos = std::min(end + 1, data.size());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  auto first = next_line();
  if (!first || *first != "ply") throw FormatError("'" + source + "' is not a PLY file");

  std::optional<Encoding> enc;
  std::vector<Element> elements;
  bool header_done = false;
  while (auto line = next_line()) {
    std::istringstream ls(*line);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string kind, version;
      ls >> kind >> version;
      if (kind == "ascii") enc = Encoding::Ascii;
      else if (kind == "binary_little_endian") enc = Encoding::BinaryLe;
      else if (kind == "binary_big_endian") enc = Encoding::BinaryBe;
      else throw FormatError("unknown PLY format '" + kind + "' in '" + source + "'");
    } else if (keyword == "element") {
      Element e;
      long long count = -1;
      if (!(ls >> e.name >> count) || count < 0) {
        throw FormatError("malformed element line in '" + source + "'");
      }
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (elements.empty()) throw FormatError("property before element in '" + source + "'");
      std::string a, b, c;
      ls >> a;
      Property prop;
      if (a == "list") {
        ls >> b >> c >> prop.name;
        auto ct = parse_type(b);
        auto it = parse_type(c);
        if (!ct || !it || prop.name.empty()) {
          throw FormatError("malformed list property in '" + source + "'");
        }
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
      } else {
        ls >> prop.name;
        auto t = parse_type(a);
        if (!t || prop.name.empty()) {
          throw FormatError("malformed property '" + *line + "' in '" + source + "'");
        }
        prop.type = *t;
      }
      elements.back().properties.push_back(prop);
    } else if (keyword == "end_header") {
      header_done = true;
      break;
    } else {
      throw FormatError("unexpected PLY header line '" + *line + "' in '" + source + "'");
    }
  }
  if (!header_done) throw FormatError("PLY header of '" + source + "' has no end_header");
  if (!enc) throw FormatError("PLY header of '" + source + "' has no format line");

  Reader reader(std::move(data), pos, *enc, source);
  for (auto& e : elements) {
    std::size_t scalar_props = 0;
    for (const auto& p : e.properties) scalar_props += p.is_list ? 0 : 1;
    e.scalars.reserve(e.count * scalar_props);
    for (std::size_t item = 0; item < e.count; ++item) {
      for (const auto& p : e.properties) {
        double v = 0.0;
        bool ok = true;
        if (p.is_list) {
          double n = 0.0;
          ok = reader.read(p.count_type, n);
          if (ok && (n < 0 || n != std::floor(n))) {
            throw FormatError("invalid list length in element '" + e.name + "' of '" + source + "'");
          }
          std::vector<double> list;
          for (std::size_t i = 0; ok && i < static_cast<std::size_t>(n); ++i) {
            ok = reader.read(p.type, v);
            list.push_back(v);
          }
          if (ok) e.lists.push_back(std::move(list));
        } else {
          ok = reader.read(p.type, v);
          if (ok) e.scalars.push_back(v);
        }
        if (!ok) {
          throw FormatError("truncated PLY body in '" + source + "': element '" + e.name +
                            "' expected " + std::to_string(e.count) + " entries, got " +
                            std::to_string(item));
        }
      }
    }
  }
  return elements;
}

const Element* find_element(const std::vector<Element>& elements, std::string_view name) {
  for (const auto& e : elements) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

// Divisor, not reciprocal: c / 255.0 reproduces the written value exactly.
double color_divisor(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return 255.0;
    case ScalarType::UInt16: return 65535.0;
    default: return 1.0;
  }
}

struct VertexColumns {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;
  std::vector<Eigen::Vector3d> normals;
};

VertexColumns read_vertices(const Element& v, const std::string& source) {
  const int x = v.property_index("x"), y = v.property_index("y"), z = v.property_index("z");
  if (x < 0 || y < 0 || z < 0) {
    throw FormatError("vertex element of '" + source + "' lacks x/y/z");
  }
  std::vector<int> scalar_slot(v.properties.size(), -1);
  int slots = 0;
  for (std::size_t i = 0; i < v.properties.size(); ++i) {
    if (!v.properties[i].is_list) scalar_slot[i] = slots++;
  }
  const int r = v.property_index("red"), g = v.property_index("green"), b = v.property_index("blue");
  const int nx = v.property_index("nx"), ny = v.property_index("ny"), nz = v.property_index("nz");
  const bool has_color = r >= 0 && g >= 0 && b >= 0;
  const bool has_normal = nx >= 0 && ny >= 0 && nz >= 0;

  VertexColumns out;
  out.positions.reserve(v.count);
  for (std::size_t i = 0; i < v.count; ++i) {
    const double* row = v.scalars.data() + i * slots;
    out.positions.emplace_back(row[scalar_slot[x]], row[scalar_slot[y]], row[scalar_slot[z]]);
    if (has_color) {
      out.colors.emplace_back(row[scalar_slot[r]] / color_divisor(v.properties[r].type),
                              row[scalar_slot[g]] / color_divisor(v.properties[g].type),
                              row[scalar_slot[b]] / color_divisor(v.properties[b].type));
    }
    if (has_normal) {
      out.normals.emplace_back(row[scalar_slot[nx]], row[scalar_slot[ny]], row[scalar_slot[nz]]);
    }
  }
  return out;
}

std::uint8_t quantize(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

void append_float(std::string& out, float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

template <typename T>
void append_le(std::string& out, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path, PlyFormat format) {
  mesh.validate();
  const bool ascii = format == PlyFormat::Ascii;
  std::string out;
  out += "ply\n";
  out += ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (mesh.has_colors()) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "element face " + std::to_string(mesh.triangles.size()) + "\n";
  out += "property list uchar int vertex_indices\n";
  out += "end_header\n";

  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    for (int a = 0; a < 3; ++a) {
      const auto f = static_cast<float>(v[a]);
      if (ascii) {
        if (a > 0) out += ' ';
        append_float(out, f);
      } else {
        append_le(out, f);
      }
    }
    if (mesh.has_colors()) {
      for (int a = 0; a < 3; ++a) {
        const std::uint8_t q = quantize(mesh.colors[i][a]);
        if (ascii) {
          out += ' ';
          out += std::to_string(q);
        } else {
          out += static_cast<char>(q);
        }
      }
    }
    if (ascii) out += '\n';
  }
  for (const auto& t : mesh.triangles) {
    if (ascii) {
      out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' +
             std::to_string(t[2]) + '\n';
    } else {
      out += static_cast<char>(3);
      for (auto idx : t) append_le(out, static_cast<std::int32_t>(idx));
    }
  }
  write_file(path, out);
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  const auto elements = parse_ply(path);
  const std::string source = path.string();
  const Element* vertex = find_element(elements, "vertex");
  if (!vertex) throw FormatError("PLY '" + source + "' has no vertex element");

  TriangleMesh mesh;
  VertexColumns cols = read_vertices(*vertex, source);
  mesh.vertices = std::move(cols.positions);
  mesh.colors = std::move(cols.colors);

  if (const Element* face = find_element(elements, "face")) {
    int list = face->list_index("vertex_indices");
    if (list < 0) list = face->list_index("vertex_index");
    if (list < 0) throw FormatError("face element of '" + source + "' lacks vertex_indices");
    int list_ordinal = 0;
    for (int i = 0; i < list; ++i) list_ordinal += face->properties[i].is_list ? 1 : 0;
    int lists_per_face = 0;
    for (const auto& p : face->properties) lists_per_face += p.is_list ? 1 : 0;

    for (std::size_t f = 0; f < face->count; ++f) {
      const auto& poly = face->lists[f * lists_per_face + list_ordinal];
      for (std::size_t c = 2; c < poly.size(); ++c) {
        mesh.triangles.push_back({static_cast<std::uint32_t>(poly[0]),
                                  static_cast<std::uint32_t>(poly[c - 1]),
                                  static_cast<std::uint32_t>(poly[c])});
      }
    }
  }
  try {
    mesh.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError("invalid mesh in '" + source + "': " + e.what());
  }
  return mesh;
}

void write_point_cloud_ply(const PointCloud& pc, const std::filesystem::path& path) {
  pc.validate();
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(pc.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (pc.has_colors()) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (pc.has_normals()) out += "property float nx\nproperty float ny\nproperty float nz\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (a > 0) out += ' ';
      append_float(out, static_cast<float>(pc.positions[i][a]));
    }
    if (pc.has_colors()) {
      for (int a = 0; a < 3; ++a) {
        out += ' ';
        out += std::to_string(quantize(pc.colors[i][a]));
      }
    }
    if (pc.has_normals()) {
      for (int a = 0; a < 3; ++a) {
        out += ' ';
        append_float(out, static_cast<float>(pc.normals[i][a]));
      }
    }
    out += '\n';
  }
  write_file(path, out);
}

PointCloud read_point_cloud_ply(const std::filesystem::path& path) {
  const auto elements = parse_ply(path);
  const Element* vertex = find_element(elements, "vertex");
  if (!vertex) throw FormatError("PLY '" + path.string() + "' has no vertex element");
  VertexColumns cols = read_vertices(*vertex, path.string());
  PointCloud pc;
  pc.positions = std::move(cols.positions);
  pc.colors = std::move(cols.colors);
  pc.normals = std::move(cols.normals);
  return pc;
}

}  // namespace artrecon
