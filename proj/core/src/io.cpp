#include "psr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace psr {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> data(static_cast<std::size_t>(size));
  in.read(data.data(), size);
  if (!in) {
    throw IoError("failed to read " + path.string());
  }
  return data;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path,
                             std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << what;
  throw ParseError(msg.str());
}

bool parse_double(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

PointCloudData read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  PointCloudData data;
  std::string line;
  std::size_t line_no = 0;
  int columns = 0;  // 3 or 6 once decided
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    const auto tokens = split_tokens(view);
    if (tokens.empty()) continue;
    if (tokens.size() != 3 && tokens.size() != 6) {
      parse_fail(path, line_no,
                 "expected 3 or 6 columns, got " + std::to_string(tokens.size()));
    }
    if (columns == 0) {
      columns = static_cast<int>(tokens.size());
    } else if (columns != static_cast<int>(tokens.size())) {
      parse_fail(path, line_no, "mixed rows with and without normals");
    }
    double v[6] = {};
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (!parse_double(tokens[k], v[k])) {
        parse_fail(path, line_no, "invalid number '" + std::string(tokens[k]) + "'");
      }
    }
    data.points.emplace_back(v[0], v[1], v[2]);
    if (columns == 6) data.normals.emplace_back(v[3], v[4], v[5]);
  }
  if (data.points.empty()) {
    throw ParseError(path.string() + ": no points");
  }
  return data;
}

// --- PLY ---------------------------------------------------------------

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::f64: return 8;
    default: return 4;
  }
}

PlyType ply_type_from(const std::string& name, const std::filesystem::path& path,
                      std::size_t line) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  parse_fail(path, line, "unsupported ply type '" + name + "'");
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t payload_offset = 0;  // bytes into the file
  std::size_t header_lines = 0;
};

PlyHeader parse_ply_header(const std::vector<char>& file,
                           const std::filesystem::path& path) {
  PlyHeader header;
  std::size_t pos = 0, line_no = 0;
  const auto next_line = [&]() -> std::string {
    std::size_t end = pos;
    while (end < file.size() && file[end] != '\n') ++end;
    if (end >= file.size() && pos == end) {
      parse_fail(path, line_no + 1, "unexpected end of header");
    }
    std::string line(file.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    return line;
  };

  if (next_line() != "ply") {
    parse_fail(path, 1, "not a ply file (missing 'ply' magic)");
  }
  bool format_seen = false;
  while (true) {
    const std::string line = next_line();
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    const std::string_view kw = tokens[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (tokens.size() < 2) parse_fail(path, line_no, "malformed format line");
      if (tokens[1] == "ascii") header.binary = false;
      else if (tokens[1] == "binary_little_endian") header.binary = true;
      else parse_fail(path, line_no, "unsupported ply format '" + std::string(tokens[1]) + "'");
      format_seen = true;
    } else if (kw == "element") {
      if (tokens.size() != 3) parse_fail(path, line_no, "malformed element line");
      PlyElement element;
      element.name = std::string(tokens[1]);
      double count = 0;
      if (!parse_double(tokens[2], count) || count < 0) {
        parse_fail(path, line_no, "bad element count");
      }
      element.count = static_cast<std::size_t>(count);
      header.elements.push_back(element);
    } else if (kw == "property") {
      if (header.elements.empty()) parse_fail(path, line_no, "property before element");
      PlyProperty prop;
      if (tokens.size() >= 5 && tokens[1] == "list") {
        prop.is_list = true;
        prop.count_type = ply_type_from(std::string(tokens[2]), path, line_no);
        prop.type = ply_type_from(std::string(tokens[3]), path, line_no);
        prop.name = std::string(tokens[4]);
      } else if (tokens.size() >= 3) {
        prop.type = ply_type_from(std::string(tokens[1]), path, line_no);
        prop.name = std::string(tokens[2]);
      } else {
        parse_fail(path, line_no, "malformed property line");
      }
      header.elements.back().properties.push_back(prop);
    } else if (kw == "end_header") {
      break;
    } else {
      parse_fail(path, line_no, "unknown header keyword '" + std::string(kw) + "'");
    }
  }
  if (!format_seen) parse_fail(path, line_no, "missing format line");
  header.payload_offset = pos;
  header.header_lines = line_no;
  return header;
}

double decode_scalar(const char* p, PlyType t) {
  switch (t) {
    case PlyType::i8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::u8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::i16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::u16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::i32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::u32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::f32: { float v; std::memcpy(&v, p, 4); return v; }
    default: { double v; std::memcpy(&v, p, 8); return v; }
  }
}

struct PlyContents {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<std::array<int, 3>> triangles;
};

PlyContents read_ply(const std::filesystem::path& path) {
  const std::vector<char> file = read_file(path);
  const PlyHeader header = parse_ply_header(file, path);

  PlyContents out;
  std::size_t byte_pos = header.payload_offset;
  std::size_t line_no = header.header_lines;

  // ASCII payloads reuse the token scanner line by line.
  std::size_t text_pos = header.payload_offset;
  const auto next_tokens = [&]() {
    while (text_pos < file.size()) {
      std::size_t end = text_pos;
      while (end < file.size() && file[end] != '\n') ++end;
      std::string_view line(file.data() + text_pos, end - text_pos);
      text_pos = end + 1;
      ++line_no;
      auto tokens = split_tokens(line);
      if (!tokens.empty()) return std::pair{tokens, line_no};
    }
    parse_fail(path, line_no, "unexpected end of ascii payload");
  };

  for (const PlyElement& element : header.elements) {
    const bool is_vertex = element.name == "vertex";
    const bool is_face = element.name == "face";

    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    if (is_vertex) {
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const PlyProperty& p = element.properties[k];
        if (p.is_list) parse_fail(path, header.header_lines, "list property in vertex element");
        if (p.name == "x") ix = static_cast<int>(k);
        if (p.name == "y") iy = static_cast<int>(k);
        if (p.name == "z") iz = static_cast<int>(k);
        if (p.name == "nx") inx = static_cast<int>(k);
        if (p.name == "ny") iny = static_cast<int>(k);
        if (p.name == "nz") inz = static_cast<int>(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) {
        throw ParseError(path.string() + ": vertex element lacks x, y, z");
      }
    }
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

    for (std::size_t e = 0; e < element.count; ++e) {
      if (header.binary) {
        std::vector<double> scalars;
        scalars.reserve(element.properties.size());
        std::vector<double> list_values;
        for (const PlyProperty& p : element.properties) {
          if (p.is_list) {
            const std::size_t cs = ply_type_size(p.count_type);
            if (byte_pos + cs > file.size()) {
              throw ParseError(path.string() + ": truncated payload at byte " +
                               std::to_string(byte_pos));
            }
            const auto count = static_cast<std::size_t>(
                decode_scalar(file.data() + byte_pos, p.count_type));
            byte_pos += cs;
            const std::size_t vs = ply_type_size(p.type);
            if (byte_pos + count * vs > file.size()) {
              throw ParseError(path.string() + ": truncated payload at byte " +
                               std::to_string(byte_pos));
            }
            list_values.clear();
            for (std::size_t c = 0; c < count; ++c) {
              list_values.push_back(decode_scalar(file.data() + byte_pos, p.type));
              byte_pos += vs;
            }
            if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
              if (list_values.size() != 3) {
                throw ParseError(path.string() + ": only triangle faces are supported");
              }
              out.triangles.push_back({static_cast<int>(list_values[0]),
                                       static_cast<int>(list_values[1]),
                                       static_cast<int>(list_values[2])});
            }
          } else {
            const std::size_t vs = ply_type_size(p.type);
            if (byte_pos + vs > file.size()) {
              throw ParseError(path.string() + ": truncated payload at byte " +
                               std::to_string(byte_pos));
            }
            scalars.push_back(decode_scalar(file.data() + byte_pos, p.type));
            byte_pos += vs;
          }
        }
        if (is_vertex) {
          out.points.emplace_back(scalars[static_cast<std::size_t>(ix)],
                                  scalars[static_cast<std::size_t>(iy)],
                                  scalars[static_cast<std::size_t>(iz)]);
          if (has_normals) {
            out.normals.emplace_back(scalars[static_cast<std::size_t>(inx)],
                                     scalars[static_cast<std::size_t>(iny)],
                                     scalars[static_cast<std::size_t>(inz)]);
          }
        }
      } else {
        const auto [tokens, at_line] = next_tokens();
        std::size_t t = 0;
        std::vector<double> scalars;
        for (const PlyProperty& p : element.properties) {
          if (p.is_list) {
            if (t >= tokens.size()) parse_fail(path, at_line, "missing list count");
            double count = 0;
            if (!parse_double(tokens[t++], count)) parse_fail(path, at_line, "bad list count");
            std::vector<double> list_values;
            for (std::size_t c = 0; c < static_cast<std::size_t>(count); ++c) {
              if (t >= tokens.size()) parse_fail(path, at_line, "missing list value");
              double v = 0;
              if (!parse_double(tokens[t++], v)) parse_fail(path, at_line, "bad list value");
              list_values.push_back(v);
            }
            if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
              if (list_values.size() != 3) {
                parse_fail(path, at_line, "only triangle faces are supported");
              }
              out.triangles.push_back({static_cast<int>(list_values[0]),
                                       static_cast<int>(list_values[1]),
                                       static_cast<int>(list_values[2])});
            }
          } else {
            if (t >= tokens.size()) parse_fail(path, at_line, "missing property value");
            double v = 0;
            if (!parse_double(tokens[t++], v)) {
              parse_fail(path, at_line, "invalid number '" + std::string(tokens[t - 1]) + "'");
            }
            scalars.push_back(v);
          }
        }
        if (t != tokens.size()) parse_fail(path, at_line, "trailing values on row");
        if (is_vertex) {
          out.points.emplace_back(scalars[static_cast<std::size_t>(ix)],
                                  scalars[static_cast<std::size_t>(iy)],
                                  scalars[static_cast<std::size_t>(iz)]);
          if (has_normals) {
            out.normals.emplace_back(scalars[static_cast<std::size_t>(inx)],
                                     scalars[static_cast<std::size_t>(iny)],
                                     scalars[static_cast<std::size_t>(inz)]);
          }
        }
      }
    }
  }
  return out;
}

// --- OBJ ---------------------------------------------------------------

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    const auto tokens = split_tokens(view);
    if (tokens.empty()) continue;
    if (tokens[0] == "v") {
      if (tokens.size() < 4) parse_fail(path, line_no, "vertex needs 3 coordinates");
      double v[3];
      for (int k = 0; k < 3; ++k) {
        if (!parse_double(tokens[static_cast<std::size_t>(k + 1)], v[k])) {
          parse_fail(path, line_no, "invalid vertex coordinate");
        }
      }
      mesh.vertices.emplace_back(v[0], v[1], v[2]);
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) parse_fail(path, line_no, "face needs at least 3 vertices");
      std::vector<int> idx;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        std::string_view ref = tokens[k];
        if (const auto slash = ref.find('/'); slash != std::string_view::npos) {
          ref = ref.substr(0, slash);
        }
        double v = 0;
        if (!parse_double(ref, v) || v == 0) {
          parse_fail(path, line_no, "invalid face index '" + std::string(tokens[k]) + "'");
        }
        int i = static_cast<int>(v);
        if (i < 0) i = static_cast<int>(mesh.vertices.size()) + i + 1;
        if (i < 1 || i > static_cast<int>(mesh.vertices.size())) {
          parse_fail(path, line_no, "face index out of range");
        }
        idx.push_back(i - 1);
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
      }
    }
    // vn / vt / usemtl etc. are ignored
  }
  return mesh;
}

void append_u32(std::string& out, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.append(bytes, 4);
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed to write " + path.string());
}

constexpr char kGridMagic[4] = {'S', 'A', 'P', 'G'};

void write_grid_payload(const std::filesystem::path& path, const GridSpec& spec,
                        std::uint32_t channels, const std::vector<double>& values,
                        Precision dtype) {
  std::string data;
  data.append(kGridMagic, 4);
  append_u32(data, static_cast<std::uint32_t>(spec.resolution()));
  append_u32(data, dtype == Precision::f32 ? 0u : 1u);
  append_u32(data, channels);
  if (dtype == Precision::f32) {
    for (double v : values) {
      const float f = static_cast<float>(v);
      char bytes[4];
      std::memcpy(bytes, &f, 4);
      data.append(bytes, 4);
    }
  } else {
    data.append(reinterpret_cast<const char*>(values.data()),
                values.size() * sizeof(double));
  }
  write_file(path, data);
}

}  // namespace

PointCloudData read_point_cloud(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".xyz") {
    return read_xyz(path);
  }
  if (ext == ".ply") {
    PlyContents contents = read_ply(path);
    if (contents.points.empty()) {
      throw ParseError(path.string() + ": no points");
    }
    PointCloudData data;
    data.points = std::move(contents.points);
    data.normals = std::move(contents.normals);
    return data;
  }
  throw Error("read_point_cloud: unsupported extension '" + ext +
              "' (expected .xyz or .ply)");
}

void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") {
    std::ostringstream out;
    out.precision(17);
    for (const Vec3& v : mesh.vertices) {
      out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    }
    for (const auto& t : mesh.triangles) {
      out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    }
    write_file(path, out.str());
    return;
  }
  if (ext == ".ply") {
    std::string data;
    data += "ply\nformat binary_little_endian 1.0\n";
    data += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
    data += "property float x\nproperty float y\nproperty float z\n";
    data += "element face " + std::to_string(mesh.triangles.size()) + "\n";
    data += "property list uchar int vertex_indices\n";
    data += "end_header\n";
    for (const Vec3& v : mesh.vertices) {
      for (int a = 0; a < 3; ++a) {
        const float f = static_cast<float>(v[a]);
        char bytes[4];
        std::memcpy(bytes, &f, 4);
        data.append(bytes, 4);
      }
    }
    for (const auto& t : mesh.triangles) {
      data.push_back(static_cast<char>(3));
      for (int a = 0; a < 3; ++a) {
        const std::int32_t i = t[static_cast<std::size_t>(a)];
        char bytes[4];
        std::memcpy(bytes, &i, 4);
        data.append(bytes, 4);
      }
    }
    write_file(path, data);
    return;
  }
  throw Error("write_mesh: unsupported extension '" + ext +
              "' (expected .obj or .ply)");
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = read_obj(path);
  } else if (ext == ".ply") {
    PlyContents contents = read_ply(path);
    mesh.vertices = std::move(contents.points);
    mesh.triangles = std::move(contents.triangles);
    for (const auto& t : mesh.triangles) {
      for (int idx : t) {
        if (idx < 0 || idx >= static_cast<int>(mesh.vertices.size())) {
          throw ParseError(path.string() + ": face index out of range");
        }
      }
    }
  } else {
    throw Error("read_mesh: unsupported extension '" + ext +
                "' (expected .obj or .ply)");
  }
  mesh.update_normals();
  return mesh;
}

void write_grid(const std::filesystem::path& path, const ScalarGrid& grid,
                Precision dtype) {
  write_grid_payload(path, grid.spec, 1, grid.values, dtype);
}

void write_grid(const std::filesystem::path& path, const VectorGrid& grid,
                Precision dtype) {
  write_grid_payload(path, grid.spec, 3, grid.values, dtype);
}

GridFile read_grid(const std::filesystem::path& path) {
  const std::vector<char> file = read_file(path);
  if (file.size() < 16 || std::memcmp(file.data(), kGridMagic, 4) != 0) {
    throw ParseError(path.string() + ": bad magic (not a SAPG grid dump)");
  }
  std::uint32_t r = 0, dtype_code = 0, channels = 0;
  std::memcpy(&r, file.data() + 4, 4);
  std::memcpy(&dtype_code, file.data() + 8, 4);
  std::memcpy(&channels, file.data() + 12, 4);
  if (dtype_code > 1) {
    throw ParseError(path.string() + ": unknown dtype code " +
                     std::to_string(dtype_code));
  }
  if (channels != 1 && channels != 3) {
    throw ParseError(path.string() + ": unsupported channel count " +
                     std::to_string(channels));
  }

  const GridSpec spec(static_cast<int>(r));
  const std::size_t count =
      static_cast<std::size_t>(spec.voxel_count()) * channels;
  const Precision dtype = dtype_code == 0 ? Precision::f32 : Precision::f64;
  const std::size_t value_size = dtype == Precision::f32 ? 4 : 8;
  if (file.size() - 16 != count * value_size) {
    std::ostringstream msg;
    msg << path.string() << ": payload size mismatch, header implies "
        << count * value_size << " bytes but file carries "
        << file.size() - 16;
    throw ParseError(msg.str());
  }

  std::vector<double> values(count);
  if (dtype == Precision::f32) {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, file.data() + 16 + 4 * i, 4);
      values[i] = f;
    }
  } else {
    std::memcpy(values.data(), file.data() + 16, count * 8);
  }

  GridFile out;
  out.dtype = dtype;
  if (channels == 1) {
    ScalarGrid grid(spec);
    grid.values = std::move(values);
    out.grid = std::move(grid);
  } else {
    VectorGrid grid(spec);
    grid.values = std::move(values);
    out.grid = std::move(grid);
  }
  return out;
}

}  // namespace psr
