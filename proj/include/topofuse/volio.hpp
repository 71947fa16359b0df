#pragma once

// Volume I/O: "raw + .meta sidecar" (native) and an NRRD subset
// (attached or detached header, raw or gzip encoding).

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/volume.hpp"

namespace topofuse {

enum class DType { u8, i16, u16, f32, f64 };
enum class Endian { little, big };
enum class VolumeFormat { raw_meta, nrrd };

/// Integer storage policy: stored = round(offset + scale * value).
/// For float targets the affine map is applied without rounding.
struct Quantization {
  double scale = 1.0;
  double offset = 0.0;
};

struct WriteOptions {
  DType dtype = DType::f32;
  Endian endian = Endian::little;
  std::optional<Quantization> quantization;
  bool gzip = false;  // NRRD only
};

namespace detail {

inline std::size_t element_size(DType t) {
  switch (t) {
    case DType::u8: return 1;
    case DType::i16:
    case DType::u16: return 2;
    case DType::f32: return 4;
    case DType::f64: return 8;
  }
  return 0;
}

inline bool is_integer(DType t) { return t == DType::u8 || t == DType::i16 || t == DType::u16; }

inline const char* dtype_name(DType t) {
  switch (t) {
    case DType::u8: return "u8";
    case DType::i16: return "i16";
    case DType::u16: return "u16";
    case DType::f32: return "f32";
    case DType::f64: return "f64";
  }
  return "?";
}

inline std::optional<DType> parse_dtype(std::string_view s) {
  if (s == "u8") return DType::u8;
  if (s == "i16") return DType::i16;
  if (s == "u16") return DType::u16;
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  return std::nullopt;
}

inline const char* nrrd_type_name(DType t) {
  switch (t) {
    case DType::u8: return "uchar";
    case DType::i16: return "short";
    case DType::u16: return "ushort";
    case DType::f32: return "float";
    case DType::f64: return "double";
  }
  return "?";
}

inline std::optional<DType> parse_nrrd_type(std::string_view s) {
  static const std::map<std::string, DType, std::less<>> table = {
      {"uchar", DType::u8},          {"unsigned char", DType::u8},   {"uint8", DType::u8},
      {"uint8_t", DType::u8},        {"short", DType::i16},          {"short int", DType::i16},
      {"signed short", DType::i16},  {"signed short int", DType::i16}, {"int16", DType::i16},
      {"int16_t", DType::i16},       {"ushort", DType::u16},         {"unsigned short", DType::u16},
      {"unsigned short int", DType::u16}, {"uint16", DType::u16},    {"uint16_t", DType::u16},
      {"float", DType::f32},         {"double", DType::f64}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

inline Endian host_endian() {
  return std::endian::native == std::endian::little ? Endian::little : Endian::big;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline double parse_double(std::string_view s, std::string_view what) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("cannot parse " + std::string(what) + " value '" + std::string(s) + "'");
  return x;
}

inline std::size_t parse_size(std::string_view s, std::string_view what) {
  std::size_t x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("cannot parse " + std::string(what) + " value '" + std::string(s) + "'");
  return x;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_bytes(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

inline std::string gzip_compress(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error("zlib: deflateInit2 failed");
  std::string out(deflateBound(&zs, static_cast<uLong>(data.size())) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("zlib: deflate failed");
  out.resize(zs.total_out);
  return out;
}

inline std::string gzip_decompress(std::string_view data) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw FormatError("zlib: inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("gzip payload is corrupt");
    }
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError("gzip payload is truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

template <class T>
T load_element(const char* p, bool swap) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if (swap)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T x;
  std::memcpy(&x, b, sizeof(T));
  return x;
}

template <class T>
void store_element(char* p, T x, bool swap) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &x, sizeof(T));
  if (swap)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(p, b, sizeof(T));
}

inline std::vector<double> decode(std::string_view bytes, DType t, Endian e) {
  const std::size_t es = element_size(t);
  const std::size_t count = bytes.size() / es;
  const bool swap = e != host_endian();
  std::vector<double> out(count);
  const char* p = bytes.data();
  for (std::size_t i = 0; i < count; ++i, p += es) {
    switch (t) {
      case DType::u8: out[i] = static_cast<unsigned char>(*p); break;
      case DType::i16: out[i] = load_element<std::int16_t>(p, swap); break;
      case DType::u16: out[i] = load_element<std::uint16_t>(p, swap); break;
      case DType::f32: out[i] = load_element<float>(p, swap); break;
      case DType::f64: out[i] = load_element<double>(p, swap); break;
    }
    if (!std::isfinite(out[i])) throw FormatError("payload contains a non-finite value");
  }
  return out;
}

/// Maps one value to its stored representation (as a double), or throws if
/// the target type cannot hold it without an explicit policy.
inline double to_stored(double v, DType t, const std::optional<Quantization>& q) {
  double x = q ? q->offset + q->scale * v : v;
  if (is_integer(t)) {
    if (q)
      x = std::round(x);
    else if (x != std::trunc(x))
      throw InputError(std::string("lossy write to ") + dtype_name(t) +
                       " requires a quantization policy");
    double lo = 0.0, hi = 0.0;
    switch (t) {
      case DType::u8: hi = 255.0; break;
      case DType::i16: lo = -32768.0; hi = 32767.0; break;
      case DType::u16: hi = 65535.0; break;
      default: break;
    }
    if (x < lo || x > hi) {
      if (!q)
        throw InputError(std::string("lossy write to ") + dtype_name(t) +
                         " requires a quantization policy");
      throw InputError(std::string("quantized value out of range for ") + dtype_name(t));
    }
    return x;
  }
  if (t == DType::f32) {
    const float f = static_cast<float>(x);
    if (!std::isfinite(f)) throw InputError("value overflows f32");
    return f;
  }
  return x;
}

inline std::string encode(std::span<const double> values, DType t, Endian e,
                          const std::optional<Quantization>& q) {
  const std::size_t es = element_size(t);
  const bool swap = e != host_endian();
  std::string out(values.size() * es, '\0');
  char* p = out.data();
  for (double v : values) {
    const double x = to_stored(v, t, q);
    switch (t) {
      case DType::u8: *p = static_cast<char>(static_cast<unsigned char>(x)); break;
      case DType::i16: store_element(p, static_cast<std::int16_t>(x), swap); break;
      case DType::u16: store_element(p, static_cast<std::uint16_t>(x), swap); break;
      case DType::f32: store_element(p, static_cast<float>(x), swap); break;
      case DType::f64: store_element(p, x, swap); break;
    }
    p += es;
  }
  return out;
}

/// Range endpoint in stored units, clamped to what the type can represent.
inline double stored_bound(double v, DType t, const std::optional<Quantization>& q) {
  double x = q ? q->offset + q->scale * v : v;
  switch (t) {
    case DType::u8: return std::clamp(std::round(x), 0.0, 255.0);
    case DType::i16: return std::clamp(std::round(x), -32768.0, 32767.0);
    case DType::u16: return std::clamp(std::round(x), 0.0, 65535.0);
    case DType::f32: return static_cast<float>(x);
    case DType::f64: return x;
  }
  return x;
}

inline void check_size(std::size_t got, const Dims& dims, DType t) {
  const std::size_t want = dims.count() * element_size(t);
  if (got != want)
    throw FormatError("size mismatch: payload has " + std::to_string(got) + " bytes, header needs " +
                      std::to_string(want));
}

inline void check_quantization(const WriteOptions& opt) {
  if (opt.quantization && !(opt.quantization->scale > 0.0 && std::isfinite(opt.quantization->scale) &&
                            std::isfinite(opt.quantization->offset)))
    throw InputError("quantization scale must be positive and finite");
}

inline std::filesystem::path meta_path(const std::filesystem::path& payload) {
  return std::filesystem::path(payload.string() + ".meta");
}

inline bool has_extension(const std::filesystem::path& p, std::string_view ext) {
  return p.extension() == ext;
}

// ---- raw + meta ----

inline Volume read_raw_meta(const std::filesystem::path& payload_path) {
  const auto mpath = meta_path(payload_path);
  if (!std::filesystem::exists(mpath)) throw FormatError("missing sidecar '" + mpath.string() + "'");
  std::istringstream in(read_bytes(mpath));
  std::map<std::string, std::string> fields;
  for (std::string line; std::getline(in, line);) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw FormatError("malformed meta line '" + t + "'");
    std::string key = trim(std::string_view(t).substr(0, colon));
    std::string value = trim(std::string_view(t).substr(colon + 1));
    static const char* known[] = {"dims", "spacing", "dtype", "endian", "range", "name"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw FormatError("unknown meta key '" + key + "'");
    if (!fields.emplace(key, value).second)
      throw FormatError("contradictory header: key '" + key + "' given twice");
  }
  if (!fields.count("dims")) throw FormatError("meta header is missing 'dims'");
  if (!fields.count("dtype")) throw FormatError("meta header is missing 'dtype'");

  Volume v;
  const auto dims = split_ws(fields["dims"]);
  if (dims.size() != 3) throw FormatError("'dims' needs three integers");
  v.dims = {parse_size(dims[0], "dims"), parse_size(dims[1], "dims"), parse_size(dims[2], "dims")};
  if (v.dims.count() == 0) throw FormatError("'dims' must be positive");
  const auto dtype = parse_dtype(fields["dtype"]);
  if (!dtype) throw FormatError("unsupported dtype '" + fields["dtype"] + "'");

  Endian endian = Endian::little;
  if (auto it = fields.find("endian"); it != fields.end()) {
    if (it->second == "little")
      endian = Endian::little;
    else if (it->second == "big")
      endian = Endian::big;
    else
      throw FormatError("unsupported endian '" + it->second + "'");
  } else if (element_size(*dtype) > 1) {
    throw FormatError("meta header is missing 'endian'");
  }
  if (auto it = fields.find("spacing"); it != fields.end()) {
    const auto sp = split_ws(it->second);
    if (sp.size() != 3) throw FormatError("'spacing' needs three reals");
    for (int i = 0; i < 3; ++i) v.spacing[i] = parse_double(sp[i], "spacing");
  }
  if (auto it = fields.find("name"); it != fields.end()) v.name = it->second;

  const std::string payload = read_bytes(payload_path);
  check_size(payload.size(), v.dims, *dtype);
  v.values = decode(payload, *dtype, endian);

  if (auto it = fields.find("range"); it != fields.end()) {
    const auto r = split_ws(it->second);
    if (r.size() != 2) throw FormatError("'range' needs two reals");
    v.vmin = parse_double(r[0], "range");
    v.vmax = parse_double(r[1], "range");
    if (!(v.vmin <= v.vmax)) throw FormatError("contradictory header: range min > max");
    for (double x : v.values)
      if (x < v.vmin || x > v.vmax) throw FormatError("contradictory header: values outside declared range");
  } else {
    std::tie(v.vmin, v.vmax) = value_extent(v.values);
  }
  validate(v);
  return v;
}

inline void write_raw_meta(const Volume& v, const std::filesystem::path& payload_path,
                           const WriteOptions& opt) {
  const std::string payload = encode(v.values, opt.dtype, opt.endian, opt.quantization);
  std::ostringstream meta;
  meta << "dims: " << v.dims.nx << ' ' << v.dims.ny << ' ' << v.dims.nz << '\n'
       << "spacing: " << format_double(v.spacing[0]) << ' ' << format_double(v.spacing[1]) << ' '
       << format_double(v.spacing[2]) << '\n'
       << "dtype: " << dtype_name(opt.dtype) << '\n'
       << "endian: " << (opt.endian == Endian::little ? "little" : "big") << '\n'
       << "range: " << format_double(stored_bound(v.vmin, opt.dtype, opt.quantization)) << ' '
       << format_double(stored_bound(v.vmax, opt.dtype, opt.quantization)) << '\n';
  if (!v.name.empty()) meta << "name: " << v.name << '\n';
  write_bytes(payload_path, payload);
  write_bytes(meta_path(payload_path), meta.str());
}

// ---- NRRD subset ----

inline Volume read_nrrd(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  if (bytes.rfind("NRRD000", 0) != 0) throw FormatError("'" + path.string() + "' is not an NRRD file");
  std::map<std::string, std::string> fields;
  std::size_t pos = bytes.find('\n');
  if (pos == std::string::npos) throw FormatError("truncated NRRD header");
  ++pos;
  std::size_t data_offset = std::string::npos;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) eol = bytes.size();
    std::string_view line(bytes.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) {
      data_offset = pos;
      break;
    }
    if (line[0] == '#') continue;
    if (line.find(":=") != std::string_view::npos) continue;  // key/value comments
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos) throw FormatError("malformed NRRD field '" + std::string(line) + "'");
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 2));
    if (key == "datafile") key = "data file";
    if (key == "byteskip") key = "byte skip";
    if (key == "lineskip") key = "line skip";
    if (!fields.emplace(key, value).second)
      throw FormatError("contradictory header: NRRD field '" + key + "' given twice");
  }
  for (const char* required : {"type", "dimension", "sizes", "encoding"})
    if (!fields.count(required)) throw FormatError(std::string("NRRD header is missing '") + required + "'");

  const auto dtype = parse_nrrd_type(fields["type"]);
  if (!dtype) throw FormatError("unsupported NRRD type '" + fields["type"] + "'");
  const std::size_t dimension = parse_size(fields["dimension"], "dimension");
  if (dimension < 1 || dimension > 3) throw FormatError("NRRD dimension must be 1, 2 or 3");
  const auto sizes = split_ws(fields["sizes"]);
  if (sizes.size() != dimension) throw FormatError("contradictory header: 'sizes' does not match 'dimension'");
  std::size_t d[3] = {1, 1, 1};
  for (std::size_t i = 0; i < dimension; ++i) d[i] = parse_size(sizes[i], "sizes");

  Volume v;
  v.dims = {d[0], d[1], d[2]};
  if (v.dims.count() == 0) throw FormatError("NRRD sizes must be positive");
  if (auto it = fields.find("spacings"); it != fields.end()) {
    const auto sp = split_ws(it->second);
    if (sp.size() != dimension) throw FormatError("contradictory header: 'spacings' does not match 'dimension'");
    for (std::size_t i = 0; i < dimension; ++i)
      if (sp[i] != "nan" && sp[i] != "NaN") v.spacing[i] = parse_double(sp[i], "spacings");
  }
  for (const char* skip : {"byte skip", "line skip"})
    if (auto it = fields.find(skip); it != fields.end() && it->second != "0")
      throw FormatError(std::string("NRRD '") + skip + "' is not supported");
  if (auto it = fields.find("content"); it != fields.end()) v.name = it->second;

  Endian endian = Endian::little;
  if (auto it = fields.find("endian"); it != fields.end()) {
    if (it->second == "little")
      endian = Endian::little;
    else if (it->second == "big")
      endian = Endian::big;
    else
      throw FormatError("unsupported NRRD endian '" + it->second + "'");
  } else if (element_size(*dtype) > 1) {
    throw FormatError("NRRD header is missing 'endian'");
  }

  std::string payload;
  if (auto it = fields.find("data file"); it != fields.end()) {
    if (it->second.rfind("LIST", 0) == 0 || split_ws(it->second).size() != 1)
      throw FormatError("multi-file NRRD data is not supported");
    std::filesystem::path data_path(it->second);
    if (data_path.is_relative()) data_path = path.parent_path() / data_path;
    payload = read_bytes(data_path);
  } else {
    if (data_offset == std::string::npos) throw FormatError("NRRD header has no data section");
    payload = bytes.substr(data_offset);
  }
  const std::string& enc = fields["encoding"];
  if (enc == "gzip" || enc == "gz")
    payload = gzip_decompress(payload);
  else if (enc != "raw")
    throw FormatError("unsupported NRRD encoding '" + enc + "'");

  check_size(payload.size(), v.dims, *dtype);
  v.values = decode(payload, *dtype, endian);
  std::tie(v.vmin, v.vmax) = value_extent(v.values);
  validate(v);
  return v;
}

inline std::string nrrd_header(const Volume& v, const WriteOptions& opt) {
  std::ostringstream hdr;
  hdr << "NRRD0004\n"
      << "type: " << nrrd_type_name(opt.dtype) << '\n'
      << "dimension: 3\n"
      << "sizes: " << v.dims.nx << ' ' << v.dims.ny << ' ' << v.dims.nz << '\n'
      << "spacings: " << format_double(v.spacing[0]) << ' ' << format_double(v.spacing[1]) << ' '
      << format_double(v.spacing[2]) << '\n';
  if (element_size(opt.dtype) > 1) hdr << "endian: " << (opt.endian == Endian::little ? "little" : "big") << '\n';
  hdr << "encoding: " << (opt.gzip ? "gzip" : "raw") << '\n';
  if (!v.name.empty()) hdr << "content: " << v.name << '\n';
  return hdr.str();
}

inline std::string nrrd_payload(const Volume& v, const WriteOptions& opt) {
  std::string payload = encode(v.values, opt.dtype, opt.endian, opt.quantization);
  return opt.gzip ? gzip_compress(payload) : payload;
}

inline void write_nrrd(const Volume& v, const std::filesystem::path& path, const WriteOptions& opt) {
  const std::string payload = nrrd_payload(v, opt);
  std::string hdr = nrrd_header(v, opt);
  if (has_extension(path, ".nhdr")) {
    std::filesystem::path data = path;
    data.replace_extension(opt.gzip ? ".raw.gz" : ".raw");
    hdr += "data file: " + data.filename().string() + "\n";
    write_bytes(data, payload);
    write_bytes(path, hdr);
  } else {
    write_bytes(path, hdr + "\n" + payload);
  }
}

inline VolumeFormat detect_format(const std::filesystem::path& path) {
  if (has_extension(path, ".nrrd") || has_extension(path, ".nhdr")) return VolumeFormat::nrrd;
  return VolumeFormat::raw_meta;
}

}  // namespace detail

/// Reads a volume. For raw+meta, `path` is the payload (its sidecar is
/// `path + ".meta"`); passing the sidecar itself also works. The format is
/// detected from the extension unless given.
inline Volume read_volume(const std::filesystem::path& path,
                          std::optional<VolumeFormat> format = std::nullopt) {
  std::filesystem::path p = path;
  if (p.extension() == ".meta") p.replace_extension();
  if (!std::filesystem::exists(p)) throw FormatError("volume file '" + p.string() + "' does not exist");
  switch (format.value_or(detail::detect_format(p))) {
    case VolumeFormat::raw_meta: return detail::read_raw_meta(p);
    case VolumeFormat::nrrd: return detail::read_nrrd(p);
  }
  throw FormatError("unknown volume format");
}

/// Writes a volume. Integer targets refuse values they cannot hold exactly
/// unless `opt.quantization` is set; f32 targets round to nearest float.
inline void write_volume(const Volume& v, const std::filesystem::path& path,
                         std::optional<VolumeFormat> format = std::nullopt, const WriteOptions& opt = {}) {
  validate(v);
  detail::check_quantization(opt);
  switch (format.value_or(detail::detect_format(path))) {
    case VolumeFormat::raw_meta: detail::write_raw_meta(v, path, opt); return;
    case VolumeFormat::nrrd: detail::write_nrrd(v, path, opt); return;
  }
}

/// Attached-header NRRD bytes, as write_volume would produce for a
/// ".nrrd" path.
inline std::string encode_nrrd(const Volume& v, const WriteOptions& opt = {}) {
  validate(v);
  detail::check_quantization(opt);
  return detail::nrrd_header(v, opt) + "\n" + detail::nrrd_payload(v, opt);
}

}  // namespace topofuse
