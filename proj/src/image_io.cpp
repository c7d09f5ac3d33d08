#include "graspforge/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace graspforge {

namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
  out.flush();
  if (!out)
    throw IoError("failed while writing " + path.string());
}

struct NetpbmHeader
{
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in)
{
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty())
        return tok;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path)
{
  NetpbmHeader h;
  h.magic = next_token(in);
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed Netpbm header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw ParseError(path.string() + ": invalid Netpbm dimensions or maxval");
  return h;
}

std::ifstream open_in(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

void write_pgm8(const std::filesystem::path& path, const Image<std::uint8_t>& img)
{
  auto out = open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  auto px = img.pixels();
  out.write(reinterpret_cast<const char*>(px.data()),
            static_cast<std::streamsize>(px.size()));
  finish(out, path);
}

void write_pgm16(const std::filesystem::path& path,
                 const Image<std::uint16_t>& img)
{
  auto out = open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::string buf;
  buf.reserve(img.size() * 2);
  for (std::uint16_t s : img.pixels()) {
    buf.push_back(static_cast<char>(s >> 8));
    buf.push_back(static_cast<char>(s & 0xff));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish(out, path);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img)
{
  auto out = open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::string buf;
  buf.reserve(img.size() * 3);
  for (const Rgb8& p : img.pixels()) {
    buf.push_back(static_cast<char>(p.r));
    buf.push_back(static_cast<char>(p.g));
    buf.push_back(static_cast<char>(p.b));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish(out, path);
}

Image<std::uint16_t> read_pgm(const std::filesystem::path& path)
{
  auto in = open_in(path);
  const auto h = read_header(in, path);
  if (h.magic != "P5")
    throw ParseError(path.string() + ": not a binary PGM (P5)");
  const bool wide = h.maxval > 255;
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  std::string buf(n * (wide ? 2 : 1), '\0');
  if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
    throw ParseError(path.string() + ": truncated pixel data");
  Image<std::uint16_t> img(h.width, h.height);
  auto px = img.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    if (wide)
      px[i] = static_cast<std::uint16_t>(
          (static_cast<unsigned char>(buf[2 * i]) << 8) |
          static_cast<unsigned char>(buf[2 * i + 1]));
    else
      px[i] = static_cast<unsigned char>(buf[i]);
  }
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path)
{
  auto in = open_in(path);
  const auto h = read_header(in, path);
  if (h.magic != "P6" || h.maxval > 255)
    throw ParseError(path.string() + ": not an 8-bit binary PPM (P6)");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  std::string buf(n * 3, '\0');
  if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
    throw ParseError(path.string() + ": truncated pixel data");
  RgbImage img(h.width, h.height);
  auto px = img.pixels();
  for (std::size_t i = 0; i < n; ++i)
    px[i] = Rgb8{static_cast<std::uint8_t>(buf[3 * i]),
                 static_cast<std::uint8_t>(buf[3 * i + 1]),
                 static_cast<std::uint8_t>(buf[3 * i + 2])};
  return img;
}

void write_mask(const std::filesystem::path& path, const Mask& mask)
{
  Image<std::uint8_t> out(mask.width(), mask.height());
  auto src = mask.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] ? 255 : 0;
  write_pgm8(path, out);
}

Mask read_mask(const std::filesystem::path& path)
{
  const auto img = read_pgm(path);
  Mask mask(img.width(), img.height());
  auto src = img.pixels();
  auto dst = mask.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] ? 1 : 0;
  return mask;
}

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path)
{
  auto p = pgm_path;
  p.replace_extension(".json");
  return p;
}

void write_quantized_depth(const std::filesystem::path& pgm_path,
                           const std::filesystem::path& valid_path,
                           const QuantizedDepthImage& q)
{
  Image<std::uint16_t> codes(q.width, q.height);
  std::copy(q.codes.begin(), q.codes.end(), codes.pixels().begin());
  if (q.bit_depth == 16) {
    write_pgm16(pgm_path, codes);
  } else {
    Image<std::uint8_t> narrow(q.width, q.height);
    for (std::size_t i = 0; i < q.codes.size(); ++i)
      narrow.pixels()[i] = static_cast<std::uint8_t>(q.codes[i]);
    write_pgm8(pgm_path, narrow);
  }

  Mask valid(q.width, q.height);
  std::copy(q.valid.begin(), q.valid.end(), valid.pixels().begin());
  write_mask(valid_path, valid);

  const nlohmann::json meta = {
      {"z_near", q.z_near}, {"z_far", q.z_far}, {"bit_depth", q.bit_depth}};
  auto out = open_out(sidecar_path(pgm_path));
  out << meta.dump() << '\n';
  finish(out, sidecar_path(pgm_path));
}

QuantizedDepthImage read_quantized_depth(const std::filesystem::path& pgm_path,
                                         const std::filesystem::path& valid_path)
{
  const auto meta_path = sidecar_path(pgm_path);
  auto in = open_in(meta_path);
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  QuantizedDepthImage q;
  try {
    q.z_near = meta.at("z_near").get<double>();
    q.z_far = meta.at("z_far").get<double>();
    q.bit_depth = meta.at("bit_depth").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  if (q.bit_depth != 8 && q.bit_depth != 16)
    throw ParseError(meta_path.string() + ": bit_depth must be 8 or 16");

  const auto codes = read_pgm(pgm_path);
  const auto valid = read_mask(valid_path);
  if (!valid.same_shape(codes))
    throw DimensionMismatch(valid_path.string() + ": mask size differs from depth image");
  q.width = codes.width();
  q.height = codes.height();
  q.codes.assign(codes.pixels().begin(), codes.pixels().end());
  q.valid.assign(valid.pixels().begin(), valid.pixels().end());
  return q;
}

}  // namespace graspforge
