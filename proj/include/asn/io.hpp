// Copyright 2026 The ASN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "asn/context.hpp"
#include "asn/error.hpp"
#include "asn/experiments.hpp"
#include "asn/geometry.hpp"
#include "asn/metrics.hpp"

namespace asn {

/// Portable float map. Samples are kept top row first, channel-interleaved;
/// the file stores rows bottom to top.
struct PfmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  float& at(int u, int v, int c) {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + c];
  }
  float at(int u, int v, int c) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + c];
  }

  friend bool operator==(const PfmImage&, const PfmImage&) = default;
};

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t x) {
  return ((x & 0xFF000000u) >> 24) | ((x & 0x00FF0000u) >> 8) | ((x & 0x0000FF00u) << 8) |
         ((x & 0x000000FFu) << 24);
}

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  // Next whitespace-delimited token; consumes exactly one trailing
  // whitespace byte.
  std::string_view token(const char* field) {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_ || pos_ >= bytes_.size()) {
      throw Error(ErrorKind::kParse, std::string("pfm: bad ") + field);
    }
    std::string_view tok = bytes_.substr(start, pos_ - start);
    ++pos_;
    return tok;
  }

  std::size_t position() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline int parse_dimension(std::string_view tok, const char* field) {
  int value = 0;
  const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || end != tok.data() + tok.size() || value <= 0) {
    throw Error(ErrorKind::kParse, std::string("pfm: bad ") + field);
  }
  return value;
}

inline std::size_t read_pfm_at(std::string_view bytes, PfmImage& img) {
  HeaderReader header(bytes);
  const std::string_view magic = header.token("magic");
  if (magic == "Pf") {
    img.channels = 1;
  } else if (magic == "PF") {
    img.channels = 3;
  } else {
    throw Error(ErrorKind::kParse, "pfm: bad magic");
  }
  img.width = parse_dimension(header.token("width"), "width");
  img.height = parse_dimension(header.token("height"), "height");
  const std::string_view scale_tok = header.token("scale");
  double scale = 0.0;
  const auto [end, ec] = std::from_chars(scale_tok.data(), scale_tok.data() + scale_tok.size(), scale);
  if (ec != std::errc{} || end != scale_tok.data() + scale_tok.size() || scale == 0.0 || !std::isfinite(scale)) {
    throw Error(ErrorKind::kParse, "pfm: bad scale");
  }
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);

  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t offset = header.position();
  if (bytes.size() - offset < count * 4) throw Error(ErrorKind::kParse, "pfm: truncated payload");
  img.data.assign(count, 0.0f);
  const std::size_t row_len = static_cast<std::size_t>(img.width) * img.channels;
  for (int file_row = 0; file_row < img.height; ++file_row) {
    const int v = img.height - 1 - file_row;
    for (std::size_t i = 0; i < row_len; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + offset + (file_row * row_len + i) * 4, 4);
      if (swap) bits = byteswap32(bits);
      img.data[static_cast<std::size_t>(v) * row_len + i] = std::bit_cast<float>(bits);
    }
  }
  return offset + count * 4;
}

}  // namespace detail

/// Serializes as little-endian ("-1.0" scale line), rows bottom to top.
inline std::string write_pfm(const PfmImage& img) {
  if (img.channels != 1 && img.channels != 3) throw Error(ErrorKind::kValidation, "pfm: channels must be 1 or 3");
  if (img.width <= 0 || img.height <= 0) throw Error(ErrorKind::kValidation, "pfm: dimensions must be positive");
  const std::size_t row_len = static_cast<std::size_t>(img.width) * img.channels;
  if (img.data.size() != row_len * img.height) throw Error(ErrorKind::kValidation, "pfm: sample count mismatch");
  for (float x : img.data) {
    if (!std::isfinite(x)) throw Error(ErrorKind::kValidation, "pfm: samples must be finite");
  }
  std::string out = std::string(img.channels == 1 ? "Pf" : "PF") + "\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + img.data.size() * 4);
  for (int file_row = 0; file_row < img.height; ++file_row) {
    const int v = img.height - 1 - file_row;
    for (std::size_t i = 0; i < row_len; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(img.data[static_cast<std::size_t>(v) * row_len + i]);
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      std::memcpy(out.data() + header + (file_row * row_len + i) * 4, &bits, 4);
    }
  }
  return out;
}

/// Parses either endianness (negative scale = little-endian).
inline PfmImage read_pfm(std::string_view bytes) {
  PfmImage img;
  detail::read_pfm_at(bytes, img);
  return img;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIo, "cannot read " + path);
  return data;
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
}

// Map <-> PFM. Invalid pixels are written as 0 (depth) or (0, 0, 0)
// (points, normals); reading applies the same rule in reverse.

inline PfmImage depth_to_pfm(const DepthMap& d) {
  PfmImage img{d.width(), d.height(), 1, std::vector<float>(d.size(), 0.0f)};
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.mask()[i]) img.data[i] = static_cast<float>(d.values()[i]);
  }
  return img;
}

inline DepthMap pfm_to_depth(const PfmImage& img) {
  if (img.channels != 1) throw Error(ErrorKind::kValidation, "depth file must have 1 channel");
  DepthMap d(img.width, img.height);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = img.data[i];
    d.values()[i] = x;
    d.mask()[i] = std::isfinite(x) && x > 0.0;
  }
  return d;
}

inline PfmImage vectors_to_pfm(const Map<Vec3>& m) {
  PfmImage img{m.width(), m.height(), 3, std::vector<float>(m.size() * 3, 0.0f)};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.mask()[i]) continue;
    const Vec3& p = m.values()[i];
    img.data[3 * i] = static_cast<float>(p.x);
    img.data[3 * i + 1] = static_cast<float>(p.y);
    img.data[3 * i + 2] = static_cast<float>(p.z);
  }
  return img;
}

/// Valid where the stored vector is finite and non-zero.
inline Map<Vec3> pfm_to_vectors(const PfmImage& img) {
  if (img.channels != 3) throw Error(ErrorKind::kValidation, "vector file must have 3 channels");
  Map<Vec3> m(img.width, img.height);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Vec3 p{img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]};
    m.values()[i] = p;
    m.mask()[i] = is_finite(p) && (p.x != 0.0 || p.y != 0.0 || p.z != 0.0);
  }
  return m;
}

/// Normals are renormalized to unit length after the 32-bit round trip.
inline NormalMap pfm_to_normals(const PfmImage& img) {
  NormalMap n = pfm_to_vectors(img);
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n.mask()[i]) n.values()[i] = normalized(n.values()[i]);
  }
  return n;
}

inline PfmImage scalar_to_pfm(const ScalarMap& m) {
  PfmImage img{m.width(), m.height(), 1, std::vector<float>(m.size(), 0.0f)};
  for (std::size_t i = 0; i < m.size(); ++i) img.data[i] = static_cast<float>(m.values()[i]);
  return img;
}

inline ScalarMap pfm_to_scalar(const PfmImage& img) {
  if (img.channels != 1) throw Error(ErrorKind::kValidation, "scalar file must have 1 channel");
  ScalarMap m(img.width, img.height, 0.0, true);
  for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] = img.data[i];
  return m;
}

inline constexpr std::string_view kContextHeader = "#ASNCTX";

/// Context files: C == 1 is a plain "Pf" image, C == 3 a plain "PF" image.
/// Any other C is the line "#ASNCTX <C>\n" followed by C complete "Pf"
/// images, channel 0 first.
inline std::string write_context(const ContextMap& ctx) {
  const int c = ctx.channels();
  const std::size_t px = static_cast<std::size_t>(ctx.width()) * ctx.height();
  auto plane = [&](int ch) {
    PfmImage img{ctx.width(), ctx.height(), 1, std::vector<float>(px)};
    for (std::size_t i = 0; i < px; ++i) img.data[i] = static_cast<float>(ctx.data()[i * c + ch]);
    return img;
  };
  if (c == 1) return write_pfm(plane(0));
  if (c == 3) {
    PfmImage img{ctx.width(), ctx.height(), 3, std::vector<float>(px * 3)};
    for (std::size_t i = 0; i < px * 3; ++i) img.data[i] = static_cast<float>(ctx.data()[i]);
    return write_pfm(img);
  }
  std::string out = std::string(kContextHeader) + " " + std::to_string(c) + "\n";
  for (int ch = 0; ch < c; ++ch) out += write_pfm(plane(ch));
  return out;
}

inline ContextMap read_context(std::string_view bytes) {
  if (bytes.substr(0, kContextHeader.size()) != kContextHeader) {
    const PfmImage img = read_pfm(bytes);
    ContextMap ctx(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) ctx.data()[i] = img.data[i];
    return ctx;
  }
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string_view::npos) throw Error(ErrorKind::kParse, "context: bad channel header");
  const std::string_view count_tok = bytes.substr(kContextHeader.size() + 1, eol - kContextHeader.size() - 1);
  int channels = 0;
  const auto [end, ec] = std::from_chars(count_tok.data(), count_tok.data() + count_tok.size(), channels);
  if (ec != std::errc{} || end != count_tok.data() + count_tok.size() || channels < 1) {
    throw Error(ErrorKind::kParse, "context: bad channel count");
  }
  std::size_t pos = eol + 1;
  ContextMap ctx;
  for (int ch = 0; ch < channels; ++ch) {
    PfmImage img;
    pos += detail::read_pfm_at(bytes.substr(pos), img);
    if (img.channels != 1) throw Error(ErrorKind::kParse, "context: planes must be single-channel");
    if (ch == 0) ctx = ContextMap(img.width, img.height, channels);
    if (img.width != ctx.width() || img.height != ctx.height()) {
      throw Error(ErrorKind::kParse, "context: plane sizes differ");
    }
    for (std::size_t i = 0; i < img.data.size(); ++i) ctx.data()[i * channels + ch] = img.data[i];
  }
  return ctx;
}

/// Flat key-value document: `key: value` or `key = value` pairs separated
/// by commas or newlines, optionally wrapped in braces with quoted keys
/// (so a flat JSON object also parses). Unknown keys are ignored.
inline Intrinsics read_intrinsics(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string item;
  auto trim = [](std::string s) {
    auto not_space = [](unsigned char ch) { return !std::isspace(ch) && ch != '"' && ch != '\''; };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
  };
  auto flush = [&] {
    const std::string t = trim(item);
    item.clear();
    if (t.empty() || t[0] == '#') return;
    const auto sep = t.find_first_of(":=");
    if (sep == std::string::npos) throw Error(ErrorKind::kParse, "intrinsics: expected key: value, got '" + t + "'");
    kv[trim(t.substr(0, sep))] = trim(t.substr(sep + 1));
  };
  for (char ch : text) {
    if (ch == '{' || ch == '}') continue;
    if (ch == ',' || ch == '\n') {
      flush();
    } else {
      item.push_back(ch);
    }
  }
  flush();

  auto number = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::kValidation, std::string("missing key ") + key);
    double value = 0.0;
    const std::string& s = it->second;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(value)) {
      throw Error(ErrorKind::kValidation, std::string(key) + " must be numeric");
    }
    return value;
  };
  Intrinsics k{number("fx"), number("fy"), number("cx"), number("cy")};
  k.validate();
  return k;
}

inline std::string write_intrinsics(const Intrinsics& k) {
  nlohmann::ordered_json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  return j.dump(2) + "\n";
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  if (r.depth) {
    const auto& d = *r.depth;
    j["depth"] = {{"rel", d.rel},       {"log10", d.log10},   {"rmse", d.rmse}, {"delta1", d.delta1},
                  {"delta2", d.delta2}, {"delta3", d.delta3}, {"count", d.count}};
  } else {
    j["depth"] = nullptr;
  }
  if (r.normal) {
    const auto& n = *r.normal;
    j["normal"] = {{"mean_deg", n.mean_deg},   {"median_deg", n.median_deg}, {"pct_11_25", n.pct_11_25},
                   {"pct_22_5", n.pct_22_5},   {"pct_30", n.pct_30},         {"count", n.count}};
  } else {
    j["normal"] = nullptr;
  }
  if (r.pointcloud) {
    const auto& p = *r.pointcloud;
    j["pointcloud"] = {{"dist", p.dist},       {"rms", p.rms},         {"pct_0_1", p.pct_0_1},
                       {"pct_0_3", p.pct_0_3}, {"pct_0_5", p.pct_0_5}, {"count", p.count}};
  } else {
    j["pointcloud"] = nullptr;
  }
  return j;
}

/// One "section,metric,value" row per reported number.
inline std::string to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "section,metric,value\n";
  const auto j = to_json(r);
  for (const auto& [section, body] : j.items()) {
    if (body.is_null()) continue;
    for (const auto& [metric, value] : body.items()) {
      os << section << ',' << metric << ',';
      if (value.is_number_unsigned()) {
        os << value.get<std::uint64_t>();
      } else {
        os << format_double(value.get<double>());
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace asn
