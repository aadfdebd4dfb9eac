// Copyright 2026 The FAC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fac/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fac/common.hpp"

namespace fac {

namespace {

std::uint32_t read_u32(const std::string& b, std::size_t pos) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[pos]) |
                                    static_cast<unsigned char>(b[pos + 1]) << 8);
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

void validate_samples(const Utterance& u) {
  if (u.samples.empty()) {
    throw Error("utterance '" + u.utterance_id + "' has no samples");
  }
  for (double s : u.samples) {
    if (!std::isfinite(s) || s < -1.0 || s > 1.0) {
      throw Error("utterance '" + u.utterance_id + "' has an amplitude outside [-1, 1]");
    }
  }
}

WavData decode_wav(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw Error(origin + ": not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  int channels = 0, bits = 0, format = 0;
  WavData out;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw Error(origin + ": truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (size < 16) throw Error(origin + ": malformed fmt chunk");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      out.sample_rate = static_cast<int>(read_u32(bytes, body + 4));
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(origin + ": data chunk before fmt chunk");
      if (format != 1 || bits != 16) {
        throw Error(origin + ": only 16-bit PCM WAV is supported");
      }
      if (channels != 1) {
        throw Error(origin + ": expected mono audio, got " + std::to_string(channels) +
                    " channels (stereo input is not supported)");
      }
      const std::size_t n = size / 2;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
        out.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw Error(origin + ": no data chunk");
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_wav(ss.str(), path.string());
}

std::string encode_wav(const std::vector<double>& samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string b;
  b.reserve(44 + data_bytes);
  b += "RIFF";
  put_u32(b, 36 + data_bytes);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, 1);
  put_u32(b, static_cast<std::uint32_t>(sample_rate));
  put_u32(b, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  b += "data";
  put_u32(b, data_bytes);
  for (double s : samples) {
    const double c = std::isfinite(s) ? std::clamp(s, -1.0, 1.0) : 0.0;
    const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(b, static_cast<std::uint16_t>(v));
  }
  return b;
}

void write_wav(const std::filesystem::path& path, const std::vector<double>& samples,
               int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file " + path.string());
  const std::string bytes = encode_wav(samples, sample_rate);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fac
