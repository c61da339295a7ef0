// Copyright 2026 The Sedcount Authors
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

#include "sedcount/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sedcount/common.hpp"

namespace sedcount {

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& buf, uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

uint32_t get_u32(const char* p) {
  return static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
         (static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
         (static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24);
}

uint16_t get_u16(const char* p) {
  return static_cast<uint16_t>(static_cast<unsigned char>(p[0]) |
                               (static_cast<unsigned char>(p[1]) << 8));
}

}  // namespace

double quantize_pcm16(double x) {
  double v = std::nearbyint(x * 32768.0);
  if (v > 32767.0) v = 32767.0;
  if (v < -32768.0) v = -32768.0;
  return v / 32768.0;
}

void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     int sample_rate) {
  require(sample_rate > 0, "write_wav_pcm16: bad sample rate ", sample_rate);
  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  put_u32(buf, 36 + data_bytes);
  buf += "WAVEfmt ";
  put_u32(buf, 16);
  put_u16(buf, 1);  // PCM
  put_u16(buf, 1);  // mono
  put_u32(buf, static_cast<uint32_t>(sample_rate));
  put_u32(buf, static_cast<uint32_t>(sample_rate * 2));
  put_u16(buf, 2);
  put_u16(buf, 16);
  buf += "data";
  put_u32(buf, data_bytes);
  for (double s : samples) {
    double v = std::nearbyint(s * 32768.0);
    if (v > 32767.0) v = 32767.0;
    if (v < -32768.0) v = -32768.0;
    put_u16(buf, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_wav_pcm16: cannot open ", path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), "write_wav_pcm16: write failed for ", path);
}

WavData read_wav_pcm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_wav_pcm16: cannot open ", path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(buf.size() >= 44 && buf.compare(0, 4, "RIFF") == 0 &&
              buf.compare(8, 4, "WAVE") == 0,
          "read_wav_pcm16: not a RIFF/WAVE file: ", path);

  WavData wav;
  size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= buf.size()) {
    std::string id = buf.substr(pos, 4);
    uint32_t size = get_u32(buf.data() + pos + 4);
    pos += 8;
    require(pos + size <= buf.size(), "read_wav_pcm16: truncated chunk in ", path);
    if (id == "fmt ") {
      require(size >= 16, "read_wav_pcm16: short fmt chunk in ", path);
      uint16_t format = get_u16(buf.data() + pos);
      uint16_t channels = get_u16(buf.data() + pos + 2);
      uint16_t bits = get_u16(buf.data() + pos + 14);
      require(format == 1 && channels == 1 && bits == 16,
              "read_wav_pcm16: only mono 16-bit PCM supported: ", path);
      wav.sample_rate = static_cast<int>(get_u32(buf.data() + pos + 4));
      have_fmt = true;
    } else if (id == "data") {
      require(have_fmt, "read_wav_pcm16: data chunk before fmt in ", path);
      size_t n = size / 2;
      wav.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t v = static_cast<int16_t>(get_u16(buf.data() + pos + 2 * i));
        wav.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return wav;
    }
    pos += size + (size & 1);
  }
  fail("read_wav_pcm16: no data chunk in ", path);
}

}  // namespace sedcount
