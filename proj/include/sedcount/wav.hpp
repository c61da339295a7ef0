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

#ifndef SEDCOUNT_WAV_HPP_
#define SEDCOUNT_WAV_HPP_

#include <string>
#include <vector>

namespace sedcount {

// Mono 16-bit PCM only. Samples are doubles scaled by 1/32768, so any value
// already on that grid round-trips exactly through a file.
void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     int sample_rate);

struct WavData {
  std::vector<double> samples;
  int sample_rate = 0;
};

WavData read_wav_pcm16(const std::string& path);

// Snaps a sample to the 16-bit grid (round, clamp to [-32768, 32767]/32768).
double quantize_pcm16(double x);

}  // namespace sedcount

#endif  // SEDCOUNT_WAV_HPP_
