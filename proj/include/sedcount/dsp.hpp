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

#ifndef SEDCOUNT_DSP_HPP_
#define SEDCOUNT_DSP_HPP_

#include <complex>
#include <cstddef>
#include <vector>

namespace sedcount {

// In-place iterative radix-2 FFT. Size must be a power of two. The inverse
// transform includes the 1/N factor.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse);

size_t next_pow2(size_t n);

// Power spectrum of a real frame zero-padded to fft_size; returns
// fft_size / 2 + 1 bins.
std::vector<double> power_spectrum(const std::vector<double>& frame,
                                   size_t fft_size);

// Mean squared amplitude.
double mean_power(const std::vector<double>& x);

}  // namespace sedcount

#endif  // SEDCOUNT_DSP_HPP_
