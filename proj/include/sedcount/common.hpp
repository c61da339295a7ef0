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

#ifndef SEDCOUNT_COMMON_HPP_
#define SEDCOUNT_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sedcount {

// Error type thrown for every contract violation (bad inputs, malformed
// files, impossible configurations). Messages name the offending value.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <typename... Args>
[[noreturn]] inline void fail(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(os.str());
}

template <typename... Args>
inline void require(bool condition, Args&&... args) {
  if (!condition) fail(std::forward<Args>(args)...);
}

// FNV-1a; used for config hashes and substream derivation from clip ids.
// std::hash is implementation-defined, this is stable across platforms.
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  // splitmix64-style mix of the pair.
  uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
// processed exactly once; callers own any ordering of the results, so the
// outcome is independent of the thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Worker count used by batch forward/backward and feature extraction.
// Resolution order: explicit value > SEDCOUNT_THREADS env > hardware.
int default_thread_count();

}  // namespace sedcount

#endif  // SEDCOUNT_COMMON_HPP_
