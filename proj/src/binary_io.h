/*
 * Copyright 2026 The GEL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Little-endian primitives shared by the GELB and GELC file formats.

#ifndef GEL_SRC_BINARY_IO_H_
#define GEL_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "gel/error.h"

namespace gel::internal {

template <typename UInt>
void PutLe(std::ostream& out, UInt v) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<unsigned char>(v >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(UInt));
}

inline void PutU32(std::ostream& out, std::uint32_t v) { PutLe(out, v); }
inline void PutU64(std::ostream& out, std::uint64_t v) { PutLe(out, v); }
inline void PutF32(std::ostream& out, float v) {
  PutLe(out, std::bit_cast<std::uint32_t>(v));
}
inline void PutF64(std::ostream& out, double v) {
  PutLe(out, std::bit_cast<std::uint64_t>(v));
}

class LeReader {
 public:
  LeReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  void ReadBytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::kTruncated,
                  path_ + ": file ends while reading " + std::string(what));
    }
  }

  template <typename UInt>
  UInt Get(const char* what) {
    unsigned char buf[sizeof(UInt)];
    ReadBytes(reinterpret_cast<char*>(buf), sizeof(UInt), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      v |= static_cast<UInt>(buf[i]) << (8 * i);
    }
    return v;
  }

  std::uint32_t U32(const char* what) { return Get<std::uint32_t>(what); }
  std::uint64_t U64(const char* what) { return Get<std::uint64_t>(what); }
  float F32(const char* what) { return std::bit_cast<float>(U32(what)); }
  double F64(const char* what) { return std::bit_cast<double>(U64(what)); }

  // Throws kBadMagic unless the next four bytes equal `magic`.
  void ExpectMagic(const char (&magic)[5]) {
    char got[4];
    ReadBytes(got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0) {
      throw Error(ErrorCode::kBadMagic,
                  path_ + ": expected '" + std::string(magic, 4) + "', found '" +
                      std::string(got, 4) + "'");
    }
  }

  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace gel::internal

#endif  // GEL_SRC_BINARY_IO_H_
