// Copyright 2026 The HyperLoRA-Desk Authors
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

#include "hyperlora/common.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace hyperlora::io {

/// Records every path the library opens for reading while at least one
/// recorder is alive. Used by tests to prove which files a code path touched.
class FileAccessRecorder {
 public:
  FileAccessRecorder();
  ~FileAccessRecorder();
  FileAccessRecorder(const FileAccessRecorder&) = delete;
  FileAccessRecorder& operator=(const FileAccessRecorder&) = delete;

  std::vector<std::filesystem::path> paths() const;
  void clear();

 private:
  friend void note_read(const std::filesystem::path&);
  mutable std::mutex mu_;
  std::vector<std::filesystem::path> paths_;
};

void note_read(const std::filesystem::path& path);

/// Opens a file for reading and reports it to active recorders.
std::ifstream open_read(const std::filesystem::path& path, bool binary = false);

std::ofstream open_write(const std::filesystem::path& path, bool binary = false);

// Checkpoint container.
//
// Byte layout (all integers little-endian, doubles IEEE-754 binary64
// little-endian):
//   magic    "HLCK"            4 bytes
//   version  u32               currently 1
//   n_meta   u32               number of metadata records
//   n_meta x { u32 key_len, key bytes, u32 value_len, value bytes }
//   n_tensor u32
//   n_tensor x { u32 name_len, name bytes, u32 rank, rank x u64 dims,
//                prod(dims) x f64 row-major data }
struct Tensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<Tensor> tensors;

  void add(std::string name, const Matrix& m);
  void add(std::string name, const RowVector& v);
  const Tensor& find(const std::string& name) const;
  Matrix matrix(const std::string& name) const;
  RowVector row_vector(const std::string& name) const;
  const std::string& meta_at(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Metadata maps. Missing keys and unparsable values raise ConfigError.

using Meta = std::map<std::string, std::string>;

const std::string& meta_str(const Meta& meta, const std::string& key);
long long meta_int(const Meta& meta, const std::string& key);
std::uint64_t meta_u64(const Meta& meta, const std::string& key);
double meta_double(const Meta& meta, const std::string& key);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

/// key=value lines, sorted by key; '#' lines are comments.
void save_meta_file(const std::filesystem::path& path, const Meta& meta);
Meta load_meta_file(const std::filesystem::path& path);

}  // namespace hyperlora::io
