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

#include "hyperlora/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>

namespace hyperlora::io {
namespace {

std::mutex g_registry_mu;
std::vector<FileAccessRecorder*> g_recorders;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw IoError("truncated checkpoint: " + path.string());
  }
  return v;
}

std::string read_str(std::istream& in, const std::filesystem::path& path) {
  const auto n = read_pod<std::uint32_t>(in, path);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw IoError("truncated checkpoint: " + path.string());
  return s;
}

}  // namespace

FileAccessRecorder::FileAccessRecorder() {
  std::lock_guard lock(g_registry_mu);
  g_recorders.push_back(this);
}

FileAccessRecorder::~FileAccessRecorder() {
  std::lock_guard lock(g_registry_mu);
  std::erase(g_recorders, this);
}

std::vector<std::filesystem::path> FileAccessRecorder::paths() const {
  std::lock_guard lock(mu_);
  return paths_;
}

void FileAccessRecorder::clear() {
  std::lock_guard lock(mu_);
  paths_.clear();
}

void note_read(const std::filesystem::path& path) {
  std::lock_guard lock(g_registry_mu);
  for (auto* r : g_recorders) {
    std::lock_guard inner(r->mu_);
    r->paths_.push_back(path);
  }
}

std::ifstream open_read(const std::filesystem::path& path, bool binary) {
  note_read(path);
  std::ifstream in(path, binary ? std::ios::in | std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

std::ofstream open_write(const std::filesystem::path& path, bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::out | std::ios::binary | std::ios::trunc
                                 : std::ios::out | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void Checkpoint::add(std::string name, const Matrix& m) {
  Tensor t{std::move(name),
           {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
           std::vector<double>(m.data(), m.data() + m.size())};
  tensors.push_back(std::move(t));
}

void Checkpoint::add(std::string name, const RowVector& v) {
  Tensor t{std::move(name), {static_cast<std::uint64_t>(v.size())},
           std::vector<double>(v.data(), v.data() + v.size())};
  tensors.push_back(std::move(t));
}

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw SchemaError("checkpoint has no tensor named '" + name + "'");
}

Matrix Checkpoint::matrix(const std::string& name) const {
  const auto& t = find(name);
  if (t.shape.size() != 2) throw SchemaError("tensor '" + name + "' is not rank 2");
  Matrix m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  std::copy(t.data.begin(), t.data.end(), m.data());
  return m;
}

RowVector Checkpoint::row_vector(const std::string& name) const {
  const auto& t = find(name);
  if (t.shape.size() != 1) throw SchemaError("tensor '" + name + "' is not rank 1");
  RowVector v(static_cast<Eigen::Index>(t.shape[0]));
  std::copy(t.data.begin(), t.data.end(), v.data());
  return v;
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw SchemaError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto out = open_write(path, true);
  out.write("HLCK", 4);
  write_u32(out, 1);
  write_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    write_str(out, k);
    write_str(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    write_str(out, t.name);
    write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) write_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = open_read(path, true);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HLCK", 4) != 0) {
    throw SchemaError("not a checkpoint file: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != 1) throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto n_meta = read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = read_str(in, path);
    ckpt.meta[std::move(k)] = read_str(in, path);
  }
  const auto n_tensors = read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = read_str(in, path);
    const auto rank = read_pod<std::uint32_t>(in, path);
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(read_pod<std::uint64_t>(in, path));
      count *= t.shape.back();
    }
    t.data.resize(count);
    if (count > 0 &&
        !in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(count * sizeof(double)))) {
      throw IoError("truncated checkpoint: " + path.string());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

const std::string& meta_str(const Meta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ConfigError("missing metadata key '" + key + "'");
  return it->second;
}

namespace {

template <typename T>
T meta_number(const Meta& meta, const std::string& key, const char* kind) {
  const auto& text = meta_str(meta, key);
  T v{};
  const auto* last = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc() || p != last) throw ConfigError(std::string("bad ") + kind + " for '" + key + "'");
  return v;
}

}  // namespace

long long meta_int(const Meta& meta, const std::string& key) { return meta_number<long long>(meta, key, "integer"); }

std::uint64_t meta_u64(const Meta& meta, const std::string& key) {
  return meta_number<std::uint64_t>(meta, key, "integer");
}

double meta_double(const Meta& meta, const std::string& key) { return meta_number<double>(meta, key, "number"); }

std::string format_double(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw ArgumentError("cannot format number");
  return std::string(buf, p);
}

void save_meta_file(const std::filesystem::path& path, const Meta& meta) {
  auto out = open_write(path);
  for (const auto& [k, v] : meta) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ArgumentError("metadata entry '" + k + "' cannot be stored as a line");
    }
    out << k << '=' << v << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Meta load_meta_file(const std::filesystem::path& path) {
  auto in = open_read(path);
  Meta meta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace hyperlora::io
