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
#include "hyperlora/random.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

using namespace hyperlora;

TEST_CASE("checkpoint round trip is bitwise") {
  const auto dir = test::scratch_dir("io-ckpt");
  Matrix m(2, 3);
  m << 1.0, -0.0, 5e-324, std::numeric_limits<double>::max(), -1.0 / 3.0, 0.1;
  RowVector v(4);
  v << 1, 2, 3, std::numeric_limits<double>::infinity();
  io::Checkpoint ckpt;
  ckpt.meta["a"] = "x y\tz";
  ckpt.meta["empty"] = "";
  ckpt.add("m", m);
  ckpt.add("v", v);
  io::save_checkpoint(dir / "c.ckpt", ckpt);
  const auto back = io::load_checkpoint(dir / "c.ckpt");
  CHECK(back.meta == ckpt.meta);
  const Matrix bm = back.matrix("m");
  REQUIRE(bm.rows() == 2);
  REQUIRE(bm.cols() == 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(bm.data()[i]) == std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  CHECK(back.row_vector("v") == v);
  CHECK_THROWS_AS(back.find("missing"), Error);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = test::scratch_dir("io-bad");
  io::Checkpoint ckpt;
  ckpt.add("m", Matrix(Matrix::Ones(3, 3)));
  io::save_checkpoint(dir / "c.ckpt", ckpt);
  const auto size = std::filesystem::file_size(dir / "c.ckpt");
  std::filesystem::resize_file(dir / "c.ckpt", size - 5);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "c.ckpt"), Error);
  {
    std::ofstream out(dir / "magic.ckpt", std::ios::binary);
    out << "NOPE and then some bytes";
  }
  CHECK_THROWS_AS(io::load_checkpoint(dir / "magic.ckpt"), Error);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "absent.ckpt"), Error);
}

TEST_CASE("meta files and typed lookups") {
  const auto dir = test::scratch_dir("io-meta");
  io::Meta meta{{"n", "42"}, {"x", io::format_double(0.1)}, {"s", "a b=c"}, {"u", "18446744073709551615"}};
  io::save_meta_file(dir / "m.meta", meta);
  const auto back = io::load_meta_file(dir / "m.meta");
  CHECK(back == meta);
  CHECK(io::meta_int(back, "n") == 42);
  CHECK(io::meta_double(back, "x") == 0.1);
  CHECK(io::meta_u64(back, "u") == std::numeric_limits<std::uint64_t>::max());
  CHECK(io::meta_str(back, "s") == "a b=c");
  CHECK_THROWS_AS(io::meta_int(back, "absent"), ConfigError);
  CHECK_THROWS_AS(io::meta_int(back, "s"), ConfigError);
  CHECK_THROWS_AS(io::save_meta_file(dir / "bad.meta", {{"a=b", "1"}}), ArgumentError);
  {
    std::ofstream out(dir / "broken.meta");
    out << "# comment\nno equals sign\n";
  }
  CHECK_THROWS_AS(io::load_meta_file(dir / "broken.meta"), ParseError);
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(1.0) == "1");
  CounterRng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(200)) - 100);
    CHECK(std::stod(io::format_double(x)) == x);
  }
}

TEST_CASE("file access recorder sees reads only while alive") {
  const auto dir = test::scratch_dir("io-rec");
  io::save_meta_file(dir / "a.meta", {{"k", "v"}});
  io::save_meta_file(dir / "b.meta", {{"k", "v"}});
  io::load_meta_file(dir / "a.meta");
  {
    io::FileAccessRecorder rec;
    io::load_meta_file(dir / "b.meta");
    const auto paths = rec.paths();
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].filename() == "b.meta");
    rec.clear();
    CHECK(rec.paths().empty());
  }
  io::FileAccessRecorder later;
  CHECK(later.paths().empty());
}
