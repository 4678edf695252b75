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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hyperlora::typology {

/// Expert attestation level of a feature in a dialect.
enum class Attestation { Obligatory, NeitherPervasiveNorRare, Rare, AbsentOrUnknown };

/// Application rate used when generating pseudo-dialect text: 1.0, 0.6, 0.3, 0.0.
double rate_from_attestation(Attestation code);

/// Parses an attestation letter: A, B, C, or D / X / ? (absent or unknown).
std::optional<Attestation> parse_attestation(std::string_view letter);

/// Ordered, duplicate-free list of feature ids shared by a family of vectors.
class FeatureUniverse {
 public:
  explicit FeatureUniverse(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> index_of(std::string_view id) const;

  bool operator==(const FeatureUniverse& other) const { return ids_ == other.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-dialect feature application rates, each in [0, 1].
class DialectFeatureVector {
 public:
  DialectFeatureVector(std::string dialect_id, std::shared_ptr<const FeatureUniverse> universe,
                       std::vector<double> rates);

  const std::string& dialect_id() const { return dialect_id_; }
  std::span<const double> rates() const { return rates_; }
  const FeatureUniverse& universe() const { return *universe_; }
  std::shared_ptr<const FeatureUniverse> universe_ptr() const { return universe_; }
  const std::vector<std::string>& feature_ids() const { return universe_->ids(); }
  std::size_t size() const { return rates_.size(); }

  /// Rate of a feature, or 0 when the feature is not part of the universe.
  double rate_of(std::string_view feature_id) const;

  /// Same dialect, new rates (used when building synthetic or perturbed vectors).
  DialectFeatureVector with_rates(std::string dialect_id, std::vector<double> rates) const;

  bool comparable_with(const DialectFeatureVector& other) const;

 private:
  std::string dialect_id_;
  std::shared_ptr<const FeatureUniverse> universe_;
  std::vector<double> rates_;
};

using FeatureTable = std::map<std::string, DialectFeatureVector>;

/// Reads the tab-separated feature-vector format:
///
///   #features=<F>
///   <dialect_id>\t<feature_id>\t<A|B|C|D|X|?|decimal rate>
///
/// Every dialect must list exactly the same F features. Feature order is the
/// order of first appearance in the file.
FeatureTable load_feature_vectors(const std::filesystem::path& path);
FeatureTable parse_feature_vectors(std::string_view text);

void save_feature_vectors(const std::filesystem::path& path, const FeatureTable& table);

/// Number of features with a nonzero rate; optionally restricted to a subset of ids.
std::size_t count_attested(const DialectFeatureVector& v,
                           const std::unordered_set<std::string>* restrict_to = nullptr);

/// Raw L1 distance sum_i |a_i - b_i|.
double manhattan_distance(const DialectFeatureVector& a, const DialectFeatureVector& b);

/// L1 distance divided by the feature count.
double normalized_manhattan_distance(const DialectFeatureVector& a, const DialectFeatureVector& b);

/// A non-empty group of source dialects sharing one feature universe.
class SourceSet {
 public:
  explicit SourceSet(std::vector<DialectFeatureVector> members);

  const std::vector<DialectFeatureVector>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool contains(std::string_view dialect_id) const;
  std::vector<std::string> ids() const;

 private:
  std::vector<DialectFeatureVector> members_;
};

/// Mean over sources of the normalized L1 distance to the target.
double mean_normalized_distance(const SourceSet& sources, const DialectFeatureVector& target);

/// 1 - || [sum_s d_s - d_t]_- ||_1 / ||d_t||_1, where [.]_- keeps negative parts.
double coverage(const SourceSet& sources, const DialectFeatureVector& target);

struct RankedSourceSet {
  std::vector<std::string> dialect_ids;  // sorted
  double l1 = 0.0;                       // mean normalized distance
  double coverage = 0.0;
  std::size_t pareto_rank = 0;           // 0 = non-dominated frontier
};

/// Enumerates every k-subset of the candidates and scores it. Results are
/// ordered by Pareto layer (minimise l1, maximise coverage), then l1
/// ascending, coverage descending, then dialect ids lexicographically.
std::vector<RankedSourceSet> select_sources(std::span<const DialectFeatureVector> candidates,
                                            const DialectFeatureVector& target, std::size_t k);

/// True when a is at least as good as b on both metrics and better on one.
bool dominates(const RankedSourceSet& a, const RankedSourceSet& b);

}  // namespace hyperlora::typology
