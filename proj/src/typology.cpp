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

#include "hyperlora/typology.hpp"

#include "hyperlora/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hyperlora::typology {

double rate_from_attestation(Attestation code) {
  switch (code) {
    case Attestation::Obligatory:
      return 1.0;
    case Attestation::NeitherPervasiveNorRare:
      return 0.6;
    case Attestation::Rare:
      return 0.3;
    case Attestation::AbsentOrUnknown:
      return 0.0;
  }
  return 0.0;
}

std::optional<Attestation> parse_attestation(std::string_view letter) {
  if (letter == "A") return Attestation::Obligatory;
  if (letter == "B") return Attestation::NeitherPervasiveNorRare;
  if (letter == "C") return Attestation::Rare;
  if (letter == "D" || letter == "X" || letter == "?") return Attestation::AbsentOrUnknown;
  return std::nullopt;
}

FeatureUniverse::FeatureUniverse(std::vector<std::string> ids) : ids_(std::move(ids)) {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw SchemaError("duplicate feature id '" + ids_[i] + "'");
    }
  }
}

std::optional<std::size_t> FeatureUniverse::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

DialectFeatureVector::DialectFeatureVector(std::string dialect_id,
                                           std::shared_ptr<const FeatureUniverse> universe,
                                           std::vector<double> rates)
    : dialect_id_(std::move(dialect_id)), universe_(std::move(universe)), rates_(std::move(rates)) {
  if (!universe_) throw SchemaError("feature vector needs a feature universe");
  if (rates_.size() != universe_->size()) {
    throw SchemaError("dialect '" + dialect_id_ + "' has " + std::to_string(rates_.size()) +
                      " rates for " + std::to_string(universe_->size()) + " features");
  }
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    if (!(rates_[i] >= 0.0 && rates_[i] <= 1.0)) {
      throw ValidationError("dialect '" + dialect_id_ + "' feature '" + universe_->ids()[i] +
                            "' rate outside [0,1]");
    }
  }
}

double DialectFeatureVector::rate_of(std::string_view feature_id) const {
  auto idx = universe_->index_of(feature_id);
  return idx ? rates_[*idx] : 0.0;
}

DialectFeatureVector DialectFeatureVector::with_rates(std::string dialect_id,
                                                      std::vector<double> rates) const {
  return DialectFeatureVector(std::move(dialect_id), universe_, std::move(rates));
}

bool DialectFeatureVector::comparable_with(const DialectFeatureVector& other) const {
  return universe_ == other.universe_ || *universe_ == *other.universe_;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

void require_comparable(const DialectFeatureVector& a, const DialectFeatureVector& b) {
  if (!a.comparable_with(b)) {
    throw SchemaError("dialects '" + a.dialect_id() + "' and '" + b.dialect_id() +
                      "' use different feature sets");
  }
}

}  // namespace

FeatureTable parse_feature_vectors(std::string_view text) {
  std::optional<std::size_t> declared;
  std::vector<std::string> feature_order;
  std::unordered_map<std::string, std::size_t> feature_index;
  // dialect -> (feature -> rate), kept in first-seen dialect order
  std::vector<std::string> dialect_order;
  std::unordered_map<std::string, std::unordered_map<std::string, double>> values;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kHeader = "#features=";
      if (line.starts_with(kHeader)) {
        std::size_t f = 0;
        auto digits = line.substr(kHeader.size());
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), f);
        if (ec != std::errc() || ptr != digits.data() + digits.size()) {
          throw ParseError("malformed #features header", line_no);
        }
        declared = f;
      }
      continue;
    }
    if (!declared) throw ParseError("record before #features=<F> header", line_no);
    auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError("expected dialect_id<TAB>feature_id<TAB>value", line_no);
    }
    double rate = 0.0;
    if (auto code = parse_attestation(fields[2])) {
      rate = rate_from_attestation(*code);
    } else {
      auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), rate);
      if (ec != std::errc() || ptr != fields[2].data() + fields[2].size()) {
        throw ParseError("value '" + std::string(fields[2]) + "' is neither a letter nor a rate",
                         line_no);
      }
      if (!(rate >= 0.0 && rate <= 1.0)) {
        throw ValidationError("line " + std::to_string(line_no) + ": rate " +
                              std::string(fields[2]) + " outside [0,1]");
      }
    }
    std::string dialect(fields[0]);
    std::string feature(fields[1]);
    if (!feature_index.contains(feature)) {
      feature_index.emplace(feature, feature_order.size());
      feature_order.push_back(feature);
    }
    auto [it, inserted] = values.try_emplace(dialect);
    if (inserted) dialect_order.push_back(dialect);
    if (!it->second.emplace(feature, rate).second) {
      throw SchemaError("line " + std::to_string(line_no) + ": duplicate feature '" + feature +
                        "' for dialect '" + dialect + "'");
    }
  }
  if (!declared) throw ParseError("missing #features=<F> header", line_no);
  if (feature_order.size() != *declared) {
    throw SchemaError("header declares " + std::to_string(*declared) + " features, file has " +
                      std::to_string(feature_order.size()));
  }
  auto universe = std::make_shared<const FeatureUniverse>(feature_order);
  FeatureTable table;
  for (const auto& dialect : dialect_order) {
    const auto& m = values.at(dialect);
    if (m.size() != feature_order.size()) {
      throw SchemaError("dialect '" + dialect + "' lists " + std::to_string(m.size()) +
                        " of " + std::to_string(feature_order.size()) + " features");
    }
    std::vector<double> rates(feature_order.size());
    for (std::size_t i = 0; i < feature_order.size(); ++i) rates[i] = m.at(feature_order[i]);
    table.emplace(dialect, DialectFeatureVector(dialect, universe, std::move(rates)));
  }
  return table;
}

FeatureTable load_feature_vectors(const std::filesystem::path& path) {
  auto in = io::open_read(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_feature_vectors(buf.str());
}

void save_feature_vectors(const std::filesystem::path& path, const FeatureTable& table) {
  auto out = io::open_write(path);
  if (table.empty()) {
    out << "#features=0\n";
    return;
  }
  const auto& ids = table.begin()->second.feature_ids();
  out << "#features=" << ids.size() << '\n';
  out.precision(17);
  for (const auto& [dialect, v] : table) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << dialect << '\t' << ids[i] << '\t' << v.rates()[i] << '\n';
    }
  }
}

std::size_t count_attested(const DialectFeatureVector& v,
                           const std::unordered_set<std::string>* restrict_to) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.rates()[i] <= 0.0) continue;
    if (restrict_to && !restrict_to->contains(v.feature_ids()[i])) continue;
    ++n;
  }
  return n;
}

double manhattan_distance(const DialectFeatureVector& a, const DialectFeatureVector& b) {
  require_comparable(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.rates()[i] - b.rates()[i]);
  return sum;
}

double normalized_manhattan_distance(const DialectFeatureVector& a,
                                     const DialectFeatureVector& b) {
  if (a.size() == 0) throw SchemaError("empty feature universe");
  return manhattan_distance(a, b) / static_cast<double>(a.size());
}

SourceSet::SourceSet(std::vector<DialectFeatureVector> members) : members_(std::move(members)) {
  if (members_.empty()) throw ArgumentError("source set must contain at least one dialect");
  for (const auto& m : members_) require_comparable(members_.front(), m);
}

bool SourceSet::contains(std::string_view dialect_id) const {
  return std::any_of(members_.begin(), members_.end(),
                     [&](const auto& m) { return m.dialect_id() == dialect_id; });
}

std::vector<std::string> SourceSet::ids() const {
  std::vector<std::string> out;
  for (const auto& m : members_) out.push_back(m.dialect_id());
  return out;
}

double mean_normalized_distance(const SourceSet& sources, const DialectFeatureVector& target) {
  double sum = 0.0;
  for (const auto& s : sources.members()) sum += normalized_manhattan_distance(s, target);
  return sum / static_cast<double>(sources.size());
}

namespace {

double coverage_from_sum(std::span<const double> source_sum, std::span<const double> target,
                         double target_mass) {
  double missing = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double diff = source_sum[i] - target[i];
    if (diff < 0.0) missing -= diff;
  }
  return 1.0 - missing / target_mass;
}

double l1_mass(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0, [](double acc, double x) {
    return acc + std::abs(x);
  });
}

}  // namespace

double coverage(const SourceSet& sources, const DialectFeatureVector& target) {
  for (const auto& s : sources.members()) require_comparable(s, target);
  const double mass = l1_mass(target.rates());
  if (mass <= 0.0) {
    throw DegenerateTargetError("target '" + target.dialect_id() + "' has no attested features");
  }
  std::vector<double> sum(target.size(), 0.0);
  for (const auto& s : sources.members()) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += s.rates()[i];
  }
  return coverage_from_sum(sum, target.rates(), mass);
}

bool dominates(const RankedSourceSet& a, const RankedSourceSet& b) {
  return a.l1 <= b.l1 && a.coverage >= b.coverage && (a.l1 < b.l1 || a.coverage > b.coverage);
}

std::vector<RankedSourceSet> select_sources(std::span<const DialectFeatureVector> candidates,
                                            const DialectFeatureVector& target, std::size_t k) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (k > candidates.size()) {
    throw ArgumentError("k=" + std::to_string(k) + " exceeds " +
                        std::to_string(candidates.size()) + " candidates");
  }
  // Canonical candidate order makes the result independent of input order,
  // including floating-point summation order.
  std::vector<const DialectFeatureVector*> pool;
  for (const auto& c : candidates) {
    if (c.dialect_id() == target.dialect_id()) {
      throw ArgumentError("candidates must not contain the target '" + target.dialect_id() + "'");
    }
    require_comparable(c, target);
    pool.push_back(&c);
  }
  std::sort(pool.begin(), pool.end(),
            [](auto* a, auto* b) { return a->dialect_id() < b->dialect_id(); });

  const double mass = l1_mass(target.rates());
  if (mass <= 0.0) {
    throw DegenerateTargetError("target '" + target.dialect_id() + "' has no attested features");
  }
  std::vector<double> dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    dist[i] = normalized_manhattan_distance(*pool[i], target);
  }

  std::vector<RankedSourceSet> out;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> sum(target.size());
  const std::size_t n = pool.size();
  while (true) {
    RankedSourceSet r;
    double l1 = 0.0;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (auto i : idx) {
      r.dialect_ids.push_back(pool[i]->dialect_id());
      l1 += dist[i];
      auto rates = pool[i]->rates();
      for (std::size_t f = 0; f < sum.size(); ++f) sum[f] += rates[f];
    }
    r.l1 = l1 / static_cast<double>(k);
    r.coverage = coverage_from_sum(sum, target.rates(), mass);
    out.push_back(std::move(r));

    // next combination in lexicographic order
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }

  auto by_metrics = [](const RankedSourceSet& a, const RankedSourceSet& b) {
    if (a.l1 != b.l1) return a.l1 < b.l1;
    if (a.coverage != b.coverage) return a.coverage > b.coverage;
    return a.dialect_ids < b.dialect_ids;
  };
  std::sort(out.begin(), out.end(), by_metrics);

  // Layered non-dominated sort in 2-D. Points arrive with non-decreasing l1,
  // so a layer dominates a new point iff its best coverage is higher, or equal
  // and reached at a strictly smaller l1.
  struct Layer {
    double best_coverage;
    double l1_at_best;
  };
  std::vector<Layer> layers;
  for (auto& r : out) {
    auto dominated_by = [&](const Layer& layer) {
      return layer.best_coverage > r.coverage ||
             (layer.best_coverage == r.coverage && layer.l1_at_best < r.l1);
    };
    auto it = std::partition_point(layers.begin(), layers.end(), dominated_by);
    r.pareto_rank = static_cast<std::size_t>(it - layers.begin());
    if (it == layers.end()) {
      layers.push_back({r.coverage, r.l1});
    } else if (r.coverage > it->best_coverage) {
      *it = {r.coverage, r.l1};
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.pareto_rank < b.pareto_rank;
  });
  return out;
}

}  // namespace hyperlora::typology
