// Copyright 2026 The fairtc Authors
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
#include "fairtc/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "fairtc/error.hpp"

namespace fairtc {
namespace {

std::string format_index(std::span<const Index> idx) {
  std::ostringstream os;
  os << '(';
  for (std::size_t n = 0; n < idx.size(); ++n) {
    if (n) os << ',';
    os << idx[n];
  }
  os << ')';
  return os.str();
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

// Drops a trailing '#' comment; true if nothing is left.
bool is_blank_or_comment(std::vector<std::string_view>& tokens) {
  auto hash = std::find_if(tokens.begin(), tokens.end(),
                           [](std::string_view t) { return t.front() == '#'; });
  tokens.erase(hash, tokens.end());
  return tokens.empty();
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::string line_error(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

}  // namespace

SparseTensor::SparseTensor(std::vector<std::size_t> dims,
                           std::vector<Index> coords,
                           std::vector<double> values)
    : dims_(std::move(dims)), coords_(std::move(coords)), values_(std::move(values)) {
  if (dims_.empty()) throw ArgumentError("tensor order must be positive");
  for (std::size_t d : dims_) {
    if (d == 0) throw ArgumentError("tensor mode sizes must be positive");
  }
  const std::size_t n = order();
  if (coords_.size() != values_.size() * n) {
    throw ArgumentError("coordinate array does not match entry count");
  }
  for (std::size_t e = 0; e < values_.size(); ++e) {
    for (std::size_t m = 0; m < n; ++m) {
      if (coords_[e * n + m] >= dims_[m]) {
        throw BoundsError("entry " + format_index(index(e)) +
                          " out of bounds in mode " + std::to_string(m) +
                          " (size " + std::to_string(dims_[m]) + ")");
      }
    }
  }
  std::vector<std::size_t> perm(values_.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(coords_.begin() + a * n, coords_.begin() + (a + 1) * n,
                                        coords_.begin() + b * n, coords_.begin() + (b + 1) * n);
  };
  std::sort(perm.begin(), perm.end(), less);
  for (std::size_t k = 1; k < perm.size(); ++k) {
    if (!less(perm[k - 1], perm[k])) {
      throw DuplicateEntryError("duplicate entry at index " + format_index(index(perm[k])));
    }
  }
}

SparseTensor SparseTensor::subset(std::span<const std::size_t> entries) const {
  std::vector<Index> coords;
  std::vector<double> values;
  coords.reserve(entries.size() * order());
  values.reserve(entries.size());
  for (std::size_t e : entries) {
    auto idx = index(e);
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(values_[e]);
  }
  return SparseTensor(dims_, std::move(coords), std::move(values));
}

SparseTensor SparseTensor::with_dims(std::vector<std::size_t> dims) const {
  if (dims.size() != order()) throw ArgumentError("with_dims: order mismatch");
  return SparseTensor(std::move(dims), coords_, values_);
}

SensitiveContext::SensitiveContext(std::size_t sensitive_mode,
                                   std::vector<int> group_of,
                                   std::vector<std::string> group_names)
    : sensitive_mode_(sensitive_mode),
      group_of_(std::move(group_of)),
      group_names_(std::move(group_names)) {
  if (group_names_.size() < 2) {
    throw ArgumentError("a sensitive attribute needs at least two groups");
  }
  for (int g : group_of_) {
    if (g < 0 || g >= num_groups()) throw ArgumentError("group id out of range");
  }
}

std::vector<double> SensitiveContext::one_hot(std::size_t entity) const {
  std::vector<double> row(group_names_.size(), 0.0);
  row[group_of(entity)] = 1.0;
  return row;
}

SensitiveContext SensitiveContext::extended(
    std::span<const std::size_t> extra_originals) const {
  std::vector<int> groups = group_of_;
  groups.reserve(groups.size() + extra_originals.size());
  for (std::size_t orig : extra_originals) groups.push_back(group_of(orig));
  return SensitiveContext(sensitive_mode_, std::move(groups), group_names_);
}

SparseTensor parse_tensor(std::istream& in,
                          std::optional<std::vector<std::size_t>> dims) {
  std::vector<Index> coords;
  std::vector<double> values;
  std::size_t order = dims ? dims->size() : 0;
  std::vector<std::size_t> max_coord;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = tokenize(line);
    // "# dims I_1 ... I_N" declares mode sizes when the caller gave none.
    if (!dims && values.empty() && tokens.size() >= 3 && tokens[0] == "#" &&
        tokens[1] == "dims") {
      std::vector<std::size_t> declared;
      for (std::size_t k = 2; k < tokens.size(); ++k) {
        std::size_t d = 0;
        if (!parse_number(tokens[k], d) || d == 0) {
          throw ParseError(line_error(lineno, "invalid dims header"), lineno);
        }
        declared.push_back(d);
      }
      dims = std::move(declared);
      order = dims->size();
      continue;
    }
    if (is_blank_or_comment(tokens)) continue;
    if (order == 0) {
      if (tokens.size() < 2) {
        throw ParseError(line_error(lineno, "expected coordinates followed by a value"), lineno);
      }
      order = tokens.size() - 1;
    }
    if (tokens.size() != order + 1) {
      throw ParseError(line_error(lineno, "expected " + std::to_string(order + 1) +
                                              " fields, found " + std::to_string(tokens.size())),
                       lineno);
    }
    max_coord.resize(order, 0);
    for (std::size_t m = 0; m < order; ++m) {
      std::uint64_t c = 0;
      if (!parse_number(tokens[m], c) || c > std::numeric_limits<Index>::max()) {
        throw ParseError(line_error(lineno, "invalid coordinate '" + std::string(tokens[m]) + "'"),
                         lineno);
      }
      if (dims && c >= (*dims)[m]) {
        throw BoundsError(line_error(lineno, "coordinate " + std::to_string(c) + " in mode " +
                                                 std::to_string(m) + " exceeds size " +
                                                 std::to_string((*dims)[m])));
      }
      coords.push_back(static_cast<Index>(c));
      max_coord[m] = std::max<std::size_t>(max_coord[m], c);
    }
    double v = 0.0;
    if (!parse_number(tokens[order], v)) {
      throw ParseError(line_error(lineno, "invalid value '" + std::string(tokens[order]) + "'"),
                       lineno);
    }
    values.push_back(v);
  }
  if (order == 0) throw ParseError("no entries and no explicit dimensions", 0);

  std::vector<std::size_t> final_dims;
  if (dims) {
    final_dims = *dims;
  } else {
    for (std::size_t c : max_coord) final_dims.push_back(c + 1);
  }
  return SparseTensor(std::move(final_dims), std::move(coords), std::move(values));
}

SparseTensor load_tensor(const std::filesystem::path& path,
                         std::optional<std::vector<std::size_t>> dims) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tensor file " + path.string());
  return parse_tensor(in, std::move(dims));
}

void write_tensor(const SparseTensor& tensor, std::ostream& out) {
  out << "# dims";
  for (std::size_t d : tensor.dims()) out << ' ' << d;
  out << '\n';
  char buf[64];
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    for (Index c : tensor.index(e)) out << c << '\t';
    std::snprintf(buf, sizeof(buf), "%.17g", tensor.value(e));
    out << buf << '\n';
  }
}

void save_tensor(const SparseTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tensor file " + path.string());
  write_tensor(tensor, out);
}

SensitiveContext parse_sensitive(std::istream& in, std::size_t num_entities,
                                 std::size_t sensitive_mode) {
  std::vector<int> group_of(num_entities, -1);
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = tokenize(line);
    if (is_blank_or_comment(tokens)) continue;
    if (tokens.size() != 2) {
      throw ParseError(line_error(lineno, "expected '<entity> <group>'"), lineno);
    }
    std::uint64_t entity = 0;
    if (!parse_number(tokens[0], entity)) {
      throw ParseError(line_error(lineno, "invalid entity '" + std::string(tokens[0]) + "'"),
                       lineno);
    }
    if (entity >= num_entities) {
      throw BoundsError(line_error(lineno, "entity " + std::to_string(entity) +
                                               " out of range (" + std::to_string(num_entities) +
                                               " entities)"));
    }
    if (group_of[entity] != -1) {
      throw ParseError(line_error(lineno, "entity " + std::to_string(entity) + " labeled twice"),
                       lineno);
    }
    std::string label(tokens[1]);
    auto [it, inserted] = ids.try_emplace(label, static_cast<int>(names.size()));
    if (inserted) names.push_back(label);
    group_of[entity] = it->second;
  }
  for (std::size_t e = 0; e < num_entities; ++e) {
    if (group_of[e] == -1) {
      throw MissingLabelError("missing group label for entity " + std::to_string(e), e);
    }
  }
  return SensitiveContext(sensitive_mode, std::move(group_of), std::move(names));
}

SensitiveContext load_sensitive(const std::filesystem::path& path,
                                std::size_t num_entities,
                                std::size_t sensitive_mode) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sensitive file " + path.string());
  return parse_sensitive(in, num_entities, sensitive_mode);
}

void save_sensitive(const SensitiveContext& ctx, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sensitive file " + path.string());
  for (std::size_t e = 0; e < ctx.num_entities(); ++e) {
    out << e << '\t' << ctx.group_names()[ctx.group_of(e)] << '\n';
  }
}

DataSplit split(const SparseTensor& tensor, const SplitRatios& ratios,
                std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0) {
    throw ArgumentError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ArgumentError("split ratios must sum to 1");
  }
  if (tensor.empty()) throw ArgumentError("cannot split an empty tensor");

  const std::size_t n = tensor.nnz();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train));
  const auto n_val =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.validation));
  std::span<const std::size_t> all(perm);
  return DataSplit{tensor.subset(all.subspan(0, n_train)),
                   tensor.subset(all.subspan(n_train, n_val)),
                   tensor.subset(all.subspan(n_train + n_val))};
}

int minority_group(const SparseTensor& tensor, const SensitiveContext& ctx) {
  std::vector<std::size_t> counts(ctx.num_groups(), 0);
  for (std::size_t e = 0; e < tensor.nnz(); ++e) ++counts[ctx.group_of_entry(tensor, e)];
  return static_cast<int>(std::min_element(counts.begin(), counts.end()) - counts.begin());
}

SparseTensor downsample_minority(const SparseTensor& tensor,
                                 const SensitiveContext& ctx, double keep_rate,
                                 std::uint64_t seed) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw ArgumentError("keep_rate must lie in (0, 1]");
  }
  const int minority = minority_group(tensor, ctx);
  std::vector<std::size_t> minority_entries;
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    if (ctx.group_of_entry(tensor, e) == minority) minority_entries.push_back(e);
  }
  // Guard against 0.1 * 30 = 3.0000000000000004 rounding up to 4.
  const double target = keep_rate * static_cast<double>(minority_entries.size());
  const auto keep = std::min(minority_entries.size(),
                             static_cast<std::size_t>(std::ceil(target - 1e-9 * std::max(1.0, target))));

  std::mt19937_64 rng(seed);
  std::shuffle(minority_entries.begin(), minority_entries.end(), rng);
  std::vector<char> kept(tensor.nnz(), 1);
  for (std::size_t k = keep; k < minority_entries.size(); ++k) kept[minority_entries[k]] = 0;

  std::vector<std::size_t> selected;
  selected.reserve(tensor.nnz());
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    if (kept[e]) selected.push_back(e);
  }
  return tensor.subset(selected);
}

std::vector<std::vector<std::size_t>> entries_by_slice(const SparseTensor& tensor,
                                                       std::size_t mode) {
  std::vector<std::vector<std::size_t>> out(tensor.dim(mode));
  for (std::size_t e = 0; e < tensor.nnz(); ++e) out[tensor.coord(e, mode)].push_back(e);
  return out;
}

}  // namespace fairtc
