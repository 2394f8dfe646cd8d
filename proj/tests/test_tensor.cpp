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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fairtc/error.hpp"
#include "fairtc/tensor.hpp"
#include "support.hpp"

namespace fairtc {
namespace {

SparseTensor parse(const std::string& text,
                   std::optional<std::vector<std::size_t>> dims = {}) {
  std::istringstream in(text);
  return parse_tensor(in, dims);
}

std::multiset<std::pair<std::vector<Index>, double>> entry_set(const SparseTensor& t) {
  std::multiset<std::pair<std::vector<Index>, double>> s;
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    auto idx = t.index(e);
    s.insert({{idx.begin(), idx.end()}, t.value(e)});
  }
  return s;
}

TEST(LoadTensor, InfersDimsFromMaxCoordinate) {
  const auto t = parse("0 0 0 1.5\n1 2 0 2.0");
  EXPECT_EQ(t.order(), 3u);
  EXPECT_EQ(t.dims(), (std::vector<std::size_t>{2, 3, 1}));
  EXPECT_EQ(t.nnz(), 2u);
  EXPECT_EQ(t.value(1), 2.0);
}

TEST(LoadTensor, MalformedLineReportsLineNumber) {
  try {
    parse("0 0 x 1.0");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
  try {
    parse("# header\n0 0 0 1\n0 1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadTensor, DuplicateIndexRejected) {
  EXPECT_THROW(parse("0 0 0 1.0\n0 0 0 2.0"), DuplicateEntryError);
}

TEST(LoadTensor, ExplicitDimsBoundCoordinates) {
  EXPECT_THROW(parse("0 3 0 1.0", std::vector<std::size_t>{2, 3, 1}), BoundsError);
  const auto t = parse("0 0 0 1.0", std::vector<std::size_t>{4, 5, 6});
  EXPECT_EQ(t.dims(), (std::vector<std::size_t>{4, 5, 6}));
}

TEST(LoadTensor, CommentsAndBlankLinesIgnored) {
  const auto t = parse("# comment\n\n0 1 2.5  # trailing\n");
  EXPECT_EQ(t.nnz(), 1u);
  EXPECT_EQ(t.value(0), 2.5);
}

TEST(LoadTensor, SaveLoadRoundTripIsExact) {
  std::mt19937_64 rng(11);
  const auto dir = std::filesystem::temp_directory_path() / "fairtc_tensor_rt";
  std::filesystem::create_directories(dir);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = testing::random_tensor({5, 7, 3}, 40, rng);
    std::vector<double> vals = t.values();
    for (double& v : vals) v = std::ldexp(v, static_cast<int>(rng() % 40) - 20) / 3.0;
    t = SparseTensor(t.dims(), t.coords(), vals);
    const auto path = dir / "t.tsv";
    save_tensor(t, path);
    const auto back = load_tensor(path);
    EXPECT_EQ(back.dims(), t.dims());
    EXPECT_EQ(entry_set(back), entry_set(t));
  }
  std::filesystem::remove_all(dir);
}

TEST(LoadTensor, SurvivesTrailingEmptySlices) {
  SparseTensor t({4, 4}, {0, 0, 1, 1}, {1.0, 2.0});
  std::stringstream buf;
  write_tensor(t, buf);
  EXPECT_EQ(parse_tensor(buf).dims(), t.dims());
}

TEST(LoadSensitive, GroupsInFirstAppearanceOrder) {
  std::istringstream in("0 male\n1 female\n2 male");
  const auto ctx = parse_sensitive(in, 3);
  EXPECT_EQ(ctx.num_groups(), 2);
  EXPECT_EQ(ctx.groups(), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(ctx.one_hot(0), (std::vector<double>{1, 0}));
  EXPECT_EQ(ctx.one_hot(1), (std::vector<double>{0, 1}));
  EXPECT_EQ(ctx.one_hot(2), (std::vector<double>{1, 0}));
}

TEST(LoadSensitive, MissingEntityNamed) {
  std::istringstream in("0 male\n1 female");
  try {
    parse_sensitive(in, 3);
    FAIL() << "expected MissingLabelError";
  } catch (const MissingLabelError& e) {
    EXPECT_EQ(e.entity(), 2u);
  }
}

TEST(LoadSensitive, EntityOutOfRange) {
  std::istringstream in("0 a\n1 b\n5 a");
  EXPECT_THROW(parse_sensitive(in, 2), BoundsError);
}

TEST(LoadSensitive, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "fairtc_sensitive.tsv";
  SensitiveContext ctx(0, {1, 0, 2, 1}, {"x", "y", "z"});
  save_sensitive(ctx, path);
  const auto back = load_sensitive(path, 4);
  // Ids are renumbered by first appearance, so compare through the names.
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.group_names()[back.group_of(i)], ctx.group_names()[ctx.group_of(i)]);
  }
  std::filesystem::remove(path);
}

TEST(SensitiveContext, RequiresTwoGroups) {
  EXPECT_THROW(SensitiveContext(0, {0, 0}, {"only"}), ArgumentError);
}

TEST(Split, TenEntriesGiveEightOneOne) {
  std::mt19937_64 rng(1);
  const auto t = testing::random_tensor({5, 5}, 10, rng);
  const auto s = split(t, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.train.nnz(), 8u);
  EXPECT_EQ(s.validation.nnz(), 1u);
  EXPECT_EQ(s.test.nnz(), 1u);
  const auto again = split(t, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(again.train.coords(), s.train.coords());
  EXPECT_EQ(again.validation.coords(), s.validation.coords());
  EXPECT_EQ(again.test.values(), s.test.values());
}

TEST(Split, FloorRuleOnLargeTensor) {
  // 143107 entries: floor(114485.6) train, floor(14310.7) validation, rest test.
  std::vector<Index> coords(143107);
  std::vector<double> values(143107, 1.0);
  for (std::size_t e = 0; e < coords.size(); ++e) coords[e] = static_cast<Index>(e);
  const SparseTensor t({143107}, coords, values);
  const auto s = split(t, {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(s.train.nnz(), 114485u);
  EXPECT_EQ(s.validation.nnz(), 14310u);
  EXPECT_EQ(s.test.nnz(), 14312u);
  EXPECT_EQ(s.train.nnz() + s.validation.nnz() + s.test.nnz(), t.nnz());
}

TEST(Split, RatiosMustSumToOne) {
  std::mt19937_64 rng(2);
  const auto t = testing::random_tensor({4, 4}, 8, rng);
  EXPECT_THROW(split(t, {0.8, 0.1, 0.2}, 0), ArgumentError);
  EXPECT_THROW(split(t, {0.7, 0.1, 0.1}, 0), ArgumentError);
}

TEST(Split, PartitionsAreDisjointAndExhaustive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t nnz = 1 + rng() % 60;
    const auto t = testing::random_tensor({6, 5, 4}, nnz, rng);
    const double a = 0.5 + 0.4 * std::uniform_real_distribution<double>()(rng);
    const double b = (1.0 - a) / 2.0;
    const auto s = split(t, {a, b, 1.0 - a - b}, rng());
    std::multiset<std::pair<std::vector<Index>, double>> merged;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      EXPECT_EQ(part->dims(), t.dims());
      const auto es = entry_set(*part);
      merged.insert(es.begin(), es.end());
    }
    ASSERT_EQ(merged, entry_set(t)) << "trial " << trial;
    EXPECT_EQ(s.train.nnz(), static_cast<std::size_t>(std::floor(a * nnz)));
  }
}

SparseTensor grouped_tensor(std::size_t majority_entries, std::size_t minority_entries) {
  // Mode 0 has entities 0 (majority) and 1 (minority).
  std::vector<Index> coords;
  std::vector<double> values;
  for (std::size_t k = 0; k < majority_entries; ++k) {
    coords.insert(coords.end(), {0, static_cast<Index>(k)});
    values.push_back(static_cast<double>(k));
  }
  for (std::size_t k = 0; k < minority_entries; ++k) {
    coords.insert(coords.end(), {1, static_cast<Index>(k)});
    values.push_back(-static_cast<double>(k));
  }
  return SparseTensor({2, std::max(majority_entries, minority_entries)}, coords, values);
}

TEST(Downsample, KeepsCeilingOfMinority) {
  const auto t = grouped_tensor(300, 200);
  const SensitiveContext ctx(0, {0, 1}, {"maj", "min"});
  EXPECT_EQ(minority_group(t, ctx), 1);
  const auto d = downsample_minority(t, ctx, 0.05, 9);
  const auto counts = [&](const SparseTensor& x) {
    std::size_t maj = 0, mnr = 0;
    for (std::size_t e = 0; e < x.nnz(); ++e) (x.coord(e, 0) == 0 ? maj : mnr)++;
    return std::pair{maj, mnr};
  };
  EXPECT_EQ(counts(d), (std::pair<std::size_t, std::size_t>{300, 10}));
  EXPECT_EQ(entry_set(downsample_minority(t, ctx, 1.0, 9)), entry_set(t));
}

TEST(Downsample, InvalidKeepRate) {
  const auto t = grouped_tensor(3, 2);
  const SensitiveContext ctx(0, {0, 1}, {"maj", "min"});
  EXPECT_THROW(downsample_minority(t, ctx, 0.0, 1), ArgumentError);
  EXPECT_THROW(downsample_minority(t, ctx, 1.5, 1), ArgumentError);
}

TEST(Downsample, NeverTouchesMajorityProperty) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t maj = 1 + rng() % 50, mnr = 1 + rng() % 50;
    const auto t = grouped_tensor(std::max(maj, mnr), std::min(maj, mnr));
    const SensitiveContext ctx(0, {0, 1}, {"maj", "min"});
    const int minority = minority_group(t, ctx);
    const double rate = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const auto d = downsample_minority(t, ctx, rate, rng());
    std::size_t kept_min = 0;
    std::multiset<std::pair<std::vector<Index>, double>> kept_major;
    for (std::size_t e = 0; e < d.nnz(); ++e) {
      if (ctx.group_of_entry(d, e) == minority) {
        ++kept_min;
      } else {
        auto idx = d.index(e);
        kept_major.insert({{idx.begin(), idx.end()}, d.value(e)});
      }
    }
    std::multiset<std::pair<std::vector<Index>, double>> orig_major;
    std::size_t orig_min = 0;
    for (std::size_t e = 0; e < t.nnz(); ++e) {
      if (ctx.group_of_entry(t, e) == minority) {
        ++orig_min;
      } else {
        auto idx = t.index(e);
        orig_major.insert({{idx.begin(), idx.end()}, t.value(e)});
      }
    }
    EXPECT_EQ(kept_major, orig_major);
    // ceil with a guard against products like 0.07 * 100 = 7.000000000000001.
    const double want = rate * static_cast<double>(orig_min);
    const auto expected = static_cast<std::size_t>(std::ceil(want - 1e-9 * std::max(1.0, want)));
    EXPECT_EQ(kept_min, expected);
  }
}

TEST(Tensor, EntriesBySliceCoversEveryEntry) {
  std::mt19937_64 rng(4);
  const auto t = testing::random_tensor({4, 6, 3}, 30, rng);
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const auto slices = entries_by_slice(t, mode);
    ASSERT_EQ(slices.size(), t.dim(mode));
    std::size_t total = 0;
    for (std::size_t i = 0; i < slices.size(); ++i) {
      for (std::size_t e : slices[i]) EXPECT_EQ(t.coord(e, mode), i);
      total += slices[i].size();
    }
    EXPECT_EQ(total, t.nnz());
  }
}

}  // namespace
}  // namespace fairtc
