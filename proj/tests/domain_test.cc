// Copyright 2026 The pmwcache Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pmwcache/domain.h"

#include <cmath>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "pmwcache/dataset_csv.h"

namespace pmwcache {
namespace {

DomainPtr Covid() {
  return *DataDomain::Create(
      {{"sex", 2}, {"age", 4}, {"positive", 2}, {"symptoms", 8}});
}

TEST(DataDomainTest, SizeAndRowMajorBins) {
  DomainPtr d = Covid();
  EXPECT_EQ(d->size(), 128u);
  EXPECT_EQ(*d->BinIndex({0, 0, 0, 0}), 0u);
  EXPECT_EQ(*d->BinIndex({0, 0, 0, 1}), 1u);
  EXPECT_EQ(*d->BinIndex({1, 3, 1, 7}), 127u);
  for (uint64_t bin = 0; bin < d->size(); ++bin) {
    EXPECT_EQ(*d->BinIndex(d->PointAt(bin)), bin);
  }
  EXPECT_EQ(d->AttributeIndex("positive"), 2);
  EXPECT_EQ(d->AttributeIndex("missing"), -1);
}

TEST(DataDomainTest, RejectsBadAttributes) {
  EXPECT_FALSE(DataDomain::Create({}).ok());
  EXPECT_FALSE(DataDomain::Create({{"a", 0}}).ok());
  EXPECT_FALSE(DataDomain::Create({{"a", 2}, {"a", 3}}).ok());
  EXPECT_FALSE(Covid()->BinIndex({0, 4, 0, 0}).ok());
  EXPECT_FALSE(Covid()->BinIndex({0, 0}).ok());
}

TEST(HistogramTest, UniformAndNormalization) {
  DomainPtr d = Covid();
  Histogram u = Histogram::Uniform(d);
  for (size_t v = 0; v < u.size(); ++v) EXPECT_DOUBLE_EQ(u[v], 1.0 / 128);

  std::vector<double> w(128, 2.0);
  w[5] = 6.0;
  Histogram h = *Histogram::FromWeights(d, w);
  double sum = 0.0;
  for (double x : h.weights()) sum += x;
  EXPECT_NEAR(sum, 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(h[5], 3.0 * h[0]);

  w[0] = -1.0;
  EXPECT_FALSE(Histogram::FromWeights(d, w).ok());
  EXPECT_FALSE(Histogram::FromWeights(d, std::vector<double>(128, 0.0)).ok());
  EXPECT_FALSE(Histogram::FromWeights(d, std::vector<double>(3, 1.0)).ok());
}

TEST(HistogramTest, RestoreKeepsWeightsVerbatim) {
  DomainPtr d = Covid();
  Histogram h = Histogram::Uniform(d);
  h.ApplyMultiplicativeUpdate(*LinearQuery::Predicate(d, {{0}, {1, 2}, {0, 1}, {3}}),
                              0.3);
  std::vector<double> weights(h.weights().begin(), h.weights().end());
  Histogram r = *Histogram::Restore(d, weights);
  for (size_t v = 0; v < h.size(); ++v) EXPECT_EQ(r[v], h[v]);
  weights[0] += 0.01;
  EXPECT_FALSE(Histogram::Restore(d, weights).ok());
}

TEST(LinearQueryTest, PredicateSupportAndKey) {
  DomainPtr d = Covid();
  LinearQuery q = *LinearQuery::Predicate(d, {{1}, {2, 0}, {0, 1}, {7}});
  EXPECT_EQ(q.key(), "1;0,2;0,1;7");
  ASSERT_EQ(q.support().size(), 4u);
  for (uint32_t bin : q.support()) {
    std::vector<int64_t> p = d->PointAt(bin);
    EXPECT_EQ(p[0], 1);
    EXPECT_TRUE(p[1] == 0 || p[1] == 2);
    EXPECT_EQ(p[3], 7);
  }
  LinearQuery back = *LinearQuery::FromKey(d, q.key());
  EXPECT_EQ(back.DenseWeights(), q.DenseWeights());

  EXPECT_FALSE(LinearQuery::Predicate(d, {{1}, {}, {0}, {0}}).ok());
  EXPECT_FALSE(LinearQuery::Predicate(d, {{2}, {0}, {0}, {0}}).ok());
  EXPECT_FALSE(LinearQuery::FromKey(d, "1;x;0;0").ok());
}

TEST(LinearQueryTest, DenseWeights) {
  DomainPtr d = Covid();
  std::vector<double> w(128, 0.0);
  w[3] = 0.5;
  w[100] = 1.0;
  LinearQuery q = *LinearQuery::Dense(d, w);
  EXPECT_FALSE(q.is_predicate());
  EXPECT_EQ(q.support().size(), 2u);
  EXPECT_DOUBLE_EQ(q.Weight(3), 0.5);
  EXPECT_DOUBLE_EQ(q.Weight(4), 0.0);
  w[0] = 1.5;
  EXPECT_FALSE(LinearQuery::Dense(d, w).ok());
}

TEST(EvaluationTest, HistogramAndPartitionsAgreeWithBruteForce) {
  DomainPtr d = Covid();
  std::mt19937_64 rng(7);
  std::vector<Partition> parts;
  for (int t = 0; t < 3; ++t) {
    std::vector<uint64_t> counts(128);
    for (auto& c : counts) c = rng() % 50;
    parts.push_back(*Partition::Create(t, counts));
  }
  LinearQuery q = *LinearQuery::Predicate(d, {{0, 1}, {1}, {1}, {0, 2, 4}});
  const std::vector<double> dense = q.DenseWeights();
  double num = 0.0;
  double den = 0.0;
  for (const Partition& p : parts) {
    for (size_t v = 0; v < 128; ++v) {
      num += dense[v] * static_cast<double>(p.counts[v]);
      den += static_cast<double>(p.counts[v]);
    }
  }
  EXPECT_NEAR(*EvalOnPartitions(q, parts), num / den, 1e-15);

  std::vector<uint64_t> pooled = PooledCounts(parts, 128);
  Histogram h = *Histogram::FromWeights(
      d, std::vector<double>(pooled.begin(), pooled.end()));
  EXPECT_NEAR(*EvalOnHistogram(q, h), num / den, 1e-15);
  EXPECT_DOUBLE_EQ(WeightedCount(q, pooled), num);
}

TEST(EvaluationTest, RejectsMismatchedDomains) {
  DomainPtr a = Covid();
  DomainPtr b = *DataDomain::Create({{"x", 3}});
  LinearQuery q = *LinearQuery::Predicate(b, {{0}});
  EXPECT_FALSE(EvalOnHistogram(q, Histogram::Uniform(a)).ok());
}

TEST(DatasetCsvTest, RoundTrip) {
  DomainPtr d = *DataDomain::Create({{"a", 2}, {"b", 3}});
  std::vector<Partition> parts = {
      *Partition::Create(0, {1, 0, 2, 0, 0, 1}),
      *Partition::Create(1, {0, 3, 0, 0, 1, 0}),
  };
  std::stringstream csv;
  ASSERT_TRUE(WriteDatasetCsv(csv, *d, parts).ok());
  std::stringstream copy(csv.str());
  std::vector<Partition> back = *ReadDatasetCsv(copy, *d);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].counts, parts[0].counts);
  EXPECT_EQ(back[1].counts, parts[1].counts);
  EXPECT_EQ(back[1].rows, 4u);

  std::stringstream infer(csv.str());
  DomainPtr inferred = *InferDomainFromCsv(infer);
  EXPECT_EQ(inferred->size(), 6u);
}

TEST(DatasetCsvTest, ReportsBadRows) {
  DomainPtr d = *DataDomain::Create({{"a", 2}, {"b", 3}});
  std::stringstream bad("t,a,b\n0,1,5\n");
  EXPECT_FALSE(ReadDatasetCsv(bad, *d).ok());
  std::stringstream ragged("t,a,b\n0,1\n");
  EXPECT_FALSE(ReadDatasetCsv(ragged, *d).ok());
}

}  // namespace
}  // namespace pmwcache
