// Copyright 2026 The ceaeval-kit Authors
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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ceaeval/metrics.hpp"

using namespace ceaeval::metrics;

namespace {

void BM_Lcc(benchmark::State &state) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size());
    for (auto &x : a) x = u(rng);
    for (auto &x : b) x = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(lcc(a, b));
}
BENCHMARK(BM_Lcc)->Range(64, 1 << 16);

void BM_Icc(benchmark::State &state) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    Eigen::MatrixXd m(state.range(0), 5);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(icc_2_1(m));
}
BENCHMARK(BM_Icc)->Range(10, 10000);

void BM_HashEmbeddingAgreement(benchmark::State &state) {
    HashEmbeddingBackend backend;
    LabelMatrix labels;
    for (int i = 0; i < state.range(0); ++i) {
        labels.push_back({"soft sigh " + std::to_string(i), "gentle laugh", "sharp inhalation"});
    }
    for (auto _ : state) benchmark::DoNotOptimize(embedding_agreement(labels, backend));
}
BENCHMARK(BM_HashEmbeddingAgreement)->Range(8, 512);

} // namespace

BENCHMARK_MAIN();
