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

#include "ceaeval/attnbias.hpp"

using namespace ceaeval::attnbias;

namespace {

Matrix random_matrix(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

void BM_BiasedAttention(benchmark::State &state) {
    const auto l = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(1);
    Matrix q = random_matrix(rng, l, 64), k = random_matrix(rng, l, 64), v = random_matrix(rng, l, 64);
    BiasMatrix b{Vector::Constant(l, 1.2)};
    for (auto _ : state) benchmark::DoNotOptimize(biased_attention(q, k, v, b));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BiasedAttention)->RangeMultiplier(2)->Range(16, 512)->Complexity();

void BM_StandardAttention(benchmark::State &state) {
    const auto l = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(1);
    Matrix q = random_matrix(rng, l, 64), k = random_matrix(rng, l, 64), v = random_matrix(rng, l, 64);
    for (auto _ : state) benchmark::DoNotOptimize(standard_attention(q, k, v));
}
BENCHMARK(BM_StandardAttention)->RangeMultiplier(2)->Range(16, 512);

void BM_GradCheck(benchmark::State &state) {
    auto probe = GradProbe::random(12, 6, 7);
    auto params = BiasParams::random(6, 8, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(grad_check(params, probe));
}
BENCHMARK(BM_GradCheck);

} // namespace
