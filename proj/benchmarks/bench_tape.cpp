#include <benchmark/benchmark.h>

#include "can/linsolve.hpp"
#include "can/rng.hpp"
#include "can/tape.hpp"
#include "can/tensor.hpp"

using can::Rng;
using can::Tensor;
using namespace can::diff;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (double& v : t.raw()) v = rng.normal();
    return t;
}

void BM_ForwardBackwardMlp(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Tensor x0 = random_tensor(rng, batch, 64);
    Tensor w1 = random_tensor(rng, 64, 100);
    Tensor w2 = random_tensor(rng, 100, 100);
    Tensor w3 = random_tensor(rng, 100, 1);
    for (auto _ : state) {
        Tape tape;
        Var x = tape.constant(x0);
        Var a = tape.leaf(w1);
        Var b = tape.leaf(w2);
        Var c = tape.leaf(w3);
        Var h = leaky_relu(matmul(x, a), 0.2);
        h = leaky_relu(matmul(h, b), 0.2);
        Var loss = mean_all(matmul(h, c));
        std::vector<Var> wrt = {a, b, c};
        auto gs = tape.gradients(loss, wrt);
        benchmark::DoNotOptimize(gs[0].value().data());
    }
}
BENCHMARK(BM_ForwardBackwardMlp)->Arg(64)->Arg(256);

void BM_SecondOrderPenalty(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    Tensor x0 = random_tensor(rng, batch, 60);
    Tensor w1 = random_tensor(rng, 60, 100);
    Tensor w2 = random_tensor(rng, 100, 1);
    for (auto _ : state) {
        Tape tape;
        Var x = tape.leaf(x0);
        Var a = tape.leaf(w1);
        Var b = tape.leaf(w2);
        Var score = matmul(leaky_relu(matmul(x, a), 0.2), b);
        Var inner = tape.gradients(sum_all(score), std::vector<Var>{x})[0];
        Var pen = mean_all(square(add_scalar(l2norm_rows(inner), -1.0)));
        auto gs = tape.gradients(pen, std::vector<Var>{a, b});
        benchmark::DoNotOptimize(gs[0].value().data());
    }
}
BENCHMARK(BM_SecondOrderPenalty)->Arg(64);

void BM_SolveSubstitution(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    Tensor k = Tensor::identity(n);
    for (std::size_t j = 1; j < n; ++j) {
        k.at(j, rng.index(j)) = rng.normal();  // lower-triangular support
    }
    Tensor u = random_tensor(rng, 64, n);
    for (auto _ : state) {
        Tensor x = can::detail::solve_right_transposed(k, u);
        benchmark::DoNotOptimize(x.data());
    }
}
BENCHMARK(BM_SolveSubstitution)->Arg(20)->Arg(60);

void BM_SolveDense(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    Tensor k = random_tensor(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) k.at(i, i) += static_cast<double>(n);
    Tensor u = random_tensor(rng, 64, n);
    for (auto _ : state) {
        Tensor x = can::detail::solve_right_transposed(k, u);
        benchmark::DoNotOptimize(x.data());
    }
}
BENCHMARK(BM_SolveDense)->Arg(20)->Arg(60);

}  // namespace

BENCHMARK_MAIN();
