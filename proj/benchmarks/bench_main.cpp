#include <benchmark/benchmark.h>
#include <cactus/curriculum.hpp>
#include <cactus/harness.hpp>
#include <cactus/learner.hpp>
#include <cactus/losses.hpp>
#include <cactus/oracle.hpp>

namespace {

using namespace cactus;

Instance suite_instance(int size, double density, int agents, int radius = 0) {
  const SuiteSpec spec{{size, density, agents, 1, 17, radius}};
  return generate_test_suite(spec).front().instance;
}

void BM_EnvStep(benchmark::State& state) {
  const Instance inst = suite_instance(40, 0.2, static_cast<int>(state.range(0)));
  Rng rng = derive_rng({1});
  RandomPolicy policy;
  EnvState s{inst.starts, 0};
  std::vector<Action> actions = policy.act(inst, s, rng);
  for (auto _ : state) {
    Transition tr = transition(inst, s, actions, 1 << 30);
    benchmark::DoNotOptimize(tr.rewards.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnvStep)->Arg(8)->Arg(64);

void BM_EncodeObservation(benchmark::State& state) {
  const Instance inst = suite_instance(40, 0.2, 16);
  const EnvState s{inst.starts, 0};
  std::vector<float> out(kObservationSize);
  for (auto _ : state) {
    for (int i = 0; i < inst.agents(); ++i) encode_observation_into(inst, s, i, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * inst.agents());
}
BENCHMARK(BM_EncodeObservation);

void BM_ActorForwardBackward(benchmark::State& state) {
  Rng rng = derive_rng({2});
  const auto net = DenseNet<float>::initialized(actor_widths(64), OutputHead::Softmax, rng);
  const int batch = static_cast<int>(state.range(0));
  MatrixX<float> x = MatrixX<float>::Random(kObservationSize, batch);
  MatrixX<float> g = MatrixX<float>::Random(kNumActions, batch);
  for (auto _ : state) {
    auto tape = net.forward(x);
    auto grads = net.backward(tape, g);
    benchmark::DoNotOptimize(grads.parameters.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ActorForwardBackward)->Arg(32)->Arg(1024);

void BM_MixerForwardBackward(benchmark::State& state) {
  Rng rng = derive_rng({3});
  const int agents = 8, batch = static_cast<int>(state.range(0));
  const auto mixer = MixerNet<float>::initialized(mixer_shape(agents, 128, 32), rng);
  MatrixX<float> q = MatrixX<float>::Random(agents, batch);
  MatrixX<float> s = MatrixX<float>::Random(mixer.shape().state_size, batch).cwiseAbs();
  const MixerNet<float>::RowVector ones = MixerNet<float>::RowVector::Ones(batch);
  for (auto _ : state) {
    auto tape = mixer.forward(q, s);
    auto grads = mixer.backward(tape, ones);
    benchmark::DoNotOptimize(grads.parameters.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MixerForwardBackward)->Arg(256);

void BM_OracleTwoAgents(benchmark::State& state) {
  Rng rng = derive_rng({4});
  const GridMap map = GridMap::empty(5, 5);
  std::vector<Instance> instances;
  for (int k = 0; k < 16; ++k) {
    Instance inst{map, sample_starts(map, 2, rng), {}};
    inst.goals = sample_goals(map, inst.starts, map_diameter(map), rng);
    instances.push_back(std::move(inst));
  }
  std::size_t k = 0;
  for (auto _ : state) {
    const OracleResult r = optimal_flowtime(instances[k++ % instances.size()]);
    benchmark::DoNotOptimize(r.flowtime);
  }
}
BENCHMARK(BM_OracleTwoAgents);

void BM_Episode(benchmark::State& state) {
  Rng rng = derive_rng({5});
  TrainConfig c;
  c.agents = 4;
  const ModelBundle m = ModelBundle::create(c, rng);
  const Instance inst = suite_instance(10, 0.0, 4, 3);
  for (auto _ : state) {
    EpisodeResult r = run_episode(m.actor, inst, 64, 1.0, false, rng);
    benchmark::DoNotOptimize(r.completion);
  }
}
BENCHMARK(BM_Episode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
