#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "corerl/simulate.hpp"
#include "corerl/topology.hpp"

using namespace corerl;

namespace {

Topology single_node(double cap, double demand) {
  MicroserviceSpec s;
  s.id = 0;
  s.name = "svc";
  s.core_cap = cap;
  s.service_demand_s = demand;
  WorkloadSpec w;
  w.user_min = 0;
  w.user_max = 1000;
  w.entry_id = 0;
  return Topology::build({s}, w);
}

Topology diamond() {
  // 0 -> {1,2}; 1 -> 3; 2 -> 4; 3 -> 5; 4 -> 5
  std::vector<MicroserviceSpec> ms(6);
  const double caps[6] = {4.0, 2.0, 6.0, 4.0, 1.5, 4.0};
  const double dem[6] = {0.002, 0.001, 0.004, 0.003, 0.0005, 0.0025};
  for (int i = 0; i < 6; ++i) {
    ms[i].id = i;
    ms[i].name = "m" + std::to_string(i);
    ms[i].core_cap = caps[i];
    ms[i].service_demand_s = dem[i];
  }
  ms[0].downstream = {1, 2};
  ms[1].downstream = {3};
  ms[2].downstream = {4};
  ms[3].downstream = {5};
  ms[4].downstream = {5};
  WorkloadSpec w;
  w.user_min = 0;
  w.user_max = 1000;
  w.entry_id = 0;
  return Topology::build(ms, w);
}

}  // namespace

TEST_CASE("unloaded single node serves every request at its service demand") {
  // 50 requests per 1 s step, demand 0.01 core-s, 1 core allocated: arrival
  // spacing (0.02 s) exceeds service time, so no queueing and every latency is
  // exactly demand / alloc.
  Topology topo = single_node(1.0, 0.01);
  SimState st = sim_init(topo);
  for (int step = 0; step < 5; ++step) {
    StepOutcome out = sim_step(st, topo, {1.0}, 50, 1.0);
    REQUIRE(out.completed_latency_s.size() == 50);
    REQUIRE(out.failures == 0);
    for (double lat : out.completed_latency_s)
      REQUIRE_THAT(lat, Catch::Matchers::WithinAbs(0.01, 1e-9));
    REQUIRE(out.queue_depth_end[0] == 0);
    REQUIRE_THAT(out.consumed_core_s[0], Catch::Matchers::WithinAbs(0.5, 1e-9));
  }
}

TEST_CASE("overloaded single node grows its queue at the fluid rate") {
  // capacity 0.5 core-s per step serves 50 requests; 100 arrive, so the queue
  // grows by exactly 50 per step and the p99 latency rises monotonically.
  Topology topo = single_node(1.0, 0.01);
  SimState st = sim_init(topo);
  LatencyWindow window;
  double prev_p99 = -1.0;
  for (int step = 1; step <= 10; ++step) {
    StepOutcome out = sim_step(st, topo, {0.5}, 100, 1.0);
    REQUIRE(out.completed_latency_s.size() == 50);
    REQUIRE(out.queue_depth_end[0] == 50 * step);
    window.update(out.completed_latency_s);
    REQUIRE(window.p99_ms() > prev_p99);
    prev_p99 = window.p99_ms();
  }
}

TEST_CASE("request conservation holds under random load") {
  Topology topo = diamond();
  SimState st = sim_init(topo);
  RngStream rng(7);
  const std::vector<double> caps = topo.caps();
  std::vector<double> alloc = caps;
  for (int step = 0; step < 200; ++step) {
    for (std::size_t i = 0; i < alloc.size(); ++i)
      alloc[i] = std::max(0.1, caps[i] * rng.uniform(0.05, 1.0));
    std::int64_t arrivals = rng.poisson(rng.uniform(0.0, 400.0));
    sim_step(st, topo, alloc, arrivals, 1.0);
    REQUIRE(st.admitted_total == st.completed_total + st.failed_total + st.in_flight());
  }
  REQUIRE(st.admitted_total > 0);
}

TEST_CASE("requests older than the timeout are dropped as failures") {
  Topology topo = single_node(1.0, 10.0);  // one request takes 100 s at 0.1 cores
  SimState st = sim_init(topo);
  sim_step(st, topo, {0.1}, 5, 1.0);
  for (int step = 0; step < 11; ++step) sim_step(st, topo, {0.1}, 0, 1.0);
  REQUIRE(st.failed_total == 5);
  REQUIRE(st.completed_total == 0);
  REQUIRE(st.in_flight() == 0);
}

TEST_CASE("a request completes the whole diamond within one step when unloaded") {
  Topology topo = diamond();
  REQUIRE(topo.canonical_path() == std::vector<int>{0, 1, 3, 5, 2, 4});
  SimState st = sim_init(topo);
  StepOutcome out = sim_step(st, topo, topo.caps(), 1, 1.0);
  REQUIRE(out.completed_latency_s.size() == 1);
  // service times at caps along the path sum to the end-to-end latency; the
  // 5 -> 2 hop jumps backwards in topological order and must not cost a step
  double expect = 0.002 / 4 + 0.001 / 2 + 0.003 / 4 + 0.0025 / 4 + 0.004 / 6 + 0.0005 / 1.5;
  REQUIRE_THAT(out.completed_latency_s[0], Catch::Matchers::WithinAbs(expect, 1e-9));
  for (int v = 0; v < 6; ++v) REQUIRE(out.stage_completions[v] == 1);
}

TEST_CASE("idle system advances with all delta counters at zero") {
  Topology topo = diamond();
  SimState st = sim_init(topo);
  for (int i = 0; i < 3; ++i) {
    StepOutcome out = sim_step(st, topo, topo.caps(), 0, 1.0);
    REQUIRE(out.completed_latency_s.empty());
    REQUIRE(out.failures == 0);
    for (int v = 0; v < topo.size(); ++v) {
      REQUIRE(out.consumed_core_s[v] == 0.0);
      REQUIRE(st.counters[v].pkts_rx == 0);
      REQUIRE(st.counters[v].pkts_tx == 0);
      REQUIRE(st.counters[v].bytes_rx == 0.0);
      REQUIRE(st.counters[v].cpu_time_s == 0.0);
      REQUIRE(st.counters[v].page_faults == 0);
      REQUIRE(st.counters[v].io_ops == 0);
      REQUIRE(st.rss_bytes(topo, v) == 4.0 * 1024 * 1024);
      REQUIRE(st.cache_bytes(v) == 64.0 * 1024);
    }
  }
}

TEST_CASE("nearest-rank percentiles match hand-computed ranks") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);  // 1..100
  REQUIRE(nearest_rank_percentile(v, 50.0) == 50.0);
  REQUIRE(nearest_rank_percentile(v, 99.0) == 99.0);
  REQUIRE(nearest_rank_percentile(v, 99.9) == 100.0);
  REQUIRE(nearest_rank_percentile(v, 100.0) == 100.0);
  std::vector<double> w{1.0, 2.0, 3.0};
  REQUIRE(nearest_rank_percentile(w, 50.0) == 2.0);
  REQUIRE(nearest_rank_percentile(w, 66.0) == 2.0);
  REQUIRE(nearest_rank_percentile(w, 67.0) == 3.0);
  std::vector<double> one{5.0};
  for (double p : kLatencyPercentiles) REQUIRE(nearest_rank_percentile(one, p) == 5.0);
  REQUIRE_THROWS_AS(nearest_rank_percentile({}, 50.0), SimError);
  REQUIRE_THROWS_AS(nearest_rank_percentile(one, 0.0), SimError);
  REQUIRE_THROWS_AS(nearest_rank_percentile(one, 100.5), SimError);
}

TEST_CASE("latency window carries forward over empty intervals") {
  LatencyWindow w;
  for (double ms : w.values_ms()) REQUIRE(ms == 0.0);
  w.update({0.1, 0.2, 0.3});
  const std::array<double, 12> before = w.values_ms();
  REQUIRE(w.p99_ms() == 300.0);
  w.update({});
  REQUIRE(w.values_ms() == before);
  w.update({0.05});
  REQUIRE(w.p99_ms() == 50.0);
}

TEST_CASE("topology validation rejects malformed graphs") {
  WorkloadSpec w;
  w.entry_id = 0;
  auto mk = [](int id, std::vector<int> down) {
    MicroserviceSpec s;
    s.id = id;
    s.core_cap = 1.0;
    s.service_demand_s = 0.01;
    s.downstream = std::move(down);
    return s;
  };
  REQUIRE_THROWS_AS(Topology::build({}, w), ConfigError);
  REQUIRE_THROWS_AS(Topology::build({mk(0, {}), mk(0, {})}, w), ConfigError);
  REQUIRE_THROWS_AS(Topology::build({mk(0, {3}), mk(1, {})}, w), ConfigError);
  REQUIRE_THROWS_AS(Topology::build({mk(0, {1}), mk(1, {0})}, w), ConfigError);
  {
    WorkloadSpec bad = w;
    bad.entry_id = 9;
    REQUIRE_THROWS_AS(Topology::build({mk(0, {})}, bad), ConfigError);
  }
  {
    auto s = mk(0, {});
    s.core_cap = 0.05;  // below the 0.1-core floor
    REQUIRE_THROWS_AS(Topology::build({s}, w), ConfigError);
  }
  {
    auto s = mk(0, {});
    s.service_demand_s = 0.0;
    REQUIRE_THROWS_AS(Topology::build({s}, w), ConfigError);
  }
  // valid chain: topological order is the chain order
  Topology chain = Topology::build({mk(0, {1}), mk(1, {2}), mk(2, {})}, w);
  REQUIRE(chain.topo_order() == std::vector<int>{0, 1, 2});
  REQUIRE(chain.canonical_path() == std::vector<int>{0, 1, 2});
  Topology solo = Topology::build({mk(0, {})}, w);
  REQUIRE(solo.topo_order() == std::vector<int>{0});
}

TEST_CASE("branch weights select a single downstream path") {
  auto mk = [](int id, std::vector<int> down) {
    MicroserviceSpec s;
    s.id = id;
    s.core_cap = 1.0;
    s.service_demand_s = 0.01;
    s.downstream = std::move(down);
    return s;
  };
  WorkloadSpec w;
  w.entry_id = 0;
  auto root = mk(0, {1, 2});
  root.branch_weights = {1.0, 0.0};
  Topology t1 = Topology::build({root, mk(1, {}), mk(2, {})}, w);
  RngStream rng(3);
  for (int i = 0; i < 20; ++i) REQUIRE(t1.sample_path(&rng) == std::vector<int>{0, 1});
  REQUIRE_THROWS_AS(t1.sample_path(nullptr), SimError);

  root.branch_weights = {0.0, 1.0};
  Topology t2 = Topology::build({root, mk(1, {}), mk(2, {})}, w);
  for (int i = 0; i < 20; ++i) REQUIRE(t2.sample_path(&rng) == std::vector<int>{0, 2});

  root.branch_weights = {1.0};
  REQUIRE_THROWS_AS(Topology::build({root, mk(1, {}), mk(2, {})}, w), ConfigError);
}

TEST_CASE("sim rejects invalid allocations") {
  Topology topo = single_node(1.0, 0.01);
  SimState st = sim_init(topo);
  REQUIRE_THROWS_AS(sim_step(st, topo, {0.0}, 1, 1.0), SimError);
  REQUIRE_THROWS_AS(sim_step(st, topo, {1.5}, 1, 1.0), SimError);
  REQUIRE_THROWS_AS(sim_step(st, topo, {0.5, 0.5}, 1, 1.0), SimError);
  REQUIRE_THROWS_AS(sim_step(st, topo, {0.5}, -1, 1.0), SimError);
  REQUIRE_THROWS_AS(sim_step(st, topo, {0.5}, 1, 0.0), SimError);
}

TEST_CASE("poisson arrivals match their mean and variance under a fixed seed") {
  RngStream rng(99);
  const double lambda = 200.0 * 1.0 * 1.0;
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto a = generate_arrivals(200, 1.0, 1.0, rng);
    sum += static_cast<double>(a);
    sumsq += static_cast<double>(a) * static_cast<double>(a);
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(lambda, 0.5));
  REQUIRE_THAT(var, Catch::Matchers::WithinAbs(lambda, 6.0));
  RngStream zero(1);
  for (int i = 0; i < 10; ++i) REQUIRE(generate_arrivals(0, 1.0, 1.0, zero) == 0);
}

TEST_CASE("identical seeds reproduce identical trajectories") {
  Topology topo = diamond();
  auto run = [&](std::uint64_t seed) {
    RngStream rng(seed, "env");
    SimState st = sim_init(topo);
    std::vector<double> all;
    for (int step = 0; step < 50; ++step) {
      auto arrivals = generate_arrivals(300, 1.0, 1.0, rng);
      StepOutcome out = sim_step(st, topo, topo.caps(), arrivals, 1.0, &rng);
      all.insert(all.end(), out.completed_latency_s.begin(), out.completed_latency_s.end());
      all.push_back(static_cast<double>(out.failures));
    }
    return all;
  };
  auto a = run(42), b = run(42), c = run(43);
  REQUIRE(a == b);
  REQUIRE(a != c);
}

TEST_CASE("warmup runs at full caps and respects the user range") {
  Topology topo = diamond();
  RngStream rng(11);
  int calls = 0;
  SimState st = reset_and_warmup(topo, 300, 60, 1.0, rng,
                                 [&](const SimState&, const StepOutcome& out) {
                                   calls++;
                                   REQUIRE(out.alloc_cores == topo.caps());
                                 });
  REQUIRE(calls == 60);
  REQUIRE(st.admitted_total > 0);
  REQUIRE(st.clock == 60.0);
  RngStream rng2(12);
  REQUIRE_THROWS_AS(reset_and_warmup(topo, 5000, 10, 1.0, rng2), SimError);
}
