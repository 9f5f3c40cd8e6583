// Acceptance gates for the autoscaling laboratory. One PASS/FAIL line per
// criterion; exit status is the number of failures.
//
//   acceptance fast       property suites (seconds)
//   acceptance e2e        desk training run measured against the threshold
//                         controller (tens of minutes; resumable)
//   acceptance transfer   budget-matched warm-start comparison over 3 seeds
//                         (about an hour; the pretrained source is resumable)

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "corerl/trainer.hpp"

using namespace corerl;

namespace {

namespace fs = std::filesystem;

#ifndef CORERL_REPO_DIR
#error "CORERL_REPO_DIR must point at the repository root"
#endif

std::string repo_path(const char* rel) {
  return (fs::path(CORERL_REPO_DIR) / rel).string();
}

std::string run_dir(const char* leaf, bool wipe) {
  const fs::path p = fs::current_path() / "acceptance_runs" / leaf;
  if (wipe) fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int g_failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s: %s%s%s\n", ok ? "PASS" : "FAIL", name, detail.empty() ? "" : " | ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) g_failures++;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---- criterion: reward exactness ----

void check_reward_exactness() {
  RngStream rng(2024, "reward-exact");
  const double alphas[] = {0.1, 1.0, 10.0};
  double max_abs_err = 0.0;
  bool ok = true;
  for (int i = 0; i < 1000; ++i) {
    const int m = static_cast<int>(rng.uniform_int(1, 8));
    Vector u(m), a(m);
    for (int v = 0; v < m; ++v) {
      u(v) = rng.uniform(0.5, 8.0);
      a(v) = rng.uniform(0.0, 1.0);
    }
    const double alpha = i % 5 == 0 ? alphas[i % 3] : rng.uniform(0.05, 10.0);
    const double qos = rng.uniform(50.0, 500.0);
    const double lat = rng.uniform(0.0, 2.0 * qos);
    CoreCaps caps = CoreCaps::from(std::vector<double>(u.data(), u.data() + m));

    // independent oracle in extended precision
    long double dot = 0.0L, z = 0.0L;
    for (int v = 0; v < m; ++v) {
      dot += static_cast<long double>(a(v)) * static_cast<long double>(u(v));
      z += static_cast<long double>(u(v));
    }
    const long double want =
        lat > qos ? -1.0L : static_cast<long double>(alpha) * (1.0L - dot / z);
    const double got = reward(lat, qos, a, caps, alpha);
    const double err = std::abs(static_cast<double>(want - got));
    max_abs_err = std::max(max_abs_err, err);
    if (err > 1e-12) ok = false;
  }

  // the boundary latency==QoS takes the non-violation branch
  Vector a = Vector::Constant(3, 0.5), u = Vector::Constant(3, 2.0);
  CoreCaps caps = CoreCaps::from({2.0, 2.0, 2.0});
  const double at_qos = reward(200.0, 200.0, a, caps, 1.0);
  if (at_qos != 0.5) ok = false;

  report("reward exactness", ok,
         fmt("1000 tuples, max abs err %.3g (tol 1e-12); boundary value %.3f", max_abs_err,
             at_qos));
}

// ---- criterion: gradient correctness ----

template <typename LossFn>
double fd_max_err(const std::vector<ParamSpan>& params, const std::vector<ParamSpan>& grads,
                  LossFn&& loss) {
  const double delta = 1e-4;  // pinned probe step
  double max_err = 0.0;
  for (std::size_t si = 0; si < params.size(); ++si)
    for (Eigen::Index j = 0; j < params[si].n; ++j) {
      const double orig = params[si].p[j];
      params[si].p[j] = orig + delta;
      const double lp = loss();
      params[si].p[j] = orig - delta;
      const double lm = loss();
      params[si].p[j] = orig;
      const double fd = (lp - lm) / (2.0 * delta);
      const double g = grads[si].p[j];
      max_err = std::max(max_err, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-4}));
    }
  return max_err;
}

double mlp_margin(const Mlp& m, const Matrix& x0) {
  double margin = 1e30;
  Matrix x = x0;
  for (const auto& l : m.layers) {
    Matrix z = x * l.w.transpose();
    z.rowwise() += l.b.transpose();
    if (l.act == Activation::relu) {
      margin = std::min(margin, z.array().abs().minCoeff());
      x = z.cwiseMax(0.0);
    } else {
      x = z;
    }
  }
  return margin;
}

// Pre-activations must sit further from the relu kink than the probe can
// reach, or central differences straddle the corner.
constexpr double kKinkMargin = 2e-3;

void check_gradients() {
  bool ok = true;
  double worst = 0.0;
  std::string bad;
  auto judge = [&](const char* net, int m, double err) {
    if (err < 0.0) {
      ok = false;
      bad += fmt("%s@M=%d no fixture; ", net, m);
    } else if (err > 1e-3) {
      ok = false;
      bad += fmt("%s@M=%d err %.3g; ", net, m, err);
    }
    worst = std::max(worst, err);
  };
  for (int m : {1, 3, 8}) {
    const int d = 8;

    // policy, through squash and log-prob
    {
      double err = -1.0;
      for (std::uint64_t seed = 0; seed < 500; ++seed) {
        RngStream rng(seed, "acc-fd-policy");
        PolicyNet p = PolicyNet::make(d, 6, 3, rng);
        Matrix x = Matrix::NullaryExpr(m, d, [&]() { return rng.normal(); });
        if (mlp_margin(p.trunk, x) < kKinkMargin) continue;
        Vector eps = Vector::NullaryExpr(m, [&]() { return rng.normal(); });
        Vector wa = Vector::NullaryExpr(m, [&]() { return rng.normal(); });
        Vector wl = Vector::NullaryExpr(m, [&]() { return rng.normal(); });
        PolicyNet::Cache cache;
        p.forward_with_eps(x, eps, &cache);
        PolicyNet::Grads grads;
        p.backward(cache, wa, wl, &grads);
        std::vector<ParamSpan> ps, gs;
        collect_spans(p, ps);
        collect_spans(grads, gs);
        err = fd_max_err(ps, gs, [&]() {
          auto o = p.forward_with_eps(x, eps);
          return wa.dot(o.a) + wl.dot(o.logp_row);
        });
        break;
      }
      judge("policy", m, err);
    }

    // critic, including the appended-action input. Zero-bias relu trunks are
    // positively homogeneous, and the narrow 7-layer stack shrinks
    // preactivations with depth; scaling the input scales every preactivation
    // with it, keeping the deep layers clear of the kink at the probe step.
    {
      double err = -1.0;
      for (std::uint64_t seed = 0; seed < 500; ++seed) {
        RngStream rng(seed, "acc-fd-critic");
        CriticNet c = CriticNet::make(d, 6, rng);
        Matrix x = 100.0 * Matrix::NullaryExpr(m, d, [&]() { return rng.normal(); });
        Vector a = Vector::NullaryExpr(m, [&]() { return rng.uniform(0.05, 0.95); });
        {
          Matrix h1 = c.pre.forward(x);
          Matrix z(m, h1.cols() + 1);
          z.leftCols(h1.cols()) = h1;
          z.col(h1.cols()) = a;
          if (mlp_margin(c.pre, x) < kKinkMargin || mlp_margin(c.post, z) < kKinkMargin)
            continue;
        }
        Vector wq = Vector::NullaryExpr(m, [&]() { return rng.normal(); });
        CriticNet::Cache cache;
        c.forward_rows(x, a, &cache);
        CriticNet::Grads grads;
        Vector da = c.backward(cache, wq, &grads, true);
        std::vector<ParamSpan> ps, gs;
        collect_spans(c, ps);
        collect_spans(grads, gs);
        auto loss = [&]() { return wq.dot(c.forward_rows(x, a)); };
        err = fd_max_err(ps, gs, loss);
        std::vector<ParamSpan> aspan{{a.data(), a.size()}};
        std::vector<ParamSpan> agrad{{da.data(), da.size()}};
        err = std::max(err, fd_max_err(aspan, agrad, loss));
        break;
      }
      judge("critic", m, err);
    }

    // classifier, under the binary cross-entropy loss
    {
      double err = -1.0;
      for (std::uint64_t seed = 0; seed < 500; ++seed) {
        RngStream rng(seed, "acc-fd-clf");
        ClassifierNet c = ClassifierNet::make(d, 6, 3, rng);
        Matrix x = Matrix::NullaryExpr(m, d, [&]() { return rng.normal(); });
        Vector a = Vector::NullaryExpr(m, [&]() { return rng.uniform(0.05, 0.95); });
        {
          Matrix z(m, d + 1);
          z.leftCols(d) = x;
          z.col(d) = a;
          if (mlp_margin(c.trunk, z) < kKinkMargin) continue;
        }
        Matrix y =
            Matrix::NullaryExpr(m, 5, [&]() { return rng.uniform() < 0.5 ? 0.0 : 1.0; });
        ClassifierNet::Cache cache;
        Matrix logits = c.forward_logits(x, a, &cache);
        Matrix dlogits = logits.unaryExpr([](double v) { return sigmoid(v); }) - y;
        ClassifierNet::Grads grads;
        c.backward(cache, dlogits, &grads);
        std::vector<ParamSpan> ps, gs;
        collect_spans(c, ps);
        collect_spans(grads, gs);
        err = fd_max_err(ps, gs, [&]() {
          const Matrix lg = c.forward_logits(x, a);
          double l = 0.0;
          for (Eigen::Index i = 0; i < lg.rows(); ++i)
            for (Eigen::Index jj = 0; jj < lg.cols(); ++jj) {
              const double pr = sigmoid(lg(i, jj));
              l += -y(i, jj) * std::log(pr) - (1.0 - y(i, jj)) * std::log(1.0 - pr);
            }
          return l;
        });
        break;
      }
      judge("classifier", m, err);
    }
  }
  report("finite-difference gradients", ok,
         fmt("policy/critic/classifier at M in {1,3,8}, step 1e-4, max rel err %.3g "
             "(tol 1e-3)%s%s",
             worst, bad.empty() ? "" : " | ", bad.c_str()));
}

// ---- criterion: variable-M actions and parameter sharing ----

void check_variable_m() {
  ExperimentConfig c;
  c.topology = parse_topology(read_json_file(repo_path("configs/desk_topology.json")));
  c.seed = 11;
  c.qos_ms = 200.0;
  c.stack_k = 2;
  c.m_max = 12;
  c.w_steps = 3;
  c.hidden = 16;
  c.batch_size = 8;
  c.replay_capacity = 500;
  c.total_steps = 24;
  c.asa_steps = 12;
  c.ca_steps = 6;
  c.rsc_steps = 12;
  c.e_time = 6;
  c.classifier.max_updates = 10;
  c.classifier.batch = 8;
  c.eval_user_counts = {60};
  c.eval_duration = 5;
  c.transfer_total_steps = 24;
  c.transfer_asa_steps = 12;
  validate_config(c);

  const std::string dir = run_dir("variable_m", true);
  Trainer tr(c, {.out_dir = dir});
  tr.run();  // checkpoint trained at M=6

  RngStream init(1, "reload");
  SacAgent agent = make_agent(c, init);
  QosClassifier clf = make_classifier(c, init);
  load_checkpoint(dir + "/checkpoint.bin", agent, &clf, nullptr);

  bool ok = true;
  RngStream rng(5, "vm-probe");
  for (int m : {4, 9}) {
    Matrix s = Matrix::NullaryExpr(m, input_width(c), [&]() { return rng.normal(); });
    Vector a = agent.act(s, false, rng);
    if (a.size() != m || !a.allFinite() || a.minCoeff() <= 0.0 || a.maxCoeff() >= 1.0)
      ok = false;
  }

  // Parameter sharing, counted at full width. A microservice's identifier bit
  // repeats across its k stacked frames, so the k first-layer weights per
  // hidden unit act only through their sum: one effective unique parameter per
  // hidden unit, h in total, out of P policy parameters.
  ExperimentConfig full = c;
  full.hidden = 144;
  full.stack_k = 5;
  RngStream finit(2, "full-width");
  SacAgent wide = make_agent(full, finit);
  std::vector<ParamSpan> ps;
  collect_spans(wide.policy(), ps);
  const double p_total = static_cast<double>(span_total(ps));
  const double share = 1.0 - static_cast<double>(full.hidden) / p_total;
  if (!(share >= 0.999)) ok = false;

  report("variable-M actions and parameter sharing", ok,
         fmt("M=6 checkpoint acts at M=4 and M=9; shared fraction %.6f of %.0f policy "
             "parameters (need >= 0.999)",
             share, p_total));
}

// ---- criterion: aggregation invariances ----

void check_invariances() {
  RngStream rng(31, "invariance");
  const int d = 10, m = 6;
  CriticNet critic = CriticNet::make(d, 16, rng);
  PolicyNet policy = PolicyNet::make(d, 16, 3, rng);
  Matrix x = Matrix::NullaryExpr(m, d, [&]() { return rng.normal(); });
  Vector a = Vector::NullaryExpr(m, [&]() { return rng.uniform(0.05, 0.95); });

  const double q = critic.forward_rows(x, a).mean();

  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Matrix xp(m, d);
  Vector ap(m);
  for (int i = 0; i < m; ++i) {
    xp.row(i) = x.row(perm[i]);
    ap(i) = a(perm[i]);
  }
  const double q_perm = critic.forward_rows(xp, ap).mean();

  Matrix xd(2 * m, d);
  Vector ad(2 * m);
  xd << x, x;
  ad << a, a;
  const double q_dup = critic.forward_rows(xd, ad).mean();

  RngStream dummy(1, "d");
  const Vector pi = policy.mean_action(x).a;
  const Vector pi_perm = policy.mean_action(xp).a;
  double equiv_err = 0.0;
  for (int i = 0; i < m; ++i) equiv_err = std::max(equiv_err, std::abs(pi_perm(i) - pi(perm[i])));

  const double perm_err = std::abs(q - q_perm);
  const double dup_err = std::abs(q - q_dup);
  const bool ok = perm_err <= 1e-12 && dup_err <= 1e-12 && equiv_err <= 1e-12;
  report("aggregation invariances", ok,
         fmt("Q permutation err %.3g, duplication err %.3g, policy equivariance err %.3g "
             "(tol 1e-12)",
             perm_err, dup_err, equiv_err));
}

// ---- criterion: simulator conservation and the starve-then-restore regime ----

void check_simulator_regime() {
  Topology topo = parse_topology(read_json_file(repo_path("configs/desk_topology.json")));
  const double qos_ms = 200.0;
  SimState st = sim_init(topo);
  RngStream rng(9, "regime");

  bool conserved = true;
  auto step_and_check = [&](const std::vector<double>& alloc,
                            std::int64_t arrivals) -> StepOutcome {
    StepOutcome o = sim_step(st, topo, alloc, arrivals, 1.0, &rng);
    if (st.admitted_total != st.completed_total + st.failed_total + st.in_flight())
      conserved = false;
    return o;
  };

  const std::vector<double> caps = topo.caps();
  const std::vector<double> floor(topo.size(), kAllocFloorCores);
  const std::int64_t users = 300;

  for (int i = 0; i < 30; ++i) step_and_check(caps, rng.poisson(users));

  // starvation: deterministic arrivals overwhelm floor-level service. The
  // window stays inside the request timeout so nothing is dropped yet and the
  // backlog must grow every single step.
  bool monotone = true;
  std::int64_t prev_in_flight = st.in_flight();
  for (int i = 0; i < 9; ++i) {
    step_and_check(floor, users);
    const std::int64_t now = st.in_flight();
    if (now <= prev_in_flight) monotone = false;
    prev_in_flight = now;
  }
  const std::int64_t backlog = prev_in_flight;

  // restore: completions drain the backlog carrying multi-second waits
  int violation_steps = 0;
  for (int i = 0; i < 15; ++i) {
    StepOutcome o = step_and_check(caps, rng.poisson(users));
    std::vector<double> lat = o.completed_latency_s;
    if (!lat.empty()) {
      std::sort(lat.begin(), lat.end());
      const std::size_t idx =
          static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(lat.size()))) - 1;
      if (lat[idx] * 1000.0 > qos_ms) violation_steps++;
    }
  }

  const bool ok = conserved && monotone && backlog > 1000 && violation_steps >= 1;
  report("simulator conservation and starve-then-restore regime", ok,
         fmt("conservation exact %s; queue growth monotone %s to backlog %lld; %d "
             "post-restore violation steps (need >= 1)",
             conserved ? "yes" : "NO", monotone ? "yes" : "NO",
             static_cast<long long>(backlog), violation_steps));
}

// ---- criterion: threshold-controller band suite ----

void check_autoscale_bands() {
  CoreCaps caps = CoreCaps::from({100.0});
  bool ok = true;
  auto band = [&](double util, double expect) {
    Vector alloc = Vector::Constant(1, 10.0);
    Vector u = Vector::Constant(1, util);
    const Vector next = autoscale_step(alloc, u, caps);
    if (next(0) != expect) ok = false;
  };
  band(0.05, 9.0);
  band(0.10, 9.0);   // the down band is inclusive at its top edge
  band(0.15, 10.0);
  band(0.29, 10.0);
  band(0.30, 11.0);
  band(0.49, 11.0);
  band(0.50, 13.0);
  band(1.00, 13.0);

  // clamps: floor on the way down, cap on the way up
  {
    Vector alloc = Vector::Constant(1, 0.105);
    const Vector next = autoscale_step(alloc, Vector::Constant(1, 0.05), caps);
    if (next(0) != kAllocFloorCores) ok = false;
  }
  {
    CoreCaps small = CoreCaps::from({10.5});
    Vector alloc = Vector::Constant(1, 10.0);
    const Vector next = autoscale_step(alloc, Vector::Constant(1, 0.8), small);
    if (next(0) != 10.5) ok = false;
  }
  report("threshold-controller band suite", ok,
         "x0.9 at util <= 0.10, hold to 0.30, x1.1 to 0.50, x1.3 above; floor and cap clamps");
}

// ---- criterion: determinism and persistence ----

ExperimentConfig micro_cfg() {
  ExperimentConfig c;
  WorkloadSpec w;
  w.user_min = 2;
  w.user_max = 40;
  MicroserviceSpec s0, s1;
  s0.id = 0;
  s0.name = "front";
  s0.core_cap = 2.0;
  s0.service_demand_s = 0.004;
  s0.downstream = {1};
  s1.id = 1;
  s1.name = "back";
  s1.core_cap = 3.0;
  s1.service_demand_s = 0.006;
  c.topology = Topology::build({s0, s1}, w);
  c.seed = 3;
  c.qos_ms = 150.0;
  c.stack_k = 2;
  c.m_max = 3;
  c.w_steps = 5;
  c.hidden = 16;
  c.batch_size = 16;
  c.replay_capacity = 2000;
  c.total_steps = 120;
  c.asa_steps = 60;
  c.ca_steps = 30;
  c.rsc_steps = 60;
  c.e_time = 30;
  c.checkpoint_every = 60;
  c.classifier.batch = 32;
  c.classifier.max_updates = 50;
  c.eval_user_counts = {5, 20};
  c.eval_duration = 20;
  c.transfer_total_steps = 120;
  c.transfer_asa_steps = 60;
  validate_config(c);
  return c;
}

void check_determinism_persistence() {
  const ExperimentConfig c = micro_cfg();
  bool ok = true;
  std::string why;

  const std::string a = run_dir("det_a", true);
  const std::string b = run_dir("det_b", true);
  Trainer ta(c, {.out_dir = a});
  Trainer tb(c, {.out_dir = b});
  ta.run();
  tb.run();
  if (slurp(a + "/metrics.csv") != slurp(b + "/metrics.csv")) {
    ok = false;
    why += "metrics differ across identical runs; ";
  }

  // save/load round-trip is bit-exact
  RngStream init(4, "rt");
  SacAgent fresh = make_agent(c, init);
  QosClassifier fclf = make_classifier(c, init);
  load_checkpoint(a + "/checkpoint.bin", fresh, &fclf, nullptr);
  const std::string rt = a + "/roundtrip.bin";
  TrainerCheckpoint tc;
  load_checkpoint(a + "/checkpoint.bin", fresh, &fclf, &tc);
  save_checkpoint(rt, fresh, &fclf, tc);
  if (slurp(rt) != slurp(a + "/checkpoint.bin")) {
    ok = false;
    why += "checkpoint round-trip not bit-exact; ";
  }

  // interrupted-then-resumed equals uninterrupted
  const std::string part = run_dir("det_resume", true);
  {
    Trainer tp(c, {.out_dir = part});
    tp.set_episode_callback([](std::int64_t rl) { return rl >= 30; });
    tp.run();
  }
  {
    Trainer tr2(c, {.out_dir = part, .resume = true});
    tr2.run();
  }
  if (slurp(part + "/metrics.csv") != slurp(a + "/metrics.csv") ||
      slurp(part + "/checkpoint.bin") != slurp(a + "/checkpoint.bin")) {
    ok = false;
    why += "resumed run diverged; ";
  }

  report("determinism and persistence", ok,
         why.empty() ? "bit-identical metrics, checkpoint round-trip, exact resume" : why);
}

// ---- criterion: entropy-coefficient tuning direction ----

void check_entropy_direction() {
  bool ok = true;
  double eta_hi = 0.0, eta_lo = 0.0;
  for (int phase = 0; phase < 2; ++phase) {
    ExperimentConfig c = micro_cfg();
    c.target_entropy = phase == 0 ? 50.0 : -50.0;
    RngStream init(6, "eta-dir");
    SacAgent agent = make_agent(c, init);
    StandardizationStats stats = StandardizationStats::zeros(feature_count(c.m_max));
    RngStream rng(7, "eta-batch");
    std::vector<Transition> pool;
    for (int i = 0; i < 32; ++i) {
      Transition t;
      t.s = Matrix::NullaryExpr(2, input_width(c), [&]() { return rng.uniform(-1, 1); });
      t.a = Vector::NullaryExpr(2, [&]() { return rng.uniform(0.1, 0.9); });
      t.s_next = Matrix::NullaryExpr(2, input_width(c), [&]() { return rng.uniform(-1, 1); });
      t.r = rng.uniform(-1.0, 0.5);
      t.done = false;
      pool.push_back(std::move(t));
    }
    std::vector<const Transition*> batch;
    for (const auto& t : pool) batch.push_back(&t);
    const double before = agent.eta();
    agent.update(batch, stats, c.m_max, rng);
    const double after = agent.eta();
    if (phase == 0) {
      eta_hi = after;
      if (!(after > before)) ok = false;  // entropy below target -> eta grows
    } else {
      eta_lo = after;
      if (!(after < before)) ok = false;  // entropy above target -> eta shrinks
    }
  }
  report("entropy-coefficient tuning direction", ok,
         fmt("eta after one update: %.6f with high target (up from 1), %.6f with low target "
             "(down from 1)",
             eta_hi, eta_lo));
}

// ---- criterion: end-to-end desk experiment ----

void check_e2e() {
  ExperimentConfig cfg = load_config(repo_path("configs/desk.json"));
  const std::string dir = run_dir("e2e", false);  // resumable
  Trainer tr(cfg, {.out_dir = dir, .resume = true});
  std::printf("-- desk training (%lld steps; resumable at %s)\n",
              static_cast<long long>(cfg.total_steps), dir.c_str());
  tr.run();

  std::printf("-- evaluating agent and controller over %zu user counts x %lld steps\n",
              cfg.eval_user_counts.size(), static_cast<long long>(cfg.eval_duration));
  RunMetrics agent_m =
      evaluate_agent(tr.agent(), cfg, tr.stats(), cfg.eval_user_counts, cfg.eval_duration);
  RunMetrics as_m = evaluate_autoscale(cfg, cfg.eval_user_counts, cfg.eval_duration);
  export_metrics(agent_m, dir + "/eval_agent.csv");
  export_summary(agent_m, dir + "/eval_agent_summary.csv");
  export_metrics(as_m, dir + "/eval_autoscale.csv");
  export_summary(as_m, dir + "/eval_autoscale_summary.csv");

  const UserAggregate agent_all = agent_m.aggregate().back();
  const UserAggregate as_all = as_m.aggregate().back();
  const double ratio = agent_all.mean_alloc_cores / as_all.mean_alloc_cores;
  const bool ok = agent_all.violation_rate == 0.0 && ratio <= 0.8 &&
                  cfg.eval_user_counts.size() >= 5 && cfg.eval_duration >= 300;
  report("end-to-end desk experiment", ok,
         fmt("violation rate %.4f (need 0) over %zu counts x %lld steps; mean alloc %.3f vs "
             "controller %.3f cores (ratio %.3f, need <= 0.8)",
             agent_all.violation_rate, cfg.eval_user_counts.size(),
             static_cast<long long>(cfg.eval_duration), agent_all.mean_alloc_cores,
             as_all.mean_alloc_cores, ratio));
}

// ---- criterion: transfer experiment ----

void check_transfer() {
  ExperimentConfig src_cfg = load_config(repo_path("configs/pretrain.json"));
  ExperimentConfig tgt_cfg = load_config(repo_path("configs/desk.json"));

  const std::string src_dir = run_dir("transfer_source", false);  // resumable
  std::printf("-- pretraining source (%lld steps; resumable at %s)\n",
              static_cast<long long>(src_cfg.total_steps), src_dir.c_str());
  Trainer src(src_cfg, {.out_dir = src_dir, .resume = true});
  src.run();

  const std::string dir = run_dir("transfer_arms", true);
  std::printf("-- paired arms over 3 seeds (fine-tune budget %lld = %lld seed + %lld RL)\n",
              static_cast<long long>(tgt_cfg.transfer_total_steps),
              static_cast<long long>(tgt_cfg.transfer_asa_steps),
              static_cast<long long>(tgt_cfg.transfer_total_steps -
                                     tgt_cfg.transfer_asa_steps));
  TransferExperiment ex =
      run_transfer_experiment(tgt_cfg, src.agent(), src_cfg.m_max, dir, 3);

  std::string arms;
  for (std::size_t i = 0; i < ex.transfer_arms.size(); ++i)
    arms += fmt("%s%lld/%lld", i ? ", " : "",
                static_cast<long long>(ex.transfer_arms[i].milestone_rl_steps),
                static_cast<long long>(ex.scratch_arms[i].milestone_rl_steps));
  const bool ok = ex.mean_ratio <= 0.6;
  report("transfer speedup", ok,
         fmt("parity milestones (warm/scratch RL steps): %s; mean ratio %.3f (need <= 0.6)",
             arms.c_str(), ex.mean_ratio));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "fast";
  try {
    if (mode == "fast") {
      check_reward_exactness();
      check_gradients();
      check_variable_m();
      check_invariances();
      check_simulator_regime();
      check_autoscale_bands();
      check_determinism_persistence();
      check_entropy_direction();
    } else if (mode == "e2e") {
      check_e2e();
    } else if (mode == "transfer") {
      check_transfer();
    } else {
      std::fprintf(stderr, "usage: acceptance [fast|e2e|transfer]\n");
      return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return g_failures;
}
