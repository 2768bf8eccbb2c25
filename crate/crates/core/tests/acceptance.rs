//! End-to-end acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the expensive training and
//! GA runs are shared across criteria. It exits 0 after printing the report;
//! set `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvtune_core::controller::{allocate, jacobian, CgError, Weights};
use tvtune_core::ddpg::{
    actor_objective_and_grad, critic_loss_and_grad, DdpgAgent, Hyperparams, Mlp, NetSpec,
    Transition,
};
use tvtune_core::dynamics::{
    cg_forces, pacejka, rk4_step, step_rk4, PlantInput, TireForceVector, TireParams, VehicleParams,
    VehicleState,
};
use tvtune_core::env::{reward_terms, DriverProfile};
use tvtune_core::harness::{
    cmd_ga_tune, cmd_generalize, cmd_sweep, cmd_train, evaluate, sweep, train_agent, Cell, EvalRow,
    Policy, RunConfig, Tuner, GA_BEST_FILE, GA_TRACE_FILE, GENERALIZE_FILE, MODEL_FILE,
    REWARDS_FILE, SWEEP_FILE,
};

struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!(
            "criterion {id}: {} | {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        self.lines.push((id.to_owned(), pass, detail));
    }
}

// ---------------------------------------------------------------- 1: allocator

/// Gradient of the allocation objective written out from its definition.
fn objective_gradient(
    e: &[f64; 3],
    j: &[[f64; 4]; 3],
    w_e: &[f64; 3],
    w_df: &[f64; 4],
    d: &[f64; 4],
) -> [f64; 4] {
    let mut residual = [0.0; 3];
    for r in 0..3 {
        residual[r] = e[r] - (0..4).map(|c| j[r][c] * d[c]).sum::<f64>();
    }
    let mut g = [0.0; 4];
    for c in 0..4 {
        g[c] = w_df[c] * d[c] - (0..3).map(|r| j[r][c] * w_e[r] * residual[r]).sum::<f64>();
    }
    g
}

/// Conjugate-gradient minimiser with restarts; needs only the gradient.
fn numeric_minimiser(e: &[f64; 3], j: &[[f64; 4]; 3], w_e: &[f64; 3], w_df: &[f64; 4]) -> [f64; 4] {
    let dot = |a: &[f64; 4], b: &[f64; 4]| (0..4).map(|i| a[i] * b[i]).sum::<f64>();
    let zero_e = [0.0; 3];
    // Hessian-vector product: gradient of the homogeneous problem.
    let hv = |v: &[f64; 4]| objective_gradient(&zero_e, j, w_e, w_df, v);
    let mut d = [0.0; 4];
    for _restart in 0..8 {
        let g = objective_gradient(e, j, w_e, w_df, &d);
        let mut r = g.map(|x| -x);
        let mut p = r;
        for _ in 0..4 {
            let rr = dot(&r, &r);
            if rr == 0.0 {
                break;
            }
            let hp = hv(&p);
            let alpha = rr / dot(&p, &hp);
            for i in 0..4 {
                d[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            let beta = dot(&r, &r) / rr;
            for i in 0..4 {
                p[i] = r[i] + beta * p[i];
            }
        }
    }
    d
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let params = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_rel, mut worst_grad) = (0.0_f64, 0.0_f64);
    let n = 2000;
    for _ in 0..n {
        let steer = rng.random_range(-0.5..0.5);
        let e = [
            rng.random_range(-1000.0..1000.0),
            rng.random_range(-1000.0..1000.0),
            rng.random_range(-1000.0..1000.0),
        ];
        let w_df: [f64; 4] = std::array::from_fn(|_| rng.random_range(40.0..1000.0));
        let weights = Weights::new(w_df);
        let jac = jacobian(steer, &params);
        let j: [[f64; 4]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| jac.0[(r, c)]));
        let df = allocate(
            &CgError::new(e[0], e[1], e[2]),
            &jac,
            &weights,
            params.wheel_radius_eff,
        )
        .expect("allocation succeeds")
        .dfx;
        let oracle = numeric_minimiser(&e, &j, &weights.w_e, &w_df);
        let norm = |v: &[f64; 4]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: [f64; 4] = std::array::from_fn(|i| df[i] - oracle[i]);
        worst_rel = worst_rel.max(norm(&diff) / norm(&oracle));
        worst_grad = worst_grad.max(norm(&objective_gradient(&e, &j, &weights.w_e, &w_df, &df)));
    }
    let elapsed = start.elapsed();
    report.record(
        "1",
        worst_rel < 1e-6 && worst_grad < 1e-8 && elapsed < Duration::from_secs(10),
        format!(
            "{n} instances: max rel err {worst_rel:.2e} (< 1e-6), max |grad P| {worst_grad:.2e} (< 1e-8), {:.2} s (< 10 s)",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 2: Jacobian

fn criterion_2(report: &mut Report) {
    let params = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let steer = rng.random_range(-0.6..0.6);
        let base = TireForceVector {
            fx: std::array::from_fn(|_| rng.random_range(-3000.0..3000.0)),
            fy: std::array::from_fn(|_| rng.random_range(-3000.0..3000.0)),
        };
        let jac = jacobian(steer, &params);
        // The force map is linear in fx, so a unit step differences exactly.
        let h = 1.0;
        for c in 0..4 {
            let mut plus = base;
            let mut minus = base;
            plus.fx[c] += h;
            minus.fx[c] -= h;
            let fp = cg_forces(&plus, steer, &params).as_array();
            let fm = cg_forces(&minus, steer, &params).as_array();
            for r in 0..3 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let a = jac.0[(r, c)];
                let scale = a.abs().max(fd.abs());
                let err = if scale < 1e-9 {
                    (a - fd).abs()
                } else {
                    (a - fd).abs() / scale
                };
                worst = worst.max(err);
            }
        }
    }
    report.record(
        "2",
        worst < 1e-6,
        format!("100 random steers: max rel err {worst:.2e} (< 1e-6)"),
    );
}

// ---------------------------------------------------------------- 3: gradients

fn random_batch(rng: &mut ChaCha8Rng, spec: &NetSpec, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|i| Transition {
            obs: spec
                .obs_scale
                .iter()
                .map(|s| s * rng.random_range(-2.0..2.0))
                .collect(),
            action: (0..spec.action_dim)
                .map(|_| rng.random_range(spec.action_low..spec.action_high))
                .collect(),
            reward: rng.random_range(-5.0..1.0),
            next_obs: spec
                .obs_scale
                .iter()
                .map(|s| s * rng.random_range(-2.0..2.0))
                .collect(),
            done: i % 4 == 0,
        })
        .collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Smallest |pre-activation| over the hidden ReLU units for one input. Central
/// differences are only meaningful away from these kinks.
fn kink_margin(net: &Mlp, input: &[f64]) -> f64 {
    let mut x = input.to_vec();
    let mut margin = f64::INFINITY;
    for l in 0..net.sizes().len() - 2 {
        let (w, b) = net.layer(l);
        let z: Vec<f64> = w
            .chunks_exact(x.len())
            .zip(b)
            .map(|(row, bias)| row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + bias)
            .collect();
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        x = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    margin
}

/// Margin to the nearest kink over every network evaluation the two gradients depend on.
fn batch_margin(actor: &Mlp, critic: &Mlp, spec: &NetSpec, batch: &[Transition]) -> f64 {
    batch
        .iter()
        .map(|t| {
            let x = spec.normalize_obs(&t.obs);
            let greedy: Vec<f64> = actor
                .forward(&x)
                .iter()
                .map(|&u| spec.denormalize_action(u))
                .collect();
            kink_margin(critic, &spec.critic_input(&t.obs, &t.action))
                .min(kink_margin(actor, &x))
                .min(kink_margin(critic, &spec.critic_input(&t.obs, &greedy)))
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_3(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let eps = 1e-5;
    let (mut worst_actor, mut worst_critic) = (0.0_f64, 0.0_f64);
    let mut checked = 0usize;
    for net in 0..20 {
        let spec = NetSpec {
            obs_scale: (0..rng.random_range(2..6))
                .map(|_| rng.random_range(0.5..50.0))
                .collect(),
            action_dim: rng.random_range(1..4),
            action_low: 40.0,
            action_high: 1000.0,
        };
        let hp = Hyperparams {
            hidden: [rng.random_range(3..9), rng.random_range(3..9)],
            ..Hyperparams::default()
        };
        let mut agent = DdpgAgent::new(spec.clone(), hp, 1000 + net).unwrap();
        // Full-size output weights keep the tanh away from its linear region.
        agent.actor.scale_output_layer(1e3);
        let mut target = agent.critic.clone();
        for p in target.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let data = loop {
            let data = random_batch(&mut rng, &spec, 7);
            if batch_margin(&agent.actor, &agent.critic, &spec, &data) > 1e-3 {
                break data;
            }
        };
        let batch: Vec<&Transition> = data.iter().collect();

        let loss = |c: &Mlp| {
            critic_loss_and_grad(c, &target, &agent.actor_target, &spec, &batch, 0.99, 1.0).0
        };
        let (_, cg) = critic_loss_and_grad(
            &agent.critic,
            &target,
            &agent.actor_target,
            &spec,
            &batch,
            0.99,
            1.0,
        );
        for i in 0..agent.critic.param_count() {
            let mut p = agent.critic.clone();
            p.params_mut()[i] += eps;
            let mut m = agent.critic.clone();
            m.params_mut()[i] -= eps;
            let fd = (loss(&p) - loss(&m)) / (2.0 * eps);
            worst_critic = worst_critic.max(rel_err(cg.params()[i], fd));
            checked += 1;
        }

        let objective = |a: &Mlp| actor_objective_and_grad(a, &agent.critic, &spec, &batch).0;
        let (_, ag) = actor_objective_and_grad(&agent.actor, &agent.critic, &spec, &batch);
        for i in 0..agent.actor.param_count() {
            let mut p = agent.actor.clone();
            p.params_mut()[i] += eps;
            let mut m = agent.actor.clone();
            m.params_mut()[i] -= eps;
            let fd = (objective(&p) - objective(&m)) / (2.0 * eps);
            worst_actor = worst_actor.max(rel_err(ag.params()[i], fd));
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    report.record(
        "3",
        worst_actor < 1e-4 && worst_critic < 1e-4 && elapsed < Duration::from_secs(30),
        format!(
            "20 nets, {checked} params: max rel err actor {worst_actor:.2e}, critic {worst_critic:.2e} (< 1e-4), {:.2} s (< 30 s)",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 4: dynamics

fn criterion_4(report: &mut Report) {
    let params = VehicleParams::default();
    let mut odd = true;
    let mut bounded = true;
    for mu in [0.1, 0.3, 0.5, 0.9, 1.0] {
        let tire = TireParams::for_vehicle(&params, mu);
        for fz in [500.0, 3000.0, 4500.0, 8000.0] {
            let peak = mu * fz;
            for k in 0..=4000 {
                let s = -2.0 + k as f64 * 1e-3;
                let f = pacejka(s, peak, &tire).unwrap();
                let g = pacejka(-s, peak, &tire).unwrap();
                odd &= f == -g;
                bounded &= f.abs() <= peak;
            }
        }
    }

    // Straight, unpowered rolling for 15 s: every lateral quantity stays put.
    let tire = TireParams::for_vehicle(&params, 0.9);
    let mut state = VehicleState::straight(27.78, &params);
    let mut worst_step = 0.0_f64;
    for _ in 0..15_000 {
        let next = step_rk4(&state, &PlantInput::default(), &tire, &params, 1e-3).unwrap();
        let drift = [
            next.vx - state.vx,
            next.vy - state.vy,
            next.yaw - state.yaw,
            next.yaw_rate - state.yaw_rate,
            next.pos_y - state.pos_y,
        ]
        .iter()
        .fold(0.0_f64, |a, d| a.max(d.abs()));
        worst_step = worst_step.max(drift);
        state = next;
    }

    // RK4 on x' = A x, A = [[0, 1], [-1, 0]].
    let err = |h: f64| {
        let steps = (1.0 / h).round() as usize;
        let mut x = [1.0, 0.0];
        for _ in 0..steps {
            x = rk4_step(&x, h, |s| Ok([s[1], -s[0]])).unwrap();
        }
        ((x[0] - 1f64.cos()).powi(2) + (x[1] + 1f64.sin()).powi(2)).sqrt()
    };
    let order = (err(0.1) / err(0.05)).log2();
    report.record(
        "4",
        odd && bounded && worst_step <= 1e-9 && order >= 3.9,
        format!(
            "odd symmetry exact: {odd}; |F| <= mu Fz: {bounded}; straight-line drift {worst_step:.2e}/step (<= 1e-9); RK4 order {order:.3} (>= 3.9)"
        ),
    );
}

// ---------------------------------------------------------------- 5: reward

fn criterion_5(report: &mut Report) {
    let a = reward_terms(&CgError::new(0.0, 0.0, 0.0), false).total;
    let b = reward_terms(&CgError::new(200.0, 0.0, 0.0), false).total;
    let c = reward_terms(&CgError::new(0.0, 0.0, 0.0), true).total;
    report.record(
        "5",
        a == 7.0 && b == -3994.0 && c == 1.0,
        format!("r = {a}, {b}, {c} (expected 7, -3994, 1)"),
    );
}

// ---------------------------------------------------------------- 6: learning

struct Trained {
    seed: u64,
    rewards: Vec<f64>,
    actor: tvtune_core::ddpg::ActorModel,
    elapsed: Duration,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn first_last_50(r: &[f64]) -> (f64, f64) {
    let k = 50.min(r.len());
    (mean(&r[..k]), mean(&r[r.len() - k..]))
}

fn criterion_6(report: &mut Report, runs: &[Trained]) {
    let max_episode_reward = 30.0 * 7.0;
    let mut progress_all = true;
    let mut any_half = false;
    let mut details = Vec::new();
    for run in runs {
        let (first, last) = first_last_50(&run.rewards);
        let fast = run.elapsed < Duration::from_secs(3600);
        progress_all &= fast && last > first;
        any_half |= last > 0.5 * max_episode_reward;
        details.push(format!(
            "seed {}: {:.0} s, first-50 {first:.4e}, final-50 {last:.4e}",
            run.seed,
            run.elapsed.as_secs_f64()
        ));
    }
    report.record(
        "6a",
        progress_all,
        format!(
            "final-50 mean > first-50 mean within 1 h: {}",
            details.join("; ")
        ),
    );
    let best = runs
        .iter()
        .map(|r| first_last_50(&r.rewards).1)
        .fold(f64::NEG_INFINITY, f64::max);
    report.record(
        "6b",
        any_half,
        format!("best final-50 mean {best:.4e} vs 0.5 x 210 = 105"),
    );
}

// ---------------------------------------------------------------- 7, 8: sweep

fn row(rows: &[EvalRow], mu: f64, v0: f64, tuner: Tuner) -> &EvalRow {
    rows.iter()
        .find(|r| r.mu == mu && r.v0_kmh == v0 && r.tuner == tuner.name())
        .expect("sweep row present")
}

fn criterion_7(report: &mut Report, rows: &[EvalRow]) {
    let d = row(rows, 0.4, 100.0, Tuner::Ddpg).max_abs_ex;
    let g = row(rows, 0.4, 100.0, Tuner::Ga).max_abs_ex;
    let m = row(rows, 0.4, 100.0, Tuner::Manual).max_abs_ex;
    report.record(
        "7",
        d < g && g < m,
        format!("mu 0.4, 100 km/h: max|e_x| ddpg {d:.2} N, ga {g:.2} N, manual {m:.2} N (need ddpg < ga < manual)"),
    );
}

/// Monotone up to one inversion of at most 5 % of the neighbouring value.
fn near_monotone(values: &[f64], increasing: bool) -> bool {
    let mut inversions = 0;
    for w in values.windows(2) {
        let step = if increasing { w[1] - w[0] } else { w[0] - w[1] };
        if step < 0.0 {
            inversions += 1;
            if -step > 0.05 * w[0].abs() {
                return false;
            }
        }
    }
    inversions <= 1
}

fn criterion_8(report: &mut Report, rows: &[EvalRow]) {
    let mut pass = true;
    let mut details = Vec::new();
    for tuner in Tuner::ALL {
        let by_mu: Vec<f64> = [0.4, 0.5, 0.6, 0.7]
            .iter()
            .map(|&mu| row(rows, mu, 100.0, tuner).max_abs_ex)
            .collect();
        let by_v: Vec<f64> = [70.0, 90.0, 110.0, 130.0]
            .iter()
            .map(|&v| row(rows, 0.4, v, tuner).max_abs_ex)
            .collect();
        let ok = near_monotone(&by_mu, false) && near_monotone(&by_v, true);
        pass &= ok;
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.1}"))
                .collect::<Vec<_>>()
                .join("/")
        };
        details.push(format!("{tuner}: mu {} ; v0 {}", fmt(&by_mu), fmt(&by_v)));
    }
    report.record("8", pass, details.join(" | "));
}

// ---------------------------------------------------------------- 9: generalization

fn criterion_9(report: &mut Report, cfg: &RunConfig, actor: &tvtune_core::ddpg::ActorModel) {
    let scenario = Cell::new(0.3, 80.0)
        .episode(&cfg.episode)
        .with_profile(DriverProfile::step_steer());
    let (d, _) = evaluate(cfg, Tuner::Ddpg, &Policy::Actor(actor), &scenario, false).unwrap();
    let manual = Policy::Fixed(tvtune_core::baselines::manual_w_df());
    let (m, _) = evaluate(cfg, Tuner::Manual, &manual, &scenario, false).unwrap();
    let completed = !d.terminated && d.max_abs_sideslip_deg <= 8.0;
    report.record(
        "9",
        completed && d.performance_integral < m.performance_integral,
        format!(
            "mu 0.3, 80 km/h step steer: ddpg terminated {} after {} steps, max |beta| {:.2} deg, P integral {:.4e}; manual terminated {}, P integral {:.4e}",
            d.terminated, d.steps, d.max_abs_sideslip_deg, d.performance_integral, m.terminated, m.performance_integral
        ),
    );
}

// ---------------------------------------------------------------- 10: determinism

fn read_all(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names
        .iter()
        .map(|n| fs::read(dir.join(n)).unwrap())
        .collect()
}

fn criterion_10(report: &mut Report) {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        seed: 11,
        ..RunConfig::default()
    };
    cfg.hyper.episodes = 5;
    cfg.ga.population_size = 6;
    cfg.ga.generations = 3;
    let cell = Cell::new(0.45, 95.0);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let train = cmd_train(&cfg, &dir.join("train")).unwrap();
        cmd_sweep(
            &cfg,
            Some(&train.model_path),
            &[cell],
            &Tuner::ALL,
            &dir.join("sweep"),
        )
        .unwrap();
        cmd_generalize(
            &cfg,
            Some(&train.model_path),
            Cell::new(0.3, 80.0),
            &Tuner::ALL,
            &dir.join("gen"),
        )
        .unwrap();
        cmd_ga_tune(&cfg, cell, &dir.join("ga")).unwrap();
        let mut files = read_all(&dir.join("train"), &[REWARDS_FILE, MODEL_FILE]);
        files.extend(read_all(&dir.join("sweep"), &[SWEEP_FILE]));
        files.extend(read_all(
            &dir.join("gen"),
            &[
                GENERALIZE_FILE,
                "trace_ddpg.csv",
                "trace_ga.csv",
                "trace_manual.csv",
            ],
        ));
        files.extend(read_all(&dir.join("ga"), &[GA_TRACE_FILE, GA_BEST_FILE]));
        outputs.push(files);
    }
    let same = outputs[0] == outputs[1];
    report.record(
        "10",
        same,
        format!("train, sweep, generalize and ga-tune repeated with equal seeds: {} files byte-identical: {same}", outputs[0].len()),
    );
}

fn main() {
    let mut report = Report { lines: Vec::new() };
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_10(&mut report);

    let base = RunConfig::default();
    let runs: Vec<Trained> = [1u64, 2, 3]
        .iter()
        .map(|&seed| {
            let cfg = RunConfig {
                seed,
                ..base.clone()
            };
            let start = Instant::now();
            let out = train_agent(&cfg).expect("training completes");
            Trained {
                seed,
                rewards: out.rewards,
                actor: out.actor,
                elapsed: start.elapsed(),
            }
        })
        .collect();
    criterion_6(&mut report, &runs);

    // The policy carried forward is the seed with the best final-50 training reward.
    let chosen = runs
        .iter()
        .max_by(|a, b| {
            first_last_50(&a.rewards)
                .1
                .total_cmp(&first_last_50(&b.rewards).1)
        })
        .unwrap();
    println!("evaluating the seed-{} policy", chosen.seed);

    let mut cells: Vec<Cell> = [0.4, 0.5, 0.6, 0.7]
        .iter()
        .map(|&mu| Cell::new(mu, 100.0))
        .collect();
    cells.extend(
        [70.0, 90.0, 110.0, 130.0]
            .iter()
            .map(|&v| Cell::new(0.4, v)),
    );
    let rows = sweep(
        &base,
        Some(&chosen.actor),
        &cells,
        &Tuner::ALL,
        &DriverProfile::training(),
    )
    .unwrap();
    criterion_7(&mut report, &rows);
    criterion_8(&mut report, &rows);
    criterion_9(&mut report, &base, &chosen.actor);

    let failed: Vec<&str> = report
        .lines
        .iter()
        .filter(|(_, pass, _)| !pass)
        .map(|(id, _, _)| id.as_str())
        .collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        report.lines.len() - failed.len(),
        report.lines.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failed.join(", "))
        }
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
