#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xrsim::dqn::{sync_target, td_loss_and_grad, train_step, Adam, DqnConfig, Mlp, Transition};
use xrsim::energy::{lifetime_projection, BatteryState};
use xrsim::env::NormalizedState;
use xrsim::harness::metrics::{median, mode_fraction_series};
use xrsim::harness::{run_experiment, sweep, RunResult, SweepFactor, SweepGrid};
use xrsim::network::BandwidthProfile;
use xrsim::{ActionId, ExecutionMode, PolicyKind, ProfileSpec, ScenarioSpec};

type Outcome = Result<String, String>;
type Criterion = Box<dyn Fn(&mut Runs) -> Outcome>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs are cached by their full TOML so several criteria can share them.
#[derive(Default)]
struct Runs {
    cache: HashMap<(String, u64), RunResult>,
}

impl Runs {
    fn get(&mut self, spec: &ScenarioSpec, seed: u64) -> &RunResult {
        self.cache
            .entry((spec.to_toml(), seed))
            .or_insert_with(|| run_experiment(spec, seed).expect("run"))
    }

    fn all(&mut self, spec: &ScenarioSpec) -> Vec<RunResult> {
        spec.seeds.iter().map(|&s| self.get(spec, s).clone()).collect()
    }

    fn median_of(&mut self, spec: &ScenarioSpec, f: impl Fn(&RunResult) -> f64) -> f64 {
        let xs: Vec<f64> = self.all(spec).iter().map(f).collect();
        median(&xs)
    }
}

fn spec(policy: PolicyKind, profile: ProfileSpec) -> ScenarioSpec {
    ScenarioSpec::new(policy, profile)
}

fn stable() -> ProfileSpec {
    ProfileSpec::stable(1000.0)
}

fn c01_battery(runs: &mut Runs) -> Outcome {
    let one = BatteryState::new(16.6, 1.0).unwrap();
    let h = lifetime_projection(&one, 20.8).unwrap();
    let rounded = (h * 1000.0).round() / 1000.0;
    let oracle = 16.6 / 20.8;
    let three = BatteryState::new(16.6, 3.0).unwrap();
    let analytic = three.time_to_empty_s(20.8);
    let sim = runs
        .get(&spec(PolicyKind::Local, stable()).with_horizon(2000.0), 1)
        .metrics
        .clone();
    let ok = rounded == 0.798
        && (h - oracle).abs() < 1e-12
        && (analytic / 960.0 - 1.0).abs() <= 0.02
        && sim.depleted
        && (sim.survived_s / 960.0 - 1.0).abs() <= 0.02
        && (sim.survived_s - analytic).abs() < 1e-6;
    check(
        ok,
        format!(
            "k=1 lifetime {h:.6} h (3 dp {rounded}); k=3 empty at {analytic:.2} s analytic, {:.2} s simulated",
            sim.survived_s
        ),
    )
}

fn c02_energy(runs: &mut Runs) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (p, prof) in [
        (PolicyKind::Rl, ProfileSpec::Variable),
        (PolicyKind::Threshold, ProfileSpec::Variable),
        (PolicyKind::Offload, stable()),
        (PolicyKind::Local, stable()),
    ] {
        let s = spec(p, prof);
        let m = runs.get(&s, 1).metrics.clone();
        let lhs = 3.0 * m.energy_j;
        let rhs = (100.0 - m.final_soc) / 100.0 * 16.6 * 3600.0;
        let rel = (lhs - rhs).abs() / rhs;
        worst = worst.max(rel);
        lines.push(format!("{p} {rel:.1e}"));
    }
    check(worst < 1e-9, format!("max relative error {worst:.2e} ({})", lines.join(", ")))
}

fn c03_compliance_per_watt(runs: &mut Runs) -> Outcome {
    let m = runs.get(&spec(PolicyKind::Local, stable()), 1).metrics.clone();
    let identity = m.compliance_per_watt == m.compliance_pct / m.avg_power_w;
    let others: Vec<_> = [PolicyKind::Offload, PolicyKind::Greedy]
        .iter()
        .map(|&p| runs.get(&spec(p, stable()), 1).metrics.clone())
        .collect();
    let identity_all = identity && others.iter().all(|o| o.compliance_per_watt == o.compliance_pct / o.avg_power_w);
    let ok = identity_all && (m.compliance_per_watt - 100.0 / 20.8).abs() <= 0.05 && (m.compliance_per_watt - 4.81).abs() <= 0.05;
    check(
        ok,
        format!(
            "LOCAL {:.1}% at {:.3} W -> {:.4} per W; identity holds: {identity_all}",
            m.compliance_pct, m.avg_power_w, m.compliance_per_watt
        ),
    )
}

fn c04_gradient() -> Outcome {
    let sizes = DqnConfig::default().layer_sizes();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut net = Mlp::new(&sizes, &mut rng);
        let state = NormalizedState(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let t = Transition {
            state,
            action: ActionId::new(rng.random_range(0..18)).unwrap(),
            reward: 0.0,
            next_state: state,
            done: true,
        };
        let batch = [t];
        let y = [rng.random_range(-2.0..2.0)];
        let mut analytic = net.zero_grads();
        td_loss_and_grad(&net, &batch, &y, &mut analytic);
        let mut scratch = net.zero_grads();
        for i in 0..net.param_count() {
            let p0 = net.params()[i];
            net.params_mut()[i] = p0 + h;
            let lp = td_loss_and_grad(&net, &batch, &y, &mut scratch);
            net.params_mut()[i] = p0 - h;
            let lm = td_loss_and_grad(&net, &batch, &y, &mut scratch);
            net.params_mut()[i] = p0;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[i];
            let scale = a.abs().max(numeric.abs());
            // Below this both sides are dominated by rounding in the loss.
            if scale < 1e-7 {
                assert!((a - numeric).abs() < 1e-9, "param {i}: {a} vs {numeric}");
                continue;
            }
            worst = worst.max((a - numeric).abs() / scale);
            checked += 1;
        }
    }
    check(worst < 1e-4, format!("5 seeds, {checked} nonzero gradients, max relative error {worst:.2e}"))
}

/// Two states, two actions, deterministic transitions.
fn two_state_mdp() -> ([[f64; 2]; 2], [[usize; 2]; 2]) {
    let reward = [[0.5, 0.0], [0.0, 2.0]];
    let next = [[0, 1], [0, 1]];
    (reward, next)
}

fn c05_bellman() -> Outcome {
    let gamma = 0.5;
    let (reward, next) = two_state_mdp();
    let mut q_star = [[0.0f64; 2]; 2];
    for _ in 0..200 {
        let v = [q_star[0][0].max(q_star[0][1]), q_star[1][0].max(q_star[1][1])];
        for s in 0..2 {
            for a in 0..2 {
                q_star[s][a] = reward[s][a] + gamma * v[next[s][a]];
            }
        }
    }
    let obs = |s: usize| {
        let mut x = [0.0; 5];
        x[s] = 1.0;
        NormalizedState(x)
    };
    let batch: Vec<Transition> = (0..2)
        .flat_map(|s| {
            (0..2).map(move |a| Transition {
                state: obs(s),
                action: ActionId::new(a).unwrap(),
                reward: reward[s][a],
                next_state: obs(next[s][a]),
                done: false,
            })
        })
        .collect();
    let sizes = [5, 32, 32, 2];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut target = net.clone();
    let mut opt = Adam::new(net.param_count(), 1e-3);
    for round in 0..60 {
        if round == 40 {
            opt = Adam::new(net.param_count(), 1e-4);
        }
        for _ in 0..400 {
            train_step(&mut net, &target, &batch, &mut opt, gamma);
        }
        sync_target(&net, &mut target);
    }
    let mut worst: f64 = 0.0;
    let mut learned = [[0.0; 2]; 2];
    for s in 0..2 {
        let q = net.forward(obs(s).as_slice());
        for a in 0..2 {
            learned[s][a] = q[a];
            worst = worst.max((q[a] - q_star[s][a]).abs());
        }
    }
    check(
        worst < 1e-3,
        format!("Q* {q_star:?}, learned {learned:.4?}, max error {worst:.2e}"),
    )
}

fn c06_saturation(runs: &mut Runs) -> Outcome {
    let s = spec(PolicyKind::Offload, ProfileSpec::stable(1.0)).with_horizon(120.0);
    let r = runs.get(&s, 1).clone();
    let max_depth = s.env.max_queue_depth;
    let steady: Vec<_> = r.decisions.iter().filter(|d| d.t >= 10.0).collect();
    let all_full = steady.iter().all(|d| d.queue_depth == max_depth);
    let high = r.decisions.iter().all(|d| d.q == xrsim::QualityLevel::High && d.m == ExecutionMode::Offload);
    let ok = r.metrics.compliance_pct < 2.0 && all_full && high && !steady.is_empty();
    check(
        ok,
        format!(
            "compliance {:.2}%, queue depth {} of {} after 10 s in {} decisions",
            r.metrics.compliance_pct,
            if all_full { "pinned at max" } else { "NOT pinned" },
            max_depth,
            steady.len()
        ),
    )
}

fn c07_stable_ordering(runs: &mut Runs) -> Outcome {
    let c = |runs: &mut Runs, p| runs.median_of(&spec(p, stable()), |r| r.metrics.compliance_pct);
    let w = |runs: &mut Runs, p| runs.median_of(&spec(p, stable()), |r| r.metrics.avg_power_w);
    let (cl, cr, co) = (c(runs, PolicyKind::Local), c(runs, PolicyKind::Rl), c(runs, PolicyKind::Offload));
    let (pl, pr, po) = (w(runs, PolicyKind::Local), w(runs, PolicyKind::Rl), w(runs, PolicyKind::Offload));
    let ok = cl == 100.0 && cl > cr && cr > co && pl > pr && pr <= 1.15 * po && cr >= co + 5.0;
    check(
        ok,
        format!("compliance LOCAL {cl:.1} RL {cr:.1} OFFLOAD {co:.1}; power LOCAL {pl:.2} RL {pr:.2} OFFLOAD {po:.2} W"),
    )
}

fn c08_variable_robustness(runs: &mut Runs) -> Outcome {
    let mut drop = HashMap::new();
    for p in [PolicyKind::Rl, PolicyKind::Offload] {
        let st = runs.median_of(&spec(p, stable()), |r| r.metrics.compliance_pct);
        let var = runs.median_of(&spec(p, ProfileSpec::Variable), |r| r.metrics.compliance_pct);
        drop.insert(p, (st, var, st - var));
    }
    let mut per_level = Vec::new();
    let mut all_better = true;
    for bw in BandwidthProfile::variable().levels() {
        let at = |runs: &mut Runs, p| {
            runs.median_of(&spec(p, ProfileSpec::Variable), |r| r.metrics.bucket(bw).unwrap().compliance_pct)
        };
        let (rl, off) = (at(runs, PolicyKind::Rl), at(runs, PolicyKind::Offload));
        all_better &= rl > off;
        per_level.push(format!("{bw}: {rl:.1}/{off:.1}"));
    }
    let (rl, off) = (drop[&PolicyKind::Rl], drop[&PolicyKind::Offload]);
    check(
        rl.2 < off.2 && all_better,
        format!(
            "drop RL {:.1} pp ({:.1}->{:.1}), OFFLOAD {:.1} pp ({:.1}->{:.1}); per level RL/OFFLOAD {}",
            rl.2,
            rl.0,
            rl.1,
            off.2,
            off.0,
            off.1,
            per_level.join(", ")
        ),
    )
}

fn c09_adaptation(runs: &mut Runs) -> Outcome {
    let s = spec(PolicyKind::Rl, ProfileSpec::Variable);
    let profile = BandwidthProfile::variable();
    let window = 30;
    let warmup = 2.0 * profile.cycle_length();
    let mut low = Vec::new();
    let mut high = Vec::new();
    for r in runs.all(&s) {
        let local: Vec<bool> = r.decisions.iter().map(|d| d.m == ExecutionMode::Local).collect();
        let series = mode_fraction_series(&local, window);
        let group = |bw: f64| if bw <= 10.0 { 0 } else if bw >= 500.0 { 2 } else { 1 };
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for i in window - 1..r.decisions.len() {
            let d = &r.decisions[i];
            if d.t < warmup {
                continue;
            }
            // Only windows that lie entirely inside one group of phases.
            let g = group(d.bandwidth);
            if r.decisions[i + 1 - window..=i].iter().any(|x| group(x.bandwidth) != g) {
                continue;
            }
            match g {
                0 => lo.push(series[i]),
                2 => hi.push(series[i]),
                _ => {}
            }
        }
        if lo.is_empty() || hi.is_empty() {
            return Err(format!("seed {} has no full windows after warmup", r.metrics.seed));
        }
        low.push(lo.iter().sum::<f64>() / lo.len() as f64);
        high.push(hi.iter().sum::<f64>() / hi.len() as f64);
    }
    let (ml, mh) = (median(&low), median(&high));
    check(
        ml > 0.8 && mh < 0.2,
        format!("LOCAL fraction at 1-10 Mbps {ml:.3} {low:.3?}, at 500-1000 Mbps {mh:.3} {high:.3?}"),
    )
}

fn c10_baselines(runs: &mut Runs) -> Outcome {
    let g = spec(PolicyKind::Greedy, stable());
    let warmup_s = 60.0;
    let mut fracs = Vec::new();
    for r in runs.all(&g) {
        let post: Vec<_> = r.decisions.iter().filter(|d| d.t >= warmup_s).collect();
        let n12 = post.iter().filter(|d| d.action == 12).count();
        fracs.push(n12 as f64 / post.len() as f64);
    }
    let greedy = median(&fracs);
    let th_power = runs.median_of(&spec(PolicyKind::Threshold, ProfileSpec::Variable), |r| r.metrics.avg_power_w);
    let rl_power = runs.median_of(&spec(PolicyKind::Rl, ProfileSpec::Variable), |r| r.metrics.avg_power_w);
    let long = spec(PolicyKind::Threshold, ProfileSpec::Variable).with_horizon(2400.0);
    let long_runs = runs.all(&long);
    let depleted = long_runs.iter().all(|r| r.metrics.depleted && r.metrics.survived_s < 2400.0);
    let survived: Vec<f64> = long_runs.iter().map(|r| r.metrics.survived_s).collect();
    check(
        greedy >= 0.8 && th_power > rl_power && depleted,
        format!(
            "GREEDY action 12 share {greedy:.3}; power THRESHOLD {th_power:.2} vs RL {rl_power:.2} W; THRESHOLD empties at {survived:.0?} s"
        ),
    )
}

fn c11_determinism(runs: &mut Runs) -> Outcome {
    let mut same = true;
    for (p, prof) in [(PolicyKind::Rl, ProfileSpec::Variable), (PolicyKind::Greedy, ProfileSpec::Variable)] {
        let s = spec(p, prof).with_horizon(300.0);
        let a = serde_json::to_string(&run_experiment(&s, 5).unwrap().metrics).unwrap();
        let b = serde_json::to_string(&run_experiment(&s, 5).unwrap().metrics).unwrap();
        same &= a == b;
    }
    let v = spec(PolicyKind::Rl, ProfileSpec::Variable);
    let seqs: Vec<Vec<(u64, u64)>> = runs
        .all(&v)
        .iter()
        .map(|r| r.decisions.iter().map(|d| (d.t.to_bits(), d.bandwidth.to_bits())).collect())
        .collect();
    let bw_same = seqs.windows(2).all(|w| w[0] == w[1]);
    check(same && bw_same, format!("metrics JSON identical: {same}; bandwidth sequence identical across seeds: {bw_same}"))
}

fn c12_sweeps() -> Outcome {
    let base = spec(PolicyKind::Rl, ProfileSpec::Variable);
    let std = SweepGrid::standard();
    let grid = SweepGrid {
        decision_interval: vec![],
        ..std
    };
    let rows = sweep(&base, &grid, None).map_err(|e| e.to_string())?;
    let get = |f: SweepFactor, v: f64| {
        rows.iter()
            .find(|r| r.factor == f && r.value == v)
            .map(|r| r.summary.median("compliance_pct"))
            .unwrap()
    };
    let eps: Vec<f64> = [0.999, 0.9975, 0.995].iter().map(|&v| get(SweepFactor::EpsDecay, v)).collect();
    let gam: Vec<f64> = [0.95, 0.99, 0.999].iter().map(|&v| get(SweepFactor::Gamma, v)).collect();
    let lam: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&v| get(SweepFactor::Lambda, v)).collect();
    let spread = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lam.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = eps[0] < eps[1] && eps[1] < eps[2] && gam[1] >= gam[0] && spread <= 10.0;
    check(
        ok,
        format!("eps-decay {eps:.1?}; gamma {gam:.1?}; lambda {lam:.1?} (spread {spread:.1} pp)"),
    )
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let mut failed = 0;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("battery identities", Box::new(c01_battery)),
        ("energy conservation", Box::new(c02_energy)),
        ("compliance per watt", Box::new(c03_compliance_per_watt)),
        ("gradient check", Box::new(|_| c04_gradient())),
        ("two-state Bellman fixed point", Box::new(|_| c05_bellman())),
        ("queue saturation", Box::new(c06_saturation)),
        ("stable-profile ordering", Box::new(c07_stable_ordering)),
        ("variable-profile robustness", Box::new(c08_variable_robustness)),
        ("bandwidth adaptation", Box::new(c09_adaptation)),
        ("baseline signatures", Box::new(c10_baselines)),
        ("determinism", Box::new(c11_determinism)),
        ("sweep directionality", Box::new(|_| c12_sweeps())),
    ];
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = f(&mut runs);
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS {:>2} {name} [{secs:.1}s]: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {d}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
