//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use metaspec_core::autodiff::{Tape, Tensor};
use metaspec_core::env::{
    fading_step, observation_len, task_from_seed, AllocationAction, Env, EnvConfig, EnvState, NetworkConfig,
};
use metaspec_core::harness::{
    compare_report, evaluate_checkpoint, run_experiment, write_task_evaluations, RunOutput, RunSetup,
    TrainContext,
};
use metaspec_core::meta::{adaptation_gain, meta_gradient, MetaConfig, QuadraticTask};
use metaspec_core::nn::{build_policy, ArchKind, ArchSpec, Checkpoint, ParamSet, PolicyNet};
use metaspec_core::rl::{collect_trajectory, task_loss, EpisodeMetrics, LossConfig, Trajectory};
use metaspec_core::rng::{seeded, stream};
use rand::Rng;
use rayon::prelude::*;

const ENV_ORACLE_PAIRS: usize = 1000;
const ENV_ORACLE_REL_TOL: f64 = 1e-9;
const ENV_ORACLE_BUDGET: Duration = Duration::from_secs(10);

const SAFETY_TASKS: u64 = 100;
const SAFETY_STEPS_PER_TASK: usize = 100;
const SAFETY_BUDGET: Duration = Duration::from_secs(30);

const GRAD_POINTS: u64 = 20;
const GRAD_COORDS_PER_POINT: usize = 4;
const GRAD_FD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error, so near-zero components are
/// judged on absolute error. Central differences at this step carry about
/// 1e-10 of cancellation noise on losses of order 10.
const GRAD_REL_FLOOR: f64 = 1e-6;
const GRAD_BUDGET: Duration = Duration::from_secs(120);

const META_GRAD_TOL: f64 = 1e-8;
const META_ALPHAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

const FADING_STEPS: usize = 100_000;
const FADING_BURN_IN: usize = 1_000;
const FADING_KAPPA: f64 = 0.9;
const FADING_REL_TOL: f64 = 0.05;

const ADAPT_TASKS: u64 = 100;
const ADAPT_MIN_FRACTION: f64 = 0.8;

const REPRO_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const REPRO_THROUGHPUT_RATIO: f64 = 2.0;
const REPRO_VIOLATION_RATIO: f64 = 0.5;
const REPRO_MIN_FAIRNESS: f64 = 0.7;
const REPRO_BUDGET: Duration = Duration::from_secs(3600);

const META_ALGORITHMS: [&str; 3] = ["maml_mlp", "maml_rnn", "maml_rnn_attention"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// ---------------------------------------------------------------- criterion 1

struct OracleStep {
    sinr: Vec<f64>,
    throughput: f64,
    fairness: f64,
    cost: f64,
    penalty: f64,
}

/// Straight-line reimplementation of one transition's reward terms.
fn oracle_step(cfg: &NetworkConfig, state: &EnvState, levels: &[usize]) -> OracleStep {
    let (n_bs, n_ue, n_bands) = (cfg.n_bs, cfg.n_ue, cfg.n_bands);
    let gain = |u: usize, i: usize| 10f64.powf(state.channel_db.get(u, i) / 10.0);
    let mut power = vec![0.0; n_bs * n_bands];
    for l in 0..n_bs * n_bands {
        let interference = state.interference_w.data()[l];
        power[l] = if interference < cfg.i_max_w { cfg.power_levels[levels[l]] } else { 0.0 };
    }
    let mut home = vec![0; n_ue];
    for u in 0..n_ue {
        for i in 0..n_bs {
            if state.channel_db.get(u, i) > state.channel_db.get(u, home[u]) {
                home[u] = i;
            }
        }
    }
    let mut serves: Vec<Option<usize>> = vec![None; n_bs];
    for u in 0..n_ue {
        let i = home[u];
        let better = match serves[i] {
            None => true,
            Some(v) => state.channel_db.get(u, i) > state.channel_db.get(v, i),
        };
        if better {
            serves[i] = Some(u);
        }
    }
    let mut sinr = vec![0.0; n_bs * n_bands];
    for i in 0..n_bs {
        for j in 0..n_bands {
            let p = power[i * n_bands + j];
            if let (Some(u), true) = (serves[i], p > 0.0) {
                let mut interf = cfg.noise_power_w;
                for k in 0..n_bs {
                    if k != i {
                        interf += power[k * n_bands + j] * gain(u, k);
                    }
                }
                sinr[i * n_bands + j] = p * gain(u, i) / interf;
            }
        }
    }
    let rates: Vec<f64> = (0..sinr.len())
        .filter(|&l| power[l] > 0.0)
        .map(|l| cfg.bandwidth_hz * (1.0 + sinr[l]).ln() / std::f64::consts::LN_2)
        .collect();
    let throughput: f64 = rates.iter().sum();
    let sq: f64 = rates.iter().map(|r| r * r).sum();
    let fairness = if rates.is_empty() || sq == 0.0 { 0.0 } else { (throughput * throughput / (rates.len() as f64 * sq)).min(1.0) };
    let mut cost = 0.0;
    for l in 0..power.len() {
        cost += cfg.cost_coeffs[0] * power[l] + cfg.cost_coeffs[1] * (power[l] - state.prev_power_w.data()[l]).abs();
    }
    let mut violations = 0.0;
    for l in 0..power.len() {
        if power[l] > 0.0 && sinr[l] < cfg.sinr_min_linear {
            violations += cfg.penalty_coeffs[0];
        }
    }
    for u in 0..n_ue {
        let mut served = 0.0;
        for i in 0..n_bs {
            if serves[i] == Some(u) {
                for j in 0..n_bands {
                    served += cfg.bandwidth_hz * (1.0 + sinr[i * n_bands + j]).log2();
                }
            }
        }
        let step = if served < cfg.qos_demand_bps { cfg.latency_step_ms } else { -cfg.latency_step_ms };
        if (state.qos.get(u, 0) + step).max(0.0) > cfg.latency_max_ms {
            violations += cfg.penalty_coeffs[1];
        }
    }
    OracleStep { sinr, throughput, fairness, cost, penalty: violations }
}

fn random_state(env: &Env, rng: &mut impl Rng) -> EnvState {
    let cfg = env.config();
    let mut s = env.reset(rng);
    for v in s.channel_db.data_mut() {
        *v = rng.gen_range(-130.0..-30.0);
    }
    for v in s.interference_w.data_mut() {
        *v = 10f64.powf(rng.gen_range(-9.0..-4.5));
    }
    for u in 0..cfg.n_ue {
        s.qos.set(u, 0, rng.gen_range(0.0..1.2 * cfg.latency_max_ms));
    }
    for v in s.prev_power_w.data_mut() {
        *v = cfg.power_levels[rng.gen_range(0..cfg.n_levels)];
    }
    s.t = rng.gen_range(0..cfg.episode_len);
    s
}

fn criterion_env_oracle() -> Verdict {
    let start = Instant::now();
    let cfg = EnvConfig::default();
    let mut rng = seeded(0xC1);
    let mut worst = 0.0f64;
    for pair in 0..ENV_ORACLE_PAIRS {
        let env = Env::new(cfg.network.clone(), task_from_seed(&cfg.tasks, &cfg.network, pair as u64 / 10)).unwrap();
        let state = random_state(&env, &mut rng);
        let levels: Vec<usize> = (0..cfg.network.n_links()).map(|_| rng.gen_range(0..cfg.network.n_levels)).collect();
        let action = AllocationAction::new(cfg.network.n_bs, cfg.network.n_bands, levels.clone()).unwrap();
        let got = env.step(&state, &action, &mut rng).unwrap();
        let want = oracle_step(&cfg.network, &state, &levels);
        let p = &got.reward_parts;
        for (a, b) in [
            (p.throughput_bps, want.throughput),
            (p.fairness, want.fairness),
            (p.cost, want.cost),
            (p.penalty, want.penalty),
        ] {
            worst = worst.max(rel_err(a, b));
        }
        for (a, b) in got.sinr_linear.data().iter().zip(&want.sinr) {
            worst = worst.max(rel_err(*a, *b));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= ENV_ORACLE_REL_TOL && elapsed < ENV_ORACLE_BUDGET,
        format!("{ENV_ORACLE_PAIRS} pairs, max rel err {worst:.2e} (tol {ENV_ORACLE_REL_TOL:e}), {elapsed:.1?}"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn criterion_safety() -> Verdict {
    let start = Instant::now();
    let cfg = EnvConfig::default();
    let net = &cfg.network;
    let (mut breaches, mut masked, mut steps) = (0usize, 0usize, 0usize);
    for task in 0..SAFETY_TASKS {
        let env = Env::new(net.clone(), task_from_seed(&cfg.tasks, net, 0x5AFE_0000 + task)).unwrap();
        let mut rng = stream(task, 0x5AFE);
        let mut state = env.reset(&mut rng);
        for _ in 0..SAFETY_STEPS_PER_TASK {
            let levels = (0..net.n_links()).map(|_| rng.gen_range(0..net.n_levels)).collect();
            let action = AllocationAction::new(net.n_bs, net.n_bands, levels).unwrap();
            let out = env.step(&state, &action, &mut rng).unwrap();
            for (&p, &i) in out.executed_power_w.data().iter().zip(state.interference_w.data()) {
                if i >= net.i_max_w {
                    masked += 1;
                    if p > 0.0 {
                        breaches += 1;
                    }
                }
            }
            steps += 1;
            state = if out.done { env.reset(&mut rng) } else { out.next_state };
        }
    }
    let elapsed = start.elapsed();
    verdict(
        breaches == 0 && masked > 0 && elapsed < SAFETY_BUDGET,
        format!("{steps} steps, {masked} links over the interference cap, {breaches} transmitted, {elapsed:.1?}"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn small_net(kind: ArchKind, cfg: &NetworkConfig) -> Box<dyn PolicyNet> {
    let mut spec = ArchSpec::new(kind, observation_len(cfg), cfg.n_links(), cfg.n_levels);
    spec.hidden_size = 8;
    spec.n_heads = 2;
    spec.layer_sizes = vec![8, 8];
    build_policy(&spec).unwrap()
}

fn head_loss(net: &dyn PolicyNet, params: &ParamSet, trajs: &[Trajectory], head: usize, tape: &Tape, taped: bool) -> (f64, Option<metaspec_core::nn::GradSet>) {
    let vars = if taped { params.to_vars(tape) } else { params.to_constants(tape) };
    let terms = task_loss(net, &vars, tape, trajs, &LossConfig::default()).unwrap();
    let loss = if head == 0 { terms.policy - terms.entropy.scale(0.01) } else { terms.value };
    let grads = taped.then(|| vars.grad(loss).unwrap().to_grad_set());
    (loss.item(), grads)
}

fn criterion_gradients() -> Verdict {
    let start = Instant::now();
    let mut cfg = EnvConfig::default();
    cfg.network.episode_len = 6;
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    for kind in ArchKind::ALL {
        let net = small_net(kind, &cfg.network);
        for point in 0..GRAD_POINTS {
            let params = net.init_params(&mut stream(point, 0x6AD));
            let env = Env::new(cfg.network.clone(), task_from_seed(&cfg.tasks, &cfg.network, point)).unwrap();
            let traj = collect_trajectory(net.as_ref(), &params, &env, 9, &mut stream(point, 0x6AE)).unwrap();
            let trajs = [traj];
            let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
            let mut pick = stream(point, 0x6AF);
            for head in 0..2 {
                let tape = Tape::new();
                let (_, grads) = head_loss(net.as_ref(), &params, &trajs, head, &tape, true);
                let grads = grads.unwrap();
                for _ in 0..GRAD_COORDS_PER_POINT {
                    let name = &names[pick.gen_range(0..names.len())];
                    let len = params.get(name).unwrap().len();
                    let idx = pick.gen_range(0..len);
                    let eval = |d: f64| {
                        let mut p = params.clone();
                        for (n, t) in p.iter_mut() {
                            if n == name {
                                t.data_mut()[idx] += d;
                            }
                        }
                        head_loss(net.as_ref(), &p, &trajs, head, &Tape::new(), false).0
                    };
                    let fd = (eval(GRAD_FD_STEP) - eval(-GRAD_FD_STEP)) / (2.0 * GRAD_FD_STEP);
                    let an = grads.get(name).unwrap().data()[idx];
                    let err = (fd - an).abs() / fd.abs().max(an.abs()).max(GRAD_REL_FLOOR);
                    worst = worst.max(err);
                    checks += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < GRAD_REL_TOL && elapsed < GRAD_BUDGET,
        format!("{checks} coordinates over 3 architectures x 2 heads, max rel err {worst:.2e}, {elapsed:.1?}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_meta_gradient() -> Verdict {
    let targets = [-1.5, 0.25, 2.0, 3.75];
    let tasks: Vec<_> = targets.iter().map(|&c| QuadraticTask { target: c }).collect();
    let grad = |theta: f64, alpha: f64, second_order: bool| {
        let mut p = ParamSet::new();
        p.insert(QuadraticTask::PARAM, Tensor::scalar(theta)).unwrap();
        let cfg = MetaConfig { inner_lr: alpha, second_order, meta_batch_size: tasks.len(), ..MetaConfig::default() };
        meta_gradient(&p, &tasks, &cfg).unwrap().grads.get(QuadraticTask::PARAM).unwrap().item()
    };
    let mut worst = 0.0f64;
    for theta in [-2.0, 0.5, 3.0] {
        for alpha in [0.0, 0.01, 0.1, 0.25] {
            let closed = targets
                .iter()
                .map(|c| (1.0 - 2.0 * alpha) * 2.0 * (theta - 2.0 * alpha * (theta - c) - c))
                .sum::<f64>()
                / targets.len() as f64;
            worst = worst.max((grad(theta, alpha, true) - closed).abs());
        }
    }
    let gaps: Vec<f64> =
        META_ALPHAS.iter().map(|&a| rel_err(grad(0.5, a, false), grad(0.5, a, true))).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    verdict(
        worst <= META_GRAD_TOL && monotone,
        format!("max abs err {worst:.2e} (tol {META_GRAD_TOL:e}); first-order gaps {gaps:?}"),
    )
}

// ---------------------------------------------------------------- criterion 5

fn criterion_fading() -> Verdict {
    let sigma_f = NetworkConfig::default().fading_sigma_db;
    let mut rng = seeded(0xFAD);
    let mut x = Tensor::zeros(1, 1);
    for _ in 0..FADING_BURN_IN {
        x = fading_step(&x, FADING_KAPPA, sigma_f, &mut rng);
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..FADING_STEPS {
        x = fading_step(&x, FADING_KAPPA, sigma_f, &mut rng);
        let v = x.item();
        sum += v;
        sum_sq += v * v;
    }
    let n = FADING_STEPS as f64;
    let var = sum_sq / n - (sum / n).powi(2);
    let target = sigma_f * sigma_f;
    let err = (var - target).abs() / target;
    verdict(err <= FADING_REL_TOL, format!("variance {var:.4} vs {target} ({:.2}% off, tol {}%)", err * 100.0, FADING_REL_TOL * 100.0))
}

// ------------------------------------------------------- shared training runs

fn default_setup(algorithm: &str, seed: u64) -> RunSetup {
    RunSetup::from_toml_str(&format!("algorithm = \"{algorithm}\"\nseed = {seed}\n"), Path::new(".")).unwrap()
}

struct Runs {
    /// `(algorithm, seed, output)`
    outputs: Vec<(String, u64, RunOutput)>,
    elapsed: Duration,
}

fn runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let jobs: Vec<(&str, u64)> = META_ALGORITHMS
            .iter()
            .copied()
            .chain(["ppo"])
            .flat_map(|a| REPRO_SEEDS.iter().map(move |&s| (a, s)))
            .collect();
        let outputs = jobs
            .par_iter()
            .map(|&(a, s)| (a.to_owned(), s, run_experiment(&default_setup(a, s)).expect("training run")))
            .collect();
        Runs { outputs, elapsed: start.elapsed() }
    })
}

fn run_of(algorithm: &str, seed: u64) -> &'static RunOutput {
    &runs().outputs.iter().find(|(a, s, _)| a == algorithm && *s == seed).expect("run exists").2
}

// ---------------------------------------------------------------- criterion 6

fn criterion_adaptation() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for algorithm in META_ALGORITHMS {
        let setup = default_setup(algorithm, REPRO_SEEDS[0]);
        let out = run_of(algorithm, REPRO_SEEDS[0]);
        let net = build_policy(&out.checkpoint.arch).unwrap();
        let ctx = TrainContext { setup: &setup, net: net.as_ref() };
        let cfg = setup.meta_config();
        let improved: usize = (0..ADAPT_TASKS)
            .into_par_iter()
            .map(|i| {
                let task = ctx.eval_task(i).unwrap();
                let (pre, post) = adaptation_gain(&out.checkpoint.params, &task, &cfg).unwrap();
                usize::from(post < pre)
            })
            .sum();
        let fraction = improved as f64 / ADAPT_TASKS as f64;
        pass &= fraction >= ADAPT_MIN_FRACTION;
        parts.push(format!("{algorithm} {improved}/{ADAPT_TASKS}"));
    }
    verdict(pass, format!("{} (need >= {:.0}%)", parts.join(", "), ADAPT_MIN_FRACTION * 100.0))
}

// ---------------------------------------------------------------- criterion 7

fn seed_mean(algorithm: &str) -> EpisodeMetrics {
    let finals: Vec<EpisodeMetrics> = REPRO_SEEDS.iter().map(|&s| run_of(algorithm, s).metrics.final_window()).collect();
    EpisodeMetrics::mean(0, &finals)
}

fn criterion_reproduction() -> Verdict {
    let elapsed = runs().elapsed;
    let ppo = seed_mean("ppo");
    let mut pass = elapsed < REPRO_BUDGET;
    let mut parts = vec![format!(
        "ppo thr {:.2} viol {:.1} fair {:.3}",
        ppo.throughput_mbps,
        ppo.total_violations(),
        ppo.fairness
    )];
    for algorithm in META_ALGORITHMS {
        let m = seed_mean(algorithm);
        let thr_ratio = m.throughput_mbps / ppo.throughput_mbps;
        let viol_ratio = m.total_violations() / ppo.total_violations();
        let a = thr_ratio >= REPRO_THROUGHPUT_RATIO;
        let b = viol_ratio <= REPRO_VIOLATION_RATIO;
        let c = m.fairness >= REPRO_MIN_FAIRNESS;
        pass &= a && b && c;
        let mark = |ok: bool| if ok { "ok" } else { "x" };
        parts.push(format!(
            "{algorithm} thr x{thr_ratio:.2} [{}] viol x{viol_ratio:.2} [{}] fair {:.3} [{}]",
            mark(a),
            mark(b),
            m.fairness,
            mark(c)
        ));
    }
    parts.push(format!("{} runs in {elapsed:.0?}", runs().outputs.len()));
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 8

fn criterion_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let tiny = "n_episodes = 12\neval_interval = 4\neval_tasks = 2\nhidden_size = 8\nlayer_sizes = [8]\n\
                episode_len = 10\nsupport_horizon = 10\nquery_horizon = 10\nmeta_batch_size = 2\nppo_batch_episodes = 2\n";
    let mut identical = true;
    let mut checked = Vec::new();
    let mut metric_logs = Vec::new();
    for algorithm in META_ALGORITHMS.iter().copied().chain(["ppo"]) {
        let setup = RunSetup::from_toml_str(&format!("algorithm = \"{algorithm}\"\nseed = 5\n{tiny}"), Path::new(".")).unwrap();
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let out = run_experiment(&setup).unwrap();
            let d = dir.path().join(format!("{algorithm}_{rep}"));
            out.write_to(&d).unwrap();
            bytes.push((std::fs::read(d.join("metrics.csv")).unwrap(), d));
        }
        identical &= bytes[0].0 == bytes[1].0;
        checked.push(format!("train/{algorithm}"));

        let ckpt = bytes[0].1.join("checkpoint.bin");
        let eval_csv = || {
            let mut buf = Vec::new();
            write_task_evaluations(&evaluate_checkpoint(&ckpt, 0..3).unwrap(), &mut buf).unwrap();
            buf
        };
        identical &= eval_csv() == eval_csv();
        checked.push(format!("evaluate/{algorithm}"));
        metric_logs.push(bytes[0].1.join("metrics.csv"));
    }
    let mut reports = Vec::new();
    for rep in 0..2 {
        let out = dir.path().join(format!("report_{rep}"));
        compare_report(&metric_logs, &out).unwrap();
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        reports.push(files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>());
    }
    identical &= reports[0] == reports[1];
    checked.push("compare".into());
    verdict(identical, format!("byte-identical CSVs across repeated {}", checked.join(", ")))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_checkpoint() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = NetworkConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ArchKind::ALL {
        let spec = ArchSpec::new(kind, observation_len(&cfg), cfg.n_links(), cfg.n_levels);
        let net = build_policy(&spec).unwrap();
        let mut params = net.init_params(&mut seeded(kind as u64 + 9));
        let mut rng = seeded(99);
        for (_, t) in params.iter_mut() {
            for v in t.data_mut() {
                *v += rng.gen_range(-1.0..1.0) * 1e-3;
            }
        }
        let path = dir.path().join(format!("{}.bin", kind.name()));
        let ckpt = Checkpoint { arch: spec.clone(), metadata: Default::default(), params: params.clone() };
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load_for(&path, &spec).unwrap();
        let bits = |p: &ParamSet| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let same = bits(&back.params) == bits(&params) && back.params == params;

        let bytes = std::fs::read(&path).unwrap();
        let truncated = matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(metaspec_core::Error::Checkpoint { .. })
        );
        let other = ArchSpec { hidden_size: 32, ..spec.clone() };
        let refused = Checkpoint::load_for(&path, &other).is_err();
        pass &= same && truncated && refused;
        parts.push(format!("{} {} scalars", kind.name(), params.n_scalars()));
    }
    verdict(pass, format!("bit-identical round trip, truncation and spec mismatch rejected: {}", parts.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("environment oracle equivalence", criterion_env_oracle),
        ("safety invariant", criterion_safety),
        ("gradient suite", criterion_gradients),
        ("second-order meta-gradient", criterion_meta_gradient),
        ("fading stationarity", criterion_fading),
        ("adaptation benefit", criterion_adaptation),
        ("qualitative comparison vs PPO", criterion_reproduction),
        ("determinism", criterion_determinism),
        ("checkpoint round-trip", criterion_checkpoint),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let v = check();
        println!("criterion {id} [{name}]: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
