//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use actens::activation::approx::fit_melu_basis;
use actens::activation::{
    act_forward, build_grid, init_state, ActivationKind, ActivationSpec, ActivationState, FixedGrid, HatFamily,
    REGISTRY,
};
use actens::cli::{cmd_run, TABLE_CSV};
use actens::ensemble::{
    fused_criterion, recipe, sffs, EnsembleDef, RecipeContext, ScoreStore, SFFS_EPSILON,
};
use actens::eval::{
    accuracy, make_synthetic, run_protocol, wilcoxon_signed_rank, Alternative, Dataset,
    ProtocolConfig, SyntheticKind,
};
use actens::gradcheck::{
    check_activation, check_network, perturb_state, GradCheckConfig, NetCheckConfig,
};
use actens::net::{softmax, Matrix, ScoreMatrix, TrainConfig};
use actens::seed;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("took {t:?}, budget {budget:?}"))
}

// 1 --------------------------------------------------------------------------

fn activation_gradients() -> Outcome {
    let start = Instant::now();
    let cfg = GradCheckConfig {
        points: 100,
        step: 1e-6,
        tolerance: 1e-5,
        seed: 11,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for e in &REGISTRY {
        let spec = ActivationSpec::from_name(e.name).map_err(|e| e.to_string())?;
        let r = check_activation(&spec, &cfg).map_err(|e| e.to_string())?;
        ensure(r.passed(), || r.to_string())?;
        worst = worst.max(r.max_err_input).max(r.max_err_params);
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{} activations x 100 points, max rel err {worst:.1e}, {:.1?}",
        REGISTRY.len(),
        start.elapsed()
    ))
}

// 2 --------------------------------------------------------------------------

fn network_gradients() -> Outcome {
    let start = Instant::now();
    let cfg = NetCheckConfig {
        dims: vec![2, 3, 3, 2],
        batches: 10,
        tolerance: 1e-4,
        seed: 12,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for e in &REGISTRY {
        let spec = ActivationSpec::from_name(e.name).map_err(|e| e.to_string())?;
        let r = check_network(&spec, &cfg).map_err(|e| e.to_string())?;
        ensure(r.passed(), || r.to_string())?;
        worst = worst.max(r.max_err);
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "(2,3,3,2) nets x 10 batches, max rel err {worst:.1e}, {:.1?}",
        start.elapsed()
    ))
}

// 3 --------------------------------------------------------------------------

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn reduction_identities() -> Outcome {
    let mut rng = seed::rng(13);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-6.0..6.0)).collect();
    fn eval(spec: &ActivationSpec, state: &ActivationState, x: f64) -> f64 {
        act_forward(spec, state, &[x]).expect("forward")[0]
    }

    // untouched coefficients reproduce the base function exactly
    let bases: [(&str, fn(f64) -> f64); 8] = [
        ("melu_k4", relu),
        ("melu_k8", relu),
        ("galu", relu),
        ("sgalu", relu),
        ("flexible_melu", relu),
        ("aplu", relu),
        ("splash", f64::abs),
        ("tanelu", relu),
    ];
    for (name, base) in bases {
        let spec = ActivationSpec::from_name(name).map_err(|e| e.to_string())?;
        let state = init_state(&spec, 1, &mut rng);
        for &x in &xs {
            let y = eval(&spec, &state, x);
            ensure(y == base(x), || format!("{name}({x}) = {y}, expected {}", base(x)))?;
        }
    }
    {
        let spec = ActivationSpec::from_name("melu2d").map_err(|e| e.to_string())?;
        let state = init_state(&spec, 3, &mut rng);
        for w in xs.chunks_exact(3) {
            let y = act_forward(&spec, &state, w).map_err(|e| e.to_string())?;
            // each output pairs a channel with the next one, wrapping around
            let expect: Vec<f64> = (0..3).map(|i| relu(w[i]) + relu(w[(i + 1) % 3])).collect();
            ensure(y == expect, || format!("melu2d({w:?}) = {y:?}"))?;
        }
    }

    // the mix endpoints of MeLU+GaLU are exactly MeLU and exactly GaLU
    let mg = ActivationSpec::from_name("melu_galu").map_err(|e| e.to_string())?;
    let melu = ActivationSpec::from_name("melu_k4").map_err(|e| e.to_string())?;
    let galu = ActivationSpec::from_name("galu").map_err(|e| e.to_string())?;
    for _ in 0..20 {
        let mut s = init_state(&mg, 1, &mut rng);
        perturb_state(&mg, &mut s, &mut rng);
        let layout = mg.layout();
        let take = |seg: &str, s: &ActivationState| {
            s.named(&layout, seg, 0).expect("segment").to_vec()
        };
        let mut sm = init_state(&melu, 1, &mut rng);
        sm.values = [take("melu_c0", &s), take("melu_c", &s)].concat();
        let mut sg = init_state(&galu, 1, &mut rng);
        sg.values = [take("galu_c0", &s), take("galu_c", &s)].concat();
        let mix = layout.segment("mix").expect("mix").offset;
        for (m, other, so) in [(0.0, &melu, &sm), (1.0, &galu, &sg)] {
            s.values[mix] = m;
            for &x in xs.iter().take(1000) {
                let (a, b) = (eval(&mg, &s, x), eval(other, so, x));
                ensure(a == b, || format!("melu_galu mix={m} at {x}: {a} vs {b}"))?;
            }
        }
    }

    // symmetric variants are even for any parameter state
    for name in ["symmetric_melu", "symmetric_galu"] {
        let spec = ActivationSpec::from_name(name).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let mut s = init_state(&spec, 1, &mut rng);
            perturb_state(&spec, &mut s, &mut rng);
            for v in s.values.iter_mut() {
                *v += rng.gen_range(-2.0..2.0);
            }
            for &x in &xs {
                let (a, b) = (eval(&spec, &s, x), eval(&spec, &s, -x));
                ensure(a == b, || format!("{name}({x}) = {a} but ({}) = {b}", -x))?;
            }
        }
    }
    Ok("zero-coefficient bases, mix endpoints and evenness exact on 10^4 points".into())
}

// 4 --------------------------------------------------------------------------

fn grid_tables() -> Outcome {
    let melu_256 = FixedGrid {
        a: vec![512.0, 256.0, 768.0, 128.0, 384.0, 640.0, 896.0],
        lambda: vec![512.0, 256.0, 256.0, 128.0, 128.0, 128.0, 128.0],
    };
    let melu_1 = FixedGrid {
        a: vec![2.0, 1.0, 3.0, 0.5, 1.5, 2.5, 3.5],
        lambda: vec![2.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5],
    };
    let galu_1 = FixedGrid {
        a: vec![1.0, 0.5, 2.5, 0.25, 1.25, 2.25, 3.25],
        lambda: vec![1.0, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25],
    };
    let got = |k, m| build_grid(k, m).map_err(|e| e.to_string());
    ensure(got(ActivationKind::Melu, 256.0)? == melu_256, || "MeLU grid at 256".into())?;
    ensure(got(ActivationKind::Melu, 1.0)? == melu_1, || "MeLU grid at 1".into())?;
    ensure(got(ActivationKind::Galu, 1.0)? == galu_1, || "GaLU grid at 1".into())?;
    for kind in [ActivationKind::Melu, ActivationKind::Galu] {
        let unit = got(kind, 1.0)?;
        for m in [1.0, 255.0, 256.0] {
            let g = got(kind, m)?;
            let scaled = FixedGrid {
                a: unit.a.iter().map(|v| v * m).collect(),
                lambda: unit.lambda.iter().map(|v| v * m).collect(),
            };
            ensure(g == scaled, || format!("{kind} grid at {m} is not {m} x unit grid"))?;
        }
    }
    ensure(
        FixedGrid::for_family(HatFamily::Mexican, 256.0) == melu_256,
        || "mexican family grid".into(),
    )?;
    Ok("both tables exact; linear in maxInput for 1, 255, 256".into())
}

// 5 --------------------------------------------------------------------------

fn approximation_monotone() -> Outcome {
    let mut notes = Vec::new();
    for m in [1.0, 255.0, 256.0] {
        let target = |x: f64| (std::f64::consts::PI * x / (2.0 * m)).sin();
        let errs: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&k| fit_melu_basis(k, m, 2001, target).l2_error)
            .collect();
        ensure(errs.windows(2).all(|w| w[1] <= w[0]), || {
            format!("maxInput {m}: L2 errors {errs:?} increase with k")
        })?;
        notes.push(format!("{m}: {:.3e}>{:.3e}>{:.3e}", errs[0], errs[1], errs[2]));
    }
    Ok(format!("L2 error over k=2,4,8 ({})", notes.join("; ")))
}

// 6 --------------------------------------------------------------------------

/// Score store of `models` noisy classifiers of varying skill on one dataset.
fn random_store<R: Rng>(rng: &mut R, models: usize) -> (ScoreStore, Vec<String>, Vec<String>) {
    let samples = rng.gen_range(20..50);
    let classes = rng.gen_range(2..5);
    let labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    let names: Vec<String> = (0..models).map(|i| format!("m{i}")).collect();
    let mut store = ScoreStore::new();
    for name in &names {
        let skill = rng.gen_range(0.0..2.5);
        let mut logits = Matrix::zeros(samples, classes);
        for (r, &y) in labels.iter().enumerate() {
            for c in 0..classes {
                let bump = if c == y { skill } else { 0.0 };
                logits.row_mut(r)[c] = bump + rng.gen_range(-2.0..2.0);
            }
        }
        let scores = ScoreMatrix::new(softmax(&logits), labels.clone()).expect("scores");
        store.insert(name, "d", scores);
    }
    (store, names, vec!["d".to_string()])
}

/// Forward selection without backtracking, same stopping rule.
fn greedy_forward(n: usize, f: &dyn Fn(&[usize]) -> f64) -> f64 {
    let mut chosen: Vec<usize> = Vec::new();
    let mut current = f64::NEG_INFINITY;
    loop {
        let best = (0..n)
            .filter(|m| !chosen.contains(m))
            .map(|m| {
                let mut s = chosen.clone();
                s.push(m);
                s.sort_unstable();
                (m, f(&s))
            })
            .fold(None, |acc: Option<(usize, f64)>, (m, v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ => Some((m, v)),
            });
        match best {
            Some((m, v)) if v > current + SFFS_EPSILON => {
                chosen.push(m);
                current = v;
            }
            _ => return current,
        }
    }
}

fn exhaustive(n: usize, f: &dyn Fn(&[usize]) -> f64) -> f64 {
    (1u32..1 << n)
        .map(|mask| {
            let s: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            f(&s)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sffs_against_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(16);
    let trials = 100;
    let mut optimal = 0;
    for t in 0..trials {
        let n = if t % 4 == 0 { 8 } else { rng.gen_range(2..=8) };
        let (store, models, datasets) = random_store(&mut rng, n);
        let f = |s: &[usize]| fused_criterion(&store, &models, &datasets, s).expect("criterion");
        let (_, got) = sffs(n, n, |s| Ok(f(s))).map_err(|e| e.to_string())?;
        let greedy = greedy_forward(n, &f);
        ensure(got >= greedy, || format!("instance {t}: sffs {got} < greedy {greedy}"))?;
        if (got - exhaustive(n, &f)).abs() <= 1e-12 {
            optimal += 1;
        }
    }
    ensure(optimal * 10 >= trials * 9, || format!("optimal in only {optimal}/{trials}"))?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        ">= greedy in {trials}/{trials}, optimal in {optimal}/{trials}, {:.1?}",
        start.elapsed()
    ))
}

// 7 --------------------------------------------------------------------------

/// Midranks of `|d|` doubled so that they are integers.
fn doubled_ranks(d: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0; d.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        for &k in &idx[i..=j] {
            ranks[k] = (i + 1 + j + 1) as u64;
        }
        i = j + 1;
    }
    ranks
}

/// p-values by enumerating all `2^n` sign patterns of the nonzero differences.
fn enumerated_p(a: &[f64], b: &[f64], alt: Alternative) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return 1.0;
    }
    let r = doubled_ranks(&d);
    let observed: u64 = r.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let total = 1u64 << d.len();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0..total {
        let w: u64 = (0..d.len()).filter(|i| mask & (1 << i) != 0).map(|i| r[i]).sum();
        ge += u64::from(w >= observed);
        le += u64::from(w <= observed);
    }
    let (pg, pl) = (ge as f64 / total as f64, le as f64 / total as f64);
    match alt {
        Alternative::Greater => pg,
        Alternative::Less => pl,
        Alternative::TwoSided => (2.0 * pg.min(pl)).min(1.0),
    }
}

fn wilcoxon_exact() -> Outcome {
    let mut rng = seed::rng(17);
    let mut cases = 0;
    let mut worst = 0.0f64;
    for n in 1..=10 {
        for _ in 0..60 {
            // small integer grid so that ties and zero differences occur
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();
            for alt in [Alternative::TwoSided, Alternative::Greater, Alternative::Less] {
                let got = wilcoxon_signed_rank(&a, &b, alt).map_err(|e| e.to_string())?;
                let want = enumerated_p(&a, &b, alt);
                let err = (got.p_value - want).abs();
                worst = worst.max(err);
                ensure(err <= 1e-12, || {
                    format!("{alt:?} {a:?} vs {b:?}: p {} vs enumerated {want}", got.p_value)
                })?;
                cases += 1;
            }
        }
    }
    let a: Vec<f64> = (1..=8).map(|i| i as f64 + 0.5).collect();
    let b = vec![0.0; 8];
    let p = wilcoxon_signed_rank(&a, &b, Alternative::Greater)
        .map_err(|e| e.to_string())?
        .p_value;
    ensure(p == 1.0 / 256.0, || format!("all-positive n=8 one-sided p = {p}"))?;
    Ok(format!("{cases} cases, max |dp| {worst:.1e}; all-positive n=8 gives 1/256"))
}

// 8 --------------------------------------------------------------------------

const SUITE_SAMPLES: usize = 200;

fn suite(master: u64) -> Vec<Dataset> {
    SyntheticKind::SUITE
        .iter()
        .map(|&k| {
            let s = seed::subseed(master, &[seed::name_hash(k.name())]);
            make_synthetic(k, SUITE_SAMPLES, 0.1, s).expect("dataset")
        })
        .collect()
}

fn suite_protocol(master: u64) -> ProtocolConfig {
    ProtocolConfig {
        hidden: vec![16, 16],
        train: TrainConfig {
            base_lr: 0.05,
            epochs: 300,
            batch_size: 20,
            ..Default::default()
        },
        folds: 5,
        seed: master,
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct SeedResult {
    stoc: f64,
    median_member: f64,
    relu15: f64,
    relu: f64,
}

fn ensembles_vs_single(master: u64) -> Result<SeedResult, String> {
    let ctx = RecipeContext {
        seed: master,
        stochastic_members: 15,
        ..Default::default()
    };
    let models: Vec<EnsembleDef> = ["relu", "15ReLU", "Stoc_2"]
        .iter()
        .map(|r| recipe(r, &ctx))
        .collect::<actens::Result<_>>()
        .map_err(|e| e.to_string())?;
    ensure(models[2].members.len() == 15, || "Stoc_2 must have 15 members".into())?;
    let datasets = suite(master);
    let out = run_protocol(&models, &datasets, &suite_protocol(master)).map_err(|e| e.to_string())?;
    let t = &out.table;
    let avg = |m: &str| t.avg(t.model_index(m).expect("model"));
    let mut member_means: Vec<f64> = out.member_scores["Stoc_2"]
        .iter()
        .filter(|per_ds| per_ds.len() == datasets.len())
        .map(|per_ds| per_ds.values().map(accuracy).sum::<f64>() / datasets.len() as f64)
        .collect();
    Ok(SeedResult {
        stoc: avg("Stoc_2"),
        median_member: median(&mut member_means),
        relu15: avg("15ReLU"),
        relu: avg("relu"),
    })
}

fn ensemble_beats_single() -> Outcome {
    let start = Instant::now();
    let seeds = [101u64, 202, 303, 404, 505];
    let (mut stoc_wins, mut relu_wins) = (0, 0);
    let mut rows = Vec::new();
    for &s in &seeds {
        let r = ensembles_vs_single(s)?;
        stoc_wins += usize::from(r.stoc >= r.median_member);
        relu_wins += usize::from(r.relu15 >= r.relu);
        rows.push(format!(
            "seed {s}: Stoc_2 {:.4} vs median member {:.4}, 15ReLU {:.4} vs relu {:.4}",
            r.stoc, r.median_member, r.relu15, r.relu
        ));
    }
    for r in &rows {
        println!("    {r}");
    }
    ensure(stoc_wins >= 4 && relu_wins >= 4, || {
        format!("stochastic ensemble won {stoc_wins}/5, 15ReLU won {relu_wins}/5")
    })?;
    within(start, Duration::from_secs(15 * 60))?;
    Ok(format!(
        "Stoc_2 >= median member in {stoc_wins}/5 seeds, 15ReLU >= relu in {relu_wins}/5, {:.1?}",
        start.elapsed()
    ))
}

// 9 --------------------------------------------------------------------------

const DETERMINISM_CONFIG: &str = r#"
experiment = "repeat"
seed = 2024
output_dir = "out"
models = ["relu", "ENS", "Stoc_1"]
hidden = [8, 8]
folds = 5
stochastic_members = 5

[train]
base_lr = 0.02
epochs = 15

[[datasets]]
synthetic = "two_moons"
n = 80

[[datasets]]
synthetic = "blobs"
n = 60
"#;

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("read dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).expect("prefix").display().to_string();
                out.push((rel, std::fs::read(&p).expect("read")));
            }
        }
    }
    out.sort();
    out
}

fn repeated_runs_identical() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut snapshots = Vec::new();
    for i in 0..2 {
        let dir = tmp.path().join(format!("run{i}"));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let cfg = dir.join("config.toml");
        std::fs::write(&cfg, DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
        let out = cmd_run(&cfg, &mut std::io::sink()).map_err(|e| e.to_string())?;
        snapshots.push((
            std::fs::read(out.dir.join(TABLE_CSV)).map_err(|e| e.to_string())?,
            all_files(&out.dir),
        ));
    }
    ensure(!snapshots[0].0.is_empty(), || "empty table".into())?;
    ensure(snapshots[0].0 == snapshots[1].0, || "performance tables differ".into())?;
    let (a, b) = (&snapshots[0].1, &snapshots[1].1);
    ensure(a == b, || "output directories differ".into())?;
    Ok(format!("two runs, {} output files byte-identical", a.len()))
}

// 10 -------------------------------------------------------------------------

fn protocol_integrity() -> Outcome {
    let master = 77;
    let ctx = RecipeContext {
        seed: master,
        stochastic_members: 4,
        ..Default::default()
    };
    let models: Vec<EnsembleDef> = ["relu", "eENS", "Stoc_3"]
        .iter()
        .map(|r| recipe(r, &ctx))
        .collect::<actens::Result<_>>()
        .map_err(|e| e.to_string())?;
    let datasets: Vec<Dataset> = [(SyntheticKind::Spirals, 53), (SyntheticKind::Blobs, 61)]
        .into_iter()
        .map(|(k, n)| make_synthetic(k, n, 0.1, master).expect("dataset"))
        .collect();
    let cfg = ProtocolConfig {
        hidden: vec![6, 6],
        train: TrainConfig {
            base_lr: 0.02,
            epochs: 5,
            ..Default::default()
        },
        folds: 5,
        seed: master,
    };
    let out = run_protocol(&models, &datasets, &cfg).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for ds in &datasets {
        let folds = &out.folds[&ds.name];
        ensure(folds.len() == 5, || format!("{}: {} folds", ds.name, folds.len()))?;
        let mut seen = vec![0usize; ds.len()];
        for f in folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        ensure(seen.iter().all(|&c| c == 1), || format!("{}: fold coverage {seen:?}", ds.name))?;
        for f in folds {
            let classes: BTreeSet<usize> = f.iter().map(|&i| ds.labels[i]).collect();
            ensure(classes.len() == ds.classes, || format!("{}: unstratified fold", ds.name))?;
        }
        for m in &models {
            let s = out.scores.get(&m.name, &ds.name).ok_or("missing cell")?;
            ensure(s.len() == ds.len() && s.labels == ds.labels, || {
                format!("{} on {}: held-out rows do not cover the dataset in order", m.name, ds.name)
            })?;
            let err = s.max_row_sum_error();
            ensure(err <= 1e-9, || format!("{} on {}: row sum error {err}", m.name, ds.name))?;
            for per_ds in &out.member_scores[&m.name] {
                if let Some(ms) = per_ds.get(&ds.name) {
                    ensure(ms.len() == ds.len() && ms.max_row_sum_error() <= 1e-9, || {
                        format!("{} member on {}", m.name, ds.name)
                    })?;
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} cells: every sample held out once, rows sum to 1 within 1e-9"))
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("activation gradients vs finite differences", activation_gradients),
        ("network backprop vs finite differences", network_gradients),
        ("exact reduction identities", reduction_identities),
        ("fixed hat grids", grid_tables),
        ("basis approximation improves with k", approximation_monotone),
        ("floating selection vs greedy and exhaustive search", sffs_against_oracles),
        ("exact signed-rank p-values", wilcoxon_exact),
        ("ensembles beat single networks", ensemble_beats_single),
        ("repeated runs are byte-identical", repeated_runs_identical),
        ("cross-validation coverage and score rows", protocol_integrity),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str()) || *o == id.to_string()) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL {id:>2} {name}: {why}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
