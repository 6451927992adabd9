//! Acceptance criteria, one PASS/FAIL line each. Pass criterion numbers as
//! arguments to run a subset; criterion 4 reuses the runs of 2 and 3.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::{gaussian_matrix, golden, h2, max_abs_diff, random_orthogonal, rigid_motion, sto3g, water};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srdft::chem::{build_orbital_index, ConformationSet, Molecule, Positions};
use srdft::eval::EnergyValidation;
use srdft::integrals::compute_integrals;
use srdft::model::{
    cosine_lr, featurize, load_checkpoint, loss_and_grad, loss_and_grad_molecules, optimizer_step,
    predict_coefficients, AdamState, ModelConfig, ModelParams, PreparedFrame,
};
use srdft::sampler::{
    chain_rng, init_state, langevin_step, run_chain, EnergyField, LangevinConfig, ModelField, OracleField, ToyEnergy,
};
use srdft::scf::{label_conformations, solve_scf, LabeledSet, ScfOptions};
use srdft::train::{
    check_liveness, check_no_torn_reads, learner_rng, make_dataset, pretrain, retain_fraction, self_refine,
    DatasetGenerator, ReplayBuffer, SyncMode, SyncPolicy, TrainConfig, TrainOptions,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn report(n: usize, name: &str, started: Instant, check: Check) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail, ok) = match check {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} criterion {n} {name}: {detail} ({secs:.1} s)");
    ok
}

fn perturbed(template: &Molecule, n: usize, sigma: f64, seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = DatasetGenerator::GaussianPerturbation { sigma };
    make_dataset(template, sto3g(), n, &gen, &ScfOptions::default(), &mut rng).unwrap()
}

fn ckpt_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    files.sort();
    files
}

// ---------------------------------------------------------------- 1

fn oracle_fidelity() -> Check {
    let mut worst = 0.0_f64;
    for name in ["h2", "heh+", "h2o"] {
        let g = golden(name);
        let r = solve_scf(&g.molecule, sto3g(), &ScfOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        if !r.converged {
            return Err(format!("{name}: SCF did not converge"));
        }
        worst = worst.max((r.energy - g.energy).abs());
    }
    ensure(worst < 1e-6, format!("max |E - E_ref| = {worst:.2e} over H2, HeH+, H2O"))
}

// ---------------------------------------------------------------- 2

/// Training runs whose checkpoints and test frames feed the dominance check.
struct Stage {
    label: String,
    test: LabeledSet,
    initial: ModelParams,
    dirs: Vec<tempfile::TempDir>,
}

fn h2_accuracy(stages: &mut Vec<Stage>) -> Check {
    let basis = sto3g();
    let train = perturbed(&h2(1.4), 25, 0.1, 20);
    let test = perturbed(&h2(1.4), 25, 0.1, 21);
    let initial = ModelParams::for_molecule(ModelConfig::default(), &h2(1.4), basis).unwrap();
    let cfg = TrainConfig {
        n_pretrain_iterations: 2000,
        n_iterations: 200,
        checkpoint_every: 250,
        seed: 2,
        ..Default::default()
    };
    let (pre_dir, sr_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pre_opts = TrainOptions { validation: None, checkpoint_dir: Some(pre_dir.path()) };
    let sr_opts = TrainOptions { validation: None, checkpoint_dir: Some(sr_dir.path()) };
    let pre = pretrain(initial.clone(), &train.set, basis, &cfg, pre_opts).map_err(|e| e.to_string())?;
    let sr = self_refine(pre.params, &train.set, basis, &cfg, sr_opts).map_err(|e| e.to_string())?;
    let val = EnergyValidation::new(&sr.params, &test.set, basis).unwrap();
    let mae = val.e_mae(&sr.params).unwrap();
    stages.push(Stage { label: "H2".into(), test, initial, dirs: vec![pre_dir, sr_dir] });
    ensure(mae < 1.6e-3, format!("held-out e_mae = {mae:.3e} Eh from 25 frames"))
}

// ---------------------------------------------------------------- 3

const WATER_SEEDS: [u64; 3] = [0, 1, 2];
const WATER_PRETRAIN: usize = 20_000;
const WATER_STEPS: usize = 300;

/// Held-out frames moved by 30 Langevin steps on the oracle surface.
fn propagated_test_set(template: &Molecule, source: &LabeledSet) -> LabeledSet {
    let basis = sto3g();
    let field = OracleField::new(template, basis);
    let cfg = LangevinConfig::default();
    let frames = source
        .set
        .frames
        .iter()
        .enumerate()
        .map(|(i, r)| run_chain(&field, r, &cfg, &mut chain_rng(77, i as u64), false).unwrap().final_positions)
        .collect();
    label_conformations(&ConformationSet::new(template.clone(), frames).unwrap(), basis, &ScfOptions::default())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn water_refinement(stages: &mut Vec<Stage>) -> Check {
    let basis = sto3g();
    let mol = water();
    let data = perturbed(&mol, 250, 0.1, 30);
    let test = propagated_test_set(&mol, &perturbed(&mol, 20, 0.1, 31));
    let (mut sr_maes, mut pre_maes, mut base_maes) = (Vec::new(), Vec::new(), Vec::new());
    for seed in WATER_SEEDS {
        let initial =
            ModelParams::for_molecule(ModelConfig { init_seed: seed, ..Default::default() }, &mol, basis).unwrap();
        let val = EnergyValidation::new(&initial, &test.set, basis).unwrap();
        let cfg = TrainConfig {
            n_pretrain_iterations: WATER_PRETRAIN,
            n_iterations: WATER_STEPS,
            data_fraction: 0.1,
            checkpoint_every: 2000,
            seed,
            ..Default::default()
        };
        let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        let opts = |i: usize| TrainOptions { validation: None, checkpoint_dir: Some(dirs[i].path()) };
        let pre = pretrain(initial.clone(), &data.set, basis, &cfg, opts(0)).map_err(|e| e.to_string())?;
        pre_maes.push(val.e_mae(&pre.params).unwrap());
        // Data-only continuation for the same number of learner steps.
        let cont = TrainConfig { n_pretrain_iterations: WATER_STEPS, checkpoint_every: 100, ..cfg };
        let base = pretrain(pre.params.clone(), &data.set, basis, &cont, opts(1)).map_err(|e| e.to_string())?;
        let srcfg = TrainConfig { checkpoint_every: 100, ..cfg };
        let sr = self_refine(pre.params, &data.set, basis, &srcfg, opts(2)).map_err(|e| e.to_string())?;
        sr_maes.push(val.e_mae(&sr.params).unwrap());
        base_maes.push(val.e_mae(&base.params).unwrap());
        stages.push(Stage { label: format!("H2O seed {seed}"), test: test.clone(), initial, dirs });
    }
    let (s, p, b) = (median(sr_maes.clone()), median(pre_maes.clone()), median(base_maes.clone()));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
    ensure(
        s <= p && s <= b,
        format!(
            "median e_mae self-refined {s:.3e}, pretrain-only {p:.3e}, data-only continuation {b:.3e} \
             (per seed [{}], [{}], [{}])",
            fmt(&sr_maes),
            fmt(&pre_maes),
            fmt(&base_maes)
        ),
    )
}

// ---------------------------------------------------------------- 4

fn dominance(stages: &[Stage]) -> Check {
    let basis = sto3g();
    let mut worst = f64::INFINITY;
    let (mut n_ckpt, mut n_frames) = (0, 0);
    for stage in stages {
        let val = EnergyValidation::new(&stage.initial, &stage.test.set, basis).unwrap();
        n_frames += val.len();
        let mut params = vec![stage.initial.clone()];
        for d in &stage.dirs {
            for f in ckpt_files(d.path()) {
                params.push(load_checkpoint(&f).map_err(|e| e.to_string())?.0);
            }
        }
        for p in &params {
            let m = val.min_excess(p).unwrap();
            if m < -1e-8 {
                return Err(format!("{}: E - E_0 = {m:.3e} below the oracle", stage.label));
            }
            worst = worst.min(m);
        }
        n_ckpt += params.len();
    }
    ensure(n_ckpt > 0, format!("min E - E_0 = {worst:.3e} over {n_ckpt} checkpoints and {n_frames} test frames"))
}

// ---------------------------------------------------------------- 5

fn toy_cfg(dt: f64, beta: f64) -> LangevinConfig {
    LangevinConfig {
        dt,
        inverse_temperature: beta,
        max_force_norm: 1e6,
        min_interatomic_distance: 1e-9,
        ..Default::default()
    }
}

fn trajectory<F: EnergyField>(
    field: &F,
    x0: Positions,
    cfg: &LangevinConfig,
    n: usize,
    burn: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = chain_rng(seed, 0);
    let mut x = x0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn {
        x = langevin_step(&x, field, cfg, &mut rng).unwrap();
        if i >= burn {
            out.push(x[0]);
        }
    }
    out
}

fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut c = vec![0.0; bins];
    for &x in xs {
        if x >= lo && x < hi {
            c[((x - lo) / (hi - lo) * bins as f64) as usize] += 1.0;
        }
    }
    let n: f64 = c.iter().sum();
    c.iter().map(|v| v / n).collect()
}

fn boltzmann_histogram(e: impl Fn(f64) -> f64, lo: f64, hi: f64, bins: usize, beta: f64) -> Vec<f64> {
    let sub = 400;
    let h = (hi - lo) / (bins * sub) as f64;
    let p: Vec<f64> =
        (0..bins).map(|b| (0..sub).map(|s| (-beta * e(lo + ((b * sub + s) as f64 + 0.5) * h)).exp()).sum()).collect();
    let z: f64 = p.iter().sum();
    p.iter().map(|v| v / z).collect()
}

fn sampler_stationarity() -> Check {
    let mut msgs = Vec::new();
    for beta in [1.0, 4.0] {
        let field = ToyEnergy::Quadratic { center: 0.0, stiffness: 1.0 };
        let xs = trajectory(&field, Positions::zeros(1, 1), &toy_cfg(0.01, beta), 1_000_000, 2_000, 5);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        let rel = (var * beta - 1.0).abs();
        msgs.push(format!("quadratic var·β = {:.4} at β = {beta}", var * beta));
        if rel > 0.05 {
            return Err(msgs.join(", "));
        }
    }
    let (barrier, tilt) = (1.0, 0.25);
    let field = ToyEnergy::DoubleWell1d { barrier, tilt };
    let xs = trajectory(&field, Positions::from_element(1, 1, -1.0), &toy_cfg(0.005, 1.0), 1_000_000, 5_000, 6);
    let p = histogram(&xs, -2.5, 2.5, 50);
    let q = boltzmann_histogram(|x| barrier * (x * x - 1.0).powi(2) + tilt * x, -2.5, 2.5, 50, 1.0);
    let kl: f64 = p.iter().zip(&q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
    msgs.push(format!("double-well KL = {kl:.4}"));
    if kl >= 0.02 {
        return Err(msgs.join(", "));
    }
    let cfg = LangevinConfig { n_steps: 200, ..toy_cfg(0.01, 1.0) };
    let x0 = Positions::from_element(1, 1, 0.3);
    let run = |seed, idx| run_chain(&field, &x0, &cfg, &mut chain_rng(seed, idx), true).unwrap();
    let (a, b, c) = (run(9, 0), run(9, 0), run(9, 1));
    let same = a.final_positions == b.final_positions && a.trajectory == b.trajectory;
    let differs = a.final_positions != c.final_positions;
    msgs.push(format!("seeded replay identical: {same}, streams differ: {differs}"));
    ensure(same && differs, msgs.join(", "))
}

// ---------------------------------------------------------------- 6

fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig {
        hidden_width: 8,
        depth: 2,
        embedding_dim: 4,
        n_radial_features: 6,
        init_seed: seed,
        ..Default::default()
    }
}

fn jiggle(params: &mut ModelParams, rng: &mut ChaCha8Rng, scale: f64) {
    for (_, b) in params.weights.blocks_mut() {
        for v in b.iter_mut() {
            *v += scale * rng.random_range(-1.0..1.0);
        }
    }
}

fn secant_error<F: EnergyField>(field: &F, r: &Positions, rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let g = field.gradient(r).unwrap();
    let mut dir = gaussian_matrix(rng, r.nrows(), r.ncols());
    dir /= dir.norm();
    let secant = (field.energy(&(r + h * &dir)).unwrap() - field.energy(&(r - h * &dir)).unwrap()) / (2.0 * h);
    let analytic = g.component_mul(&dir).sum();
    (secant - analytic).abs() / analytic.abs().max(1e-2)
}

fn gradient_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut params = ModelParams::for_molecule(tiny_config(3), &h2(1.4), sto3g()).unwrap();
    jiggle(&mut params, &mut rng, 0.3);
    let frames: Vec<PreparedFrame> =
        [h2(1.4), h2(1.9)].into_iter().map(|m| PreparedFrame::new(&params, m, sto3g()).unwrap()).collect();
    let (_, grad) = loss_and_grad(&params, &frames).unwrap();
    let h = 1e-6;
    let mut worst = 0.0_f64;
    let mut n_checked = 0;
    for bi in 0..grad.blocks().len() {
        for k in 0..grad.blocks()[bi].1.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.weights.blocks_mut()[bi].1[k] += delta;
                loss_and_grad(&p, &frames).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let g = grad.blocks()[bi].1[k];
            worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-4));
            n_checked += 1;
        }
    }
    let mut secant = 0.0_f64;
    for toy in [
        ToyEnergy::Quadratic { center: 0.5, stiffness: 2.0 },
        ToyEnergy::DoubleWell1d { barrier: 1.0, tilt: 0.25 },
        ToyEnergy::MuellerBrown2d { scale: 1.0 },
    ] {
        for _ in 0..5 {
            let r = match toy {
                ToyEnergy::Quadratic { .. } => gaussian_matrix(&mut rng, 2, 3),
                ToyEnergy::DoubleWell1d { .. } => Positions::from_element(1, 1, rng.random_range(-1.5..1.5)),
                ToyEnergy::MuellerBrown2d { .. } => {
                    Positions::from_row_slice(1, 2, &[rng.random_range(-1.5..1.0), rng.random_range(-0.3..2.0)])
                }
            };
            secant = secant.max(secant_error(&toy, &r, &mut rng, 1e-5));
        }
    }
    let m = water();
    let wparams =
        ModelParams::for_molecule(ModelConfig { hidden_width: 16, depth: 2, ..Default::default() }, &m, sto3g())
            .unwrap();
    let model = ModelField { fd_step: 1e-4, ..ModelField::new(&wparams, &m, sto3g()) };
    secant = secant.max(secant_error(&model, m.positions(), &mut rng, 1e-3));
    secant = secant.max(secant_error(&OracleField::new(&m, sto3g()), m.positions(), &mut rng, 1e-3));
    ensure(
        worst < 1e-5 && secant < 1e-4,
        format!("parameter gradient max rel err {worst:.2e} over {n_checked} weights, position secant max rel err {secant:.2e}"),
    )
}

// ---------------------------------------------------------------- 7

fn ao_rotation(m: &Molecule, u: &DMatrix<f64>) -> DMatrix<f64> {
    let index = build_orbital_index(m, sto3g()).unwrap();
    let n = index.len();
    let mut t = DMatrix::identity(n, n);
    let mut i = 0;
    while i < n {
        if index.label(i).ends_with("px") {
            t.view_mut((i, i), (3, 3)).copy_from(&u.transpose());
            i += 3;
        } else {
            i += 1;
        }
    }
    t
}

fn orthonormality() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let base = water();
    let mut worst = 0.0_f64;
    for draw in 0..1000 {
        let cfg = ModelConfig { hidden_width: 16, depth: 2, init_seed: draw, ..Default::default() };
        let mut params = ModelParams::for_molecule(cfg, &base, sto3g()).unwrap();
        jiggle(&mut params, &mut rng, 1.0);
        let mut pos = base.positions().clone();
        for v in pos.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let frame = PreparedFrame::new(&params, base.with_positions(pos).unwrap(), sto3g()).unwrap();
        let c = predict_coefficients(&params, &frame).map_err(|e| format!("draw {draw}: {e}"))?.values;
        worst = worst.max((c.transpose() * &frame.ints.overlap * &c - DMatrix::identity(7, 7)).abs().max());
    }
    Ok(worst)
}

fn rigid_motion_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for m in [h2(1.4), water()] {
        let a = compute_integrals(&m, sto3g()).unwrap();
        let params = ModelParams::for_molecule(ModelConfig::default(), &m, sto3g()).unwrap();
        let f0 = featurize(&params, &m).unwrap().values;
        for _ in 0..3 {
            let u = random_orthogonal(&mut rng, 3);
            let t = [rng.random_range(-3.0..3.0), 0.4, -1.1];
            let moved = m.with_positions(rigid_motion(m.positions(), &u, t)).unwrap();
            let b = compute_integrals(&moved, sto3g()).unwrap();
            let tr = ao_rotation(&m, &u);
            for (x, y) in
                [(&a.overlap, &b.overlap), (&a.kinetic, &b.kinetic), (&a.nuclear_attraction, &b.nuclear_attraction)]
            {
                worst = worst.max(max_abs_diff(&(tr.transpose() * x * &tr), y));
            }
            let n = a.overlap.nrows();
            // Four quarter transforms.
            let mut cur = a.eri.to_dense();
            for axis in 0..4 {
                let mut next = vec![0.0; cur.len()];
                for (idx, out) in next.iter_mut().enumerate() {
                    let mut digits = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
                    let target = digits[axis];
                    let mut v = 0.0;
                    for src in 0..n {
                        digits[axis] = src;
                        let w = tr[(src, target)];
                        if w != 0.0 {
                            v += w * cur[((digits[0] * n + digits[1]) * n + digits[2]) * n + digits[3]];
                        }
                    }
                    *out = v;
                }
                cur = next;
            }
            let bd = b.eri.to_dense();
            worst = worst.max(cur.iter().zip(&bd).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            worst = worst.max((a.nuclear_repulsion - b.nuclear_repulsion).abs());
            worst = worst.max((featurize(&params, &moved).unwrap().values - &f0).abs().max());
        }
    }
    worst
}

fn eri_symmetry_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let p = Positions::from_row_slice(
            3,
            3,
            &[
                0.,
                0.,
                0.,
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.8..2.5),
                -0.9,
                1.1,
                -0.3,
            ],
        );
        let m = Molecule::new(vec![8, 1, 1], p.clone(), 0).unwrap();
        let order = [2usize, 0, 1];
        let mp = Molecule::new(vec![1, 8, 1], Positions::from_fn(3, 3, |i, k| p[(order[i], k)]), 0).unwrap();
        let (a, b) = (compute_integrals(&m, sto3g()).unwrap(), compute_integrals(&mp, sto3g()).unwrap());
        let (ia, ib) = (build_orbital_index(&m, sto3g()).unwrap(), build_orbital_index(&mp, sto3g()).unwrap());
        let n = ia.len();
        let pi: Vec<usize> = (0..n)
            .map(|mu| {
                let e = &ia.entries[mu];
                (0..n).find(|&nu| order[ib.entries[nu].atom] == e.atom && ib.entries[nu].token == e.token).unwrap()
            })
            .collect();
        let dense = a.eri.to_dense();
        let at = |i: usize, j: usize, k: usize, l: usize| dense[((i * n + j) * n + k) * n + l];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = at(i, j, k, l);
                        for w in [
                            at(j, i, k, l),
                            at(i, j, l, k),
                            at(k, l, i, j),
                            at(l, k, j, i),
                            b.eri.get(pi[i], pi[j], pi[k], pi[l]),
                        ] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

fn fifo_ok() -> bool {
    let mut b = ReplayBuffer::new(2048);
    for i in 1..=3000 {
        b.push(Positions::from_element(1, 1, i as f64));
    }
    b.len() == 2048 && b.get(0)[0] == 953.0 && b.get(2047)[0] == 3000.0
}

fn invariants() -> Check {
    let ortho = orthonormality()?;
    let rigid = rigid_motion_error();
    let eri = eri_symmetry_error();
    let fifo = fifo_ok();
    ensure(
        ortho < 1e-8 && rigid < 1e-10 && eri < 1e-12 && fifo,
        format!("|CᵀSC - I| = {ortho:.1e} over 1000 draws, rigid motion {rigid:.1e}, ERI symmetry {eri:.1e}, FIFO at 2048: {fifo}"),
    )
}

// ---------------------------------------------------------------- 8

fn h2_frames(n: usize, seed: u64) -> ConformationSet {
    perturbed(&h2(1.4), n, 0.1, seed).set
}

fn short_config(mode: SyncMode, temp: usize, n_iterations: usize) -> TrainConfig {
    TrainConfig {
        n_iterations,
        data_fraction: 0.5,
        seed: 11,
        langevin: LangevinConfig { dt: 1e-3, n_steps: 4, ..Default::default() },
        sync: SyncPolicy { temp_buffer_size: temp, mode, lockstep_chains_per_step: 1 },
        ..Default::default()
    }
}

fn reference_loop(params: ModelParams, set: &ConformationSet, cfg: &TrainConfig) -> (ModelParams, ReplayBuffer) {
    let basis = sto3g();
    let data = set.subset(&retain_fraction(set.len(), cfg.data_fraction, cfg.seed).unwrap());
    let mut params = params;
    let mut state = AdamState::new(&params.weights);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut lrng = learner_rng(cfg.seed);
    for t in 0..cfg.n_iterations {
        let mut rng = chain_rng(cfg.seed, t as u64);
        let r0 = init_state(&buffer, &data, cfg.langevin.buffer_init_prob, &mut rng).unwrap();
        let field = ModelField::new(&params, &data.template, basis);
        buffer.push(run_chain(&field, &r0, &cfg.langevin, &mut rng, false).unwrap().final_positions);
        let n_data = (cfg.data_mix * cfg.batch_size as f64).round() as usize;
        let mut batch: Vec<_> = (0..n_data).map(|_| data.molecule(lrng.random_range(0..data.len())).unwrap()).collect();
        for r in buffer.sample(cfg.batch_size - n_data, &mut lrng).unwrap() {
            batch.push(data.template.with_positions(r).unwrap());
        }
        let (_, grad) = loss_and_grad_molecules(&params, &batch, basis).unwrap();
        let lr = cosine_lr(&cfg.optimizer, t, cfg.n_iterations);
        optimizer_step(&mut params.weights, &grad, &mut state, &cfg.optimizer, lr).unwrap();
    }
    (params, buffer)
}

fn concurrency() -> Check {
    let basis = sto3g();
    let set = h2_frames(12, 40);
    let tiny = |s| ModelParams::for_molecule(tiny_config(s), &h2(1.4), basis).unwrap();
    let err = |e: srdft::Error| e.to_string();

    let cfg = short_config(SyncMode::Sync, 1, 12);
    let out = self_refine(tiny(1), &set, basis, &cfg, TrainOptions::default()).map_err(err)?;
    let (params, buffer) = reference_loop(tiny(1), &set, &cfg);
    let bitwise = out.params == params && out.buffer == buffer;

    let mut lock = short_config(SyncMode::Lockstep, 10, 12);
    lock.sync.lockstep_chains_per_step = 5;
    lock.langevin.n_steps = 2;
    let out = self_refine(tiny(3), &set, basis, &lock, TrainOptions::default()).map_err(err)?;
    let lock_log = check_liveness(&out.log, 10)
        .and_then(|n| check_no_torn_reads(&out.log, 10, lock.buffer_capacity).map(|m| (n, m)));

    let train = h2_frames(25, 41);
    let test = perturbed(&h2(1.4), 25, 0.1, 42);
    let pre_cfg = TrainConfig { n_pretrain_iterations: 500, seed: 5, ..Default::default() };
    let initial = ModelParams::for_molecule(ModelConfig::default(), &h2(1.4), basis).unwrap();
    let pre = pretrain(initial, &train, basis, &pre_cfg, TrainOptions::default()).map_err(err)?;
    let run = |mode| {
        let cfg = TrainConfig {
            n_iterations: 150,
            seed: 5,
            sync: SyncPolicy { temp_buffer_size: 4, mode, lockstep_chains_per_step: 1 },
            ..Default::default()
        };
        self_refine(pre.params.clone(), &train, basis, &cfg, TrainOptions::default())
    };
    let sync = run(SyncMode::Sync).map_err(err)?;
    let asyn = run(SyncMode::Async).map_err(err)?;
    let async_log = check_liveness(&asyn.log, 4).and_then(|n| check_no_torn_reads(&asyn.log, 4, 2048).map(|_| n));
    let val = EnergyValidation::new(&sync.params, &test.set, basis).unwrap();
    let (es, ea) = (val.e_mae(&sync.params).unwrap(), val.e_mae(&asyn.params).unwrap());

    let detail = format!(
        "sync = reference bitwise: {bitwise}, lockstep log {:?}, async log {:?}, e_mae async {ea:.3e} vs sync {es:.3e}",
        lock_log, async_log
    );
    ensure(bitwise && lock_log.is_ok() && async_log.is_ok() && ea <= 2.0 * es, detail)
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut ok = true;
    let mut stages = Vec::new();
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if want(n) {
            let t = Instant::now();
            ok &= report(n, name, t, f());
        }
    };
    run(1, "oracle fidelity", &mut oracle_fidelity);
    if want(2) || want(4) {
        let t = Instant::now();
        let c = h2_accuracy(&mut stages);
        if want(2) {
            ok &= report(2, "chemical accuracy on H2", t, c);
        }
    }
    if want(3) || want(4) {
        let t = Instant::now();
        let c = water_refinement(&mut stages);
        if want(3) {
            ok &= report(3, "self-refinement beats the data-scarce baselines on H2O", t, c);
        }
    }
    if want(4) {
        ok &= report(4, "variational dominance", Instant::now(), dominance(&stages));
    }
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if want(n) {
            let t = Instant::now();
            ok &= report(n, name, t, f());
        }
    };
    run(5, "sampler stationarity", &mut sampler_stationarity);
    run(6, "gradient correctness", &mut gradient_suite);
    run(7, "structural invariants", &mut invariants);
    run(8, "concurrency correctness", &mut concurrency);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
