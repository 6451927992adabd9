mod common;

use common::{h2, random_orthogonal, rigid_motion, sto3g, water};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srdft::chem::Molecule;
use srdft::model::{
    cosine_lr, featurize, load_checkpoint, loss_and_grad, model_energy, optimizer_step, predict_coefficients,
    read_checkpoint, save_checkpoint, write_checkpoint, AdamState, ModelConfig, ModelParams, OptimizerConfig,
    Orthogonalization, PreparedFrame, Weights,
};
use srdft::scf::{solve_scf, ScfOptions};

fn tiny(kind: Orthogonalization, seed: u64) -> ModelConfig {
    ModelConfig {
        hidden_width: 8,
        depth: 2,
        embedding_dim: 4,
        n_radial_features: 6,
        orthogonalization: kind,
        init_seed: seed,
        ..Default::default()
    }
}

fn prepare(params: &ModelParams, mols: &[Molecule]) -> Vec<PreparedFrame> {
    mols.iter().map(|m| PreparedFrame::new(params, m.clone(), sto3g()).unwrap()).collect()
}

/// Perturb every weight so no block sits at a special point (zero biases,
/// identity orbital bias).
fn jiggle(params: &mut ModelParams, rng: &mut ChaCha8Rng, scale: f64) {
    for (_, b) in params.weights.blocks_mut() {
        for v in b.iter_mut() {
            *v += scale * rng.random_range(-1.0..1.0);
        }
    }
}

fn check_gradient(kind: Orthogonalization, mols: &[Molecule], h: f64, floor: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut params = ModelParams::for_molecule(tiny(kind, 3), &mols[0], sto3g()).unwrap();
    jiggle(&mut params, &mut rng, 0.3);
    let frames = prepare(&params, mols);
    let (_, grad) = loss_and_grad(&params, &frames).unwrap();
    let names: Vec<String> = params.weights.blocks().into_iter().map(|(n, _)| n).collect();
    let mut worst: f64 = 0.0;
    for (bi, name) in names.iter().enumerate() {
        let len = params.weights.blocks()[bi].1.len();
        for k in 0..len {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.weights.blocks_mut()[bi].1[k] += delta;
                loss_and_grad(&p, &frames).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let g = grad.blocks()[bi].1[k];
            let scale = fd.abs().max(g.abs());
            let err = (fd - g).abs() / scale.max(floor);
            worst = worst.max(err);
            assert!(err < 1e-5, "{kind:?} {name}[{k}]: fd {fd:e} vs {g:e}");
        }
    }
    assert!(worst < 1e-5);
}

#[test]
fn qr_gradient_matches_finite_differences_h2() {
    check_gradient(Orthogonalization::Qr, &[h2(1.4), h2(1.9)], 1e-6, 1e-4);
}

#[test]
fn qr_gradient_matches_finite_differences_water() {
    let w = water();
    let mut p = w.positions().clone();
    p[(1, 1)] += 0.1;
    // |E| ~ 75 Hartree: round-off in the loss limits the resolvable gradient.
    check_gradient(Orthogonalization::Qr, &[w.with_positions(p).unwrap()], 1e-5, 1e-3);
}

#[test]
fn cayley_gradient_matches_finite_differences() {
    check_gradient(Orthogonalization::Cayley, &[h2(1.4)], 1e-6, 1e-4);
}

#[test]
fn predictions_are_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let base = water();
    let cfg = ModelConfig { hidden_width: 16, depth: 2, ..Default::default() };
    for draw in 0..200 {
        let mut params =
            ModelParams::for_molecule(ModelConfig { init_seed: draw, ..cfg.clone() }, &base, sto3g()).unwrap();
        jiggle(&mut params, &mut rng, 1.0);
        let mut pos = base.positions().clone();
        for v in pos.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let frame = PreparedFrame::new(&params, base.with_positions(pos).unwrap(), sto3g()).unwrap();
        let c = predict_coefficients(&params, &frame).unwrap().values;
        let dev = (c.transpose() * &frame.ints.overlap * &c - DMatrix::identity(7, 7)).abs().max();
        assert!(dev < 1e-8, "draw {draw}: {dev:e}");
    }
}

#[test]
fn features_are_rigid_motion_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = water();
    let params = ModelParams::for_molecule(ModelConfig::default(), &m, sto3g()).unwrap();
    let f0 = featurize(&params, &m).unwrap().values;
    // Exactly representable shift: coordinate differences are unchanged bit for bit.
    let mut shifted = m.positions().clone();
    for mut row in shifted.row_iter_mut() {
        row[0] += 4.0;
    }
    let f1 = featurize(&params, &m.with_positions(shifted).unwrap()).unwrap().values;
    assert_eq!(f0, f1);
    for _ in 0..5 {
        let u = random_orthogonal(&mut rng, 3);
        let t = [rng.random_range(-5.0..5.0), 1.3, -0.7];
        let moved = m.with_positions(rigid_motion(m.positions(), &u, t)).unwrap();
        let f = featurize(&params, &moved).unwrap().values;
        assert!((f - &f0).abs().max() < 1e-12);
    }
}

#[test]
fn model_energy_rigid_motion_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let energy =
        |p: &ModelParams, m: &Molecule| model_energy(p, &PreparedFrame::new(p, m.clone(), sto3g()).unwrap()).unwrap();
    // s-only basis: invariant under any rigid motion.
    for m in [h2(1.4), common::heh_plus()] {
        let params = ModelParams::for_molecule(ModelConfig::default(), &m, sto3g()).unwrap();
        let e0 = energy(&params, &m);
        for _ in 0..5 {
            let u = random_orthogonal(&mut rng, 3);
            let t = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.4];
            let moved = m.with_positions(rigid_motion(m.positions(), &u, t)).unwrap();
            assert!((energy(&params, &moved) - e0).abs() < 1e-8);
        }
    }
    // With p shells the invariant-feature network is not rotation
    // equivariant; translations still leave the energy unchanged.
    let m = water();
    let params = ModelParams::for_molecule(ModelConfig::default(), &m, sto3g()).unwrap();
    let e0 = energy(&params, &m);
    let moved = m.with_positions(rigid_motion(m.positions(), &DMatrix::identity(3, 3), [2.5, -1.25, 7.0])).unwrap();
    assert!((energy(&params, &moved) - e0).abs() < 1e-8);
}

#[test]
fn symmetric_atoms_have_identical_rows() {
    let m = h2(1.4);
    let params = ModelParams::for_molecule(ModelConfig::default(), &m, sto3g()).unwrap();
    let f = featurize(&params, &m).unwrap().values;
    assert_eq!(f.row(0), f.row(1));
}

#[test]
fn identity_overlap_gives_q() {
    // A lone helium 1s has S = [1]; C must then equal Q exactly up to round-off.
    let he = Molecule::new(vec![2], srdft::chem::Positions::zeros(1, 3), 0).unwrap();
    let params = ModelParams::for_molecule(tiny(Orthogonalization::Qr, 0), &he, sto3g()).unwrap();
    let frame = PreparedFrame::new(&params, he, sto3g()).unwrap();
    let c = predict_coefficients(&params, &frame).unwrap().values;
    assert!((c.transpose() * &c)[(0, 0)] - 1.0 < 1e-10);
}

#[test]
fn duplicated_frame_has_mean_semantics() {
    let m = h2(1.4);
    let params = ModelParams::for_molecule(tiny(Orthogonalization::Qr, 1), &m, sto3g()).unwrap();
    let one = prepare(&params, std::slice::from_ref(&m));
    let two = prepare(&params, &[m.clone(), m]);
    let (l1, g1) = loss_and_grad(&params, &one).unwrap();
    let (l2, g2) = loss_and_grad(&params, &two).unwrap();
    assert_eq!(l1, l2);
    for ((_, a), (_, b)) in g1.blocks().into_iter().zip(g2.blocks()) {
        assert!((a - b).abs().max() <= 1e-15 * (1.0 + a.abs().max()));
    }
}

#[test]
fn loss_dominates_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mols = [h2(1.2), h2(1.4), h2(2.0), water()];
    for m in mols {
        let e0 = solve_scf(&m, sto3g(), &ScfOptions::default()).unwrap().energy;
        for s in 0..10 {
            let mut p = ModelParams::for_molecule(tiny(Orthogonalization::Qr, s), &m, sto3g()).unwrap();
            jiggle(&mut p, &mut rng, 0.5);
            let (l, _) = loss_and_grad(&p, &prepare(&p, std::slice::from_ref(&m))).unwrap();
            assert!(l >= e0 - 1e-8);
        }
    }
}

#[test]
fn training_on_fixed_buffer_lowers_loss() {
    let mols = [h2(1.2), h2(1.4), h2(1.6), h2(1.8)];
    let mut params =
        ModelParams::for_molecule(ModelConfig { hidden_width: 32, depth: 2, ..Default::default() }, &mols[0], sto3g())
            .unwrap();
    let frames = prepare(&params, &mols);
    let cfg = OptimizerConfig { lr_max: 1e-3, ..Default::default() };
    let mut state = AdamState::new(&params.weights);
    let (l0, _) = loss_and_grad(&params, &frames).unwrap();
    for step in 0..500 {
        let (_, g) = loss_and_grad(&params, &frames).unwrap();
        optimizer_step(&mut params.weights, &g, &mut state, &cfg, cosine_lr(&cfg, step, 500)).unwrap();
    }
    let (l1, _) = loss_and_grad(&params, &frames).unwrap();
    assert!(l1 < l0, "{l1} !< {l0}");
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let m = water();
    let mut params = ModelParams::for_molecule(tiny(Orthogonalization::Cayley, 5), &m, sto3g()).unwrap();
    let cfg = OptimizerConfig::default();
    let mut state = AdamState::new(&params.weights);
    let frames = prepare(&params, &[m]);
    for k in 0..3 {
        let (_, g) = loss_and_grad(&params, &frames).unwrap();
        optimizer_step(&mut params.weights, &g, &mut state, &cfg, cosine_lr(&cfg, k, 3)).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&params, &state, &cfg, &path).unwrap();
    let (p2, s2, c2) = load_checkpoint(&path).unwrap();
    assert_eq!(p2, params);
    assert_eq!(s2, state);
    assert_eq!(c2, cfg);
    let bits =
        |w: &Weights| -> Vec<u64> { w.blocks().iter().flat_map(|(_, b)| b.iter().map(|v| v.to_bits())).collect() };
    assert_eq!(bits(&p2.weights), bits(&params.weights));
    assert_eq!(model_energy(&p2, &frames[0]).unwrap(), model_energy(&params, &frames[0]).unwrap());
}

#[test]
fn corrupt_checkpoints_rejected() {
    let m = h2(1.4);
    let params = ModelParams::for_molecule(tiny(Orthogonalization::Qr, 0), &m, sto3g()).unwrap();
    let state = AdamState::new(&params.weights);
    let good = write_checkpoint(&params, &state, &OptimizerConfig::default());
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(read_checkpoint(&bad_magic).unwrap_err().to_string().contains("magic"));
    let mut bad_version = good.clone();
    bad_version[8] = 9;
    assert!(read_checkpoint(&bad_version).unwrap_err().to_string().contains("version"));
    assert!(read_checkpoint(&good[..good.len() - 5]).unwrap_err().to_string().contains("truncated"));
    // Claim a wider network in the header than the arrays provide.
    let text = String::from_utf8_lossy(&good).replace("\"hidden_width\":8", "\"hidden_width\":9");
    let mut patched = text.into_bytes();
    patched.truncate(good.len());
    assert!(read_checkpoint(&patched).is_err());
}
