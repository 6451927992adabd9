//! Hermite expansion coefficients, Hermite Coulomb integrals and the shell
//! pair / quartet kernels built on them.

use std::f64::consts::PI;

use super::boys::{boys_array, MAX_ORDER};
use crate::chem::GaussianShell;

const S_COMPONENTS: [[usize; 3]; 1] = [[0, 0, 0]];
const P_COMPONENTS: [[usize; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

fn components(l: u8) -> &'static [[usize; 3]] {
    match l {
        0 => &S_COMPONENTS,
        _ => &P_COMPONENTS,
    }
}

/// `E^{ij}_t` for i <= 1, j <= 3 (j reaches l_b + 2 for kinetic integrals).
type ETable = [[[f64; 6]; 4]; 2];

fn e_table(a: f64, b: f64, xa: f64, xb: f64) -> ETable {
    let p = a + b;
    let q = a * b / p;
    let xab = xa - xb;
    let xpa = -b * xab / p;
    let xpb = a * xab / p;
    let half_p = 0.5 / p;
    let mut e = [[[0.0; 6]; 4]; 2];
    e[0][0][0] = (-q * xab * xab).exp();
    for i in 0..2 {
        if i > 0 {
            let prev = e[i - 1][0];
            for t in 0..=i {
                let lower = if t > 0 { prev[t - 1] } else { 0.0 };
                e[i][0][t] = half_p * lower + xpa * prev[t] + (t + 1) as f64 * prev[t + 1];
            }
        }
        for j in 1..4 {
            let prev = e[i][j - 1];
            for t in 0..=(i + j) {
                let lower = if t > 0 { prev[t - 1] } else { 0.0 };
                e[i][j][t] = half_p * lower + xpb * prev[t] + (t + 1) as f64 * prev[t + 1];
            }
        }
    }
    e
}

/// Number of `(t, u, v)` with `t + u + v <= MAX_ORDER`.
const NTUV: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) * (MAX_ORDER + 3) / 6;

/// Compact index of `(t, u, v)`: grouped by order `t + u + v`, then by
/// descending `t`, then descending `u`.
const fn build_tuv_index() -> [[[u8; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1] {
    let mut table = [[[u8::MAX; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
    let mut next = 0u8;
    let mut order = 0;
    while order <= MAX_ORDER {
        let mut t = order as isize;
        while t >= 0 {
            let mut u = (order as isize) - t;
            while u >= 0 {
                let v = order as isize - t - u;
                table[t as usize][u as usize][v as usize] = next;
                next += 1;
                u -= 1;
            }
            t -= 1;
        }
        order += 1;
    }
    table
}

const TUV_INDEX: [[[u8; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1] = build_tuv_index();

const fn build_tuv_of() -> [[u8; 3]; NTUV] {
    let mut out = [[0u8; 3]; NTUV];
    let mut t = 0;
    while t <= MAX_ORDER {
        let mut u = 0;
        while u + t <= MAX_ORDER {
            let mut v = 0;
            while v + u + t <= MAX_ORDER {
                out[TUV_INDEX[t][u][v] as usize] = [t as u8, u as u8, v as u8];
                v += 1;
            }
            u += 1;
        }
        t += 1;
    }
    out
}

const TUV_OF: [[u8; 3]; NTUV] = build_tuv_of();

/// `SUM_INDEX[i][j]` is the index of `tuv(i) + tuv(j)`, or `u8::MAX` past
/// `MAX_ORDER`.
const fn build_sum_index() -> [[u8; NTUV]; NTUV] {
    let mut out = [[u8::MAX; NTUV]; NTUV];
    let mut i = 0;
    while i < NTUV {
        let mut j = 0;
        while j < NTUV {
            let (a, b) = (TUV_OF[i], TUV_OF[j]);
            let (t, u, v) = ((a[0] + b[0]) as usize, (a[1] + b[1]) as usize, (a[2] + b[2]) as usize);
            if t + u + v <= MAX_ORDER {
                out[i][j] = TUV_INDEX[t][u][v];
            }
            j += 1;
        }
        i += 1;
    }
    out
}

const SUM_INDEX: [[u8; NTUV]; NTUV] = build_sum_index();

/// Number of Hermite indices of order at most `l`.
const fn n_hermite(l: usize) -> usize {
    (l + 1) * (l + 2) * (l + 3) / 6
}

#[inline]
fn ridx(t: usize, u: usize, v: usize) -> usize {
    TUV_INDEX[t][u][v] as usize
}

/// Hermite Coulomb integrals `R^0_{tuv}(alpha, PC)` for `t + u + v <= l_max`,
/// indexed by [`ridx`].
fn hermite_r(l_max: usize, alpha: f64, pc: [f64; 3]) -> [f64; NTUV] {
    let mut boys = [0.0; MAX_ORDER + 1];
    let r2 = pc[0] * pc[0] + pc[1] * pc[1] + pc[2] * pc[2];
    boys_array(l_max, alpha * r2, &mut boys);

    // r[n] holds R^n for all orders up to l_max - n.
    let mut r = [[0.0; NTUV]; MAX_ORDER + 1];
    let mut scale = 1.0;
    for (n, f) in boys.iter().enumerate().take(l_max + 1) {
        r[n][0] = scale * f;
        scale *= -2.0 * alpha;
    }
    for order in 1..=l_max {
        for n in 0..=(l_max - order) {
            let (lo, hi) = r.split_at_mut(n + 1);
            let (cur, up) = (&mut lo[n], &hi[0]);
            for t in 0..=order {
                for u in 0..=(order - t) {
                    let v = order - t - u;
                    let val = if t > 0 {
                        let a = if t > 1 { (t - 1) as f64 * up[ridx(t - 2, u, v)] } else { 0.0 };
                        a + pc[0] * up[ridx(t - 1, u, v)]
                    } else if u > 0 {
                        let a = if u > 1 { (u - 1) as f64 * up[ridx(t, u - 2, v)] } else { 0.0 };
                        a + pc[1] * up[ridx(t, u - 1, v)]
                    } else {
                        let a = if v > 1 { (v - 1) as f64 * up[ridx(t, u, v - 2)] } else { 0.0 };
                        a + pc[2] * up[ridx(t, u, v - 1)]
                    };
                    cur[ridx(t, u, v)] = val;
                }
            }
        }
    }
    r[0]
}

struct PrimPair {
    p: f64,
    b: f64,
    center: [f64; 3],
    coef: f64,
    e: [ETable; 3],
    /// `E_{tuv}` terms as `(compact index, coefficient)`; component pair `k`
    /// owns `terms[offsets[k]..offsets[k + 1]]`.
    terms: Vec<(u8, f64)>,
    offsets: Vec<usize>,
}

impl PrimPair {
    #[inline]
    fn component(&self, k: usize) -> &[(u8, f64)] {
        &self.terms[self.offsets[k]..self.offsets[k + 1]]
    }
}

pub(super) struct ShellPair {
    la: u8,
    lb: u8,
    prims: Vec<PrimPair>,
}

impl ShellPair {
    fn new(sa: &GaussianShell, sb: &GaussianShell) -> Self {
        let (ca, cb) = (components(sa.angular_momentum), components(sb.angular_momentum));
        let mut prims = Vec::with_capacity(sa.exponents.len() * sb.exponents.len());
        for (&a, &da) in sa.exponents.iter().zip(&sa.coefficients) {
            for (&b, &db) in sb.exponents.iter().zip(&sb.coefficients) {
                let p = a + b;
                let center = [0, 1, 2].map(|k| (a * sa.center[k] + b * sb.center[k]) / p);
                let e = [0, 1, 2].map(|k| e_table(a, b, sa.center[k], sb.center[k]));
                let mut terms = Vec::new();
                let mut offsets = vec![0];
                for pa in ca {
                    for pb in cb {
                        for t in 0..=(pa[0] + pb[0]) {
                            for u in 0..=(pa[1] + pb[1]) {
                                for v in 0..=(pa[2] + pb[2]) {
                                    let c = e[0][pa[0]][pb[0]][t] * e[1][pa[1]][pb[1]][u] * e[2][pa[2]][pb[2]][v];
                                    terms.push((ridx(t, u, v) as u8, c));
                                }
                            }
                        }
                        offsets.push(terms.len());
                    }
                }
                prims.push(PrimPair { p, b, center, coef: da * db, e, terms, offsets });
            }
        }
        ShellPair { la: sa.angular_momentum, lb: sb.angular_momentum, prims }
    }

    /// `(ca, cb, overlap, kinetic, nuclear attraction)` for every component pair.
    pub(super) fn one_electron(&self, charges: &[(f64, [f64; 3])]) -> Vec<(usize, usize, f64, f64, f64)> {
        let (ca, cb) = (components(self.la), components(self.lb));
        let mut out = Vec::with_capacity(ca.len() * cb.len());
        let l_tot = (self.la + self.lb) as usize;
        let mut v_acc = vec![0.0; ca.len() * cb.len()];
        for pp in &self.prims {
            for &(z, c) in charges {
                let pc = [pp.center[0] - c[0], pp.center[1] - c[1], pp.center[2] - c[2]];
                let r = hermite_r(l_tot, pp.p, pc);
                let pref = -z * 2.0 * PI / pp.p * pp.coef;
                for (k, acc) in v_acc.iter_mut().enumerate() {
                    let s: f64 = pp.component(k).iter().map(|&(i, x)| x * r[i as usize]).sum();
                    *acc += pref * s;
                }
            }
        }
        for (ia, pa) in ca.iter().enumerate() {
            for (ib, pb) in cb.iter().enumerate() {
                let mut s_tot = 0.0;
                let mut t_tot = 0.0;
                for pp in &self.prims {
                    let root = (PI / pp.p).sqrt();
                    let s1 = |k: usize, j: usize| pp.e[k][pa[k]][j][0] * root;
                    let mut s = [0.0; 3];
                    let mut t = [0.0; 3];
                    for k in 0..3 {
                        let j = pb[k];
                        s[k] = s1(k, j);
                        let lower = if j >= 2 { (j * (j - 1)) as f64 * s1(k, j - 2) } else { 0.0 };
                        t[k] =
                            -0.5 * (lower - 2.0 * pp.b * (2 * j + 1) as f64 * s[k] + 4.0 * pp.b * pp.b * s1(k, j + 2));
                    }
                    s_tot += pp.coef * s[0] * s[1] * s[2];
                    t_tot += pp.coef * (t[0] * s[1] * s[2] + s[0] * t[1] * s[2] + s[0] * s[1] * t[2]);
                }
                out.push((ia, ib, s_tot, t_tot, v_acc[ia * cb.len() + ib]));
            }
        }
        out
    }
}

pub(super) struct ShellPairs {
    pairs: Vec<(usize, usize, ShellPair)>,
}

impl ShellPairs {
    pub(super) fn new(shells: &[GaussianShell]) -> Self {
        let mut pairs = Vec::new();
        for a in 0..shells.len() {
            for b in 0..=a {
                pairs.push((a, b, ShellPair::new(&shells[a], &shells[b])));
            }
        }
        ShellPairs { pairs }
    }

    pub(super) fn iter(&self) -> impl Iterator<Item = (usize, usize, &ShellPair)> {
        self.pairs.iter().map(|(a, b, p)| (*a, *b, p))
    }
}

/// Evaluate `(ab|cd)` for every component combination of a shell quartet and
/// hand each value to `sink(ca, cb, cc, cd, value)`.
pub(super) fn eri_quartet(ab: &ShellPair, cd: &ShellPair, mut sink: impl FnMut(usize, usize, usize, usize, f64)) {
    let (na, nb) = (components(ab.la).len(), components(ab.lb).len());
    let (nc, nd) = (components(cd.la).len(), components(cd.lb).len());
    let l_tot = (ab.la + ab.lb + cd.la + cd.lb) as usize;
    let n_ket = nc * nd;
    let mut buf = vec![0.0; na * nb * n_ket];
    let two_pi_52 = 2.0 * PI.powf(2.5);
    let n_ket_herm = n_hermite((cd.la + cd.lb) as usize);
    let mut g = [0.0; NTUV];
    for pp in &ab.prims {
        for qq in &cd.prims {
            let (p, q) = (pp.p, qq.p);
            let alpha = p * q / (p + q);
            let pref = two_pi_52 / (p * q * (p + q).sqrt()) * pp.coef * qq.coef;
            let pq = [pp.center[0] - qq.center[0], pp.center[1] - qq.center[1], pp.center[2] - qq.center[2]];
            let r = hermite_r(l_tot, alpha, pq);
            for i_bra in 0..na * nb {
                // g_k = sum_i E^bra_i R_{i + k}, then contract with (-1)^|k| E^ket_k.
                g[..n_ket_herm].fill(0.0);
                for &(ib, x) in pp.component(i_bra) {
                    let row = &SUM_INDEX[ib as usize];
                    for (k, gk) in g[..n_ket_herm].iter_mut().enumerate() {
                        *gk += x * r[row[k] as usize];
                    }
                }
                let out = &mut buf[i_bra * n_ket..(i_bra + 1) * n_ket];
                for (i_ket, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for &(ik, y) in qq.component(i_ket) {
                        let [t, u, v] = TUV_OF[ik as usize];
                        let signed = if (t + u + v) % 2 == 1 { -y } else { y };
                        s += signed * g[ik as usize];
                    }
                    *o += pref * s;
                }
            }
        }
    }
    for ia in 0..na {
        for ib in 0..nb {
            for ic in 0..nc {
                for id in 0..nd {
                    sink(ia, ib, ic, id, buf[(ia * nb + ib) * n_ket + ic * nd + id]);
                }
            }
        }
    }
}
