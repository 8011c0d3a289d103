//! Independent oracles shared by the metric tests and the acceptance run.
#![allow(dead_code)]

use dagr_tensor::{RngState, Tensor};
use dagr_vqa::eval::stats::{paired_t_test, plcc, srcc, wilcoxon_exact, wilcoxon_normal};
use dagr_vqa::objectives::{auc_judd, cc_metric, nss};

pub const INSTANCES: usize = 60;
pub const EXACT: f64 = 1e-9;
pub const P_TOL: f64 = 1e-3;

/// Largest deviation from an oracle over a batch of random instances.
#[derive(Clone, Debug)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: usize,
    pub max_diff: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, instances: 0, max_diff: 0.0, tolerance }
    }

    fn record(&mut self, got: f64, want: f64) {
        let d = (got - want).abs();
        self.max_diff = if d.is_nan() { f64::INFINITY } else { self.max_diff.max(d) };
        self.instances += 1;
    }

    pub fn passed(&self) -> bool {
        self.instances >= 50 && self.max_diff < self.tolerance
    }
}

pub fn random_map(rng: &mut RngState, shape: [usize; 3]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform()).collect()).unwrap()
}

/// Binary fixations with at least one positive and one negative per frame.
pub fn random_fixations(rng: &mut RngState, shape: [usize; 3]) -> Tensor {
    let p = shape[1] * shape[2];
    let mut data = Vec::new();
    for _ in 0..shape[0] {
        let mut frame: Vec<f64> = (0..p).map(|_| if rng.uniform() < 0.2 { 1.0 } else { 0.0 }).collect();
        frame[rng.below(p)] = 1.0;
        let mut k = rng.below(p);
        while frame.iter().all(|&v| v == 1.0) {
            frame[k] = 0.0;
            k = (k + 1) % p;
        }
        data.extend(frame);
    }
    Tensor::new(shape, data).unwrap()
}

pub fn random_shape(rng: &mut RngState) -> [usize; 3] {
    [1 + rng.below(3), 2 + rng.below(6), 2 + rng.below(6)]
}

fn frames(t: &Tensor) -> Vec<&[f64]> {
    let s = t.shape();
    t.data().chunks(s[1] * s[2]).collect()
}

pub fn random_vec(rng: &mut RngState, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

/// Small integers so ties occur.
pub fn tied_vec(rng: &mut RngState, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.below(5) as f64).collect()
}

pub fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

pub fn oracle_nss(map: &Tensor, fix: &Tensor) -> f64 {
    let fm = frames(map);
    let ff = frames(fix);
    let mut total = 0.0;
    for (m, f) in fm.iter().zip(&ff) {
        let n = m.len() as f64;
        let mean = m.iter().sum::<f64>() / n;
        let sd = (m.iter().map(|x| x * x).sum::<f64>() / n - mean * mean).sqrt();
        let picked: Vec<f64> =
            m.iter().zip(f.iter()).filter(|(_, &v)| v == 1.0).map(|(&x, _)| (x - mean) / sd).collect();
        total += picked.iter().sum::<f64>() / picked.len() as f64;
    }
    total / fm.len() as f64
}

/// ROC by counting pixels at or above every fixated value.
pub fn oracle_auc_frame(m: &[f64], f: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = m.iter().zip(f).filter(|(_, &v)| v == 1.0).map(|(&x, _)| x).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let n_pos = f.iter().filter(|&&v| v == 1.0).count() as f64;
    let n_neg = f.len() as f64 - n_pos;
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (x, v) in m.iter().zip(f) {
            if *x >= t {
                if *v == 1.0 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        pts.push((fp / n_neg, tp / n_pos));
    }
    pts.push((1.0, 1.0));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

pub fn oracle_auc(map: &Tensor, fix: &Tensor) -> f64 {
    let fm = frames(map);
    let ff = frames(fix);
    fm.iter().zip(&ff).map(|(m, f)| oracle_auc_frame(m, f)).sum::<f64>() / fm.len() as f64
}

/// Rank = number strictly below plus half of the other ties plus one.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Two-sided tail of Student's t by quadrature of the density.
pub fn oracle_t_p(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let dens = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    1.0 - 2.0 * simpson(dens, 0.0, t.abs(), 20_000)
}

pub fn oracle_paired_t(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let s2 = (d.iter().map(|x| x * x).sum::<f64>() - n * mean * mean) / (n - 1.0);
    oracle_t_p(mean / (s2 / n).sqrt(), n - 1.0)
}

fn signed_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    (oracle_ranks(&mags), d.iter().map(|v| *v > 0.0).collect())
}

/// Enumerates all 2^n sign patterns.
pub fn oracle_wilcoxon_exact(a: &[f64], b: &[f64]) -> f64 {
    let (ranks, positive) = signed_ranks(a, b);
    let w: f64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let n = ranks.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    let all = (1u64 << n) as f64;
    (2.0 * (le.min(ge) as f64) / all).min(1.0)
}

fn phi_upper(z: f64) -> f64 {
    let dens = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 - simpson(dens, 0.0, z, 20_000)
}

pub fn oracle_wilcoxon_normal(a: &[f64], b: &[f64]) -> f64 {
    let (ranks, positive) = signed_ranks(a, b);
    let n = ranks.len() as f64;
    let w: f64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let mut tie_sum = 0.0;
    let mut seen: Vec<f64> = Vec::new();
    for r in &ranks {
        if !seen.contains(r) {
            seen.push(*r);
            let t = ranks.iter().filter(|x| *x == r).count() as f64;
            tie_sum += t * t * t - t;
        }
    }
    let mu = n * (n + 1.0) / 4.0;
    let sigma = (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_sum / 48.0).sqrt();
    let z = ((w - mu).abs() - 0.5).max(0.0) / sigma;
    (2.0 * phi_upper(z)).min(1.0)
}

pub fn check_nss(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("NSS", EXACT);
    for _ in 0..INSTANCES {
        let s = random_shape(&mut rng);
        let map = random_map(&mut rng, s);
        let fix = random_fixations(&mut rng, s);
        c.record(nss(&map, &fix).unwrap(), oracle_nss(&map, &fix));
    }
    c
}

pub fn check_cc(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("CC", EXACT);
    for _ in 0..INSTANCES {
        let s = random_shape(&mut rng);
        let a = random_map(&mut rng, s);
        let b = random_map(&mut rng, s);
        let want = frames(&a).iter().zip(frames(&b)).map(|(x, y)| oracle_pearson(x, y)).sum::<f64>() / s[0] as f64;
        c.record(cc_metric(&a, &b).unwrap(), want);
    }
    c
}

/// Every third instance quantizes the map so fixated pixels tie with others.
pub fn check_auc_judd(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("AUC-J", EXACT);
    for i in 0..INSTANCES {
        let s = random_shape(&mut rng);
        let mut map = random_map(&mut rng, s);
        if i % 3 == 0 {
            map = map.map(|v| (v * 4.0).floor());
        }
        let fix = random_fixations(&mut rng, s);
        c.record(auc_judd(&map, &fix).unwrap(), oracle_auc(&map, &fix));
    }
    c
}

/// AUC-J of constant maps, compared with 0.5.
pub fn check_auc_constant(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("AUC-J constant map", EXACT);
    for _ in 0..INSTANCES {
        let s = random_shape(&mut rng);
        let fix = random_fixations(&mut rng, s);
        let map = Tensor::full(s, rng.uniform());
        c.record(auc_judd(&map, &fix).unwrap(), 0.5);
    }
    c
}

/// `1 - 6 sum d^2 / (n (n^2 - 1))` on tie-free data, midrank Pearson on tied data.
pub fn check_srcc(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("SRCC", EXACT);
    while c.instances < INSTANCES {
        let n = 4 + rng.below(25);
        if c.instances % 2 == 0 {
            let a = random_vec(&mut rng, n);
            let b = random_vec(&mut rng, n);
            let (ra, rb) = (oracle_ranks(&a), oracle_ranks(&b));
            let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
            let nf = n as f64;
            c.record(srcc(&a, &b).unwrap(), 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)));
        } else {
            let a = tied_vec(&mut rng, n);
            let b = tied_vec(&mut rng, n);
            let (ra, rb) = (oracle_ranks(&a), oracle_ranks(&b));
            if ra.iter().all(|&r| r == ra[0]) || rb.iter().all(|&r| r == rb[0]) {
                continue;
            }
            c.record(srcc(&a, &b).unwrap(), oracle_pearson(&ra, &rb));
        }
    }
    c
}

/// Largest change of SRCC under strictly increasing transforms.
pub fn check_srcc_monotone(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("SRCC monotone invariance", EXACT);
    for i in 0..INSTANCES {
        let n = 3 + rng.below(25);
        let a = random_vec(&mut rng, n);
        let b = random_vec(&mut rng, n);
        let t: Vec<f64> = match i % 3 {
            0 => a.iter().map(|x| x.exp()).collect(),
            1 => a.iter().map(|x| x * x * x + 2.0 * x).collect(),
            _ => a.iter().map(|x| 3.0 * x - 7.0).collect(),
        };
        c.record(srcc(&t, &b).unwrap(), srcc(&a, &b).unwrap());
    }
    c
}

pub fn check_plcc(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("PLCC", EXACT);
    for _ in 0..INSTANCES {
        let n = 2 + rng.below(40);
        let a = random_vec(&mut rng, n);
        let b = random_vec(&mut rng, n);
        c.record(plcc(&a, &b).unwrap(), oracle_pearson(&a, &b));
    }
    c
}

pub fn check_paired_t(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("paired t", P_TOL);
    for _ in 0..INSTANCES {
        let n = 3 + rng.below(25);
        let a = random_vec(&mut rng, n);
        let shift = rng.normal() * 0.5;
        let b: Vec<f64> = a.iter().map(|x| x + shift + rng.normal()).collect();
        c.record(paired_t_test(&a, &b).unwrap(), oracle_paired_t(&a, &b));
    }
    c
}

/// Exact null by enumeration for 5..=15 nonzero differences, with and without ties.
pub fn check_wilcoxon_exact(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("Wilcoxon exact", EXACT);
    while c.instances < INSTANCES {
        let n = 5 + rng.below(11);
        let (a, b) = if c.instances % 2 == 0 {
            (random_vec(&mut rng, n), random_vec(&mut rng, n))
        } else {
            (tied_vec(&mut rng, n), tied_vec(&mut rng, n))
        };
        if a.iter().zip(&b).filter(|(x, y)| x != y).count() < 5 {
            continue;
        }
        c.record(wilcoxon_exact(&a, &b).unwrap(), oracle_wilcoxon_exact(&a, &b));
    }
    c
}

/// Normal approximation with continuity and tie correction for 16..56 pairs.
pub fn check_wilcoxon_normal(seed: u64) -> OracleCheck {
    let mut rng = RngState::new(seed);
    let mut c = OracleCheck::new("Wilcoxon normal", P_TOL);
    for i in 0..INSTANCES {
        let n = 16 + rng.below(40);
        let (a, b) = if i % 2 == 0 {
            (random_vec(&mut rng, n), random_vec(&mut rng, n))
        } else {
            let a = tied_vec(&mut rng, n);
            let b: Vec<f64> = a.iter().map(|x| x + 1.0 + rng.below(3) as f64 - rng.below(4) as f64).collect();
            (a, b)
        };
        c.record(wilcoxon_normal(&a, &b).unwrap(), oracle_wilcoxon_normal(&a, &b));
    }
    c
}

pub fn all_metric_checks() -> Vec<OracleCheck> {
    vec![
        check_nss(11),
        check_cc(12),
        check_auc_judd(13),
        check_auc_constant(14),
        check_srcc(15),
        check_srcc_monotone(16),
        check_plcc(17),
        check_paired_t(18),
        check_wilcoxon_exact(19),
        check_wilcoxon_normal(20),
    ]
}

pub mod mechanics;
