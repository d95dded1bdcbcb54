//! Independent reference implementations used as oracles by the integration
//! tests and the acceptance harness. None of them call into the metric or
//! baseline code they check.

#![allow(dead_code)]

use std::collections::HashMap;

use aecm_core::aecm::{AecmParams, AecmVars, Architecture};
use aecm_core::autodiff::{Tape, Var};
use aecm_core::cm::{cm_loss_tape, LossWeights, PriorMode};
use aecm_core::{Matrix, Result, Rng};

/// Adjusted Rand index by explicit enumeration of all point pairs.
pub fn ari_pairs(t: &[usize], p: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            match (t[i] == t[j], p[i] == p[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        return 1.0;
    }
    2.0 * (a * d - b * c) / den
}

fn probs(labels: &[usize]) -> HashMap<usize, f64> {
    let mut m = HashMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0usize) += 1;
    }
    m.into_iter().map(|(k, c)| (k, c as f64 / labels.len() as f64)).collect()
}

fn joint(t: &[usize], p: &[usize]) -> HashMap<(usize, usize), f64> {
    let mut m = HashMap::new();
    for (&a, &b) in t.iter().zip(p) {
        *m.entry((a, b)).or_insert(0usize) += 1;
    }
    m.into_iter().map(|(k, c)| (k, c as f64 / t.len() as f64)).collect()
}

pub fn entropy(labels: &[usize]) -> f64 {
    probs(labels).values().map(|&q| -q * q.ln()).sum()
}

pub fn mutual_information(t: &[usize], p: &[usize]) -> f64 {
    let (pt, pp) = (probs(t), probs(p));
    joint(t, p)
        .iter()
        .map(|(&(a, b), &q)| q * (q / (pt[&a] * pp[&b])).ln())
        .sum()
}

pub fn nmi_direct(t: &[usize], p: &[usize]) -> f64 {
    let (ht, hp) = (entropy(t), entropy(p));
    match (ht == 0.0, hp == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => mutual_information(t, p) / (ht * hp).sqrt(),
    }
}

pub fn homogeneity_direct(t: &[usize], p: &[usize]) -> f64 {
    let ht = entropy(t);
    if ht == 0.0 {
        return 1.0;
    }
    let pp = probs(p);
    let h_cond: f64 = joint(t, p).iter().map(|(&(_, b), &q)| -q * (q / pp[&b]).ln()).sum();
    1.0 - h_cond / ht
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Best injective matching between predicted clusters and classes, found by
/// trying every injective map from the smaller label set into the larger.
pub fn acc_exhaustive(t: &[usize], p: &[usize]) -> f64 {
    let (ct, cp) = (distinct(t), distinct(p));
    let mut counts = vec![vec![0usize; cp.len()]; ct.len()];
    for (a, b) in t.iter().zip(p) {
        let i = ct.binary_search(a).unwrap();
        let j = cp.binary_search(b).unwrap();
        counts[i][j] += 1;
    }
    let transposed = ct.len() > cp.len();
    let (small, large) = if transposed { (cp.len(), ct.len()) } else { (ct.len(), cp.len()) };
    let at = |s: usize, l: usize| if transposed { counts[l][s] } else { counts[s][l] };
    fn go(s: usize, small: usize, used: &mut Vec<bool>, at: &dyn Fn(usize, usize) -> usize) -> usize {
        if s == small {
            return 0;
        }
        let mut best = 0;
        for l in 0..used.len() {
            if !used[l] {
                used[l] = true;
                best = best.max(at(s, l) + go(s + 1, small, used, at));
                used[l] = false;
            }
        }
        best
    }
    go(0, small, &mut vec![false; large], &at) as f64 / t.len() as f64
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum over all permutations of `Σ_i cost[i][σ(i)]` for a square matrix.
pub fn brute_force_assignment(cost: &Matrix) -> f64 {
    permutations(cost.rows())
        .iter()
        .map(|s| s.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// `n` labels drawn from between 1 and `max_k` classes.
pub fn random_labels(rng: &mut Rng, n: usize, max_k: usize) -> Vec<usize> {
    let k = 1 + rng.below(max_k);
    (0..n).map(|_| rng.below(k)).collect()
}

pub fn relabel(labels: &[usize], rng: &mut Rng) -> Vec<usize> {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let perm = rng.permutation(k);
    labels.iter().map(|&l| perm[l]).collect()
}

/// Textbook Lloyd iteration with plain vectors. Returns the final inertia and
/// the inertia after every assignment.
pub fn naive_lloyd(x: &[Vec<f64>], init: &[Vec<f64>], max_iter: usize, tol: f64) -> (f64, Vec<f64>) {
    let mut c: Vec<Vec<f64>> = init.to_vec();
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    let assign = |c: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut labels = Vec::with_capacity(x.len());
        let mut total = 0.0;
        for p in x {
            let mut best = (0, f64::INFINITY);
            for (j, cj) in c.iter().enumerate() {
                let v = d2(p, cj);
                if v < best.1 {
                    best = (j, v);
                }
            }
            labels.push(best.0);
            total += best.1;
        }
        (labels, total)
    };
    let (mut labels, mut inertia) = assign(&c);
    let mut trace = vec![inertia];
    for _ in 0..max_iter {
        let mut next = vec![vec![0.0; x[0].len()]; c.len()];
        let mut counts = vec![0usize; c.len()];
        for (p, &l) in x.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in next[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..c.len() {
            if counts[j] == 0 {
                next[j] = c[j].clone();
                continue;
            }
            for s in next[j].iter_mut() {
                *s /= counts[j] as f64;
            }
            shift = shift.max(d2(&next[j], &c[j]).sqrt());
        }
        c = next;
        let r = assign(&c);
        labels = r.0;
        inertia = r.1;
        trace.push(inertia);
        if shift < tol {
            break;
        }
    }
    (inertia, trace)
}

/// Number of connected components when points closer than `radius` are linked.
pub fn single_linkage_groups(points: &Matrix, radius: f64) -> usize {
    let k = points.rows();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for a in 0..k {
        for b in a + 1..k {
            let d: f64 = points
                .row(a)
                .iter()
                .zip(points.row(b))
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            if d <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    (0..k).filter(|&i| find(&mut parent, i) == i).count()
}

/// Largest distance between two point sets under the best one-to-one matching.
pub fn max_matched_distance(a: &Matrix, b: &Matrix) -> f64 {
    let d = |i: usize, j: usize| -> f64 {
        a.row(i)
            .iter()
            .zip(b.row(j))
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    };
    permutations(a.rows())
        .iter()
        .map(|s| s.iter().enumerate().map(|(i, &j)| d(i, j)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

pub fn uniform(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(lo, hi))
}

/// Scalar clustering-module objective for the gradient checker.
pub fn cm_objective<'a>(x: &'a Matrix, alpha: &'a [f64]) -> impl Fn(&mut Tape<f64>, &[Var]) -> Result<Var> + 'a {
    move |tape, v| {
        let xv = tape.constant(x.clone());
        let t = cm_loss_tape(tape, xv, [v[0], v[1], v[2], v[3]], alpha, PriorMode::Symmetric, &LossWeights::default())?;
        Ok(t.objective)
    }
}

/// Rebuilds the structured variable set from the flat parameter order.
pub fn aecm_vars(p: &AecmParams, v: &[Var]) -> AecmVars {
    let ne = p.encoder.len();
    let nd = p.decoder.len();
    let pairs = |s: usize, n: usize| (0..n).map(|i| (v[s + 2 * i], v[s + 2 * i + 1])).collect();
    let c = 2 * (ne + nd);
    AecmVars {
        encoder: pairs(0, ne),
        decoder: pairs(2 * ne, nd),
        cm: [v[c], v[c + 1], v[c + 2], v[c + 3]],
    }
}

/// Random tiny AE-CM and batch whose hidden pre-activations and Gram
/// deviations all stay at least `margin` away from the kinks.
pub fn kink_free_aecm(arch: &Architecture, k: usize, n: usize, margin: f64, seed: u64) -> (AecmParams, Matrix) {
    for attempt in 0..10_000u64 {
        let mut rng = Rng::new(seed.wrapping_mul(7919).wrapping_add(attempt));
        let mut p = AecmParams::random(arch, k, &mut rng).unwrap();
        p.cm.w_dec = uniform(&mut rng, k, arch.p, -1.0, 1.0);
        p.cm.b_dec = uniform(&mut rng, 1, arch.p, -0.5, 0.5);
        p.cm.w_enc = uniform(&mut rng, arch.p, k, -1.0, 1.0);
        let x = uniform(&mut rng, n, arch.input_dim, -2.0, 2.0);
        if clear_of_kinks(&p, &x, margin) {
            return (p, x);
        }
    }
    panic!("no kink-free sample found");
}

fn clear_of_kinks(p: &AecmParams, x: &Matrix, margin: f64) -> bool {
    let far = |m: &Matrix| m.as_slice().iter().all(|v| v.abs() > margin);
    let check_stack = |layers: &[aecm_core::aecm::MlpLayer], input: Matrix| -> Option<Matrix> {
        let mut h = input;
        for l in layers {
            let pre = h.matmul(&l.weights).unwrap().add_row_broadcast(&l.bias).unwrap();
            if !far(&pre) {
                return None;
            }
            h = l.forward(&h).unwrap();
        }
        Some(h)
    };
    let Some(z) = check_stack(&p.encoder, p.feature_map.apply(x).unwrap()) else {
        return false;
    };
    if check_stack(&p.decoder, z).is_none() {
        return false;
    }
    let mu = aecm_core::cm::extract_centroids(&p.cm);
    let gram = mu.matmul_t(&mu).unwrap().sub(&Matrix::identity(mu.rows())).unwrap();
    far(&gram)
}
