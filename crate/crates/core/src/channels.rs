//! Binary-input discrete memoryless channels with finite output alphabets.
//!
//! A channel is stored as a list of output symbols, each carrying the pair
//! `(W(y|0), W(y|1))`. Constructors prune symbols of negligible total mass and
//! renormalize so both conditional distributions sum to one.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance used when merging outputs with equal likelihood ratio.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;
/// Outputs whose total mass falls below this are dropped.
pub const PRUNE_MASS: f64 = 1e-15;
pub const DEFAULT_LESS_NOISY_GRID: usize = 201;
pub const DEFAULT_LESS_NOISY_TOL: f64 = 1e-9;

pub const FILE_HEADER: &str = "binary-input-dmc v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputSymbol<T> {
    pub p0: T,
    pub p1: T,
}

impl<T: Scalar> OutputSymbol<T> {
    pub fn new(p0: T, p1: T) -> Self {
        Self { p0, p1 }
    }

    #[inline]
    pub fn mass(&self) -> T {
        self.p0 + self.p1
    }

    /// Posterior probability of input 0 under a uniform prior.
    #[inline]
    fn posterior0(&self) -> T {
        self.p0 / (self.p0 + self.p1)
    }

    /// Contribution of this symbol to the symmetric capacity.
    #[inline]
    pub fn capacity_term(&self) -> T {
        let half = T::lit(0.5);
        let m = self.p0 + self.p1;
        let mut acc = T::zero();
        if self.p0 > T::zero() {
            acc = acc + half * self.p0 * (T::lit(2.0) * self.p0 / m).log2();
        }
        if self.p1 > T::zero() {
            acc = acc + half * self.p1 * (T::lit(2.0) * self.p1 / m).log2();
        }
        acc
    }

    /// Natural-log likelihood ratio `ln(p0/p1)`, infinite on one-sided symbols.
    pub fn llr(&self) -> T {
        (self.p0 / self.p1).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel<T> {
    outputs: Vec<OutputSymbol<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics<T> {
    pub capacity: T,
    pub bhattacharyya: T,
    pub entropy: T,
}

impl<T: Scalar> Channel<T> {
    /// Validates, prunes and renormalizes a list of `(p0, p1)` masses.
    pub fn new(outputs: Vec<OutputSymbol<T>>) -> Result<Self> {
        let mut s0 = T::zero();
        let mut s1 = T::zero();
        for (i, o) in outputs.iter().enumerate() {
            if !o.p0.is_finite() || !o.p1.is_finite() || o.p0 < T::zero() || o.p1 < T::zero() {
                return Err(Error::InvalidChannel(format!(
                    "output {i} has invalid masses ({}, {})",
                    o.p0, o.p1
                )));
            }
            s0 = s0 + o.p0;
            s1 = s1 + o.p1;
        }
        let tol = T::mass_tolerance();
        if (s0 - T::one()).abs() > tol || (s1 - T::one()).abs() > tol {
            return Err(Error::InvalidChannel(format!(
                "conditional masses sum to ({s0}, {s1}), expected (1, 1)"
            )));
        }
        Ok(Self::from_raw(outputs))
    }

    /// Builds a channel from nonnegative masses produced internally,
    /// pruning negligible symbols and renormalizing both columns.
    pub(crate) fn from_raw(mut outputs: Vec<OutputSymbol<T>>) -> Self {
        let floor = T::lit(PRUNE_MASS);
        outputs.retain(|o| o.mass() >= floor);
        let s0: T = outputs.iter().map(|o| o.p0).sum();
        let s1: T = outputs.iter().map(|o| o.p1).sum();
        for o in &mut outputs {
            if s0 > T::zero() {
                o.p0 = o.p0 / s0;
            }
            if s1 > T::zero() {
                o.p1 = o.p1 / s1;
            }
        }
        Self { outputs }
    }

    pub fn outputs(&self) -> &[OutputSymbol<T>] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn capacity(&self) -> T {
        let i: T = self.outputs.iter().map(OutputSymbol::capacity_term).sum();
        i.max(T::zero()).min(T::one())
    }

    pub fn bhattacharyya(&self) -> T {
        let z: T = self.outputs.iter().map(|o| (o.p0 * o.p1).sqrt()).sum();
        z.max(T::zero()).min(T::one())
    }

    /// Mutual information in bits with input prior `P(X=0) = prior0`.
    pub fn mutual_information(&self, prior0: T) -> T {
        let q0 = prior0;
        let q1 = T::one() - prior0;
        let mut acc = T::zero();
        for o in &self.outputs {
            let py = q0 * o.p0 + q1 * o.p1;
            if py <= T::zero() {
                continue;
            }
            if q0 > T::zero() && o.p0 > T::zero() {
                acc = acc + q0 * o.p0 * (o.p0 / py).log2();
            }
            if q1 > T::zero() && o.p1 > T::zero() {
                acc = acc + q1 * o.p1 * (o.p1 / py).log2();
            }
        }
        acc.max(T::zero())
    }

    /// Swaps the roles of the two inputs.
    pub fn flipped(&self) -> Self {
        Self {
            outputs: self.outputs.iter().map(|o| OutputSymbol::new(o.p1, o.p0)).collect(),
        }
    }

    /// Disjoint union of scaled channels: with probability `weight` the
    /// corresponding component is used and its identity is revealed.
    pub fn mixture(parts: &[(T, &Channel<T>)]) -> Result<Self> {
        let total: T = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < T::zero()) || (total - T::one()).abs() > T::mass_tolerance() {
            return invalid("mixture weights must be nonnegative and sum to 1");
        }
        let outputs = parts
            .iter()
            .flat_map(|(w, c)| c.outputs.iter().map(move |o| OutputSymbol::new(*w * o.p0, *w * o.p1)))
            .collect();
        Ok(Self::from_raw(outputs))
    }

    /// True when every output is either perfectly informative or a pure
    /// erasure, i.e. the channel is a BEC up to relabeling.
    pub fn is_erasure(&self, tol: T) -> bool {
        self.outputs.iter().all(|o| {
            let m = o.p0.max(o.p1);
            o.p0.min(o.p1) <= tol * m || (o.p0 - o.p1).abs() <= tol * m
        })
    }

    /// Total mass of pure-erasure outputs (equal likelihoods).
    pub fn erasure_mass(&self, tol: T) -> T {
        self.outputs
            .iter()
            .filter(|o| (o.p0 - o.p1).abs() <= tol * o.p0.max(o.p1))
            .map(|o| o.p0)
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> Channel<U> {
        Channel::from_raw(
            self.outputs
                .iter()
                .map(|o| OutputSymbol::new(U::lit(o.p0.to_f64_lossy()), U::lit(o.p1.to_f64_lossy())))
                .collect(),
        )
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::from(FILE_HEADER);
        s.push('\n');
        for o in &self.outputs {
            let _ = writeln!(s, "{:e} {:e}", o.p0, o.p1);
        }
        s
    }

    pub fn parse_file_string(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h == FILE_HEADER => {}
            Some((line, _)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected header '{FILE_HEADER}'"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 0,
                    msg: "empty channel file".into(),
                })
            }
        }
        let mut outputs = Vec::new();
        for (line, l) in lines {
            let mut it = l.split_whitespace();
            let mut next = |what: &str| -> Result<T> {
                let tok = it.next().ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing {what}"),
                })?;
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number '{tok}'"),
                })?;
                Ok(T::lit(v))
            };
            let p0 = next("p0")?;
            let p1 = next("p1")?;
            if it.next().is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "expected exactly two columns".into(),
                });
            }
            outputs.push(OutputSymbol::new(p0, p1));
        }
        Self::new(outputs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_file_string(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

pub fn make_bsc<T: Scalar>(p: T) -> Result<Channel<T>> {
    if !(p >= T::zero() && p <= T::lit(0.5)) {
        return invalid(format!("BSC crossover {p} outside [0, 1/2]"));
    }
    let q = T::one() - p;
    Ok(Channel::from_raw(vec![
        OutputSymbol::new(q, p),
        OutputSymbol::new(p, q),
    ]))
}

pub fn make_bec<T: Scalar>(eps: T) -> Result<Channel<T>> {
    if !(eps >= T::zero() && eps <= T::one()) {
        return invalid(format!("BEC erasure probability {eps} outside [0, 1]"));
    }
    let q = T::one() - eps;
    Ok(Channel::from_raw(vec![
        OutputSymbol::new(q, T::zero()),
        OutputSymbol::new(eps, eps),
        OutputSymbol::new(T::zero(), q),
    ]))
}

/// Binary symmetric erasure channel: erasure with probability `eps`,
/// otherwise a BSC with crossover `p`.
pub fn make_bsec<T: Scalar>(eps: T, p: T) -> Result<Channel<T>> {
    if !(eps >= T::zero() && eps <= T::one()) {
        return invalid(format!("erasure probability {eps} outside [0, 1]"));
    }
    if !(p >= T::zero() && p <= T::lit(0.5)) {
        return invalid(format!("crossover {p} outside [0, 1/2]"));
    }
    let k = T::one() - eps;
    Ok(Channel::from_raw(vec![
        OutputSymbol::new(k * (T::one() - p), k * p),
        OutputSymbol::new(eps, eps),
        OutputSymbol::new(k * p, k * (T::one() - p)),
    ]))
}

/// Resolves `bsc:<p>`, `bec:<eps>`, `bsec:<eps>,<p>` or `file:<path>`.
/// Anything else is treated as a path to a channel file.
pub fn parse_descriptor<T: Scalar>(desc: &str) -> Result<Channel<T>> {
    let num = |s: &str| -> Result<T> {
        s.trim()
            .parse::<f64>()
            .map(T::lit)
            .map_err(|_| Error::InvalidParameter(format!("bad number '{s}' in channel descriptor")))
    };
    match desc.split_once(':') {
        Some(("bsc", v)) => make_bsc(num(v)?),
        Some(("bec", v)) => make_bec(num(v)?),
        Some(("bsec", v)) => {
            let (e, p) = v
                .split_once(',')
                .ok_or_else(|| Error::InvalidParameter("bsec expects '<eps>,<p>'".into()))?;
            make_bsec(num(e)?, num(p)?)
        }
        Some(("file", path)) => Channel::load(path),
        _ => Channel::load(desc),
    }
}

pub fn metrics<T: Scalar>(w: &Channel<T>) -> ChannelMetrics<T> {
    let capacity = w.capacity();
    ChannelMetrics {
        capacity,
        bhattacharyya: w.bhattacharyya(),
        entropy: T::one() - capacity,
    }
}

fn sort_by_lr<T: Scalar>(outputs: &mut [OutputSymbol<T>]) {
    outputs.sort_by(|a, b| b.posterior0().partial_cmp(&a.posterior0()).unwrap_or(Ordering::Equal));
}

#[inline]
fn same_lr<T: Scalar>(a: &OutputSymbol<T>, b: &OutputSymbol<T>, tol: T) -> bool {
    let x = a.p0 * b.p1;
    let y = b.p0 * a.p1;
    (x - y).abs() <= tol * x.max(y)
}

/// Sums outputs whose likelihood ratios agree within relative tolerance `tol`.
/// The result is sorted by likelihood ratio, largest first.
pub fn merge_equivalent<T: Scalar>(w: &Channel<T>, tol: T) -> Channel<T> {
    merge_outputs(w.outputs.clone(), tol)
}

pub(crate) fn merge_outputs<T: Scalar>(mut outputs: Vec<OutputSymbol<T>>, tol: T) -> Channel<T> {
    let floor = T::lit(PRUNE_MASS);
    outputs.retain(|o| o.mass() >= floor);
    sort_by_lr(&mut outputs);
    let mut merged: Vec<OutputSymbol<T>> = Vec::with_capacity(outputs.len());
    for o in outputs {
        match merged.last_mut() {
            Some(last) if same_lr(last, &o, tol) => {
                last.p0 = last.p0 + o.p0;
                last.p1 = last.p1 + o.p1;
            }
            _ => merged.push(o),
        }
    }
    Channel::from_raw(merged)
}

struct Loss(f64);

impl PartialEq for Loss {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Loss {}

impl PartialOrd for Loss {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Loss {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Greedily merges adjacent LR-sorted outputs, each time choosing the pair
/// whose merge loses the least capacity, until at most `max_outputs` remain.
/// Merging outputs is a degrading operation, so capacity never increases and
/// the Bhattacharyya parameter never decreases.
pub fn degrade_quantize<T: Scalar>(w: &Channel<T>, max_outputs: usize) -> Result<Channel<T>> {
    if max_outputs < 2 {
        return invalid("max_outputs must be at least 2");
    }
    if w.len() <= max_outputs {
        return Ok(w.clone());
    }
    let mut sym = w.outputs.clone();
    sort_by_lr(&mut sym);
    let n = sym.len();
    let mut alive = vec![true; n];
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
    let mut version = vec![0u32; n];

    let loss = |a: &OutputSymbol<T>, b: &OutputSymbol<T>| -> f64 {
        let m = OutputSymbol::new(a.p0 + b.p0, a.p1 + b.p1);
        (a.capacity_term() + b.capacity_term() - m.capacity_term()).to_f64_lossy()
    };

    let mut heap = BinaryHeap::new();
    for i in 0..n - 1 {
        heap.push(Reverse((
            Loss(loss(&sym[i], &sym[i + 1])),
            i,
            version[i],
            version[i + 1],
        )));
    }
    let mut count = n;
    while count > max_outputs {
        let Some(Reverse((_, i, vi, vj))) = heap.pop() else {
            break;
        };
        let Some(j) = next[i] else { continue };
        if !alive[i] || version[i] != vi || version[j] != vj {
            continue;
        }
        sym[i].p0 = sym[i].p0 + sym[j].p0;
        sym[i].p1 = sym[i].p1 + sym[j].p1;
        alive[j] = false;
        version[i] += 1;
        next[i] = next[j];
        if let Some(k) = next[j] {
            prev[k] = Some(i);
            heap.push(Reverse((Loss(loss(&sym[i], &sym[k])), i, version[i], version[k])));
        }
        if let Some(h) = prev[i] {
            heap.push(Reverse((Loss(loss(&sym[h], &sym[i])), h, version[h], version[i])));
        }
        count -= 1;
    }
    let out = sym.into_iter().zip(alive).filter_map(|(s, a)| a.then_some(s)).collect();
    Ok(Channel::from_raw(out))
}

/// Decides whether `v` is less noisy than `w` by checking concavity of
/// `p -> I_v(p) - I_w(p)` on a uniform grid of input priors.
pub fn is_less_noisy<T: Scalar>(v: &Channel<T>, w: &Channel<T>, grid_points: usize, tol: T) -> bool {
    let g = grid_points.max(3);
    let step = T::one() / T::lit((g - 1) as f64);
    let d: Vec<T> = (0..g)
        .map(|i| {
            let p = (T::lit(i as f64) * step).min(T::one());
            v.mutual_information(p) - w.mutual_information(p)
        })
        .collect();
    d.windows(3).all(|s| s[0] - T::lit(2.0) * s[1] + s[2] <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        }
    }

    fn random_channel(masses: Vec<(f64, f64)>) -> Channel<f64> {
        let s0: f64 = masses.iter().map(|m| m.0).sum();
        let s1: f64 = masses.iter().map(|m| m.1).sum();
        Channel::new(
            masses
                .into_iter()
                .map(|(a, b)| OutputSymbol::new(a / s0, b / s1))
                .collect(),
        )
        .unwrap()
    }

    fn arb_channel() -> impl Strategy<Value = Channel<f64>> {
        prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 2..8).prop_map(random_channel)
    }

    #[test]
    fn bsc_examples() {
        assert_eq!(metrics(&make_bsc::<f64>(0.0).unwrap()).capacity, 1.0);
        assert!(metrics(&make_bsc::<f64>(0.5).unwrap()).capacity.abs() < 1e-15);
        let m = metrics(&make_bsc::<f64>(0.11).unwrap());
        assert!((m.capacity - (1.0 - h(0.11))).abs() < 1e-14);
        assert!((m.capacity - 0.500084041835472).abs() < 1e-12);
        assert!((m.bhattacharyya - 2.0 * (0.11f64 * 0.89).sqrt()).abs() < 1e-15);
        assert!((m.bhattacharyya - 0.62578).abs() < 1e-5);
        assert!(make_bsc::<f64>(0.6).is_err());
        assert!(make_bsc::<f64>(-0.1).is_err());
        assert!(make_bsc::<f64>(f64::NAN).is_err());
    }

    #[test]
    fn bec_examples() {
        assert_eq!(metrics(&make_bec::<f64>(0.0).unwrap()).capacity, 1.0);
        let m = metrics(&make_bec::<f64>(0.5).unwrap());
        assert_eq!(m.capacity, 0.5);
        assert_eq!(m.bhattacharyya, 0.5);
        assert!((metrics(&make_bec::<f64>(0.2).unwrap()).capacity - 0.8).abs() < 1e-15);
        assert!(make_bec::<f64>(1.5).is_err());
        let bsc = metrics(&make_bsc::<f64>(0.5).unwrap());
        assert_eq!(bsc.bhattacharyya, 1.0);
    }

    #[test]
    fn bec_grid_exact() {
        for k in 0..=20 {
            let e = k as f64 * 0.05;
            let m = metrics(&make_bec::<f64>(e).unwrap());
            assert!((m.capacity - (1.0 - e)).abs() < 1e-15, "e={e}");
            assert!((m.bhattacharyya - e).abs() < 1e-15, "e={e}");
            assert_eq!(m.entropy, 1.0 - m.capacity);
        }
    }

    #[test]
    fn f32_works() {
        let m = metrics(&make_bsc::<f32>(0.11f32).unwrap());
        assert!((m.capacity - 0.50008404).abs() < 1e-5);
    }

    #[test]
    fn new_validates() {
        assert!(Channel::new(vec![OutputSymbol::new(0.5, 0.5), OutputSymbol::new(0.4, 0.5)]).is_err());
        assert!(Channel::new(vec![OutputSymbol::new(-0.1, 0.5), OutputSymbol::new(1.1, 0.5)]).is_err());
        let c = Channel::new(vec![
            OutputSymbol::new(0.5, 0.5),
            OutputSymbol::new(0.5, 0.5),
            OutputSymbol::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn merge_identical_lr() {
        let c: Channel<f64> = Channel::new(vec![
            OutputSymbol::new(0.2, 0.1),
            OutputSymbol::new(0.4, 0.2),
            OutputSymbol::new(0.4, 0.7),
        ])
        .unwrap();
        let m = merge_equivalent(&c, 1e-9);
        assert_eq!(m.len(), 2);
        assert!((m.capacity() - c.capacity()).abs() < 1e-12);
        let again = merge_equivalent(&m, 1e-9);
        assert_eq!(again, m);
    }

    #[test]
    fn merge_naive_bec_minus() {
        // Product alphabet of the minus kernel on two BEC(0.3) channels.
        let w = make_bec::<f64>(0.3).unwrap();
        let mut raw = Vec::new();
        for a in w.outputs() {
            for b in w.outputs() {
                raw.push(OutputSymbol::new(
                    0.5 * (a.p0 * b.p0 + a.p1 * b.p1),
                    0.5 * (a.p1 * b.p0 + a.p0 * b.p1),
                ));
            }
        }
        let naive = Channel::new(raw).unwrap();
        assert!(naive.len() > 4);
        let m = merge_equivalent(&naive, 1e-9);
        assert_eq!(m.len(), 3);
        assert!((m.erasure_mass(1e-9) - 0.51).abs() < 1e-12);
        assert!((m.capacity() - 0.49).abs() < 1e-12);
    }

    #[test]
    fn merge_groups_infinite_lr() {
        let c = Channel::new(vec![
            OutputSymbol::new(0.3, 0.0),
            OutputSymbol::new(0.2, 0.0),
            OutputSymbol::new(0.5, 1.0),
        ])
        .unwrap();
        assert_eq!(merge_equivalent(&c, 1e-9).len(), 2);
    }

    fn plus_unmerged(a: &Channel<f64>, b: &Channel<f64>) -> Channel<f64> {
        let mut out = Vec::new();
        for y in a.outputs() {
            for z in b.outputs() {
                out.push(OutputSymbol::new(0.5 * y.p0 * z.p0, 0.5 * y.p1 * z.p1));
                out.push(OutputSymbol::new(0.5 * y.p1 * z.p0, 0.5 * y.p0 * z.p1));
            }
        }
        Channel::new(out).unwrap()
    }

    #[test]
    fn quantize_examples() {
        let w = make_bsc::<f64>(0.1).unwrap();
        assert_eq!(degrade_quantize(&w, 2).unwrap(), w);
        assert!(degrade_quantize(&w, 1).is_err());

        let s = make_bsc::<f64>(0.11).unwrap();
        let pp = plus_unmerged(&s, &s);
        assert_eq!(pp.len(), 8);
        let q = degrade_quantize(&pp, 4).unwrap();
        assert!(q.len() <= 4);
        assert!(q.capacity() <= pp.capacity() + 1e-15);
        assert!(pp.capacity() - q.capacity() <= 1e-3);
        assert!(q.bhattacharyya() >= pp.bhattacharyya() - 1e-15);

        // Two levels of plus: 5 LR classes, 128 raw outputs.
        let pppp = plus_unmerged(&pp, &pp);
        assert_eq!(merge_equivalent(&pppp, 1e-9).len(), 5);
        let q = degrade_quantize(&pppp, 8).unwrap();
        assert!((pppp.capacity() - q.capacity()).abs() < 1e-12);
        let q = degrade_quantize(&pppp, 4).unwrap();
        let loss = pppp.capacity() - q.capacity();
        assert!(loss > 0.0 && loss < 4e-3);
    }

    #[test]
    fn less_noisy_examples() {
        let a = make_bec::<f64>(0.2).unwrap();
        let b = make_bec::<f64>(0.4).unwrap();
        assert!(is_less_noisy(&a, &a, 201, 1e-9));
        assert!(is_less_noisy(&a, &b, 201, 1e-9));
        assert!(!is_less_noisy(&b, &a, 201, 1e-9));
        let s = make_bsc::<f64>(0.11).unwrap();
        let e = make_bec::<f64>(0.5).unwrap();
        assert!(!is_less_noisy(&s, &e, 201, 1e-9) || !is_less_noisy(&e, &s, 201, 1e-9));
    }

    #[test]
    fn mutual_information_matches_capacity_at_half() {
        let s = make_bsc::<f64>(0.11).unwrap();
        assert!((s.mutual_information(0.5) - s.capacity()).abs() < 1e-14);
        assert_eq!(s.mutual_information(0.0), 0.0);
        // BEC(e) with prior p has I = (1-e) h(p).
        let e = make_bec::<f64>(0.3).unwrap();
        assert!((e.mutual_information(0.2) - 0.7 * h(0.2)).abs() < 1e-14);
    }

    #[test]
    fn file_round_trip() {
        let c = make_bsec::<f64>(0.2, 0.05).unwrap();
        let text = c.to_file_string();
        assert!(text.starts_with(FILE_HEADER));
        let back: Channel<f64> = Channel::parse_file_string(&text).unwrap();
        assert_eq!(back.len(), c.len());
        assert!((back.capacity() - c.capacity()).abs() < 1e-14);
        assert!(Channel::<f64>::parse_file_string("nope\n0.5 0.5\n").is_err());
        assert!(Channel::<f64>::parse_file_string(&format!("{FILE_HEADER}\n0.5\n")).is_err());
    }

    #[test]
    fn descriptors() {
        let b: Channel<f64> = parse_descriptor("bsc:0.11").unwrap();
        assert_eq!(b, make_bsc::<f64>(0.11).unwrap());
        let e: Channel<f64> = parse_descriptor("bec:0.5").unwrap();
        assert_eq!(e.capacity(), 0.5);
        let x: Channel<f64> = parse_descriptor("bsec:0.1,0.05").unwrap();
        assert_eq!(x.len(), 3);
        assert!(parse_descriptor::<f64>("bsc:zz").is_err());
        let dir = std::env::temp_dir().join(format!("upolar-chan-{}", std::process::id()));
        e.save(&dir).unwrap();
        let f: Channel<f64> = parse_descriptor(&format!("file:{}", dir.display())).unwrap();
        assert_eq!(f.capacity(), 0.5);
        std::fs::remove_file(dir).ok();
    }

    #[test]
    fn mixture_capacity_is_weighted() {
        let a = make_bec::<f64>(0.5).unwrap();
        let b = make_bsc::<f64>(0.11).unwrap();
        let m = Channel::mixture(&[(0.3, &a), (0.7, &b)]).unwrap();
        assert!((m.capacity() - (0.3 * a.capacity() + 0.7 * b.capacity())).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn merge_preserves_metrics(c in arb_channel()) {
            let m = merge_equivalent(&c, 1e-9);
            prop_assert!((metrics(&m).capacity - metrics(&c).capacity).abs() < 1e-12);
            prop_assert!((metrics(&m).bhattacharyya - metrics(&c).bhattacharyya).abs() < 1e-12);
            prop_assert!((metrics(&m).entropy - metrics(&c).entropy).abs() < 1e-12);
        }

        #[test]
        fn quantize_degrades(c in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 3..40).prop_map(random_channel), k in 2usize..6) {
            let q = degrade_quantize(&c, k).unwrap();
            prop_assert!(q.len() <= k);
            prop_assert!(q.capacity() <= c.capacity() + 1e-14);
            prop_assert!(q.bhattacharyya() >= c.bhattacharyya() - 1e-14);
        }

        #[test]
        fn less_noisy_reflexive(c in arb_channel()) {
            prop_assert!(is_less_noisy(&c, &c, 201, 1e-9));
        }

        #[test]
        fn bec_upgrade_less_noisy(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(is_less_noisy(&make_bec::<f64>(lo).unwrap(), &make_bec::<f64>(hi).unwrap(), 201, 1e-9));
        }
    }
}
