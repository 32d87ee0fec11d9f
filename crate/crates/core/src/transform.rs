//! Heterogeneous polarization kernels and the slow channel recursions.
//!
//! `minus(w, v)` is the channel seen by `u` when `w` carries `u + x` and `v`
//! carries `x` with `x` uniform and unknown. `plus(w, v)` is the channel seen
//! by `x` when `u` is also revealed.

use serde::{Deserialize, Serialize};

use crate::channels::{degrade_quantize, merge_outputs, Channel, OutputSymbol, DEFAULT_MERGE_TOL};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

pub const DEFAULT_BUDGET: usize = 512;

/// Alphabet control applied after every kernel application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    /// Lossless likelihood-ratio merging only.
    Exact,
    /// Lossless merging followed by degrading quantization to at most this
    /// many outputs.
    Quantized(usize),
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Quantized(DEFAULT_BUDGET)
    }
}

impl Budget {
    pub fn apply<T: Scalar>(self, w: Channel<T>) -> Channel<T> {
        match self {
            Budget::Exact => w,
            Budget::Quantized(k) => degrade_quantize(&w, k.max(2)).expect("budget of at least 2"),
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Budget::Exact)
    }
}

/// Synthesized channel type: `L` outputs are degraded, `R` outputs upgraded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    L,
    R,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::L => "L",
            Kind::R => "R",
        })
    }
}

pub fn minus<T: Scalar>(w: &Channel<T>, v: &Channel<T>) -> Channel<T> {
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(w.len() * v.len());
    for y in w.outputs() {
        for z in v.outputs() {
            out.push(OutputSymbol::new(
                half * (y.p0 * z.p0 + y.p1 * z.p1),
                half * (y.p1 * z.p0 + y.p0 * z.p1),
            ));
        }
    }
    merge_outputs(out, T::lit(DEFAULT_MERGE_TOL))
}

pub fn plus<T: Scalar>(w: &Channel<T>, v: &Channel<T>) -> Channel<T> {
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(2 * w.len() * v.len());
    for y in w.outputs() {
        for z in v.outputs() {
            out.push(OutputSymbol::new(half * y.p0 * z.p0, half * y.p1 * z.p1));
            out.push(OutputSymbol::new(half * y.p1 * z.p0, half * y.p0 * z.p1));
        }
    }
    merge_outputs(out, T::lit(DEFAULT_MERGE_TOL))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowPairState<T> {
    pub level: usize,
    pub left: Channel<T>,
    pub right: Channel<T>,
}

/// `L_0 = R_0 = w`, `L_{n+1} = (L_n, R_n)^-`, `R_{n+1} = (L_n, R_n)^+`.
pub fn slow_recursion<T: Scalar>(w: &Channel<T>, n: usize, budget: Budget) -> Vec<SlowPairState<T>> {
    let mut states = Vec::with_capacity(n + 1);
    states.push(SlowPairState {
        level: 0,
        left: w.clone(),
        right: w.clone(),
    });
    for level in 1..=n {
        let prev = &states[level - 1];
        let left = budget.apply(minus(&prev.left, &prev.right));
        let right = budget.apply(plus(&prev.left, &prev.right));
        states.push(SlowPairState { level, left, right });
    }
    states
}

/// Line types of the one-level transform with `b` degraded and `g` upgraded
/// outputs, top line first.
pub fn type_pattern(b: usize, g: usize) -> Vec<Kind> {
    let mut t = Vec::with_capacity(b + g);
    if g <= b {
        t.extend(std::iter::repeat_n(Kind::L, b - g));
        for _ in 0..g {
            t.extend([Kind::L, Kind::R]);
        }
    } else {
        for _ in 0..b {
            t.extend([Kind::L, Kind::R]);
        }
        t.extend(std::iter::repeat_n(Kind::R, g - b));
    }
    t
}

/// Label `(kind, sub-index)` carried by pattern position `p` (0-based);
/// sub-indices are 1-based.
pub fn position_label(b: usize, g: usize, p: usize) -> (Kind, usize) {
    if g <= b {
        let r = b - g;
        if p < r {
            (Kind::L, p + 1)
        } else {
            let t = (p - r) / 2;
            if (p - r).is_multiple_of(2) {
                (Kind::L, r + t + 1)
            } else {
                (Kind::R, t + 1)
            }
        }
    } else if p < 2 * b {
        let t = p / 2;
        if p.is_multiple_of(2) {
            (Kind::L, t + 1)
        } else {
            (Kind::R, t + 1)
        }
    } else {
        (Kind::R, p - b + 1)
    }
}

/// Inverse of [`position_label`].
pub fn label_position(b: usize, g: usize, kind: Kind, i: usize) -> usize {
    (0..b + g)
        .find(|&p| position_label(b, g, p) == (kind, i))
        .expect("label in range")
}

/// Pattern position fed into each transform line when level-n outputs are
/// combined at level n+1. Shifting by one line places every `L` directly
/// below an `R` of the previous level.
pub fn input_arrangement(b: usize, g: usize) -> Vec<usize> {
    let m = b + g;
    if g <= b {
        (0..m).map(|i| if i == 0 { m - 1 } else { i - 1 }).collect()
    } else {
        (0..m).map(|i| (i + 1) % m).collect()
    }
}

/// Predecessor used to check the improvement of upgraded channels from one
/// level to the next: `R_{n+1}^{(j)}` dominates `R_n^{(pred(j))}`.
pub fn r_predecessor(b: usize, g: usize, j: usize) -> usize {
    if g <= b {
        if j == 1 {
            g
        } else {
            j - 1
        }
    } else {
        j
    }
}

/// Channels synthesized by the one-level transform when line `i` is driven
/// by `inputs[i]`. Output `i` is the channel seen by the input on line `i`
/// under successive cancellation in line order.
pub fn one_level<T: Scalar>(inputs: &[Channel<T>], b: usize, g: usize, budget: Budget) -> Result<Vec<Channel<T>>> {
    if b == 0 || g == 0 {
        return invalid("b and g must both be at least 1");
    }
    let m = b + g;
    if inputs.len() != m {
        return invalid(format!("one-level transform needs {m} inputs, got {}", inputs.len()));
    }
    let c = inputs;
    let mn = |x: &Channel<T>, y: &Channel<T>| budget.apply(minus(x, y));
    let pl = |x: &Channel<T>, y: &Channel<T>| budget.apply(plus(x, y));
    let mut out: Vec<Channel<T>> = Vec::with_capacity(m);
    if g <= b {
        let r = b - g;
        let mut q = c[0].clone();
        for i in 0..r {
            out.push(mn(&q, &c[i + 1]));
            q = pl(&q, &c[i + 1]);
        }
        let mut a = q;
        for k in 1..=g {
            let d = if k < g {
                mn(&c[r + 2 * k - 1], &c[r + 2 * k])
            } else {
                c[m - 1].clone()
            };
            out.push(mn(&a, &d));
            out.push(pl(&a, &d));
            if k < g {
                a = pl(&c[r + 2 * k - 1], &c[r + 2 * k]);
            }
        }
    } else {
        // t[i] is the minus-chain of lines i..m from the bottom up.
        let mut t: Vec<Option<Channel<T>>> = vec![None; m];
        t[m - 1] = Some(c[m - 1].clone());
        for i in (2 * b - 1..m - 1).rev() {
            t[i] = Some(mn(&c[i], t[i + 1].as_ref().expect("chain")));
        }
        let mut a = c[0].clone();
        for k in 1..=b {
            let d = if k < b {
                mn(&c[2 * k - 1], &c[2 * k])
            } else {
                t[2 * b - 1].clone().expect("chain")
            };
            out.push(mn(&a, &d));
            out.push(pl(&a, &d));
            if k < b {
                a = pl(&c[2 * k - 1], &c[2 * k]);
            }
        }
        for i in 2 * b..m {
            out.push(pl(&c[i - 1], t[i].as_ref().expect("chain")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralRateState<T> {
    pub level: usize,
    pub b: usize,
    pub g: usize,
    pub lefts: Vec<Channel<T>>,
    pub rights: Vec<Channel<T>>,
}

impl<T: Scalar> GeneralRateState<T> {
    fn from_positions(level: usize, b: usize, g: usize, pos: Vec<Channel<T>>) -> Self {
        let mut lefts = vec![None; b];
        let mut rights = vec![None; g];
        for (p, ch) in pos.into_iter().enumerate() {
            match position_label(b, g, p) {
                (Kind::L, i) => lefts[i - 1] = Some(ch),
                (Kind::R, i) => rights[i - 1] = Some(ch),
            }
        }
        Self {
            level,
            b,
            g,
            lefts: lefts.into_iter().map(|c| c.expect("label")).collect(),
            rights: rights.into_iter().map(|c| c.expect("label")).collect(),
        }
    }

    /// Channels in type-pattern order.
    pub fn positions(&self) -> Vec<Channel<T>> {
        (0..self.b + self.g)
            .map(|p| match position_label(self.b, self.g, p) {
                (Kind::L, i) => self.lefts[i - 1].clone(),
                (Kind::R, i) => self.rights[i - 1].clone(),
            })
            .collect()
    }

    pub fn total_capacity(&self) -> T {
        self.lefts.iter().chain(&self.rights).map(Channel::capacity).sum()
    }
}

/// Level 0 holds `b + g` copies of `w`; level 1 applies the one-level
/// transform to them; level `n + 1` feeds the level-n channels, arranged by
/// [`input_arrangement`], through the transform again.
pub fn general_rate_recursion<T: Scalar>(
    w: &Channel<T>,
    b: usize,
    g: usize,
    n: usize,
    budget: Budget,
) -> Result<Vec<GeneralRateState<T>>> {
    if b == 0 || g == 0 {
        return invalid("b and g must both be at least 1");
    }
    let m = b + g;
    let mut states = vec![GeneralRateState {
        level: 0,
        b,
        g,
        lefts: vec![w.clone(); b],
        rights: vec![w.clone(); g],
    }];
    if n == 0 {
        return Ok(states);
    }
    let mut pos = one_level(&vec![w.clone(); m], b, g, budget)?;
    states.push(GeneralRateState::from_positions(1, b, g, pos.clone()));
    let arr = input_arrangement(b, g);
    for level in 2..=n {
        let inputs: Vec<Channel<T>> = arr.iter().map(|&p| pos[p].clone()).collect();
        pos = one_level(&inputs, b, g, budget)?;
        states.push(GeneralRateState::from_positions(level, b, g, pos.clone()));
    }
    Ok(states)
}
