//! Per-position channel tracking through plans and numerical checks of the
//! polarization properties.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{bound_table, h_inv};
use crate::channels::{
    is_less_noisy, make_bec, make_bsc, make_bsec, metrics, Channel, ChannelMetrics, OutputSymbol,
    DEFAULT_LESS_NOISY_GRID, DEFAULT_LESS_NOISY_TOL,
};
use crate::codec::{LlrOp, SlowSchedule};
use crate::construction::TransformPlan;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::transform::{general_rate_recursion, minus, plus, r_predecessor, slow_recursion, Budget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks never fail a report.
    pub asserted: bool,
    pub values: Value,
}

impl Check {
    fn assert(name: impl Into<String>, passed: bool, values: Value) -> Self {
        Self {
            name: name.into(),
            passed,
            asserted: true,
            values,
        }
    }

    fn note(name: impl Into<String>, passed: bool, values: Value) -> Self {
        Self {
            name: name.into(),
            passed,
            asserted: false,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: impl Into<String>, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed || !c.asserted);
        Self {
            suite: suite.into(),
            passed,
            checks,
        }
    }

    pub fn flagged(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.asserted && !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Interns channels so that structurally repeated compositions are computed
/// once.
struct Arena<T> {
    channels: Vec<Channel<T>>,
    memo: HashMap<(bool, usize, usize), usize>,
    budget: Budget,
}

impl<T: Scalar> Arena<T> {
    fn combine(&mut self, is_plus: bool, a: usize, b: usize) -> usize {
        if let Some(&id) = self.memo.get(&(is_plus, a, b)) {
            return id;
        }
        let (x, y) = (&self.channels[a], &self.channels[b]);
        let ch = self.budget.apply(if is_plus { plus(x, y) } else { minus(x, y) });
        self.channels.push(ch);
        let id = self.channels.len() - 1;
        self.memo.insert((is_plus, a, b), id);
        id
    }
}

/// Synthesized channel of every input position of `plan` when each channel
/// use is `w`, in position order. Follows the successive-cancellation
/// schedule: a check-node update is a minus composition, a variable-node
/// update a plus composition.
pub fn track_channels<T: Scalar>(plan: &TransformPlan, w: &Channel<T>, budget: Budget) -> Result<Vec<Channel<T>>> {
    if let Budget::Quantized(k) = budget {
        if k < 2 {
            return invalid(format!("alphabet budget {k} is infeasible, need at least 2"));
        }
    }
    let sched = SlowSchedule::compile_all(plan);
    let mut arena = Arena {
        channels: vec![w.clone()],
        memo: HashMap::new(),
        budget,
    };
    let mut node = vec![usize::MAX; sched.node_count()];
    for &leaf in sched.leaves() {
        node[leaf as usize] = 0;
    }
    let mut at_position = vec![0usize; plan.blocklength];
    for (p, ops) in sched.steps() {
        for op in ops {
            match *op {
                LlrOp::Check { dst, a, b } => {
                    node[dst as usize] = arena.combine(false, node[a as usize], node[b as usize])
                }
                LlrOp::Var { dst, s, t, .. } => {
                    node[dst as usize] = arena.combine(true, node[t as usize], node[s as usize])
                }
                LlrOp::Flip { dst, a, .. } => node[dst as usize] = node[a as usize],
                LlrOp::Copy { dst, src } => node[dst as usize] = node[src as usize],
            }
        }
        at_position[p] = node[p];
    }
    Ok(at_position.into_iter().map(|id| arena.channels[id].clone()).collect())
}

pub fn track_positions<T: Scalar>(
    plan: &TransformPlan,
    w: &Channel<T>,
    budget: Budget,
) -> Result<Vec<ChannelMetrics<T>>> {
    Ok(track_channels(plan, w, budget)?.iter().map(metrics).collect())
}

/// `w` followed by an erasure with probability `e`: the result is degraded
/// with respect to `w`.
pub fn erase<T: Scalar>(w: &Channel<T>, e: T) -> Result<Channel<T>> {
    if !(e >= T::zero() && e <= T::one()) {
        return invalid(format!("erasure probability {e} outside [0, 1]"));
    }
    let k = T::one() - e;
    let mut out: Vec<OutputSymbol<T>> = w
        .outputs()
        .iter()
        .map(|o| OutputSymbol::new(k * o.p0, k * o.p1))
        .collect();
    out.push(OutputSymbol::new(e, e));
    Channel::new(out)
}

/// Five channels of capacity `capacity`: a BEC, a BSC, an even BEC/BSC
/// mixture, an even mixture of two BSCs, and a BSEC.
pub fn default_class(capacity: f64) -> Result<Vec<(String, Channel<f64>)>> {
    if !(capacity > 0.0 && capacity < 1.0) {
        return invalid(format!("class capacity {capacity} outside (0, 1)"));
    }
    let c = capacity;
    let spread = c.min(1.0 - c);
    let bsc_of = |cap: f64| make_bsc(h_inv(1.0 - cap));
    let (hi, lo) = (c + 0.4 * spread, c - 0.4 * spread);
    let mix1 = Channel::mixture(&[(0.5, &make_bec(1.0 - hi)?), (0.5, &bsc_of(lo)?)])?;
    let (hi, lo) = (c + 0.7 * spread, c - 0.7 * spread);
    let mix2 = Channel::mixture(&[(0.5, &bsc_of(hi)?), (0.5, &bsc_of(lo)?)])?;
    let eps = 0.4 * (1.0 - c);
    let p = h_inv(1.0 - c / (1.0 - eps));
    Ok(vec![
        (format!("bec:{}", 1.0 - c), make_bec(1.0 - c)?),
        (format!("bsc:{:.6}", h_inv(1.0 - c)), bsc_of(c)?),
        ("bec+bsc".into(), mix1),
        ("bsc+bsc".into(), mix2),
        (format!("bsec:{eps:.3},{p:.6}"), make_bsec(eps, p)?),
    ])
}

/// Checks that, for every member of `class`, the positions with the largest
/// tracked capacities are exactly the plan's good positions.
pub fn verify_universality(plan: &TransformPlan, class: &[(String, Channel<f64>)], budget: Budget) -> Result<Report> {
    let rate = plan.params.g as f64 / (plan.params.b + plan.params.g) as f64;
    let good: Vec<bool> = {
        let mut v = vec![false; plan.blocklength];
        for &p in &plan.good_indices {
            v[p] = true;
        }
        v
    };
    let tracked: Vec<Result<Vec<ChannelMetrics<f64>>>> = class
        .par_iter()
        .map(|(_, w)| track_positions(plan, w, budget))
        .collect();
    let mut checks = Vec::new();
    for ((name, w), t) in class.iter().zip(tracked) {
        let t = t?;
        let cap = w.capacity();
        let min_good = plan
            .good_indices
            .iter()
            .map(|&p| t[p].capacity)
            .fold(f64::INFINITY, f64::min);
        let max_other = (0..plan.blocklength)
            .filter(|&p| !good[p])
            .map(|p| t[p].capacity)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut ranked: Vec<usize> = (0..plan.blocklength).collect();
        ranked.sort_by(|&a, &b| t[b].capacity.total_cmp(&t[a].capacity).then(a.cmp(&b)));
        let mut top: Vec<usize> = ranked[..plan.good_indices.len()].to_vec();
        top.sort_unstable();
        let values = json!({
            "channel": name,
            "capacity": cap,
            "min_good_capacity": min_good,
            "max_other_capacity": max_other,
            "top_positions": top,
        });
        if cap + 1e-12 < rate {
            checks.push(Check::note(format!("capacity below rate: {name}"), false, values));
            continue;
        }
        checks.push(Check::assert(
            format!("good set: {name}"),
            top == plan.good_indices && min_good > max_other,
            values,
        ));
    }
    Ok(Report::new("universality", checks))
}

/// Checks that the less-noisy order survives both homogeneous kernels.
pub fn verify_less_noisy_preservation<T: Scalar>(v: &Channel<T>, w: &Channel<T>) -> Result<Report> {
    let grid = DEFAULT_LESS_NOISY_GRID;
    let tol = T::lit(DEFAULT_LESS_NOISY_TOL);
    if !is_less_noisy(v, w, grid, tol) {
        return Err(Error::Precondition("v is not less noisy than w".into()));
    }
    let (vp, wp) = (plus(v, v), plus(w, w));
    let (vm, wm) = (minus(v, v), minus(w, w));
    let f = |x: T| x.to_f64_lossy();
    let mut checks = vec![
        Check::assert("plus preserves order", is_less_noisy(&vp, &wp, grid, tol), json!({})),
        Check::assert("minus preserves order", is_less_noisy(&vm, &wm, grid, tol), json!({})),
        Check::assert(
            "plus capacity",
            wp.capacity() <= vp.capacity() + T::lit(1e-12),
            json!({"v": f(vp.capacity()), "w": f(wp.capacity())}),
        ),
        Check::assert(
            "minus capacity",
            wm.capacity() <= vm.capacity() + T::lit(1e-12),
            json!({"v": f(vm.capacity()), "w": f(wm.capacity())}),
        ),
    ];
    checks.push(Check::note(
        "heterogeneous plus (v,w) over (w,w)",
        is_less_noisy(&plus(v, w), &wp, grid, tol),
        json!({}),
    ));
    checks.push(Check::note(
        "heterogeneous minus (v,w) over (w,w)",
        is_less_noisy(&minus(v, w), &wm, grid, tol),
        json!({}),
    ));
    Ok(Report::new("less-noisy", checks))
}

/// General-rate polarization trends at finite depth: level-1 sandwich, conservation, the
/// shifted improvement of upgraded channels, and a nondecreasing minimum
/// upgraded capacity.
pub fn verify_general_rate_trends<T: Scalar>(
    b: usize,
    g: usize,
    w: &Channel<T>,
    n_max: usize,
    budget: Budget,
) -> Result<Report> {
    if n_max < 1 {
        return invalid("n_max must be at least 1");
    }
    let states = general_rate_recursion(w, b, g, n_max, budget)?;
    let f = |x: T| x.to_f64_lossy();
    let iw = f(w.capacity());
    let tol = 1e-10;
    let mut checks = Vec::new();
    let rate = g as f64 / (b + g) as f64;
    checks.push(Check::note(
        "capacity at least rate",
        iw + 1e-12 >= rate,
        json!({"capacity": iw, "rate": rate}),
    ));

    let s1 = &states[1];
    let l1: Vec<f64> = s1.lefts.iter().map(|c| f(c.capacity())).collect();
    let r1: Vec<f64> = s1.rights.iter().map(|c| f(c.capacity())).collect();
    checks.push(Check::assert(
        "level-1 sandwich",
        l1.iter().all(|&x| x <= iw + tol) && r1.iter().all(|&x| x >= iw - tol),
        json!({"lefts": l1, "rights": r1, "capacity": iw}),
    ));
    let strict = iw > 1e-12 && iw < 1.0 - 1e-12;
    if strict {
        checks.push(Check::note(
            "level-1 sandwich strict",
            l1.iter().all(|&x| x < iw) && r1.iter().all(|&x| x > iw),
            json!({}),
        ));
    }

    let mut conservation = Vec::new();
    let mut cons_ok = true;
    for st in &states {
        let total = f(st.total_capacity());
        let expected = (b + g) as f64 * iw;
        cons_ok &= if budget.is_exact() {
            (total - expected).abs() <= 1e-8
        } else {
            total <= expected + 1e-8
        };
        conservation.push(total);
    }
    checks.push(Check::assert(
        "conservation",
        cons_ok,
        json!({"totals": conservation, "expected": (b + g) as f64 * iw, "exact": budget.is_exact()}),
    ));

    let mut chain_ok = true;
    let mut worst = f64::INFINITY;
    for k in 1..states.len() - 1 {
        for j in 1..=g {
            let prev = f(states[k].rights[r_predecessor(b, g, j) - 1].capacity());
            let next = f(states[k + 1].rights[j - 1].capacity());
            worst = worst.min(next - prev);
            chain_ok &= next >= prev - tol;
        }
    }
    checks.push(Check::assert(
        "upgraded chain improves",
        chain_ok,
        json!({"min_gain": worst}),
    ));

    let mins: Vec<f64> = states[1..]
        .iter()
        .map(|s| s.rights.iter().map(|c| f(c.capacity())).fold(f64::INFINITY, f64::min))
        .collect();
    let mono = mins.windows(2).all(|p| p[1] >= p[0] - tol);
    checks.push(Check::assert(
        "min upgraded capacity nondecreasing",
        mono,
        json!({"min_rights": mins}),
    ));
    Ok(Report::new("general-rate", checks))
}

/// Slow polarization at finite depth: with `I(W) >= 1/2` the upgraded channel improves
/// strictly at each step until it is within `1e-6` of perfect; below `1/2`
/// the degraded channel worsens strictly until within `1e-6` of useless.
pub fn verify_slow_polarization<T: Scalar>(w: &Channel<T>, n_max: usize, budget: Budget) -> Report {
    let states = slow_recursion(w, n_max, budget);
    let f = |x: T| x.to_f64_lossy();
    let iw = f(w.capacity());
    let (seq, improving): (Vec<f64>, bool) = if iw >= 0.5 {
        (states.iter().map(|s| f(s.right.capacity())).collect(), true)
    } else {
        (states.iter().map(|s| f(s.left.capacity())).collect(), false)
    };
    let mut ok = true;
    for p in seq.windows(2) {
        let settled = if improving { p[0] >= 1.0 - 1e-6 } else { p[0] <= 1e-6 };
        if settled {
            break;
        }
        ok &= if improving { p[1] > p[0] } else { p[1] < p[0] };
    }
    let name = if improving {
        "upgraded strictly improves"
    } else {
        "degraded strictly worsens"
    };
    Report::new(
        "slow-polarization",
        vec![Check::assert(name, ok, json!({"capacity": iw, "sequence": seq}))],
    )
}

/// Checks the tracked `R_n` capacities of the rate-1/2 recursion against the
/// bound table.
pub fn verify_bound_sandwich<T: Scalar>(w: &Channel<T>, n_max: usize, budget: Budget) -> Result<Report> {
    let f = |x: T| x.to_f64_lossy();
    let rows = bound_table(f(w.capacity()), n_max)?;
    let states = slow_recursion(w, n_max, budget);
    let mut checks = Vec::new();
    for (r, s) in rows.iter().zip(&states) {
        let i = f(s.right.capacity());
        checks.push(Check::assert(
            format!("n={}", r.n),
            r.lower - 1e-9 <= i && i <= r.upper + 1e-9,
            json!({"lower": r.lower, "tracked": i, "upper": r.upper}),
        ));
    }
    Ok(Report::new("bound-sandwich", checks))
}
