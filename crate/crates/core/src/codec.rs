//! Encoding and two-stage successive-cancellation decoding.
//!
//! The slow stage is decoded by a schedule compiled once per plan. It runs
//! across all `M` copies at once, node-major, so each step is a tight loop
//! over copies. Good slow positions hand their `M` likelihood ratios to a
//! natural-order Arıkan SC decoder, whose re-encoded decisions are fed back
//! into the slow stage before the next position is processed.

use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::construction::{CodeSpec, TransformPlan};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LLR_CLAMP: f64 = 40.0;

#[inline]
pub fn clamp_llr<T: Scalar>(x: T) -> T {
    let c = T::lit(LLR_CLAMP);
    if x.is_nan() {
        T::zero()
    } else {
        x.max(-c).min(c)
    }
}

/// Exact check-node combination `ln((1 + e^{a+b}) / (e^a + e^b))`.
#[inline]
pub fn check_node<T: Scalar>(a: T, b: T) -> T {
    let s = a.signum() * b.signum() * a.abs().min(b.abs());
    s + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    pub bits: Vec<u8>,
}

/// Channel log-likelihood ratios `ln(P(y|0)/P(y|1))`, clamped to `±40`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlrVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> LlrVector<T> {
    pub fn new(values: impl IntoIterator<Item = T>) -> Self {
        Self {
            values: values.into_iter().map(clamp_llr).collect(),
        }
    }

    /// Perfectly reliable observation of `bits`.
    pub fn noiseless(bits: &[u8]) -> Self {
        let c = T::lit(LLR_CLAMP);
        Self {
            values: bits.iter().map(|&b| if b == 0 { c } else { -c }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeStats {
    /// Likelihood-ratio updates in the slow stage, summed over copies.
    pub slow_llr_evals: u64,
    /// f/g updates in the fast-stage decoders.
    pub fast_llr_evals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub info_bits: Vec<u8>,
    /// Set by [`DecodeResult::compare`].
    pub block_ok: Option<bool>,
    pub per_stage_stats: DecodeStats,
}

impl DecodeResult {
    /// Compares against the transmitted message, records and returns the
    /// block outcome.
    pub fn compare(&mut self, reference: &[u8]) -> bool {
        let ok = self.info_bits == reference;
        self.block_ok = Some(ok);
        ok
    }

    pub fn bit_errors(&self, reference: &[u8]) -> usize {
        self.info_bits.iter().zip(reference).filter(|(a, b)| a != b).count()
    }
}

/// LLR of output symbol `y` of `w`, clamped.
pub fn channel_llr<T: Scalar>(w: &Channel<T>, y: usize) -> Result<T> {
    let o = w
        .outputs()
        .get(y)
        .ok_or_else(|| Error::InvalidParameter(format!("output symbol {y} not in alphabet of size {}", w.len())))?;
    Ok(llr_of(o.p0, o.p1))
}

fn llr_of<T: Scalar>(p0: T, p1: T) -> T {
    let c = T::lit(LLR_CLAMP);
    if p1 <= T::zero() {
        c
    } else if p0 <= T::zero() {
        -c
    } else {
        clamp_llr((p0 / p1).ln())
    }
}

/// LLR of every output symbol of `w`.
pub fn llr_table<T: Scalar>(w: &Channel<T>) -> Vec<T> {
    w.outputs().iter().map(|o| llr_of(o.p0, o.p1)).collect()
}

/// In-place natural-order transform `x = u F^{⊗m}` with `F = [[1,0],[1,1]]`.
pub fn fast_encode_in_place(v: &mut [u8]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                v[i] ^= v[i + h];
            }
        }
        h *= 2;
    }
}

/// Successive-cancellation decoder for `x = u F^{⊗m}` in natural order.
/// Writes decisions to `u` and their re-encoding to `x`. `decision_llrs`,
/// when given, receives the LLR each bit was decided from.
pub fn fast_sc_decode<T: Scalar>(
    llr: &[T],
    frozen: &[bool],
    u: &mut [u8],
    x: &mut [u8],
    mut decision_llrs: Option<&mut [T]>,
    evals: &mut u64,
) {
    let mut scratch = vec![T::zero(); llr.len().max(1)];
    fast_rec(llr, frozen, u, x, &mut scratch, &mut decision_llrs, 0, evals);
}

#[allow(clippy::too_many_arguments)]
fn fast_rec<T: Scalar>(
    llr: &[T],
    frozen: &[bool],
    u: &mut [u8],
    x: &mut [u8],
    scratch: &mut [T],
    trace: &mut Option<&mut [T]>,
    base: usize,
    evals: &mut u64,
) {
    let n = llr.len();
    if n == 1 {
        let bit = if frozen[0] { 0 } else { u8::from(llr[0] < T::zero()) };
        u[0] = bit;
        x[0] = bit;
        if let Some(t) = trace.as_deref_mut() {
            t[base] = llr[0];
        }
        return;
    }
    let h = n / 2;
    let (buf, rest) = scratch.split_at_mut(h);
    for i in 0..h {
        buf[i] = check_node(llr[i], llr[i + h]);
    }
    *evals += h as u64;
    let (ul, ur) = u.split_at_mut(h);
    let (xl, xr) = x.split_at_mut(h);
    fast_rec(buf, &frozen[..h], ul, xl, rest, trace, base, evals);
    for i in 0..h {
        buf[i] = if xl[i] == 0 {
            llr[i + h] + llr[i]
        } else {
            llr[i + h] - llr[i]
        };
    }
    *evals += h as u64;
    fast_rec(buf, &frozen[h..], ur, xr, rest, trace, base + h, evals);
    for i in 0..h {
        xl[i] ^= xr[i];
    }
}

/// One likelihood-ratio update of the slow-stage schedule. Node indices
/// below the blocklength are the input positions themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrOp {
    /// `dst = check_node(a, b)`
    Check { dst: u32, a: u32, b: u32 },
    /// `dst = (-1)^bit(sib) * a`
    Flip { dst: u32, a: u32, sib: u32 },
    /// `dst = s + (-1)^bit(sib) * t`
    Var { dst: u32, s: u32, t: u32, sib: u32 },
    /// `dst = src`
    Copy { dst: u32, src: u32 },
}

#[derive(Debug, Clone, Copy)]
enum BitOp {
    Copy { dst: u32, src: u32 },
    Xor { dst: u32, a: u32, b: u32 },
}

#[derive(Debug, Clone)]
struct Step {
    position: usize,
    llr_ops: std::ops::Range<usize>,
    bit_ops: std::ops::Range<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Kernel {
    top_in: u32,
    bot_in: u32,
    top_out: u32,
    bot_out: u32,
}

/// Slow-stage SC schedule for one plan: for every position in decode order,
/// the LLR updates needed to evaluate it and the value propagation after it
/// is decided.
#[derive(Debug, Clone)]
pub struct SlowSchedule {
    blocklength: usize,
    nodes: usize,
    leaves: Vec<u32>,
    steps: Vec<Step>,
    llr_ops: Vec<LlrOp>,
    bit_ops: Vec<BitOp>,
}

struct Compiler {
    kernels: Vec<Kernel>,
    consumer: Vec<Option<(usize, bool)>>,
    producer: Vec<Option<usize>>,
    known: Vec<bool>,
    valid: Vec<bool>,
    llr_ops: Vec<LlrOp>,
    bit_ops: Vec<BitOp>,
}

impl Compiler {
    fn invalidate(&mut self, v: u32) {
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            if !std::mem::replace(&mut self.valid[v as usize], false) {
                continue;
            }
            if let Some(k) = self.producer[v as usize] {
                let kn = self.kernels[k];
                stack.push(kn.top_in);
                stack.push(kn.bot_in);
            }
        }
    }

    fn ensure(&mut self, v: u32) {
        if self.valid[v as usize] {
            return;
        }
        let (k, is_top) = self.consumer[v as usize].expect("leaves are always valid");
        let kn = self.kernels[k];
        let op = if is_top {
            if self.known[kn.bot_in as usize] {
                self.ensure(kn.top_out);
                LlrOp::Flip {
                    dst: v,
                    a: kn.top_out,
                    sib: kn.bot_in,
                }
            } else {
                self.ensure(kn.top_out);
                self.ensure(kn.bot_out);
                LlrOp::Check {
                    dst: v,
                    a: kn.top_out,
                    b: kn.bot_out,
                }
            }
        } else if self.known[kn.top_in as usize] {
            self.ensure(kn.top_out);
            self.ensure(kn.bot_out);
            LlrOp::Var {
                dst: v,
                s: kn.bot_out,
                t: kn.top_out,
                sib: kn.top_in,
            }
        } else {
            self.ensure(kn.bot_out);
            LlrOp::Copy {
                dst: v,
                src: kn.bot_out,
            }
        };
        self.llr_ops.push(op);
        self.valid[v as usize] = true;
    }

    fn mark_known(&mut self, v: u32) {
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            self.known[v as usize] = true;
            let Some((k, is_top)) = self.consumer[v as usize] else {
                continue;
            };
            let kn = self.kernels[k];
            // The sibling's update rule changes once this input is known.
            self.invalidate(if is_top { kn.bot_in } else { kn.top_in });
            if !is_top {
                self.bit_ops.push(BitOp::Copy {
                    dst: kn.bot_out,
                    src: kn.bot_in,
                });
                stack.push(kn.bot_out);
            }
            if self.known[kn.top_in as usize] && self.known[kn.bot_in as usize] && !self.known[kn.top_out as usize] {
                self.bit_ops.push(BitOp::Xor {
                    dst: kn.top_out,
                    a: kn.top_in,
                    b: kn.bot_in,
                });
                stack.push(kn.top_out);
            }
        }
    }
}

impl SlowSchedule {
    /// Schedule that evaluates LLRs only at the plan's good positions; the
    /// remaining positions are frozen and merely fixed to zero.
    pub fn compile(plan: &TransformPlan) -> Self {
        let mut evaluate = vec![false; plan.blocklength];
        for &p in &plan.good_indices {
            evaluate[p] = true;
        }
        Self::compile_with(plan, &evaluate)
    }

    /// Schedule that evaluates every position.
    pub fn compile_all(plan: &TransformPlan) -> Self {
        Self::compile_with(plan, &vec![true; plan.blocklength])
    }

    /// `evaluate[p]` selects the positions whose LLR will be requested.
    pub fn compile_with(plan: &TransformPlan, evaluate: &[bool]) -> Self {
        let n = plan.blocklength;
        let mut cur: Vec<u32> = (0..n as u32).collect();
        let mut next_node = n as u32;
        let mut kernels = Vec::new();
        for layer in plan.levels.iter().rev() {
            // Split into runs of position-disjoint operations so each run is a
            // set of parallel kernels.
            let mut touched = vec![false; n];
            let mut run: Vec<(usize, usize)> = Vec::new();
            let flush =
                |run: &mut Vec<(usize, usize)>, cur: &mut Vec<u32>, next: &mut u32, kernels: &mut Vec<Kernel>| {
                    for &(t, s) in run.iter() {
                        let k = Kernel {
                            top_in: cur[t],
                            bot_in: cur[s],
                            top_out: *next,
                            bot_out: *next + 1,
                        };
                        *next += 2;
                        cur[t] = k.top_out;
                        cur[s] = k.bot_out;
                        kernels.push(k);
                    }
                    run.clear();
                };
            for &(t, s) in &layer.ops {
                if touched[t] || touched[s] {
                    flush(&mut run, &mut cur, &mut next_node, &mut kernels);
                    touched.iter_mut().for_each(|x| *x = false);
                }
                touched[t] = true;
                touched[s] = true;
                run.push((t, s));
            }
            flush(&mut run, &mut cur, &mut next_node, &mut kernels);
        }
        let nodes = next_node as usize;
        let mut consumer = vec![None; nodes];
        let mut producer = vec![None; nodes];
        for (k, kn) in kernels.iter().enumerate() {
            consumer[kn.top_in as usize] = Some((k, true));
            consumer[kn.bot_in as usize] = Some((k, false));
            producer[kn.top_out as usize] = Some(k);
            producer[kn.bot_out as usize] = Some(k);
        }
        let leaves = cur;
        let mut valid = vec![false; nodes];
        for &l in &leaves {
            valid[l as usize] = true;
        }
        let mut c = Compiler {
            kernels,
            consumer,
            producer,
            known: vec![false; nodes],
            valid,
            llr_ops: Vec::new(),
            bit_ops: Vec::new(),
        };
        let mut steps = Vec::with_capacity(n);
        for &p in &plan.decode_order {
            let l0 = c.llr_ops.len();
            if evaluate[p] {
                c.ensure(p as u32);
            }
            let l1 = c.llr_ops.len();
            let b0 = c.bit_ops.len();
            c.mark_known(p as u32);
            steps.push(Step {
                position: p,
                llr_ops: l0..l1,
                bit_ops: b0..c.bit_ops.len(),
            });
        }
        SlowSchedule {
            blocklength: n,
            nodes,
            leaves,
            steps,
            llr_ops: c.llr_ops,
            bit_ops: c.bit_ops,
        }
    }

    /// Channel-side node of each position.
    pub fn leaves(&self) -> &[u32] {
        &self.leaves
    }

    /// For each position in decode order, the updates that evaluate it.
    pub fn steps(&self) -> impl Iterator<Item = (usize, &[LlrOp])> + '_ {
        self.steps
            .iter()
            .map(|s| (s.position, &self.llr_ops[s.llr_ops.clone()]))
    }

    /// Number of LLR updates per copy over one full decode.
    pub fn llr_ops_per_copy(&self) -> usize {
        self.llr_ops.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }
}

/// Executes a [`SlowSchedule`] across `lanes` independent copies.
pub struct SlowDecoder<'a, T> {
    sched: &'a SlowSchedule,
    lanes: usize,
    llr: Vec<T>,
    bits: Vec<u8>,
    cursor: usize,
    pub evals: u64,
}

impl<'a, T: Scalar> SlowDecoder<'a, T> {
    /// `channel[c * N + p]` is the LLR of position `p` in copy `c`.
    pub fn new(sched: &'a SlowSchedule, lanes: usize, channel: &[T]) -> Self {
        let n = sched.blocklength;
        assert_eq!(channel.len(), n * lanes);
        let mut llr = vec![T::zero(); sched.nodes * lanes];
        for (p, &leaf) in sched.leaves.iter().enumerate() {
            let row = &mut llr[leaf as usize * lanes..(leaf as usize + 1) * lanes];
            for (c, v) in row.iter_mut().enumerate() {
                *v = channel[c * n + p];
            }
        }
        Self {
            sched,
            lanes,
            llr,
            bits: vec![0; sched.nodes * lanes],
            cursor: 0,
            evals: 0,
        }
    }

    /// Next position in decode order, if any.
    pub fn peek(&self) -> Option<usize> {
        self.sched.steps.get(self.cursor).map(|s| s.position)
    }

    /// LLRs of the next position across all copies. Must be called exactly
    /// for the positions the schedule was compiled to evaluate.
    pub fn next_llrs(&mut self) -> &[T] {
        let step = &self.sched.steps[self.cursor];
        let m = self.lanes;
        for op in &self.sched.llr_ops[step.llr_ops.clone()] {
            match *op {
                LlrOp::Check { dst, a, b } => {
                    for c in 0..m {
                        let v = check_node(self.llr[a as usize * m + c], self.llr[b as usize * m + c]);
                        self.llr[dst as usize * m + c] = v;
                    }
                }
                LlrOp::Flip { dst, a, sib } => {
                    for c in 0..m {
                        let x = self.llr[a as usize * m + c];
                        self.llr[dst as usize * m + c] = if self.bits[sib as usize * m + c] == 0 { x } else { -x };
                    }
                }
                LlrOp::Var { dst, s, t, sib } => {
                    for c in 0..m {
                        let x = self.llr[t as usize * m + c];
                        let y = self.llr[s as usize * m + c];
                        self.llr[dst as usize * m + c] = if self.bits[sib as usize * m + c] == 0 {
                            y + x
                        } else {
                            y - x
                        };
                    }
                }
                LlrOp::Copy { dst, src } => {
                    let (d, s) = (dst as usize * m, src as usize * m);
                    self.llr.copy_within(s..s + m, d);
                }
            }
        }
        self.evals += (step.llr_ops.len() * m) as u64;
        let p = step.position;
        &self.llr[p * m..(p + 1) * m]
    }

    /// Fixes the values of the next position across copies and propagates
    /// them through the circuit.
    pub fn decide(&mut self, values: &[u8]) {
        let step = &self.sched.steps[self.cursor];
        let m = self.lanes;
        let p = step.position;
        self.bits[p * m..(p + 1) * m].copy_from_slice(values);
        for op in &self.sched.bit_ops[step.bit_ops.clone()] {
            match *op {
                BitOp::Copy { dst, src } => {
                    let (d, s) = (dst as usize * m, src as usize * m);
                    self.bits.copy_within(s..s + m, d);
                }
                BitOp::Xor { dst, a, b } => {
                    for c in 0..m {
                        self.bits[dst as usize * m + c] = self.bits[a as usize * m + c] ^ self.bits[b as usize * m + c];
                    }
                }
            }
        }
        self.cursor += 1;
    }

    /// Fixes a position that the schedule does not evaluate to zero.
    pub fn decide_frozen(&mut self) {
        let zeros = vec![0u8; self.lanes];
        self.decide(&zeros);
    }
}

/// Places `info` on the unfrozen inputs and maps to channel inputs.
pub fn encode(spec: &CodeSpec, info: &[u8]) -> Result<Codeword> {
    let n = spec.plan.blocklength;
    let m = spec.copies();
    if info.len() != spec.info_len() {
        return Err(Error::LengthMismatch {
            expected: spec.info_len(),
            got: info.len(),
        });
    }
    let mut u = vec![0u8; n * m];
    for (&pos, &bit) in spec.info_positions().iter().zip(info) {
        u[pos] = bit & 1;
    }
    let mut x = vec![0u8; n * m];
    let mut column = vec![0u8; m];
    for &p in &spec.plan.good_indices {
        for f in 0..m {
            column[f] = u[f * n + p];
        }
        fast_encode_in_place(&mut column);
        for c in 0..m {
            x[c * n + p] = column[c];
        }
    }
    for c in 0..m {
        spec.plan.encode_in_place(&mut x[c * n..(c + 1) * n]);
    }
    Ok(Codeword { bits: x })
}

/// Reusable decoder state for one [`CodeSpec`].
pub struct Decoder<'a> {
    spec: &'a CodeSpec,
    schedule: SlowSchedule,
    good: Vec<bool>,
    fast_frozen: Vec<bool>,
}

impl<'a> Decoder<'a> {
    pub fn new(spec: &'a CodeSpec) -> Self {
        let n = spec.plan.blocklength;
        let m = spec.copies();
        let mut good = vec![false; n];
        for &p in &spec.plan.good_indices {
            good[p] = true;
        }
        let mut fast_frozen = vec![true; m];
        for &f in &spec.fast_info {
            fast_frozen[f] = false;
        }
        Self {
            spec,
            schedule: SlowSchedule::compile(&spec.plan),
            good,
            fast_frozen,
        }
    }

    pub fn schedule(&self) -> &SlowSchedule {
        &self.schedule
    }

    pub fn decode<T: Scalar>(&self, channel_llrs: &LlrVector<T>) -> Result<DecodeResult> {
        let spec = self.spec;
        let m = spec.copies();
        if channel_llrs.values.len() != spec.length() {
            return Err(Error::LengthMismatch {
                expected: spec.length(),
                got: channel_llrs.values.len(),
            });
        }
        let mut slow = SlowDecoder::new(&self.schedule, m, &channel_llrs.values);
        let mut info = Vec::with_capacity(spec.info_len());
        let mut fast_evals = 0u64;
        let mut u = vec![0u8; m];
        let mut x = vec![0u8; m];
        let mut llrs = vec![T::zero(); m];
        while let Some(p) = slow.peek() {
            if !self.good[p] {
                slow.decide_frozen();
                continue;
            }
            llrs.copy_from_slice(slow.next_llrs());
            fast_sc_decode(&llrs, &self.fast_frozen, &mut u, &mut x, None, &mut fast_evals);
            info.extend(spec.fast_info.iter().map(|&f| u[f]));
            slow.decide(&x);
        }
        Ok(DecodeResult {
            info_bits: info,
            block_ok: None,
            per_stage_stats: DecodeStats {
                slow_llr_evals: slow.evals,
                fast_llr_evals: fast_evals,
            },
        })
    }
}

/// One-shot decode; prefer [`Decoder`] when decoding many words.
pub fn sc_decode<T: Scalar>(spec: &CodeSpec, channel_llrs: &LlrVector<T>) -> Result<DecodeResult> {
    Decoder::new(spec).decode(channel_llrs)
}
