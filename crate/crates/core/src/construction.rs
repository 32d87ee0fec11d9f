//! Explicit slow-polarization circuits, their channel labels, and the
//! two-stage code built by appending a fast Arıkan stage across copies.
//!
//! Positions are numbered top to bottom, 0-based. Layer `k` of a plan holds
//! the XOR operations of level `k + 1`; encoding applies the highest level
//! first and level 1 last, next to the channel.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::transform::{input_arrangement, position_label, type_pattern, Kind};

pub const PLAN_HEADER: &str = "utp v1";
pub const DEFAULT_FAST_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelLabel {
    pub level: usize,
    pub kind: Kind,
    pub sub_index: usize,
}

impl std::fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}^{}", self.kind, self.level, self.sub_index)
    }
}

/// `value[t] ^= value[s]` for each `(t, s)`, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct XorLayer {
    pub ops: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanParams {
    pub n: usize,
    pub k: usize,
    pub b: usize,
    pub g: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformPlan {
    pub params: PlanParams,
    pub blocklength: usize,
    pub levels: Vec<XorLayer>,
    pub labels: Vec<ChannelLabel>,
    /// Successive-cancellation order of the positions.
    pub decode_order: Vec<usize>,
    pub good_indices: Vec<usize>,
}

/// Column rank of the adder on each non-bottom line of the one-level
/// transform. Adders are applied in increasing column order; equal columns
/// only occur on non-adjacent lines, whose adders commute.
pub fn one_level_adder_order(b: usize, g: usize) -> Vec<usize> {
    let kinds = type_pattern(b, g);
    let m = kinds.len();
    let mut walk = vec![0i64; m - 1];
    for i in 1..m - 1 {
        walk[i] = walk[i - 1] + if kinds[i] == Kind::L { -1 } else { 1 };
    }
    let mut distinct = walk.clone();
    distinct.sort_unstable();
    distinct.dedup();
    walk.iter()
        .map(|c| distinct.binary_search(c).expect("present"))
        .collect()
}

/// Line types implied by adder columns: the top line is `L`, the bottom
/// line `R`, and any other line is `L` exactly when its adder sits left of
/// the adder of the line above.
pub fn labels_from_adder_columns(cols: &[usize]) -> Vec<Kind> {
    let mut kinds = vec![Kind::L];
    for i in 1..cols.len() {
        kinds.push(if cols[i] < cols[i - 1] { Kind::L } else { Kind::R });
    }
    kinds.push(Kind::R);
    kinds
}

/// Lines in the order their adders are applied.
fn adder_sequence(b: usize, g: usize) -> Vec<usize> {
    let cols = one_level_adder_order(b, g);
    let mut lines: Vec<usize> = (0..cols.len()).collect();
    lines.sort_by_key(|&i| (cols[i], i));
    lines
}

struct Block {
    prefix: Vec<usize>,
    stream: Vec<usize>,
    suffix: Vec<usize>,
}

struct Builder {
    b: usize,
    g: usize,
    k: usize,
    adders: Vec<usize>,
    arrangement_inv: Vec<usize>,
    layers: Vec<XorLayer>,
    labels: Vec<Option<ChannelLabel>>,
}

impl Builder {
    fn width(&self) -> usize {
        self.b + self.g
    }

    fn label_for(&self, level: usize, pattern_pos: usize) -> ChannelLabel {
        let (kind, sub_index) = position_label(self.b, self.g, pattern_pos);
        ChannelLabel { level, kind, sub_index }
    }

    /// Applies one one-level transform whose line `i` is position `lines[i]`
    /// and labels its outputs.
    fn transform(&mut self, level: usize, lines: &[usize]) {
        for &i in &self.adders {
            self.layers[level - 1].ops.push((lines[i], lines[i + 1]));
        }
        for (i, &p) in lines.iter().enumerate() {
            self.labels[p] = Some(self.label_for(level, i));
        }
    }

    fn level_one(&mut self, offset: usize) -> Vec<Vec<usize>> {
        let m = self.width();
        (0..self.k)
            .map(|blk| {
                let lines: Vec<usize> = (0..m).map(|i| offset + blk * m + i).collect();
                self.transform(1, &lines);
                lines
            })
            .collect()
    }

    fn level_two(&mut self, offset: usize) -> Block {
        let m = self.width();
        let k = self.k;
        let blocks = self.level_one(offset);
        let groups = k + 1 - m;
        let mut stream = Vec::with_capacity(groups * m);
        for j in 0..groups {
            let mut lines = vec![0; m];
            for e in 0..m {
                lines[self.arrangement_inv[e]] = blocks[j + m - 1 - e][e];
            }
            self.transform(2, &lines);
            stream.extend_from_slice(&lines);
        }
        let mut prefix = Vec::new();
        let mut suffix = Vec::new();
        for (blk, elems) in blocks.iter().enumerate() {
            for (e, &p) in elems.iter().enumerate() {
                let j = blk as i64 - (m - 1 - e) as i64;
                if j < 0 {
                    prefix.push(p);
                } else if j >= groups as i64 {
                    suffix.push(p);
                }
            }
        }
        Block { prefix, stream, suffix }
    }

    fn combine(&mut self, level: usize, copies: Vec<Block>) -> Block {
        let m = self.width();
        let len = copies[0].stream.len();
        let groups = len + 1 - m;
        let mut stream = Vec::with_capacity(groups * m);
        for j in 0..groups {
            let mut lines = vec![0; m];
            for (c, copy) in copies.iter().enumerate() {
                let t = j + m - 1 - c;
                let line = if m == 2 { c } else { self.arrangement_inv[t % m] };
                lines[line] = copy.stream[t];
            }
            self.transform(level, &lines);
            stream.extend_from_slice(&lines);
        }
        let mut prefix: Vec<usize> = copies.iter().flat_map(|c| c.prefix.iter().copied()).collect();
        let mut tails = Vec::new();
        for (c, copy) in copies.iter().enumerate() {
            let off = m - 1 - c;
            prefix.extend_from_slice(&copy.stream[..off]);
            tails.extend_from_slice(&copy.stream[groups + off..]);
        }
        let suffix = tails
            .into_iter()
            .chain(copies.iter().flat_map(|c| c.suffix.iter().copied()))
            .collect();
        Block { prefix, stream, suffix }
    }

    fn block(&mut self, level: usize, offset: usize, size: usize) -> Block {
        if level == 2 {
            return self.level_two(offset);
        }
        let m = self.width();
        let sub = size / m;
        let copies = (0..m).map(|c| self.block(level - 1, offset + c * sub, sub)).collect();
        self.combine(level, copies)
    }
}

fn finish(
    params: PlanParams,
    layers: Vec<XorLayer>,
    labels: Vec<Option<ChannelLabel>>,
    decode_order: Vec<usize>,
) -> TransformPlan {
    let labels: Vec<ChannelLabel> = labels.into_iter().map(|l| l.expect("every position labeled")).collect();
    let good_indices = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.level == params.n && l.kind == Kind::R)
        .map(|(i, _)| i)
        .collect();
    TransformPlan {
        params,
        blocklength: labels.len(),
        levels: layers,
        labels,
        decode_order,
        good_indices,
    }
}

/// Rate-1/2 slow-polarization plan with `n` levels and chain length `k`.
pub fn build_rate_half(n: usize, k: usize) -> Result<TransformPlan> {
    build_general(1, 1, n, k)
}

/// General-rate plan with `b` degraded and `g` upgraded outputs per
/// one-level transform. Requires `k >= b + g` so that the level-2 chain has
/// at least one full group.
pub fn build_general(b: usize, g: usize, n: usize, k: usize) -> Result<TransformPlan> {
    if b == 0 || g == 0 {
        return invalid("b and g must both be at least 1");
    }
    if n < 2 {
        return invalid(format!("n = {n}: at least two levels are required"));
    }
    if k < 2 || k < b + g {
        return invalid(format!(
            "K = {k}: chain length must be at least max(2, b+g) = {}",
            (b + g).max(2)
        ));
    }
    let m = b + g;
    let size = m.pow(n as u32 - 1) * k;
    let mut arrangement_inv = vec![0; m];
    for (line, &e) in input_arrangement(b, g).iter().enumerate() {
        arrangement_inv[e] = line;
    }
    let mut builder = Builder {
        b,
        g,
        k,
        adders: adder_sequence(b, g),
        arrangement_inv,
        layers: vec![XorLayer::default(); n],
        labels: vec![None; size],
    };
    let blk = builder.block(n, 0, size);
    let decode_order = blk.prefix.into_iter().chain(blk.stream).chain(blk.suffix).collect();
    Ok(finish(
        PlanParams { n, k, b, g },
        builder.layers,
        builder.labels,
        decode_order,
    ))
}

/// `k` independent one-level transforms side by side; with `k = 1` this is
/// a single kernel.
pub fn build_one_level(b: usize, g: usize, k: usize) -> Result<TransformPlan> {
    if b == 0 || g == 0 || k == 0 {
        return invalid("b, g and K must all be at least 1");
    }
    let m = b + g;
    let mut builder = Builder {
        b,
        g,
        k,
        adders: adder_sequence(b, g),
        arrangement_inv: vec![0; m],
        layers: vec![XorLayer::default()],
        labels: vec![None; m * k],
    };
    builder.level_one(0);
    Ok(finish(
        PlanParams { n: 1, k, b, g },
        builder.layers,
        builder.labels,
        (0..m * k).collect(),
    ))
}

/// Positions labeled as top-level upgraded channels. Depends only on the
/// plan parameters.
pub fn universal_good_indices(plan: &TransformPlan) -> Vec<usize> {
    plan.labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.level == plan.params.n && l.kind == Kind::R)
        .map(|(i, _)| i)
        .collect()
}

impl TransformPlan {
    /// Maps inputs `u` to channel inputs in place.
    pub fn encode_in_place(&self, v: &mut [u8]) {
        for layer in self.levels.iter().rev() {
            for &(t, s) in &layer.ops {
                v[t] ^= v[s];
            }
        }
    }

    /// Inverse of [`Self::encode_in_place`].
    pub fn decode_in_place(&self, v: &mut [u8]) {
        for layer in &self.levels {
            for &(t, s) in layer.ops.iter().rev() {
                v[t] ^= v[s];
            }
        }
    }

    /// Number of positions carrying a label of each level, index 0 unused.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.params.n + 1];
        for l in &self.labels {
            c[l.level] += 1;
        }
        c
    }

    pub fn top_level_fraction(&self) -> f64 {
        self.level_counts()[self.params.n] as f64 / self.blocklength as f64
    }

    /// Positions left below the top level.
    pub fn unpolarized_count(&self) -> usize {
        self.blocklength - self.level_counts()[self.params.n]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.blocklength;
        if self.labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: self.labels.len(),
            });
        }
        for layer in &self.levels {
            for &(t, s) in &layer.ops {
                if t == s || t >= n || s >= n {
                    return invalid(format!("bad XOR pair ({t}, {s})"));
                }
            }
        }
        let mut seen = vec![false; n];
        for &p in &self.decode_order {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return invalid("decode order is not a permutation");
            }
        }
        if self.decode_order.len() != n {
            return invalid("decode order is not a permutation");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let p = self.params;
        let mut s = String::new();
        let _ = writeln!(s, "{PLAN_HEADER}");
        let _ = writeln!(s, "params n={} K={} b={} g={}", p.n, p.k, p.b, p.g);
        let _ = writeln!(s, "blocklength {}", self.blocklength);
        for (i, layer) in self.levels.iter().enumerate() {
            let _ = writeln!(s, "layer {} {}", i + 1, layer.ops.len());
            for (t, src) in &layer.ops {
                let _ = writeln!(s, "{t} {src}");
            }
        }
        let _ = writeln!(s, "labels");
        for (i, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", l.level, l.kind, l.sub_index);
        }
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "decode_order {}", join(&self.decode_order));
        let _ = writeln!(s, "good {}", join(&self.good_indices));
        let _ = writeln!(s, "end");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.into() };
        let num = |line: usize, tok: &str| {
            tok.parse::<usize>()
                .map_err(|_| err(line, &format!("bad integer '{tok}'")))
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, &format!("unexpected end of input, expected {what}")))
        };

        let (ln, h) = next("header")?;
        if h != PLAN_HEADER {
            return Err(err(ln, &format!("expected header '{PLAN_HEADER}'")));
        }
        let (ln, pl) = next("params")?;
        let mut params = PlanParams { n: 0, k: 0, b: 0, g: 0 };
        let mut fields = pl.split_whitespace();
        if fields.next() != Some("params") {
            return Err(err(ln, "expected params line"));
        }
        for f in fields {
            let (key, v) = f.split_once('=').ok_or_else(|| err(ln, "expected key=value"))?;
            let v = num(ln, v)?;
            match key {
                "n" => params.n = v,
                "K" => params.k = v,
                "b" => params.b = v,
                "g" => params.g = v,
                _ => return Err(err(ln, &format!("unknown parameter '{key}'"))),
            }
        }
        let (ln, bl) = next("blocklength")?;
        let blocklength = match bl.split_once(' ') {
            Some(("blocklength", v)) => num(ln, v.trim())?,
            _ => return Err(err(ln, "expected blocklength")),
        };
        let mut levels = Vec::with_capacity(params.n);
        for lvl in 1..=params.n {
            let (ln, hdr) = next("layer")?;
            let parts: Vec<&str> = hdr.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "layer" || num(ln, parts[1])? != lvl {
                return Err(err(ln, &format!("expected 'layer {lvl} <count>'")));
            }
            let count = num(ln, parts[2])?;
            let mut ops = Vec::with_capacity(count);
            for _ in 0..count {
                let (ln, op) = next("XOR pair")?;
                let (t, s) = op.split_once(' ').ok_or_else(|| err(ln, "expected 't s'"))?;
                ops.push((num(ln, t)?, num(ln, s.trim())?));
            }
            levels.push(XorLayer { ops });
        }
        let (ln, lh) = next("labels")?;
        if lh != "labels" {
            return Err(err(ln, "expected labels"));
        }
        let mut labels = Vec::with_capacity(blocklength);
        for i in 0..blocklength {
            let (ln, l) = next("label")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 4 || num(ln, parts[0])? != i {
                return Err(err(ln, &format!("expected label for position {i}")));
            }
            let kind = match parts[2] {
                "L" => Kind::L,
                "R" => Kind::R,
                _ => return Err(err(ln, "kind must be L or R")),
            };
            labels.push(ChannelLabel {
                level: num(ln, parts[1])?,
                kind,
                sub_index: num(ln, parts[3])?,
            });
        }
        let mut list = |key: &str| -> Result<Vec<usize>> {
            let (ln, l) = next(key)?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(err(ln, &format!("expected {key}")));
            }
            it.map(|t| num(ln, t)).collect()
        };
        let decode_order = list("decode_order")?;
        let good_indices = list("good")?;
        let (ln, e) = next("end")?;
        if e != "end" {
            return Err(err(ln, "expected end"));
        }
        let plan = TransformPlan {
            params,
            blocklength,
            levels,
            labels,
            decode_order,
            good_indices,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Two-stage code: `M = 2^fast_m` copies of the slow plan, with a length-M
/// Arıkan transform across copies on every good slow position.
///
/// Combined input index `f * N + p` addresses fast index `f` of slow
/// position `p`; codeword index `c * N + p` addresses copy `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub plan: TransformPlan,
    pub fast_m: usize,
    pub delta: f64,
    pub margin: f64,
    /// Unfrozen fast indices, ascending.
    pub fast_info: Vec<usize>,
    /// Frozen combined input indices, ascending.
    pub frozen: Vec<usize>,
    pub rate: f64,
}

/// Bhattacharyya parameters of the `2^m` synthesized channels of a BEC with
/// erasure probability `delta`, in natural index order.
pub fn bec_fast_profile(delta: f64, m: usize) -> Vec<f64> {
    fn go(z: f64, m: usize, out: &mut Vec<f64>) {
        if m == 0 {
            out.push(z);
        } else {
            go(2.0 * z - z * z, m - 1, out);
            go(z * z, m - 1, out);
        }
    }
    let mut out = Vec::with_capacity(1 << m);
    go(delta, m, &mut out);
    out
}

pub fn attach_fast_stage(plan: &TransformPlan, m: usize, delta: f64) -> Result<CodeSpec> {
    attach_fast_stage_with_margin(plan, m, delta, DEFAULT_FAST_MARGIN)
}

/// Keeps the `ceil((1 - delta - margin) M)` fast indices with the smallest
/// BEC(delta) Bhattacharyya parameter. With `m = 0` the single fast index
/// is always kept.
pub fn attach_fast_stage_with_margin(plan: &TransformPlan, m: usize, delta: f64, margin: f64) -> Result<CodeSpec> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    if !(0.0..1.0).contains(&margin) {
        return invalid(format!("margin = {margin} must lie in [0, 1)"));
    }
    if m > 24 {
        return invalid(format!("fast stage of 2^{m} copies is too large"));
    }
    let big_m = 1usize << m;
    let fast_info: Vec<usize> = if m == 0 {
        vec![0]
    } else {
        let z = bec_fast_profile(delta, m);
        let keep = (((1.0 - delta - margin) * big_m as f64).ceil().max(0.0) as usize).min(big_m);
        let mut idx: Vec<usize> = (0..big_m).collect();
        idx.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
        let mut info = idx[..keep].to_vec();
        info.sort_unstable();
        info
    };
    let n = plan.blocklength;
    let mut is_info = vec![false; n * big_m];
    for &f in &fast_info {
        for &p in &plan.good_indices {
            is_info[f * n + p] = true;
        }
    }
    let frozen = (0..n * big_m).filter(|&i| !is_info[i]).collect();
    let rate = (fast_info.len() * plan.good_indices.len()) as f64 / (n * big_m) as f64;
    Ok(CodeSpec {
        plan: plan.clone(),
        fast_m: m,
        delta,
        margin,
        fast_info,
        frozen,
        rate,
    })
}

impl CodeSpec {
    pub fn copies(&self) -> usize {
        1 << self.fast_m
    }

    pub fn length(&self) -> usize {
        self.plan.blocklength * self.copies()
    }

    pub fn info_len(&self) -> usize {
        self.fast_info.len() * self.plan.good_indices.len()
    }

    /// Combined input indices carrying information, in the order message
    /// bits are placed: good slow positions in decode order, then fast index.
    pub fn info_positions(&self) -> Vec<usize> {
        let n = self.plan.blocklength;
        let good: std::collections::HashSet<usize> = self.plan.good_indices.iter().copied().collect();
        self.plan
            .decode_order
            .iter()
            .filter(|p| good.contains(p))
            .flat_map(|&p| self.fast_info.iter().map(move |&f| f * n + p))
            .collect()
    }
}
