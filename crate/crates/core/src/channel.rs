//! Exact evaluation on finite discrete memoryless channels with
//! independent inputs.
//!
//! A channel is a conditional tensor `p(y_D | x_I)` stored row-major over
//! inputs in ascending node order, then outputs in ascending node order.
//! Together with per-node input pmfs it yields a joint distribution from
//! which every `I(X_A; Y_d | X_B)` is computed exactly (base-2, `0 log 0
//! = 0`). Alphabets are capped so that full enumeration stays exact; there
//! are no sampling estimators here.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{NodeId, NodeSet};
use crate::region::{Constraint, MiTerm, Region};

/// Cap on the number of joint states (inputs times outputs).
pub const MAX_STATES: usize = 1 << 20;

/// Tolerance within which the file loader silently re-normalizes rows.
pub const LOAD_NORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("distribution not normalized: {0}")]
    NotNormalized(String),
    #[error("negative probability entry {0}")]
    NegativeEntry(f64),
    #[error("state space too large: {states} > {MAX_STATES}")]
    TooLarge { states: usize },
    #[error("degenerate region: every bound is zero")]
    DegenerateRegion,
    #[error("channel file: {0}")]
    Format(String),
    #[error("node {0} appears in a term but not in the channel")]
    UnknownNode(NodeId),
}

fn product_capped(sizes: impl Iterator<Item = usize>) -> Result<usize, ChannelError> {
    let mut acc: usize = 1;
    for s in sizes {
        acc = acc.saturating_mul(s);
        if acc > MAX_STATES {
            return Err(ChannelError::TooLarge { states: acc });
        }
    }
    Ok(acc)
}

/// A discrete memoryless channel: alphabet sizes per input and output
/// node and the flat conditional tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DmChannel {
    inputs: BTreeMap<NodeId, usize>,
    outputs: BTreeMap<NodeId, usize>,
    cond_pmf: Vec<f64>,
}

impl DmChannel {
    /// Validates shape, non-negativity, and per-row normalization within
    /// 1e-12.
    pub fn new(
        inputs: BTreeMap<NodeId, usize>,
        outputs: BTreeMap<NodeId, usize>,
        cond_pmf: Vec<f64>,
    ) -> Result<Self, ChannelError> {
        let in_states = product_capped(inputs.values().copied())?;
        let out_states = product_capped(outputs.values().copied())?;
        let states = product_capped([in_states, out_states].into_iter())?;
        if cond_pmf.len() != states {
            return Err(ChannelError::AlphabetMismatch(format!(
                "cond_pmf has {} entries, expected {}",
                cond_pmf.len(),
                states
            )));
        }
        for &p in &cond_pmf {
            if p < 0.0 {
                return Err(ChannelError::NegativeEntry(p));
            }
        }
        for row in 0..in_states {
            let sum: f64 = cond_pmf[row * out_states..(row + 1) * out_states].iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ChannelError::NotNormalized(format!(
                    "conditional row {row} sums to {sum}"
                )));
            }
        }
        Ok(DmChannel {
            inputs,
            outputs,
            cond_pmf,
        })
    }

    pub fn input_nodes(&self) -> NodeSet {
        self.inputs.keys().copied().collect()
    }

    pub fn output_nodes(&self) -> NodeSet {
        self.outputs.keys().copied().collect()
    }

    pub fn input_alphabet(&self, node: NodeId) -> Option<usize> {
        self.inputs.get(&node).copied()
    }

    pub fn output_alphabet(&self, node: NodeId) -> Option<usize> {
        self.outputs.get(&node).copied()
    }

    /// The raw conditional tensor in the documented layout (row-major over
    /// inputs ascending, then outputs ascending).
    pub fn cond_pmf(&self) -> &[f64] {
        &self.cond_pmf
    }

    /// A random channel: every conditional row is an independent vector of
    /// uniform positives, normalized. Seeded via the caller's generator.
    pub fn random(
        inputs: &[(NodeId, usize)],
        outputs: &[(NodeId, usize)],
        rng: &mut impl Rng,
    ) -> Self {
        let in_map: BTreeMap<NodeId, usize> = inputs.iter().copied().collect();
        let out_map: BTreeMap<NodeId, usize> = outputs.iter().copied().collect();
        let in_states: usize = in_map.values().product();
        let out_states: usize = out_map.values().product();
        let mut cond = vec![0.0; in_states * out_states];
        for row in 0..in_states {
            let slice = &mut cond[row * out_states..(row + 1) * out_states];
            let mut sum = 0.0;
            for p in slice.iter_mut() {
                *p = rng.random::<f64>() + 1e-9;
                sum += *p;
            }
            for p in slice.iter_mut() {
                *p /= sum;
            }
        }
        DmChannel::new(in_map, out_map, cond).expect("random rows are normalized")
    }
}

/// Independent per-node input distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDist {
    pmfs: BTreeMap<NodeId, Vec<f64>>,
}

impl InputDist {
    pub fn new(pmfs: BTreeMap<NodeId, Vec<f64>>) -> Result<Self, ChannelError> {
        for (node, pmf) in &pmfs {
            for &p in pmf {
                if p < 0.0 {
                    return Err(ChannelError::NegativeEntry(p));
                }
            }
            let sum: f64 = pmf.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ChannelError::NotNormalized(format!(
                    "input pmf of node {node} sums to {sum}"
                )));
            }
        }
        Ok(InputDist { pmfs })
    }

    pub fn uniform(channel: &DmChannel) -> Self {
        let pmfs = channel
            .inputs
            .iter()
            .map(|(n, &size)| (*n, vec![1.0 / size as f64; size]))
            .collect();
        InputDist { pmfs }
    }

    pub fn random(channel: &DmChannel, rng: &mut impl Rng) -> Self {
        let pmfs = channel
            .inputs
            .iter()
            .map(|(n, &size)| {
                let mut pmf: Vec<f64> = (0..size).map(|_| rng.random::<f64>() + 1e-9).collect();
                let sum: f64 = pmf.iter().sum();
                for p in &mut pmf {
                    *p /= sum;
                }
                (*n, pmf)
            })
            .collect();
        InputDist { pmfs }
    }

    pub fn pmf(&self, node: NodeId) -> Option<&[f64]> {
        self.pmfs.get(&node).map(|v| v.as_slice())
    }
}

/// A variable of the joint distribution: one input or one output node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    In(NodeId),
    Out(NodeId),
}

/// The joint pmf over all inputs and outputs, with marginal-entropy
/// queries. Variables are ordered inputs-ascending then outputs-ascending,
/// matching the conditional tensor layout.
#[derive(Debug, Clone)]
pub struct JointDist {
    vars: Vec<Var>,
    sizes: Vec<usize>,
    /// Stride of each variable in the flat index (row-major).
    strides: Vec<usize>,
    p: Vec<f64>,
}

/// `p(x,y) = prod_i p_i(x_i) * p(y|x)`; sums to one within 1e-12.
pub fn joint_distribution(
    channel: &DmChannel,
    inputs: &InputDist,
) -> Result<JointDist, ChannelError> {
    let mut vars: Vec<Var> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (n, &s) in &channel.inputs {
        vars.push(Var::In(*n));
        sizes.push(s);
    }
    for (n, &s) in &channel.outputs {
        vars.push(Var::Out(*n));
        sizes.push(s);
    }
    let states = product_capped(sizes.iter().copied())?;

    let mut strides = vec![1usize; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }

    let in_count = channel.inputs.len();
    let mut input_pmfs: Vec<&[f64]> = Vec::with_capacity(in_count);
    for (n, &size) in &channel.inputs {
        let pmf = inputs
            .pmf(*n)
            .ok_or_else(|| ChannelError::AlphabetMismatch(format!("no input pmf for node {n}")))?;
        if pmf.len() != size {
            return Err(ChannelError::AlphabetMismatch(format!(
                "input pmf of node {n} has {} entries, expected {size}",
                pmf.len()
            )));
        }
        input_pmfs.push(pmf);
    }

    let mut p = vec![0.0; states];
    let mut total = 0.0;
    for (idx, cell) in p.iter_mut().enumerate() {
        let mut weight = channel.cond_pmf[idx];
        for v in 0..in_count {
            let digit = (idx / strides[v]) % sizes[v];
            weight *= input_pmfs[v][digit];
        }
        *cell = weight;
        total += weight;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(ChannelError::NotNormalized(format!(
            "joint distribution sums to {total}"
        )));
    }
    Ok(JointDist {
        vars,
        sizes,
        strides,
        p,
    })
}

fn entropy_bits(cells: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in cells {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

impl JointDist {
    pub fn states(&self) -> usize {
        self.p.len()
    }

    fn var_index(&self, var: Var) -> Result<usize, ChannelError> {
        self.vars.iter().position(|v| *v == var).ok_or(match var {
            Var::In(n) | Var::Out(n) => ChannelError::UnknownNode(n),
        })
    }

    /// Marginal pmf over an ordered list of variables.
    pub fn marginal(&self, over: &[Var]) -> Result<Vec<f64>, ChannelError> {
        let idxs: Vec<usize> = over
            .iter()
            .map(|&v| self.var_index(v))
            .collect::<Result<_, _>>()?;
        let mut out_size = 1usize;
        let mut substrides = vec![0usize; idxs.len()];
        for (pos, &vi) in idxs.iter().enumerate().rev() {
            substrides[pos] = out_size;
            out_size *= self.sizes[vi];
        }
        let mut out = vec![0.0; out_size];
        for (idx, &p) in self.p.iter().enumerate() {
            let mut o = 0usize;
            for (pos, &vi) in idxs.iter().enumerate() {
                let digit = (idx / self.strides[vi]) % self.sizes[vi];
                o += digit * substrides[pos];
            }
            out[o] += p;
        }
        Ok(out)
    }

    /// Joint entropy (bits) of a set of variables.
    pub fn entropy(&self, over: &[Var]) -> Result<f64, ChannelError> {
        Ok(entropy_bits(&self.marginal(over)?))
    }
}

/// `I(X_A; Y_d | X_B)` in bits, computed as
/// `H(X_B, Y) - H(X_B) - H(X_{A+B}, Y) + H(X_{A+B})` and clamped at zero.
/// A term with an empty fresh set is exactly zero.
pub fn mutual_info(term: &MiTerm, joint: &JointDist) -> Result<f64, ChannelError> {
    if term.is_zero() {
        return Ok(0.0);
    }
    let y = Var::Out(term.dest);
    let b: Vec<Var> = term.given().iter().map(|&n| Var::In(n)).collect();
    let mut ab = b.clone();
    ab.extend(term.fresh().iter().map(|&n| Var::In(n)));
    let mut by = b.clone();
    by.push(y);
    let mut aby = ab.clone();
    aby.push(y);

    let mut v = joint.entropy(&by)? - joint.entropy(&aby)? + joint.entropy(&ab)?;
    if !b.is_empty() {
        v -= joint.entropy(&b)?;
    }
    debug_assert!(v > -1e-9, "mutual information fell below -1e-9: {v}");
    Ok(v.max(0.0))
}

/// Sum of a constraint's terms (the numeric bound on `R_S`).
pub fn constraint_bound(constraint: &Constraint, joint: &JointDist) -> Result<f64, ChannelError> {
    let mut sum = 0.0;
    for t in &constraint.terms {
        sum += mutual_info(t, joint)?;
    }
    Ok(sum)
}

/// A rate allocation in bits per channel use; sources without an entry
/// count as zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateVector {
    pub rates: BTreeMap<NodeId, f64>,
}

impl RateVector {
    pub fn new(rates: BTreeMap<NodeId, f64>) -> Self {
        RateVector { rates }
    }

    pub fn zero(sources: &NodeSet) -> Self {
        RateVector {
            rates: sources.iter().map(|&s| (s, 0.0)).collect(),
        }
    }

    pub fn rate(&self, s: NodeId) -> f64 {
        self.rates.get(&s).copied().unwrap_or(0.0)
    }

    /// `R_S`: the sum rate of a source subset.
    pub fn sum_over(&self, subset: &NodeSet) -> f64 {
        subset.iter().map(|&s| self.rate(s)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RateVector {
            rates: self.rates.iter().map(|(s, r)| (*s, r * factor)).collect(),
        }
    }
}

impl fmt::Display for RateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .rates
            .iter()
            .map(|(s, r)| format!("{s}:{r:.6}"))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// The verdict of a numeric membership check.
#[derive(Debug, Clone)]
pub struct Membership {
    pub member: bool,
    /// `(subset, bound - R_S)` per constraint, in region order.
    pub margins: Vec<(NodeSet, f64)>,
    /// Subsets whose margin fell below the slack.
    pub violated: Vec<NodeSet>,
}

impl Membership {
    /// The constraint with the smallest margin.
    pub fn binding(&self) -> Option<&(NodeSet, f64)> {
        self.margins
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("margins are finite"))
    }
}

/// Membership with slack: `R` lies in the (open) region when every
/// constraint holds with margin at least `eps`.
pub fn eval_region(
    region: &Region,
    joint: &JointDist,
    rates: &RateVector,
    eps: f64,
) -> Result<Membership, ChannelError> {
    let mut margins = Vec::with_capacity(region.constraints.len());
    let mut violated = Vec::new();
    for c in &region.constraints {
        let margin = constraint_bound(c, joint)? - rates.sum_over(&c.subset);
        if margin < eps {
            violated.push(c.subset.clone());
        }
        margins.push((c.subset.clone(), margin));
    }
    Ok(Membership {
        member: violated.is_empty(),
        margins,
        violated,
    })
}

/// Numeric bounds of every constraint of a region, in region order.
pub fn region_bounds(
    region: &Region,
    joint: &JointDist,
) -> Result<Vec<(NodeSet, f64)>, ChannelError> {
    region
        .constraints
        .iter()
        .map(|c| Ok((c.subset.clone(), constraint_bound(c, joint)?)))
        .collect()
}

/// Membership in an intersection of regions: the rate vector must lie in
/// every part (each part checked against its own destination's output).
pub fn eval_intersection(
    intersection: &crate::region::RegionIntersection,
    joint: &JointDist,
    rates: &RateVector,
    eps: f64,
) -> Result<bool, ChannelError> {
    for part in &intersection.parts {
        if !eval_region(part, joint, rates, eps)?.member {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Deterministic boundary sampler: for each of `count` pseudo-random
/// directions, binary-search the largest feasible scale along the
/// direction and return the point at `alpha` times that scale. Bounds are
/// evaluated once; the search itself is pure arithmetic.
pub fn sample_boundary(
    region: &Region,
    joint: &JointDist,
    alpha: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<RateVector>, ChannelError> {
    let sources: Vec<NodeId> = region.sources.iter().copied().collect();
    let bounds = region_bounds(region, joint)?;
    let max_bound = bounds.iter().map(|(_, b)| *b).fold(0.0f64, f64::max);
    if max_bound <= 1e-12 {
        return Err(ChannelError::DegenerateRegion);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut dir: Vec<f64> = (0..sources.len())
            .map(|_| rng.random::<f64>() + 1e-9)
            .collect();
        let total: f64 = dir.iter().sum();
        for d in &mut dir {
            *d /= total;
        }
        // Per-constraint direction mass: sum of the direction over S.
        let slopes: Vec<f64> = bounds
            .iter()
            .map(|(subset, _)| {
                sources
                    .iter()
                    .zip(&dir)
                    .filter(|(s, _)| subset.contains(s))
                    .map(|(_, d)| *d)
                    .sum()
            })
            .collect();
        let feasible = |t: f64| -> bool {
            bounds
                .iter()
                .zip(&slopes)
                .all(|((_, bound), slope)| t * slope <= *bound)
        };
        let mut hi = 1.0;
        let mut grow = 0;
        while feasible(hi) {
            hi *= 2.0;
            grow += 1;
            if grow > 64 {
                return Err(ChannelError::DegenerateRegion);
            }
        }
        let mut lo = 0.0;
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let scale = alpha * lo;
        out.push(RateVector::new(
            sources
                .iter()
                .zip(&dir)
                .map(|(&s, &d)| (s, scale * d))
                .collect(),
        ));
    }
    Ok(out)
}

/// Relation checked by `verify_identity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityMode {
    /// `|sum(lhs) - sum(rhs)| <= tol` on every trial.
    Equality,
    /// `sum(lhs) >= sum(rhs) - tol` on every trial.
    Geq,
}

/// Outcome of an identity check; `worst` is the margin of the worst trial
/// (absolute difference for equality, signed `lhs - rhs` for geq).
#[derive(Debug, Clone)]
pub struct IdentityVerdict {
    pub holds: bool,
    pub worst: f64,
    pub trials: usize,
}

/// Check a symbolic relation numerically on an explicit battery of
/// channels.
pub fn verify_identity_on(
    lhs: &[MiTerm],
    rhs: &[MiTerm],
    mode: IdentityMode,
    instances: &[(DmChannel, InputDist)],
    tol: f64,
) -> Result<IdentityVerdict, ChannelError> {
    let mut holds = true;
    let mut worst: Option<f64> = None;
    for (channel, inputs) in instances {
        let joint = joint_distribution(channel, inputs)?;
        let l: f64 = lhs
            .iter()
            .map(|t| mutual_info(t, &joint))
            .sum::<Result<f64, _>>()?;
        let r: f64 = rhs
            .iter()
            .map(|t| mutual_info(t, &joint))
            .sum::<Result<f64, _>>()?;
        match mode {
            IdentityMode::Equality => {
                let diff = (l - r).abs();
                worst = Some(worst.map_or(diff, |w: f64| w.max(diff)));
                if diff > tol {
                    holds = false;
                }
            }
            IdentityMode::Geq => {
                let margin = l - r;
                worst = Some(worst.map_or(margin, |w: f64| w.min(margin)));
                if margin < -tol {
                    holds = false;
                }
            }
        }
    }
    Ok(IdentityVerdict {
        holds,
        worst: worst.unwrap_or(0.0),
        trials: instances.len(),
    })
}

/// Generate a deterministic battery of random channels over the given
/// input nodes (all with the same input alphabet) and one output node.
pub fn random_instances(
    inputs: &NodeSet,
    dest: NodeId,
    in_alphabet: usize,
    out_alphabet: usize,
    count: usize,
    seed: u64,
) -> Vec<(DmChannel, InputDist)> {
    let input_spec: Vec<(NodeId, usize)> = inputs.iter().map(|&n| (n, in_alphabet)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let ch = DmChannel::random(&input_spec, &[(dest, out_alphabet)], &mut rng);
            let inp = InputDist::random(&ch, &mut rng);
            (ch, inp)
        })
        .collect()
}

/// Check a symbolic relation on `trials` random channels whose input
/// nodes are taken from the terms themselves (binary inputs, quaternary
/// output).
pub fn verify_identity(
    lhs: &[MiTerm],
    rhs: &[MiTerm],
    mode: IdentityMode,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<IdentityVerdict, ChannelError> {
    let mut nodes = NodeSet::new();
    let mut dest = None;
    for t in lhs.iter().chain(rhs) {
        nodes.extend(t.fresh().iter().copied());
        nodes.extend(t.given().iter().copied());
        dest = Some(t.dest);
    }
    let dest = dest.ok_or_else(|| {
        ChannelError::AlphabetMismatch("identity check needs at least one term".to_string())
    })?;
    let instances = random_instances(&nodes, dest, 2, 4, trials, seed);
    verify_identity_on(lhs, rhs, mode, &instances, tol)
}

// ---------------------------------------------------------------------------
// Channel files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    inputs: BTreeMap<String, usize>,
    outputs: BTreeMap<String, usize>,
    input_pmfs: BTreeMap<String, Vec<f64>>,
    cond_pmf: Vec<f64>,
}

fn parse_node_key(key: &str) -> Result<NodeId, ChannelError> {
    key.parse::<u32>()
        .map(NodeId)
        .map_err(|_| ChannelError::Format(format!("bad node id `{key}`")))
}

fn renormalize(slice: &mut [f64], what: &str) -> Result<(), ChannelError> {
    for &p in slice.iter() {
        if p < 0.0 {
            return Err(ChannelError::NegativeEntry(p));
        }
    }
    let sum: f64 = slice.iter().sum();
    if (sum - 1.0).abs() > LOAD_NORMALIZE_TOL {
        return Err(ChannelError::NotNormalized(format!(
            "{what} sums to {sum}, beyond the 1e-9 re-normalization tolerance"
        )));
    }
    for p in slice.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Load a channel plus input distribution from the JSON text format. Rows
/// and pmfs off by at most 1e-9 are re-normalized; anything worse is
/// rejected.
pub fn load_channel_json(text: &str) -> Result<(DmChannel, InputDist), ChannelError> {
    let file: ChannelFile =
        serde_json::from_str(text).map_err(|e| ChannelError::Format(e.to_string()))?;
    let mut inputs = BTreeMap::new();
    for (k, v) in &file.inputs {
        inputs.insert(parse_node_key(k)?, *v);
    }
    let mut outputs = BTreeMap::new();
    for (k, v) in &file.outputs {
        outputs.insert(parse_node_key(k)?, *v);
    }
    let out_states: usize = outputs.values().product();
    let in_states: usize = inputs.values().product();
    let mut cond = file.cond_pmf;
    if cond.len() != in_states * out_states {
        return Err(ChannelError::AlphabetMismatch(format!(
            "cond_pmf has {} entries, expected {}",
            cond.len(),
            in_states * out_states
        )));
    }
    for row in 0..in_states {
        renormalize(
            &mut cond[row * out_states..(row + 1) * out_states],
            &format!("conditional row {row}"),
        )?;
    }
    let channel = DmChannel::new(inputs, outputs, cond)?;

    let mut pmfs = BTreeMap::new();
    for (k, pmf) in file.input_pmfs {
        let node = parse_node_key(&k)?;
        let size = channel.input_alphabet(node).ok_or_else(|| {
            ChannelError::Format(format!("input pmf for unknown node {node}"))
        })?;
        if pmf.len() != size {
            return Err(ChannelError::AlphabetMismatch(format!(
                "input pmf of node {node} has {} entries, expected {size}",
                pmf.len()
            )));
        }
        let mut pmf = pmf;
        renormalize(&mut pmf, &format!("input pmf of node {node}"))?;
        pmfs.insert(node, pmf);
    }
    for node in channel.input_nodes() {
        if !pmfs.contains_key(&node) {
            return Err(ChannelError::Format(format!(
                "missing input pmf for node {node}"
            )));
        }
    }
    let dist = InputDist::new(pmfs)?;
    Ok((channel, dist))
}

/// Serialize a channel and input distribution to the JSON text format.
pub fn channel_to_json(channel: &DmChannel, inputs: &InputDist) -> String {
    let file = ChannelFile {
        inputs: channel
            .inputs
            .iter()
            .map(|(n, s)| (n.to_string(), *s))
            .collect(),
        outputs: channel
            .outputs
            .iter()
            .map(|(n, s)| (n.to_string(), *s))
            .collect(),
        input_pmfs: channel
            .inputs
            .keys()
            .map(|n| {
                (
                    n.to_string(),
                    inputs.pmf(*n).expect("pmf per input").to_vec(),
                )
            })
            .collect(),
        cond_pmf: channel.cond_pmf.clone(),
    };
    serde_json::to_string_pretty(&file).expect("channel file serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::nodes;

    fn noiseless_bit() -> (DmChannel, InputDist) {
        // One binary input (node 1), output = input (node 2).
        let ch = DmChannel::new(
            BTreeMap::from([(NodeId(1), 2)]),
            BTreeMap::from([(NodeId(2), 2)]),
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let inp = InputDist::uniform(&ch);
        (ch, inp)
    }

    #[test]
    fn noiseless_bit_has_unit_capacity() {
        let (ch, inp) = noiseless_bit();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let term = MiTerm::new(nodes([1]), NodeSet::new(), NodeId(2));
        let mi = mutual_info(&term, &joint).unwrap();
        assert!((mi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditioning_on_the_fresh_variable_gives_zero() {
        let (ch, inp) = noiseless_bit();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let term = MiTerm::new(nodes([1]), nodes([1]), NodeId(2));
        assert_eq!(mutual_info(&term, &joint).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_input_slices_the_tensor() {
        let ch = DmChannel::new(
            BTreeMap::from([(NodeId(1), 2)]),
            BTreeMap::from([(NodeId(2), 2)]),
            vec![0.9, 0.1, 0.2, 0.8],
        )
        .unwrap();
        let inp = InputDist::new(BTreeMap::from([(NodeId(1), vec![1.0, 0.0])])).unwrap();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let m = joint.marginal(&[Var::Out(NodeId(2))]).unwrap();
        assert!((m[0] - 0.9).abs() < 1e-15);
        assert!((m[1] - 0.1).abs() < 1e-15);
        // Input carries no information when it is deterministic.
        let term = MiTerm::new(nodes([1]), NodeSet::new(), NodeId(2));
        assert!(mutual_info(&term, &joint).unwrap().abs() < 1e-12);
    }

    #[test]
    fn joint_matches_nested_loop_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = DmChannel::random(&[(NodeId(1), 2), (NodeId(2), 3)], &[(NodeId(9), 2)], &mut rng);
        let inp = InputDist::random(&ch, &mut rng);
        let joint = joint_distribution(&ch, &inp).unwrap();
        let p1 = inp.pmf(NodeId(1)).unwrap();
        let p2 = inp.pmf(NodeId(2)).unwrap();
        let mut idx = 0;
        let mut total = 0.0;
        for x1 in 0..2 {
            for x2 in 0..3 {
                for y in 0..2 {
                    let direct = p1[x1] * p2[x2] * ch.cond_pmf[(x1 * 3 + x2) * 2 + y];
                    assert!((joint.p[idx] - direct).abs() < 1e-15);
                    total += direct;
                    idx += 1;
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn region_membership_reports_binding_subset() {
        let (ch, inp) = noiseless_bit();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let region = Region {
            destination: NodeId(2),
            sources: nodes([1]),
            constraints: vec![Constraint {
                subset: nodes([1]),
                terms: vec![MiTerm::new(nodes([1]), NodeSet::new(), NodeId(2))],
            }],
        };
        let zero = RateVector::zero(&nodes([1]));
        let m = eval_region(&region, &joint, &zero, 1e-6).unwrap();
        assert!(m.member);
        let over = RateVector::new(BTreeMap::from([(NodeId(1), 1.5)]));
        let m = eval_region(&region, &joint, &over, 1e-6).unwrap();
        assert!(!m.member);
        assert_eq!(m.violated, vec![nodes([1])]);
    }

    #[test]
    fn boundary_samples_scale_with_alpha() {
        let (ch, inp) = noiseless_bit();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let region = Region {
            destination: NodeId(2),
            sources: nodes([1]),
            constraints: vec![Constraint {
                subset: nodes([1]),
                terms: vec![MiTerm::new(nodes([1]), NodeSet::new(), NodeId(2))],
            }],
        };
        let near = sample_boundary(&region, &joint, 0.99, 8, 11).unwrap();
        for r in &near {
            assert!(eval_region(&region, &joint, r, 0.0).unwrap().member);
            assert!((r.rate(NodeId(1)) - 0.99).abs() < 1e-6);
        }
        let outside = sample_boundary(&region, &joint, 1.01, 8, 11).unwrap();
        for r in &outside {
            assert!(!eval_region(&region, &joint, r, 0.0).unwrap().member);
        }
        let tiny = sample_boundary(&region, &joint, 1e-6, 4, 3).unwrap();
        for r in &tiny {
            assert!(eval_region(&region, &joint, r, 0.0).unwrap().member);
        }
    }

    #[test]
    fn degenerate_region_is_reported() {
        let (ch, inp) = noiseless_bit();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let region = Region {
            destination: NodeId(2),
            sources: nodes([1]),
            constraints: vec![Constraint {
                subset: nodes([1]),
                terms: vec![],
            }],
        };
        assert!(matches!(
            sample_boundary(&region, &joint, 0.5, 1, 0),
            Err(ChannelError::DegenerateRegion)
        ));
    }

    #[test]
    fn identity_trivially_holds_for_identical_lists() {
        let lhs = vec![MiTerm::new(nodes([1]), nodes([2]), NodeId(9))];
        let v = verify_identity(&lhs, &lhs, IdentityMode::Equality, 5, 1e-12, 42).unwrap();
        assert!(v.holds);
        assert!(v.worst <= 1e-12);
    }

    #[test]
    fn chain_rule_holds_on_random_channels() {
        // I(X1,X2; Y) = I(X1; Y) + I(X2; Y | X1)
        let lhs = vec![MiTerm::new(nodes([1, 2]), NodeSet::new(), NodeId(9))];
        let rhs = vec![
            MiTerm::new(nodes([1]), NodeSet::new(), NodeId(9)),
            MiTerm::new(nodes([2]), nodes([1]), NodeId(9)),
        ];
        let v = verify_identity(&lhs, &rhs, IdentityMode::Equality, 20, 1e-12, 5).unwrap();
        assert!(v.holds, "worst deviation {}", v.worst);
    }

    #[test]
    fn channel_json_round_trip_and_renormalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = DmChannel::random(&[(NodeId(1), 2), (NodeId(2), 2)], &[(NodeId(5), 3)], &mut rng);
        let inp = InputDist::random(&ch, &mut rng);
        let text = channel_to_json(&ch, &inp);
        let (ch2, inp2) = load_channel_json(&text).unwrap();
        assert_eq!(ch.inputs, ch2.inputs);
        let j1 = joint_distribution(&ch, &inp).unwrap();
        let j2 = joint_distribution(&ch2, &inp2).unwrap();
        for (a, b) in j1.p.iter().zip(&j2.p) {
            assert!((a - b).abs() < 1e-12);
        }
        // A slightly-off row is re-normalized; a badly-off row is not.
        let slightly = text.replace("1.0", "1.0000000001");
        assert!(load_channel_json(&slightly).is_ok() || !text.contains("1.0"));
        let bad = r#"{"inputs":{"1":2},"outputs":{"2":2},"input_pmfs":{"1":[0.6,0.6]},"cond_pmf":[1,0,0,1]}"#;
        assert!(matches!(
            load_channel_json(bad),
            Err(ChannelError::NotNormalized(_))
        ));
    }

    #[test]
    fn intersection_membership_is_the_conjunction() {
        // Two destinations fed by the same sources; membership in the
        // intersected outer bound must equal the conjunction of the
        // per-destination memberships on sampled rate vectors.
        use crate::region::{intersect_regions, outer_region};
        let set = crate::text::parse_flow_file(
            "flow 1 -> 5 : {1} k=1 ; {3} k=inf\n\
             flow 2 -> 5 : {2} k=1 ; {3} k=inf\n\
             flow 1 -> 6 : {1} k=1 ; {4} k=inf\n\
             flow 2 -> 6 : {2} k=inf",
        )
        .unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let inputs: Vec<(NodeId, usize)> =
            roles.inputs.iter().map(|&n| (n, 2)).collect();
        let ch = DmChannel::random(&inputs, &[(NodeId(5), 3), (NodeId(6), 3)], &mut rng);
        let inp = InputDist::random(&ch, &mut rng);
        let joint = joint_distribution(&ch, &inp).unwrap();
        let r5 = outer_region(&set, &roles, NodeId(5));
        let r6 = outer_region(&set, &roles, NodeId(6));
        let both = intersect_regions(vec![r5.clone(), r6.clone()]);
        for i in 0..200 {
            let rates = RateVector::new(BTreeMap::from([
                (NodeId(1), (i % 20) as f64 * 0.01),
                (NodeId(2), (i / 20) as f64 * 0.02),
            ]));
            let conj = eval_region(&r5, &joint, &rates, 1e-6).unwrap().member
                && eval_region(&r6, &joint, &rates, 1e-6).unwrap().member;
            let inter = eval_intersection(&both, &joint, &rates, 1e-6).unwrap();
            assert_eq!(conj, inter, "rates {rates}");
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        let inputs: BTreeMap<NodeId, usize> = (0..21).map(|i| (NodeId(i), 2)).collect();
        let outputs = BTreeMap::from([(NodeId(99), 2)]);
        assert!(matches!(
            DmChannel::new(inputs, outputs, vec![]),
            Err(ChannelError::TooLarge { .. })
        ));
    }
}
