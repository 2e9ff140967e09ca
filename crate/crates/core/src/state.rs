//! Sparse statevector over named integer-list registers.
//!
//! Basis labels are tuples of integer lists, one list per named register,
//! stored flattened against a [`Layout`]. Terms live in a vector sorted by
//! basis label, so iteration order, serialization, and seeded sampling are
//! all deterministic. Shape-changing operations consume the state and
//! rewrite term labels in place; large intermediate states are never
//! duplicated.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Register element type. Bounds in this crate are small (lists of modes,
/// permutation images, record bits), so 32 bits keep large states compact.
pub type Val = u32;

/// Terms with |amplitude| below this are dropped after every public
/// operation; the dropped probability mass is accumulated on the state.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Norm drift allowed for nominally norm-preserving operations.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// One named register: `arity` elements, each in `0..=bound`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpec {
    pub name: String,
    pub arity: usize,
    pub bound: Val,
}

/// Ordered collection of registers defining the basis-label shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    regs: Vec<RegisterSpec>,
    offsets: Vec<usize>,
    width: usize,
}

impl Layout {
    pub fn new(regs: Vec<RegisterSpec>) -> Self {
        let mut offsets = Vec::with_capacity(regs.len());
        let mut width = 0;
        for r in &regs {
            offsets.push(width);
            width += r.arity;
        }
        Layout {
            regs,
            offsets,
            width,
        }
    }

    /// Convenience constructor from `(name, arity, bound)` triples.
    pub fn of(specs: &[(&str, usize, Val)]) -> Self {
        Self::new(
            specs
                .iter()
                .map(|&(name, arity, bound)| RegisterSpec {
                    name: name.to_string(),
                    arity,
                    bound,
                })
                .collect(),
        )
    }

    pub fn registers(&self) -> &[RegisterSpec] {
        &self.regs
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.regs
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn spec(&self, name: &str) -> Result<&RegisterSpec> {
        Ok(&self.regs[self.index_of(name)?])
    }

    /// Flat index range of a register by position.
    pub fn range_at(&self, idx: usize) -> std::ops::Range<usize> {
        self.offsets[idx]..self.offsets[idx] + self.regs[idx].arity
    }

    pub fn range(&self, name: &str) -> Result<std::ops::Range<usize>> {
        Ok(self.range_at(self.index_of(name)?))
    }
}

/// One computational-basis label: the contents of every register, flattened
/// in layout order. Ordering is lexicographic, which matches lexicographic
/// order on the per-register lists for a fixed layout.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisConfig {
    vals: Vec<Val>,
}

impl BasisConfig {
    pub fn new(vals: Vec<Val>) -> Self {
        BasisConfig { vals }
    }

    pub fn from_registers(layout: &Layout, regs: &[&[Val]]) -> Result<Self> {
        if regs.len() != layout.regs.len() {
            return Err(Error::SizeMismatch(format!(
                "{} register values for a {}-register layout",
                regs.len(),
                layout.regs.len()
            )));
        }
        let mut vals = Vec::with_capacity(layout.width);
        for (spec, r) in layout.regs.iter().zip(regs) {
            if r.len() != spec.arity {
                return Err(Error::SizeMismatch(format!(
                    "register `{}` expects {} elements, got {}",
                    spec.name,
                    spec.arity,
                    r.len()
                )));
            }
            vals.extend_from_slice(r);
        }
        Ok(BasisConfig { vals })
    }

    pub fn flat(&self) -> &[Val] {
        &self.vals
    }

    pub fn flat_mut(&mut self) -> &mut [Val] {
        &mut self.vals
    }

    pub fn register<'a>(&'a self, layout: &Layout, name: &str) -> Result<&'a [Val]> {
        Ok(&self.vals[layout.range(name)?])
    }

    fn validate(&self, layout: &Layout) -> Result<()> {
        if self.vals.len() != layout.width {
            return Err(Error::SizeMismatch(format!(
                "config width {} vs layout width {}",
                self.vals.len(),
                layout.width
            )));
        }
        for (i, spec) in layout.regs.iter().enumerate() {
            for &v in &self.vals[layout.range_at(i)] {
                if v > spec.bound {
                    return Err(Error::BoundViolation {
                        register: spec.name.clone(),
                        value: v as u64,
                        bound: spec.bound as u64,
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for BasisConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.vals)
    }
}

/// Symbolic circuit-cost ledger: comparator layers, elementary arithmetic
/// layers (adders, copies, single-register rewrites), and ancilla qubits
/// under the `arity * ceil(log2(bound+1))` accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthReport {
    pub comparator_layers: u64,
    pub elementary_layers: u64,
    pub ancilla_qubits: u64,
}

impl DepthReport {
    pub fn comparator(layers: u64) -> Self {
        DepthReport {
            comparator_layers: layers,
            ..Default::default()
        }
    }

    pub fn elementary(layers: u64) -> Self {
        DepthReport {
            elementary_layers: layers,
            ..Default::default()
        }
    }

    /// Qubit count for a register of `arity` integers bounded by `bound`.
    pub fn ancilla_for(arity: usize, bound: Val) -> u64 {
        let bits = (bound as u64 + 1)
            .next_power_of_two()
            .trailing_zeros()
            .max(1);
        arity as u64 * bits as u64
    }

    /// Sequential composition: layer counts add, ancillas take the peak.
    pub fn then(self, other: DepthReport) -> DepthReport {
        DepthReport {
            comparator_layers: self.comparator_layers + other.comparator_layers,
            elementary_layers: self.elementary_layers + other.elementary_layers,
            ancilla_qubits: self.ancilla_qubits.max(other.ancilla_qubits),
        }
    }

    pub fn with_ancilla(mut self, qubits: u64) -> DepthReport {
        self.ancilla_qubits += qubits;
        self
    }

    pub fn total_layers(&self) -> u64 {
        self.comparator_layers + self.elementary_layers
    }
}

type Term = (BasisConfig, Complex64);

/// Compensated accumulator: keeps float sums over millions of terms at
/// machine precision.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn kahan_norm_sq<'a, I: IntoIterator<Item = &'a Complex64>>(amps: I) -> f64 {
    let mut acc = Kahan::default();
    for a in amps {
        acc.add(a.norm_sqr());
    }
    acc.value()
}

/// Sparse quantum state: sorted list of basis configurations with their
/// amplitudes.
#[derive(Debug, Clone)]
pub struct SparseState {
    layout: Arc<Layout>,
    terms: Vec<Term>,
    pruned_mass: f64,
}

fn sort_and_merge(terms: &mut Vec<Term>) {
    terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    terms.dedup_by(|next, kept| {
        if next.0 == kept.0 {
            kept.1 += next.1;
            true
        } else {
            false
        }
    });
}

impl SparseState {
    /// Single-term normalized state |config>.
    pub fn basis(layout: Layout, config: BasisConfig) -> Result<Self> {
        config.validate(&layout)?;
        Ok(SparseState {
            layout: Arc::new(layout),
            terms: vec![(config, Complex64::new(1.0, 0.0))],
            pruned_mass: 0.0,
        })
    }

    /// State from explicit terms; duplicate configs are summed; does not
    /// normalize.
    pub fn from_terms<I>(layout: Layout, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = Term>,
    {
        let layout = Arc::new(layout);
        let mut terms: Vec<Term> = Vec::new();
        for (config, amp) in items {
            config.validate(&layout)?;
            if !amp.re.is_finite() || !amp.im.is_finite() {
                return Err(Error::NonFiniteAmplitude);
            }
            terms.push((config, amp));
        }
        sort_and_merge(&mut terms);
        let mut s = SparseState {
            layout,
            terms,
            pruned_mass: 0.0,
        };
        s.prune();
        Ok(s)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisConfig, &Complex64)> {
        self.terms.iter().map(|(c, a)| (c, a))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn amplitude(&self, config: &BasisConfig) -> Complex64 {
        match self.terms.binary_search_by(|(c, _)| c.cmp(config)) {
            Ok(i) => self.terms[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Probability mass removed by pruning so far.
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn norm(&self) -> f64 {
        kahan_norm_sq(self.terms.iter().map(|(_, a)| a)).sqrt()
    }

    fn prune(&mut self) {
        let mut dropped = 0.0;
        self.terms.retain(|(_, a)| {
            if a.norm() < PRUNE_THRESHOLD {
                dropped += a.norm_sqr();
                false
            } else {
                true
            }
        });
        self.pruned_mass += dropped;
    }

    /// Applies a classical reversible map term-by-term: each `(b, a)` becomes
    /// `(f(b), a)`. Detects collisions (two support configs mapping to one
    /// image) and rejects them, naming the colliding configs.
    pub fn lift<F>(&self, f: F) -> Result<SparseState>
    where
        F: FnMut(&BasisConfig, &Layout) -> Result<BasisConfig>,
    {
        self.lift_into((*self.layout).clone(), f)
    }

    /// Same as [`lift`](Self::lift) but the map may change the register
    /// layout (the map must still be a bijection between config sets).
    pub fn lift_into<F>(&self, out_layout: Layout, mut f: F) -> Result<SparseState>
    where
        F: FnMut(&BasisConfig, &Layout) -> Result<BasisConfig>,
    {
        let out_layout = Arc::new(out_layout);
        let mut terms: Vec<(BasisConfig, Complex64, u32)> = Vec::with_capacity(self.terms.len());
        for (i, (config, amp)) in self.terms.iter().enumerate() {
            let image = f(config, &self.layout)?;
            image.validate(&out_layout)?;
            terms.push((image, *amp, i as u32));
        }
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::NotBijective {
                    a: self.terms[w[0].2 as usize].0.to_string(),
                    b: self.terms[w[1].2 as usize].0.to_string(),
                    image: w[0].0.to_string(),
                });
            }
        }
        let mut out = SparseState {
            layout: out_layout,
            terms: terms.into_iter().map(|(c, a, _)| (c, a)).collect(),
            pruned_mass: self.pruned_mass,
        };
        out.prune();
        Ok(out)
    }

    /// Consuming variant of [`lift`](Self::lift) for maps that keep the
    /// layout: term labels are rewritten in place, so peak memory stays at
    /// one state.
    pub fn map_configs<F>(mut self, mut f: F) -> Result<SparseState>
    where
        F: FnMut(&mut Vec<Val>, &Layout) -> Result<()>,
    {
        let layout = Arc::clone(&self.layout);
        for (config, _) in &mut self.terms {
            f(&mut config.vals, &layout)?;
            config.validate(&layout)?;
        }
        self.terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        for w in self.terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::NotBijective {
                    a: "<rewritten in place>".into(),
                    b: "<rewritten in place>".into(),
                    image: w[0].0.to_string(),
                });
            }
        }
        self.prune();
        Ok(self)
    }

    /// Linear extension of a branch map: each input config fans out into a
    /// weighted list of configs. Every branch must carry unit norm, and the
    /// total output norm must match the input norm (this is the unitarity
    /// check on the support actually touched).
    pub fn superpose<F>(&self, mut f: F) -> Result<SparseState>
    where
        F: FnMut(&BasisConfig, &Layout) -> Result<Vec<Term>>,
    {
        let before = self.norm();
        let mut terms: Vec<Term> = Vec::new();
        for (config, amp) in &self.terms {
            let branches = f(config, &self.layout)?;
            let bnorm: f64 = branches.iter().map(|(_, w)| w.norm_sqr()).sum();
            if (bnorm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::BranchNorm {
                    config: config.to_string(),
                    norm: bnorm.sqrt(),
                });
            }
            terms.reserve(branches.len());
            for (out, w) in branches {
                out.validate(&self.layout)?;
                terms.push((out, amp * w));
            }
        }
        sort_and_merge(&mut terms);
        let mut out = SparseState {
            layout: Arc::clone(&self.layout),
            terms,
            pruned_mass: self.pruned_mass,
        };
        out.prune();
        let after = out.norm();
        if (after - before).abs() > NORM_TOLERANCE {
            return Err(Error::NormDrift { before, after });
        }
        Ok(out)
    }

    /// Inner product <self|other>.
    pub fn inner(&self, other: &SparseState) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.layout.regs, other.layout.regs
            )));
        }
        let mut re = Kahan::default();
        let mut im = Kahan::default();
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let v = self.terms[i].1.conj() * other.terms[j].1;
                    re.add(v.re);
                    im.add(v.im);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(Complex64::new(re.value(), im.value()))
    }

    /// |<self|other>|.
    pub fn fidelity(&self, other: &SparseState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Born-rule distribution over the values of one register.
    pub fn distribution(&self, register: &str) -> Result<BTreeMap<Vec<Val>, f64>> {
        if self.terms.is_empty() {
            return Err(Error::EmptyState);
        }
        let range = self.layout.range(register)?;
        let norm_sq: f64 = kahan_norm_sq(self.terms.iter().map(|(_, a)| a));
        let mut dist: BTreeMap<Vec<Val>, f64> = BTreeMap::new();
        for (config, amp) in &self.terms {
            *dist
                .entry(config.flat()[range.clone()].to_vec())
                .or_insert(0.0) += amp.norm_sqr() / norm_sq;
        }
        Ok(dist)
    }

    /// Samples one register value under the Born rule with a seeded RNG and
    /// collapses the state onto the observed value.
    pub fn measure_register(&self, register: &str, seed: u64) -> Result<(Vec<Val>, SparseState)> {
        let dist = self.distribution(register)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = None;
        for (value, p) in &dist {
            acc += p;
            if draw < acc {
                chosen = Some(value.clone());
                break;
            }
        }
        // Floating-point slack: fall back to the last value.
        let value = chosen.unwrap_or_else(|| dist.keys().next_back().expect("nonempty").clone());
        let collapsed = self
            .project_register(register, |v| v == value.as_slice())?
            .0;
        Ok((value, collapsed))
    }

    /// Projects onto the sub-space where `register`'s value satisfies the
    /// predicate and renormalizes. Returns the collapsed state and the
    /// probability of the kept sector.
    pub fn project_register<P>(&self, register: &str, keep: P) -> Result<(SparseState, f64)>
    where
        P: Fn(&[Val]) -> bool,
    {
        let range = self.layout.range(register)?;
        let norm_sq: f64 = kahan_norm_sq(self.terms.iter().map(|(_, a)| a));
        let mut kept: Vec<Term> = Vec::new();
        let mut mass = 0.0;
        for (config, amp) in &self.terms {
            if keep(&config.flat()[range.clone()]) {
                mass += amp.norm_sqr();
                kept.push((config.clone(), *amp));
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyState);
        }
        let prob = mass / norm_sq;
        let scale = 1.0 / mass.sqrt();
        for (_, amp) in &mut kept {
            *amp *= scale;
        }
        let mut out = SparseState {
            layout: Arc::clone(&self.layout),
            terms: kept,
            pruned_mass: self.pruned_mass,
        };
        out.prune();
        Ok((out, prob))
    }

    /// Appends a fresh register initialized to a fixed value on every term.
    pub fn add_register(
        self,
        name: &str,
        arity: usize,
        bound: Val,
        init: &[Val],
    ) -> Result<SparseState> {
        let pos = self.layout.regs.len();
        self.add_register_at(pos, name, arity, bound, init)
    }

    /// Inserts a fresh register at a given position in the layout. The
    /// initial value is the same on every term, so the sorted term order is
    /// unchanged and labels are rewritten in place.
    pub fn add_register_at(
        mut self,
        position: usize,
        name: &str,
        arity: usize,
        bound: Val,
        init: &[Val],
    ) -> Result<SparseState> {
        if self.layout.index_of(name).is_ok() {
            return Err(Error::InvalidArgument(format!(
                "register `{name}` already exists"
            )));
        }
        if init.len() != arity {
            return Err(Error::SizeMismatch(format!(
                "init length {} vs arity {}",
                init.len(),
                arity
            )));
        }
        if init.iter().any(|&v| v > bound) {
            return Err(Error::BoundViolation {
                register: name.to_string(),
                value: *init.iter().max().unwrap() as u64,
                bound: bound as u64,
            });
        }
        let mut regs = self.layout.regs.clone();
        if position > regs.len() {
            return Err(Error::InvalidArgument(format!(
                "register position {position} out of range"
            )));
        }
        let at = if position == regs.len() {
            self.layout.width
        } else {
            self.layout.offsets[position]
        };
        regs.insert(
            position,
            RegisterSpec {
                name: name.to_string(),
                arity,
                bound,
            },
        );
        for (config, _) in &mut self.terms {
            config.vals.splice(at..at, init.iter().copied());
        }
        self.layout = Arc::new(Layout::new(regs));
        Ok(self)
    }

    /// Removes a register whose value is identical on every support config
    /// (a disentangled classical ancilla).
    pub fn drop_register(mut self, name: &str) -> Result<SparseState> {
        let idx = self.layout.index_of(name)?;
        let range = self.layout.range_at(idx);
        let mut seen: Option<Vec<Val>> = None;
        for (config, _) in &self.terms {
            let v = &config.flat()[range.clone()];
            match &seen {
                None => seen = Some(v.to_vec()),
                Some(prev) if prev.as_slice() == v => {}
                Some(_) => {
                    return Err(Error::RegisterNotConstant {
                        register: name.to_string(),
                    })
                }
            }
        }
        let mut regs = self.layout.regs.clone();
        regs.remove(idx);
        for (config, _) in &mut self.terms {
            config.vals.drain(range.clone());
        }
        self.layout = Arc::new(Layout::new(regs));
        Ok(self)
    }

    /// Removes a register that is in tensor product with the rest of the
    /// state (not necessarily constant). Errors if the factorization check
    /// fails at [`NORM_TOLERANCE`].
    pub fn drop_register_factored(self, name: &str) -> Result<SparseState> {
        let idx = self.layout.index_of(name)?;
        if idx == self.layout.regs.len() - 1 {
            // Trailing register: sorted terms cluster by the remaining
            // prefix, so the factor check streams in one pass.
            return self.drop_trailing_register_factored(name, idx);
        }
        let range = self.layout.range_at(idx);
        if self.terms.is_empty() {
            return Err(Error::EmptyState);
        }
        let norm_sq: f64 = kahan_norm_sq(self.terms.iter().map(|(_, a)| a));
        let strip = |config: &BasisConfig| {
            let mut vals = config.flat().to_vec();
            vals.drain(range.clone());
            vals
        };
        // Rest-vectors keyed by register value.
        let mut blocks: BTreeMap<Vec<Val>, BTreeMap<Vec<Val>, Complex64>> = BTreeMap::new();
        for (config, amp) in &self.terms {
            blocks
                .entry(config.flat()[range.clone()].to_vec())
                .or_default()
                .insert(strip(config), *amp);
        }
        // Reference block: the register value with the largest marginal.
        let (_, ref_block) = blocks
            .iter()
            .max_by(|a, b| {
                let ma = kahan_norm_sq(a.1.values());
                let mb = kahan_norm_sq(b.1.values());
                ma.partial_cmp(&mb).expect("finite")
            })
            .expect("nonempty");
        let ref_mass: f64 = kahan_norm_sq(ref_block.values());
        let unit: BTreeMap<Vec<Val>, Complex64> = ref_block
            .iter()
            .map(|(c, a)| (c.clone(), a / ref_mass.sqrt()))
            .collect();
        // Every block must lie in the span of the reference block.
        let mut residual = 0.0;
        for block in blocks.values() {
            let mut dot = Complex64::new(0.0, 0.0);
            let mut mass = 0.0;
            for (c, a) in block {
                mass += a.norm_sqr();
                if let Some(u) = unit.get(c) {
                    dot += u.conj() * a;
                }
            }
            residual += mass - dot.norm_sqr();
        }
        if residual / norm_sq > NORM_TOLERANCE {
            return Err(Error::RegisterEntangled {
                register: name.to_string(),
            });
        }
        let mut regs = self.layout.regs.clone();
        regs.remove(idx);
        let layout = Arc::new(Layout::new(regs));
        let scale = norm_sq.sqrt();
        let mut terms: Vec<Term> = unit
            .into_iter()
            .map(|(c, a)| (BasisConfig::new(c), a * scale))
            .collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut out = SparseState {
            layout,
            terms,
            pruned_mass: self.pruned_mass,
        };
        out.prune();
        Ok(out)
    }

    fn drop_trailing_register_factored(mut self, name: &str, idx: usize) -> Result<SparseState> {
        if self.terms.is_empty() {
            return Err(Error::EmptyState);
        }
        let split = self.layout.offsets[idx];
        let norm_sq: f64 = kahan_norm_sq(self.terms.iter().map(|(_, a)| a));
        // Block boundaries: runs of terms sharing the prefix before `split`.
        let mut bounds = vec![0usize];
        for i in 1..self.terms.len() {
            if self.terms[i].0.vals[..split] != self.terms[i - 1].0.vals[..split] {
                bounds.push(i);
            }
        }
        bounds.push(self.terms.len());
        // Reference block: the prefix with the largest mass.
        let mut ref_range = 0..0;
        let mut ref_mass = -1.0;
        for w in bounds.windows(2) {
            let mass = kahan_norm_sq(self.terms[w[0]..w[1]].iter().map(|(_, a)| a));
            if mass > ref_mass {
                ref_mass = mass;
                ref_range = w[0]..w[1];
            }
        }
        let unit: Vec<(Vec<Val>, Complex64)> = self.terms[ref_range]
            .iter()
            .map(|(c, a)| (c.vals[split..].to_vec(), a / ref_mass.sqrt()))
            .collect();
        // Project every block onto the reference factor.
        let mut out_terms: Vec<Term> = Vec::with_capacity(bounds.len() - 1);
        let mut residual = Kahan::default();
        for w in bounds.windows(2) {
            let block = &self.terms[w[0]..w[1]];
            let mut dot_re = Kahan::default();
            let mut dot_im = Kahan::default();
            let mut mass = Kahan::default();
            let mut u = 0;
            for (c, a) in block {
                mass.add(a.norm_sqr());
                let suffix = &c.vals[split..];
                while u < unit.len() && unit[u].0.as_slice() < suffix {
                    u += 1;
                }
                if u < unit.len() && unit[u].0.as_slice() == suffix {
                    let v = unit[u].1.conj() * a;
                    dot_re.add(v.re);
                    dot_im.add(v.im);
                }
            }
            let dot = Complex64::new(dot_re.value(), dot_im.value());
            residual.add(mass.value() - dot.norm_sqr());
            out_terms.push((BasisConfig::new(block[0].0.vals[..split].to_vec()), dot));
        }
        let residual = residual.value();
        if residual / norm_sq > NORM_TOLERANCE {
            return Err(Error::RegisterEntangled {
                register: name.to_string(),
            });
        }
        let mut regs = self.layout.regs.clone();
        regs.pop();
        self.layout = Arc::new(Layout::new(regs));
        let scale = norm_sq.sqrt() / kahan_norm_sq(out_terms.iter().map(|(_, a)| a)).sqrt();
        for (_, a) in &mut out_terms {
            *a *= scale;
        }
        self.terms = out_terms;
        self.prune();
        Ok(self)
    }

    /// Entanglement entropy (base 2) between one register and the rest.
    pub fn entanglement_entropy(&self, register: &str) -> Result<f64> {
        let range = self.layout.range(register)?;
        let norm_sq: f64 = kahan_norm_sq(self.terms.iter().map(|(_, a)| a));
        // Gather the reduced block vectors keyed by register value.
        let mut blocks: BTreeMap<Vec<Val>, BTreeMap<Vec<Val>, Complex64>> = BTreeMap::new();
        for (config, amp) in &self.terms {
            let key = config.flat()[range.clone()].to_vec();
            let mut rest = config.flat().to_vec();
            rest.drain(range.clone());
            blocks.entry(key).or_default().insert(rest, *amp);
        }
        let keys: Vec<&Vec<Val>> = blocks.keys().collect();
        let dim = keys.len();
        let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for (i, ki) in keys.iter().enumerate() {
            for (j, kj) in keys.iter().enumerate() {
                if j < i {
                    rho[(i, j)] = rho[(j, i)].conj();
                    continue;
                }
                let bi = &blocks[*ki];
                let bj = &blocks[*kj];
                // rho[i][j] = sum_rest psi(ki, rest) conj(psi(kj, rest))
                let mut acc = Complex64::new(0.0, 0.0);
                for (rest, a) in bi {
                    if let Some(b) = bj.get(rest) {
                        acc += a * b.conj();
                    }
                }
                rho[(i, j)] = acc / norm_sq;
            }
        }
        let eig = rho.symmetric_eigenvalues();
        let mut entropy = 0.0_f64;
        for &lambda in eig.iter() {
            let l = lambda.max(0.0);
            if l > 1e-15 {
                entropy -= l * l.log2();
            }
        }
        Ok(entropy.max(0.0))
    }
}

// --- JSON serialization ------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermDto {
    basis: Vec<Vec<Val>>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StateDto {
    layout: Vec<RegisterSpec>,
    terms: Vec<TermDto>,
}

impl SparseState {
    /// JSON encoding: layout plus lexicographically sorted terms. Doubles
    /// round-trip bit-exactly through the shortest-representation decimal
    /// encoding used by the JSON writer.
    pub fn to_json(&self) -> String {
        let layout = self.layout.regs.clone();
        let terms = self
            .terms
            .iter()
            .map(|(config, amp)| TermDto {
                basis: self
                    .layout
                    .regs
                    .iter()
                    .enumerate()
                    .map(|(i, _)| config.flat()[self.layout.range_at(i)].to_vec())
                    .collect(),
                re: amp.re,
                im: amp.im,
            })
            .collect();
        serde_json::to_string_pretty(&StateDto { layout, terms }).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<SparseState> {
        let dto: StateDto = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("bad state JSON: {e}")))?;
        let layout = Layout::new(dto.layout);
        let mut items = Vec::with_capacity(dto.terms.len());
        for t in dto.terms {
            let regs: Vec<&[Val]> = t.basis.iter().map(|v| v.as_slice()).collect();
            let config = BasisConfig::from_registers(&layout, &regs)?;
            items.push((config, Complex64::new(t.re, t.im)));
        }
        SparseState::from_terms(layout, items)
    }
}
