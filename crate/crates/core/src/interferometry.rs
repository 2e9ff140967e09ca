//! Interferometric-imaging pipeline: detector-array states, conversion to
//! the symmetrized mode-list representation, per-slot Fourier readout, and
//! angle recovery.
//!
//! An array of `m` equally spaced detectors picks up photons from far-away
//! sources; the relative phase between adjacent detectors encodes the
//! source angle. With `n` photons stored as bosonic occupation numbers, the
//! pipeline converts to a symmetrized list of detector indices, Fourier
//! transforms every list slot, and reads the angle bins out of the
//! computational basis. Source angles that land exactly on a Fourier bin
//! ("grid mode") are recovered with certainty.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::convert::{second_to_first, OCC};
use crate::error::{Error, Result};
use crate::sort::SortingNetwork;
use crate::state::{BasisConfig, DepthReport, Layout, SparseState, Val};
use crate::symmetrize::DATA;

/// Detector-array geometry: `m` detectors spaced `d` apart observing
/// wavelength `lambda`, with the field of view offset by `v` whole
/// diffraction orders.
#[derive(Debug, Clone)]
pub struct ArrayConfig {
    pub m: usize,
    pub d: f64,
    pub lambda: f64,
    pub v: i64,
}

impl ArrayConfig {
    pub fn new(m: usize, d: f64, lambda: f64, v: i64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(
                "need at least two detectors".into(),
            ));
        }
        if d <= 0.0 || lambda <= 0.0 {
            return Err(Error::InvalidArgument(
                "spacing and wavelength must be positive".into(),
            ));
        }
        Ok(ArrayConfig { m, d, lambda, v })
    }

    /// Sine of the source angle whose Fourier readout is bin `k`.
    pub fn angle_from_k(&self, k: Val) -> Result<f64> {
        if k as usize >= self.m {
            return Err(Error::InvalidArgument(format!(
                "bin {k} outside 0..{}",
                self.m
            )));
        }
        Ok(k as f64 * self.lambda / (self.m as f64 * self.d)
            + self.v as f64 * self.lambda / self.d)
    }

    /// Phase picked up by a photon from angle `theta_sin = sin(theta)` at
    /// detector `j`, reduced modulo a full turn before exponentiation.
    fn phase(&self, theta_sin: f64, j: usize) -> Complex64 {
        let turns = (self.d * j as f64 * theta_sin / self.lambda).rem_euclid(1.0);
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns)
    }
}

/// Photon source description: arbitrary angles, or exact Fourier bins.
#[derive(Debug, Clone)]
pub enum Photons {
    /// Sines of the source angles, one per photon.
    Sines(Vec<f64>),
    /// Grid mode: integer bins `k` with `sin(theta) = k*lambda/(m d) + v*lambda/d`.
    Grid(Vec<Val>),
}

impl Photons {
    pub fn sines(&self, cfg: &ArrayConfig) -> Result<Vec<f64>> {
        match self {
            Photons::Sines(s) => Ok(s.clone()),
            Photons::Grid(ks) => ks.iter().map(|&k| cfg.angle_from_k(k)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Photons::Sines(s) => s.len(),
            Photons::Grid(k) => k.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// State of the detector memories after one photon from angle `theta`:
/// `m` occupation terms with one excitation each, phased by detector index.
pub fn build_single_photon_state(cfg: &ArrayConfig, theta_sin: f64) -> Result<SparseState> {
    let layout = Layout::of(&[(OCC, cfg.m, 1)]);
    let w = 1.0 / (cfg.m as f64).sqrt();
    let mut items = Vec::with_capacity(cfg.m);
    for j in 0..cfg.m {
        let mut occ = vec![0; cfg.m];
        occ[j] = 1;
        items.push((BasisConfig::new(occ), cfg.phase(theta_sin, j) * w));
    }
    SparseState::from_terms(layout, items)
}

/// State of the detector memories after `n` photons from the given angles:
/// every assignment of photons to detectors contributes its phase to the
/// occupation profile it produces, with the bosonic bunching factor
/// `sqrt(prod n_i!)`, then the whole state is normalized.
pub fn build_multiphoton_state(cfg: &ArrayConfig, photons: &Photons) -> Result<SparseState> {
    let sines = photons.sines(cfg)?;
    let n = sines.len();
    if n == 0 {
        let layout = Layout::of(&[(OCC, cfg.m, 0)]);
        return SparseState::basis(layout, BasisConfig::new(vec![0; cfg.m]));
    }
    let layout = Layout::of(&[(OCC, cfg.m, n as Val)]);
    let mut profile: BTreeMap<Vec<Val>, Complex64> = BTreeMap::new();
    let mut assignment = vec![0usize; n];
    loop {
        let mut occ = vec![0 as Val; cfg.m];
        let mut phase = Complex64::new(1.0, 0.0);
        for (i, &r) in assignment.iter().enumerate() {
            occ[r] += 1;
            phase *= cfg.phase(sines[i], r);
        }
        *profile.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += phase;
        // odometer over detector assignments
        let mut i = 0;
        while i < n {
            assignment[i] += 1;
            if assignment[i] < cfg.m {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let mut items = Vec::with_capacity(profile.len());
    let mut norm_sq = 0.0;
    for (occ, amp) in profile {
        let bunching: f64 = occ
            .iter()
            .map(|&c| crate::perm::factorial(c as u64) as f64)
            .product::<f64>()
            .sqrt();
        let a = amp * bunching;
        norm_sq += a.norm_sqr();
        items.push((BasisConfig::new(occ), a));
    }
    let scale = 1.0 / norm_sq.sqrt();
    for (_, a) in &mut items {
        *a *= scale;
    }
    SparseState::from_terms(layout, items)
}

/// Discrete Fourier readout of one slot of a list register: the slot's
/// amplitude profile is transformed with the kernel `exp(-2 pi i j k / m)`,
/// so a phase ramp of rate `k0/m` concentrates on `|k0>`. The slot size `m`
/// must be a power of two.
pub fn qft_register(state: &SparseState, register: &str, slot: usize, m: usize) -> Result<SparseState> {
    if !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "slot size {m} is not a power of two"
        )));
    }
    dft_slot(state, register, slot, m, -1.0)
}

/// Inverse of [`qft_register`].
pub fn qft_register_inverse(
    state: &SparseState,
    register: &str,
    slot: usize,
    m: usize,
) -> Result<SparseState> {
    if !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "slot size {m} is not a power of two"
        )));
    }
    dft_slot(state, register, slot, m, 1.0)
}

fn dft_slot(
    state: &SparseState,
    register: &str,
    slot: usize,
    m: usize,
    sign: f64,
) -> Result<SparseState> {
    let range = state.layout().range(register)?;
    if slot >= range.len() {
        return Err(Error::InvalidArgument(format!(
            "slot {slot} outside register of arity {}",
            range.len()
        )));
    }
    let pos = range.start + slot;
    // Group terms by the configuration with the slot blanked out.
    let mut groups: BTreeMap<Vec<Val>, Vec<Complex64>> = BTreeMap::new();
    for (config, amp) in state.terms() {
        let j = config.flat()[pos] as usize;
        if j >= m {
            return Err(Error::BoundViolation {
                register: register.to_string(),
                value: j as u64,
                bound: m as u64 - 1,
            });
        }
        let mut key = config.flat().to_vec();
        key[pos] = 0;
        groups.entry(key).or_insert_with(|| vec![Complex64::new(0.0, 0.0); m])[j] += amp;
    }
    let mut items = Vec::new();
    let w = 1.0 / (m as f64).sqrt();
    for (key, profile) in groups {
        for k in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &a) in profile.iter().enumerate() {
                if a != Complex64::new(0.0, 0.0) {
                    let turns = (sign * (j * k) as f64 / m as f64).rem_euclid(1.0);
                    acc += a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns);
                }
            }
            if acc.norm() > 0.0 {
                let mut vals = key.clone();
                vals[pos] = k as Val;
                items.push((BasisConfig::new(vals), acc * w));
            }
        }
    }
    SparseState::from_terms((*state.layout()).clone(), items)
}

/// Everything the imaging pipeline produces for one detection event.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// Final state over the list register, after the per-slot readout.
    pub state: SparseState,
    /// Born distribution over ordered bin tuples.
    pub ordered_distribution: BTreeMap<Vec<Val>, f64>,
    /// Distribution over bin multisets (sorted tuples).
    pub multiset_distribution: BTreeMap<Vec<Val>, f64>,
    /// Most probable bin multiset.
    pub recovered: Vec<Val>,
    /// Seeded measurement sample of the ordered tuple.
    pub sampled: Vec<Val>,
    pub depth: DepthReport,
}

/// Full imaging pipeline: synthesize the multi-photon detector state,
/// convert it to the symmetrized first-quantized representation with the
/// real converter and symmetrizer, Fourier-transform every slot, and read
/// out the bin distribution.
pub fn image_pipeline(
    cfg: &ArrayConfig,
    photons: &Photons,
    net: &SortingNetwork,
    seed: u64,
) -> Result<PipelineRun> {
    let n = photons.len();
    let detected = build_multiphoton_state(cfg, photons)?;
    if n == 0 {
        // vacuum: nothing to convert, empty multiset recovered with certainty
        let layout = Layout::of(&[(DATA, 0, 0)]);
        let state = SparseState::basis(layout, BasisConfig::new(Vec::new()))?;
        let mut dist = BTreeMap::new();
        dist.insert(Vec::new(), 1.0);
        return Ok(PipelineRun {
            state,
            ordered_distribution: dist.clone(),
            multiset_distribution: dist,
            recovered: Vec::new(),
            sampled: Vec::new(),
            depth: DepthReport::default(),
        });
    }
    let run = second_to_first(&detected, net)?;
    let mut state = run.state;
    let mut depth = run.depth;
    for slot in 0..n {
        state = qft_register(&state, DATA, slot, cfg.m)?;
    }
    // Parallel per-slot transforms count as one readout stage.
    depth = depth.then(DepthReport::elementary((cfg.m.ilog2() as u64).max(1)));

    let ordered_distribution = state.distribution(DATA)?;
    let mut multiset_distribution: BTreeMap<Vec<Val>, f64> = BTreeMap::new();
    for (tuple, p) in &ordered_distribution {
        let mut key = tuple.clone();
        key.sort_unstable();
        *multiset_distribution.entry(key).or_insert(0.0) += p;
    }
    let recovered = multiset_distribution
        .iter()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
        .map(|(k, _)| k.clone())
        .expect("nonempty");
    let (sampled, _) = state.measure_register(DATA, seed)?;
    Ok(PipelineRun {
        state,
        ordered_distribution,
        multiset_distribution,
        recovered,
        sampled,
        depth,
    })
}

/// Ground-truth pipeline state: expand the symmetrized amplitudes over all
/// detector assignments directly (each ordered assignment receives the sum
/// of phases over photon orderings) and Fourier-transform each slot
/// densely. No converter, symmetrizer, or sorting network is involved.
pub fn oracle_pipeline_state(cfg: &ArrayConfig, photons: &Photons) -> Result<SparseState> {
    let sines = photons.sines(cfg)?;
    let n = sines.len();
    let layout = Layout::of(&[(DATA, n, cfg.m.saturating_sub(1) as Val)]);
    if n == 0 {
        return SparseState::basis(Layout::of(&[(DATA, 0, 0)]), BasisConfig::new(Vec::new()));
    }
    let perms = crate::perm::Permutation::all(n);
    let mut items = Vec::new();
    let mut assignment = vec![0usize; n];
    let mut norm_sq = 0.0;
    loop {
        // beta_r: sum over photon orderings of the product of phases
        let mut beta = Complex64::new(0.0, 0.0);
        for sigma in &perms {
            let mut phase = Complex64::new(1.0, 0.0);
            for (i, &r) in assignment.iter().enumerate() {
                phase *= cfg.phase(sines[sigma.at(i + 1) - 1], r);
            }
            beta += phase;
        }
        norm_sq += beta.norm_sqr();
        items.push((
            BasisConfig::new(assignment.iter().map(|&r| r as Val).collect()),
            beta,
        ));
        let mut i = 0;
        while i < n {
            assignment[i] += 1;
            if assignment[i] < cfg.m {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let scale = 1.0 / norm_sq.sqrt();
    for (_, a) in &mut items {
        *a *= scale;
    }
    let mut state = SparseState::from_terms(layout, items)?;
    for slot in 0..n {
        state = dft_slot(&state, DATA, slot, cfg.m, -1.0)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::build_bitonic;

    fn grid_cfg(m: usize) -> ArrayConfig {
        ArrayConfig::new(m, 2.0, 1.0, 0).unwrap()
    }

    #[test]
    fn angle_bins() {
        let cfg = grid_cfg(4);
        assert_eq!(cfg.angle_from_k(0).unwrap(), 0.0);
        assert!((cfg.angle_from_k(2).unwrap() - 1.0 / (2.0 * 2.0)).abs() < 1e-15);
        // offset field of view shifts by whole orders
        let cfg = ArrayConfig::new(4, 2.0, 1.0, 1).unwrap();
        assert!((cfg.angle_from_k(0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_photon_zero_angle_is_uniform() {
        let cfg = grid_cfg(4);
        let s = build_single_photon_state(&cfg, 0.0).unwrap();
        assert_eq!(s.num_terms(), 4);
        for (_, a) in s.terms() {
            assert!((a - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_photon_grid_phases_alternate() {
        let cfg = grid_cfg(4);
        // bin k = 2: phase exp(2 pi i * 2 j / 4) = (-1)^j
        let s = build_single_photon_state(&cfg, cfg.angle_from_k(2).unwrap()).unwrap();
        let signs: Vec<f64> = s.terms().map(|(_, a)| a.re * 2.0).collect();
        assert!((signs[0] - (-1.0)).abs() < 1e-9 || (signs[0] - 1.0).abs() < 1e-9);
        let mut by_detector = [0.0; 4];
        for (c, a) in s.terms() {
            let j = c.flat().iter().position(|&v| v == 1).unwrap();
            by_detector[j] = a.re * 2.0;
        }
        for (j, v) in by_detector.iter().enumerate() {
            let expect = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - expect).abs() < 1e-9, "detector {j}");
        }
    }

    #[test]
    fn single_photon_norm_for_random_angles() {
        let cfg = grid_cfg(8);
        for theta in [0.123, -0.77, 0.5001, 0.25] {
            let s = build_single_photon_state(&cfg, theta).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multiphoton_single_matches_single() {
        let cfg = grid_cfg(4);
        let theta = 0.37;
        let a = build_multiphoton_state(&cfg, &Photons::Sines(vec![theta])).unwrap();
        let b = build_single_photon_state(&cfg, theta).unwrap();
        assert!((a.fidelity(&b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_photons_same_angle_bunch() {
        // m = 2, both photons straight on: sqrt2|20> + 2|11> + sqrt2|02>
        let cfg = grid_cfg(2);
        let s = build_multiphoton_state(&cfg, &Photons::Sines(vec![0.0, 0.0])).unwrap();
        let norm = (2.0f64 + 4.0 + 2.0).sqrt();
        let expect = [
            (vec![0, 2], 2.0_f64.sqrt() / norm),
            (vec![1, 1], 2.0 / norm),
            (vec![2, 0], 2.0_f64.sqrt() / norm),
        ];
        for (occ, amp) in expect {
            assert!(
                (s.amplitude(&BasisConfig::new(occ.clone())).norm() - amp).abs() < 1e-12,
                "occ {occ:?}"
            );
        }
    }

    #[test]
    fn qft_uniform_goes_to_zero_bin() {
        let m = 4;
        let layout = Layout::of(&[(DATA, 1, 3)]);
        let w = Complex64::new(0.5, 0.0);
        let s = SparseState::from_terms(
            layout,
            (0..4).map(|j| (BasisConfig::new(vec![j]), w)).collect::<Vec<_>>(),
        )
        .unwrap();
        let t = qft_register(&s, DATA, 0, m).unwrap();
        assert!((t.amplitude(&BasisConfig::new(vec![0])).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qft_phase_ramp_goes_to_its_bin() {
        let m = 8;
        let layout = Layout::of(&[(DATA, 1, 7)]);
        let k0 = 5;
        let w = 1.0 / (m as f64).sqrt();
        let items: Vec<_> = (0..m)
            .map(|j| {
                let turns = (j * k0) as f64 / m as f64;
                (
                    BasisConfig::new(vec![j as Val]),
                    Complex64::from_polar(w, 2.0 * std::f64::consts::PI * turns),
                )
            })
            .collect();
        let s = SparseState::from_terms(layout, items).unwrap();
        let t = qft_register(&s, DATA, 0, m).unwrap();
        assert!((t.amplitude(&BasisConfig::new(vec![k0 as Val])).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qft_round_trip_is_identity() {
        let m = 4;
        let layout = Layout::of(&[(DATA, 2, 3)]);
        let s = SparseState::from_terms(
            layout,
            vec![
                (BasisConfig::new(vec![0, 2]), Complex64::new(0.6, 0.0)),
                (BasisConfig::new(vec![3, 1]), Complex64::new(0.0, 0.8)),
            ],
        )
        .unwrap();
        let t = qft_register(&s, DATA, 1, m).unwrap();
        let back = qft_register_inverse(&t, DATA, 1, m).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_single_photon_grid() {
        let cfg = grid_cfg(4);
        let net = build_bitonic(1);
        let run = image_pipeline(&cfg, &Photons::Grid(vec![2]), &net, 7).unwrap();
        assert_eq!(run.recovered, vec![2]);
        assert!((run.multiset_distribution[&vec![2]] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pipeline_two_photons_grid() {
        let cfg = grid_cfg(4);
        let net = build_bitonic(2);
        let run = image_pipeline(&cfg, &Photons::Grid(vec![1, 3]), &net, 7).unwrap();
        assert_eq!(run.recovered, vec![1, 3]);
        assert!((run.multiset_distribution[&vec![1, 3]] - 1.0).abs() < 1e-9);
        // orderings (1,3) and (3,1) each carry half the probability
        assert!((run.ordered_distribution[&vec![1, 3]] - 0.5).abs() < 1e-9);
        assert!((run.ordered_distribution[&vec![3, 1]] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pipeline_vacuum() {
        let cfg = grid_cfg(4);
        let net = build_bitonic(1);
        let run = image_pipeline(&cfg, &Photons::Grid(vec![]), &net, 7).unwrap();
        assert!(run.recovered.is_empty());
        assert!((run.multiset_distribution[&Vec::new()] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_matches_oracle_off_grid() {
        let cfg = grid_cfg(4);
        let net = build_bitonic(2);
        let photons = Photons::Sines(vec![0.131, 0.222]);
        let run = image_pipeline(&cfg, &photons, &net, 7).unwrap();
        let oracle = oracle_pipeline_state(&cfg, &photons).unwrap();
        assert!((run.state.fidelity(&oracle).unwrap() - 1.0).abs() < 1e-9);
        // total variation between the two readout distributions
        let oracle_dist = oracle.distribution(DATA).unwrap();
        let mut tv = 0.0;
        for (k, p) in &run.ordered_distribution {
            tv += (p - oracle_dist.get(k).copied().unwrap_or(0.0)).abs();
        }
        assert!(tv < 1e-9);
    }

    #[test]
    fn pipeline_matches_oracle_three_photons_eight_detectors() {
        let cfg = grid_cfg(8);
        let net = build_bitonic(3);
        let photons = Photons::Sines(vec![0.0412, 0.119, 0.233]);
        let run = image_pipeline(&cfg, &photons, &net, 3).unwrap();
        let oracle = oracle_pipeline_state(&cfg, &photons).unwrap();
        let fid = run.state.fidelity(&oracle).unwrap();
        assert!(fid >= 1.0 - 1e-9, "fidelity {fid}");
        // readout distribution normalizes
        let total: f64 = run.ordered_distribution.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pipeline_invariant_under_photon_exchange() {
        let cfg = grid_cfg(4);
        let net = build_bitonic(2);
        let a = image_pipeline(&cfg, &Photons::Sines(vec![0.11, 0.31]), &net, 7).unwrap();
        let b = image_pipeline(&cfg, &Photons::Sines(vec![0.31, 0.11]), &net, 7).unwrap();
        assert!((a.state.fidelity(&b.state).unwrap() - 1.0).abs() < 1e-12);
    }
}
