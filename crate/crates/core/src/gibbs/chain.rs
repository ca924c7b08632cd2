use std::sync::Arc;

use rand::Rng;

use super::coupling::CouplingFamily;
use super::spin::SpinSpace;
use crate::error::{LabError, Result};

/// Relative tail mass above which a truncated coupling is rejected.
pub const TAIL_MASS_LIMIT: f64 = 1e-3;

/// Fields are recomputed from scratch after this many sweeps.
const FIELD_REFRESH: u64 = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Free,
    Periodic,
    /// Every exterior spin frozen at the given value.
    Frozen(f64),
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Free => "free",
            Boundary::Periodic => "periodic",
            Boundary::Frozen(_) => "frozen",
        }
    }
}

#[derive(Debug)]
struct Interactions {
    /// `(j, J_ij)` for every `j` within the cutoff.
    neighbors: Vec<Vec<(u32, f64)>>,
    /// `Σ_{j ∉ Λ} J_ij ω_j` from a frozen exterior.
    exterior: Vec<f64>,
}

/// A finite volume with its couplings resolved into neighbor tables.
#[derive(Debug, Clone)]
pub struct ChainModel {
    coupling: CouplingFamily,
    spins: SpinSpace,
    volume: usize,
    boundary: Boundary,
    radius: usize,
    tail_mass: f64,
    retained_mass: f64,
    table: Arc<Interactions>,
}

impl ChainModel {
    /// Resolves the couplings of `volume` sites up to distance
    /// `min(volume, cutoff)` (no cutoff: the whole volume). A cutoff shorter
    /// than the volume is rejected when the discarded tail exceeds
    /// [`TAIL_MASS_LIMIT`] of the retained mass; couplings cut by the volume
    /// itself belong to the boundary condition and are only reported.
    pub fn new(
        coupling: CouplingFamily,
        spins: SpinSpace,
        volume: usize,
        boundary: Boundary,
        cutoff: Option<usize>,
    ) -> Result<Self> {
        coupling.validate()?;
        if volume == 0 {
            return Err(LabError::InvalidParameter("volume must be at least 1".into()));
        }
        if let SpinSpace::RealLaw(law) = spins {
            law.validate()?;
            if !coupling.is_zero() {
                return Err(LabError::Unsupported(
                    "real-valued spins are only sampled without interactions".into(),
                ));
            }
        }
        if let Boundary::Frozen(w) = boundary {
            if !spins.contains(w) {
                return Err(LabError::InvalidParameter(format!("frozen exterior spin {w} outside the spin space")));
            }
        }
        let geometric = match boundary {
            Boundary::Periodic => volume / 2,
            _ => volume.saturating_sub(1).max(1),
        };
        let radius = cutoff.unwrap_or(volume).min(geometric);
        let tail_mass = coupling.tail_mass(radius);
        let retained_mass = coupling.retained_mass(radius);
        let cut_inside = cutoff.is_some_and(|c| c < geometric);
        if cut_inside && tail_mass > TAIL_MASS_LIMIT * retained_mass {
            return Err(LabError::TailMass {
                tail: tail_mass,
                retained: retained_mass,
            });
        }
        let table = Arc::new(build_interactions(&coupling, volume, &boundary, radius)?);
        Ok(ChainModel {
            coupling,
            spins,
            volume,
            boundary,
            radius,
            tail_mass,
            retained_mass,
            table,
        })
    }

    pub fn coupling(&self) -> &CouplingFamily {
        &self.coupling
    }

    pub fn spin_space(&self) -> SpinSpace {
        self.spins
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    /// Interaction radius actually simulated.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Discarded per-site coupling mass beyond [`Self::radius`].
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn retained_mass(&self) -> f64 {
        self.retained_mass
    }

    pub fn neighbors(&self, site: usize) -> &[(u32, f64)] {
        &self.table.neighbors[site]
    }

    pub fn exterior_field(&self, site: usize) -> f64 {
        self.table.exterior[site]
    }

    /// `max_i Σ_j J_ij` over the volume.
    pub fn max_row_sum(&self) -> f64 {
        self.table
            .neighbors
            .iter()
            .map(|row| row.iter().map(|(_, j)| j).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `h_i = 2 Σ_j J_ij σ_j + exterior_i`.
    pub fn local_field(&self, spins: &[f64], site: usize) -> f64 {
        let inner: f64 = self.table.neighbors[site]
            .iter()
            .map(|&(j, c)| c * spins[j as usize])
            .sum();
        2.0 * inner + self.table.exterior[site]
    }

    /// `H_Λ(σ)` summed over ordered pairs, plus the exterior term.
    pub fn hamiltonian(&self, spins: &[f64]) -> f64 {
        (0..self.volume)
            .map(|i| {
                let inner: f64 = self.table.neighbors[i]
                    .iter()
                    .map(|&(j, c)| c * spins[j as usize])
                    .sum();
                spins[i] * (inner + self.table.exterior[i])
            })
            .sum()
    }

    /// A state with spins drawn from the a-priori law.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> SpinChainState {
        let spins = (0..self.volume).map(|_| self.spins.sample_free(rng)).collect();
        SpinChainState::new(self, spins).expect("spins drawn from the space")
    }
}

fn build_interactions(coupling: &CouplingFamily, n: usize, boundary: &Boundary, radius: usize) -> Result<Interactions> {
    let mut neighbors = vec![Vec::new(); n];
    let mut exterior = vec![0.0; n];
    let radius = coupling.support_radius().map_or(radius, |r| r.min(radius));
    for (i, row) in neighbors.iter_mut().enumerate() {
        for d in 1..=radius {
            match boundary {
                Boundary::Periodic => {
                    let right = (i + d) % n;
                    let left = (i + n - d % n) % n;
                    for (k, j) in [right, left].into_iter().enumerate() {
                        if j == i || (k == 1 && left == right) {
                            continue;
                        }
                        let c = coupling.at_distance(i as i64, j as i64, d as u64);
                        if c > 0.0 {
                            row.push((j as u32, c));
                        }
                    }
                }
                Boundary::Free | Boundary::Frozen(_) => {
                    for j in [i as i64 - d as i64, (i + d) as i64] {
                        let c = coupling.j(i as i64, j);
                        if c <= 0.0 {
                            continue;
                        }
                        if (0..n as i64).contains(&j) {
                            row.push((j as u32, c));
                        } else if let Boundary::Frozen(w) = boundary {
                            exterior[i] += c * w;
                        }
                    }
                }
            }
        }
        row.sort_by_key(|&(j, _)| j);
        if row.iter().any(|(_, c)| !c.is_finite()) || !exterior[i].is_finite() {
            return Err(LabError::NonFiniteField { site: i });
        }
    }
    Ok(Interactions { neighbors, exterior })
}

/// Spin configuration of a [`ChainModel`] volume with cached local fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinChainState {
    spins: Vec<f64>,
    fields: Vec<f64>,
    sweeps: u64,
}

impl SpinChainState {
    pub fn new(model: &ChainModel, spins: Vec<f64>) -> Result<Self> {
        if spins.len() != model.volume() {
            return Err(LabError::InvalidParameter(format!(
                "state has {} spins for a volume of {}",
                spins.len(),
                model.volume()
            )));
        }
        if let Some((i, &x)) = spins.iter().enumerate().find(|(_, x)| !model.spin_space().contains(**x)) {
            return Err(LabError::InvalidParameter(format!("spin {x} at site {i} outside the spin space")));
        }
        let mut state = SpinChainState {
            fields: vec![0.0; spins.len()],
            spins,
            sweeps: 0,
        };
        state.refresh_fields(model);
        Ok(state)
    }

    pub fn spins(&self) -> &[f64] {
        &self.spins
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn refresh_fields(&mut self, model: &ChainModel) {
        for i in 0..self.spins.len() {
            self.fields[i] = model.local_field(&self.spins, i);
        }
    }

    /// Largest deviation between cached and recomputed fields.
    pub fn field_drift(&self, model: &ChainModel) -> f64 {
        (0..self.spins.len())
            .map(|i| (self.fields[i] - model.local_field(&self.spins, i)).abs())
            .fold(0.0, f64::max)
    }

    fn set_spin(&mut self, model: &ChainModel, site: usize, value: f64) {
        let delta = value - self.spins[site];
        if delta == 0.0 {
            return;
        }
        self.spins[site] = value;
        for &(j, c) in model.neighbors(site) {
            self.fields[j as usize] += 2.0 * c * delta;
        }
    }
}

/// Resamples one site from its conditional law given the rest.
pub fn heat_bath_site<R: Rng + ?Sized>(
    state: &mut SpinChainState,
    model: &ChainModel,
    site: usize,
    rng: &mut R,
) -> Result<()> {
    let h = state.fields[site];
    if !h.is_finite() {
        return Err(LabError::NonFiniteField { site });
    }
    let value = model.spin_space().sample_conditional(h, rng);
    state.set_spin(model, site, value);
    Ok(())
}

/// One left-to-right sweep of exact single-site conditional resampling.
pub fn heat_bath_sweep<R: Rng + ?Sized>(state: &mut SpinChainState, model: &ChainModel, rng: &mut R) -> Result<()> {
    for i in 0..state.spins.len() {
        heat_bath_site(state, model, i, rng)?;
    }
    state.sweeps += 1;
    if state.sweeps.is_multiple_of(FIELD_REFRESH) {
        state.refresh_fields(model);
    }
    Ok(())
}
