//! Problem definition shared by the simulator, the horizon optimizer and the
//! closed loop.

use crate::error::{Error, Result};
use crate::lindblad::HorizonGrid;
use crate::quantum::{
    angular_momentum_ops, ising_hamiltonian, pauli_chain_product, validate_projector,
    DensityMatrix, HermitianOperator, PauliAxis,
};

const COMMUTE_TOL: f64 = 1e-10;
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub h0: HermitianOperator,
    pub hc: HermitianOperator,
    pub l: HermitianOperator,
    /// Projector onto the target eigenstate (rank 1) or invariant subspace.
    pub target: HermitianOperator,
    pub rho0: DensityMatrix,
    pub eta: f64,
    pub kappa: f64,
    pub dt: f64,
    pub delta_t: f64,
    pub t_final: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub seed: u64,
    /// Re-optimize every `m` substeps instead of once per horizon.
    pub reoptimize_every: Option<usize>,
}

fn steps_of(span: f64, dt: f64, field: &'static str) -> Result<usize> {
    let ratio = span / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > GRID_TOL * rounded.max(1.0) {
        return Err(Error::InvalidConfig {
            field,
            reason: format!("{span} is not an integer multiple of dt = {dt}"),
        });
    }
    Ok(rounded as usize)
}

impl ModelConfig {
    /// Spin-1 dephasing system driven by `J_y`, starting from
    /// `diag(0.3, 0.4, 0.3)` and steered to `|m=-1>`.
    pub fn three_level() -> Self {
        let s = angular_momentum_ops(1.0).expect("spin 1 is valid");
        Self {
            h0: s.jz.clone(),
            hc: s.jy,
            l: s.jz,
            target: HermitianOperator::basis_projector(3, 2),
            rho0: DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).expect("valid populations"),
            eta: 1.0,
            kappa: 1.0,
            dt: 0.01,
            delta_t: 0.5,
            t_final: 20.0,
            u_min: -5.0,
            u_max: 5.0,
            seed: 0,
            reoptimize_every: None,
        }
    }

    /// Spin-`j` system from `I/d` to the lowest `J_z` eigenstate.
    pub fn spin(j: f64, t_final: f64) -> Result<Self> {
        let s = angular_momentum_ops(j)?;
        let d = s.dim();
        Ok(Self {
            h0: s.jz.clone(),
            hc: s.jy,
            l: s.jz,
            target: HermitianOperator::basis_projector(d, d - 1),
            rho0: DensityMatrix::maximally_mixed(d),
            t_final,
            ..Self::three_level()
        })
    }

    /// Qubit chain with `H_u = u Y^{⊗n}`, `L = Z^{⊗n}`, from `|1...1>` to
    /// `|0...0>`.
    pub fn ising(n: usize, edges: &[(usize, usize, f64)], fields: &[f64]) -> Result<Self> {
        let h0 = ising_hamiltonian(n, edges, fields)?;
        let d = h0.dim();
        Ok(Self {
            h0,
            hc: pauli_chain_product(n, PauliAxis::Y)?,
            l: pauli_chain_product(n, PauliAxis::Z)?,
            target: HermitianOperator::basis_projector(d, 0),
            rho0: DensityMatrix::basis_state(d, d - 1),
            dt: 0.0025,
            delta_t: 0.05,
            ..Self::three_level()
        })
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (field, d) in [
            ("hc", self.hc.dim()),
            ("l", self.l.dim()),
            ("target", self.target.dim()),
            ("rho0", self.rho0.dim()),
        ] {
            if d != n {
                return Err(Error::InvalidConfig {
                    field,
                    reason: format!("dimension {d} differs from h0 dimension {n}"),
                });
            }
        }
        let bad = |field, reason: String| Err(Error::InvalidConfig { field, reason });
        if !(0.0..=1.0).contains(&self.eta) {
            return bad("eta", format!("{} is outside [0, 1]", self.eta));
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa", format!("{} is negative", self.kappa));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("{} is not positive", self.dt));
        }
        if !(self.delta_t >= self.dt) {
            return bad("delta_t", format!("{} is shorter than dt", self.delta_t));
        }
        if !(self.t_final >= 0.0) {
            return bad("t_final", format!("{} is negative", self.t_final));
        }
        if !(self.u_min < self.u_max) {
            return bad("u_min", format!("{} is not below u_max = {}", self.u_min, self.u_max));
        }
        steps_of(self.delta_t, self.dt, "delta_t")?;
        steps_of(self.t_final, self.dt, "t_final")?;
        if let Some(m) = self.reoptimize_every {
            if m == 0 || m > self.horizon_steps() {
                return bad(
                    "reoptimize_every",
                    format!("{m} must lie in 1..={}", self.horizon_steps()),
                );
            }
        }
        validate_projector(&self.target, false).map_err(|e| Error::InvalidConfig {
            field: "target",
            reason: e.to_string(),
        })?;
        for (field, op) in [("l", &self.l), ("h0", &self.h0)] {
            let norm = op.commutator_norm(&self.target);
            if norm > COMMUTE_TOL {
                return bad(
                    field,
                    format!("does not commute with the target projector (norm {norm:.3e})"),
                );
            }
        }
        Ok(())
    }

    /// Substeps per prediction horizon.
    pub fn horizon_steps(&self) -> usize {
        (self.delta_t / self.dt).round() as usize
    }

    /// Substeps over the whole run.
    pub fn total_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn horizon_grid(&self, t0: f64) -> HorizonGrid {
        HorizonGrid {
            t0,
            dt: self.dt,
            steps: self.horizon_steps(),
        }
    }
}
