use crate::chem::{BasisSet, Molecule, Positions};
use crate::energy::EnergyField;
use crate::error::Result;
use crate::model::{model_energy, ModelParams, PreparedFrame};
use crate::scf::{solve_scf, ScfOptions};

/// Finite-difference step for model-field forces while sampling, Bohr.
pub const MODEL_FD_STEP: f64 = 1e-3;

/// `E(R, f_θ(R))` for a fixed parameter snapshot.
#[derive(Debug, Clone, Copy)]
pub struct ModelField<'a> {
    pub params: &'a ModelParams,
    pub template: &'a Molecule,
    pub basis: &'a BasisSet,
    pub fd_step: f64,
}

impl<'a> ModelField<'a> {
    pub fn new(params: &'a ModelParams, template: &'a Molecule, basis: &'a BasisSet) -> Self {
        ModelField { params, template, basis, fd_step: MODEL_FD_STEP }
    }
}

impl EnergyField for ModelField<'_> {
    fn energy(&self, r: &Positions) -> Result<f64> {
        let m = self.template.with_positions(r.clone())?;
        model_energy(self.params, &PreparedFrame::new(self.params, m, self.basis)?)
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }
}

/// The SCF ground-state energy `E_0(R)`.
#[derive(Debug, Clone, Copy)]
pub struct OracleField<'a> {
    pub template: &'a Molecule,
    pub basis: &'a BasisSet,
    pub opts: ScfOptions,
    pub fd_step: f64,
}

impl<'a> OracleField<'a> {
    pub fn new(template: &'a Molecule, basis: &'a BasisSet) -> Self {
        OracleField { template, basis, opts: ScfOptions::default(), fd_step: crate::energy::DEFAULT_FD_STEP }
    }
}

impl EnergyField for OracleField<'_> {
    fn energy(&self, r: &Positions) -> Result<f64> {
        let m = self.template.with_positions(r.clone())?;
        Ok(solve_scf(&m, self.basis, &self.opts)?.energy)
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }
}
