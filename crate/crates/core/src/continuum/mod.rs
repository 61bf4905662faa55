//! Reference continuum solvers and analytic oracles.

mod cn;
mod dispersion;
mod gaussian;
mod spectral;
mod wave;

pub use cn::{cn_evolve, cn_schrodinger_step, CnDirection, CrankNicolson};
pub use dispersion::{fit_frequency, kg_consistency, kg_scale, newschrod_dispersion, DispersionQuery};
pub use gaussian::{analytic_free_gaussian, gaussian_wave, GaussianPacket};
pub use spectral::{
    dft, idft, mode_exponential, psi_pm_residuals, spectral_derivative, to_psi_pm, wavenumbers, DiracSystem,
    HomogeneousSolution, PsiConvention,
};
pub use wave::{pack_complex, pack_densities, pack_right, unpack_complex, ComplexWave, WaveRole};
