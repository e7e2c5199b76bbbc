//! Every numerical default used by the crate, in one place.
//!
//! | constant                  | value   | used by                                             |
//! |---------------------------|---------|-----------------------------------------------------|
//! | `TOL_STRUCT`              | 1e-10   | generator / Gaussian-data structural checks (relative) |
//! | `TOL_ODE`                 | 1e-10   | adaptive Runge–Kutta relative tolerance             |
//! | `SERIES_SWITCH`           | 0.5     | `‖B‖₁·t` below which φ-functions use the Taylor series |
//! | `M_MAX`                   | 8       | largest moment order accepted by the engine         |
//! | `M_MAX_POISSON`           | 5       | largest order for the Poisson block system          |
//! | `STACKED_MAX_ORDER`       | 3       | Poisson auto-solver uses the stacked exponential up to this order |
//! | `D_MAX`                   | 4096    | largest truncated Fock dimension `N_c^n`            |
//! | `SUPEROP_D_MAX`           | 64      | largest Fock dimension for dense superoperators     |
//! | `LEAKAGE_THRESHOLD`       | 1e-8    | top-two-level population allowed in oracle runs     |
//! | `CUTOFF_CAP`              | 64      | cutoff doubling stops here                          |
//! | `CHOI_TOL`                | 1e-8    | smallest Choi eigenvalue accepted as CP             |
//! | `DEFAULT_ORDER`           | 2       | scenario moment order when none is given            |
//! | `DEFAULT_T_MAX`           | 1.0     | scenario time horizon                               |
//! | `DEFAULT_DT`              | 0.1     | scenario output spacing                             |
//! | `DEFAULT_COMPARE_TOL`     | 1e-6    | engine/oracle relative error accepted by `compare`  |
//! | `DEFAULT_CUTOFF`          | 16      | first oracle cutoff per mode                        |
//! | `DEFAULT_SEED`            | 0       | seed of randomized scenario jobs                    |
//! | `LEIBNIZ_TOL`             | 1e-10   | product-rule residual accepted by the ensemble check |
//! | `LEIBNIZ_INSTANCES`       | 100     | size of the default product-rule ensemble           |

pub const TOL_STRUCT: f64 = 1e-10;
pub const TOL_ODE: f64 = 1e-10;
pub const SERIES_SWITCH: f64 = 0.5;
pub const M_MAX: usize = 8;
pub const M_MAX_POISSON: usize = 5;
pub const STACKED_MAX_ORDER: usize = 3;
pub const D_MAX: usize = 4096;
pub const SUPEROP_D_MAX: usize = 64;
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;
pub const CUTOFF_CAP: usize = 64;
pub const CHOI_TOL: f64 = 1e-8;
pub const DEFAULT_ORDER: usize = 2;
pub const DEFAULT_T_MAX: f64 = 1.0;
pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_COMPARE_TOL: f64 = 1e-6;
pub const DEFAULT_CUTOFF: usize = 16;
pub const DEFAULT_SEED: u64 = 0;
pub const LEIBNIZ_TOL: f64 = 1e-10;
pub const LEIBNIZ_INSTANCES: usize = 100;
