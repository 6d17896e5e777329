//! Parameter extraction: the damped least-squares core, per-field Lorentzian
//! slice fits, dispersion (anticrossing) fits and full 2D transmission fits.

pub mod anticrossing;
pub mod full;
pub mod lm;
pub mod lorentzian;
pub mod report;

pub use anticrossing::{
    fit_anticrossing, AnticrossingError, AnticrossingFit, AnticrossingParams, AnticrossingProblem,
    AnticrossingSettings, Branch, BranchPoint,
};
pub use full::{
    amplitude_sigma_to_db, fit_full, FullFitError, FullFitSettings, FullModelFit, FullModelParams,
    FullModelProblem,
};
pub use report::{
    write_branch_csv, write_trace_csv, FitReport, ParameterEntry, StageReport, REPORT_SCHEMA,
    TRACE_CSV_HEADER,
};
pub use lm::{
    least_squares, JacobianMode, LeastSquaresProblem, LeastSquaresResult, LmError,
    OptimizerSettings, Termination,
};
pub use lorentzian::{
    far_detuned_fwhm, fit_lorentzian_samples, fit_slice, linewidth_trace, lorentzian,
    LorentzianFit, LorentzianProblem, SliceError, SliceFit, SliceFitSettings, SliceKind,
    TraceFlag, TracePoint,
};
