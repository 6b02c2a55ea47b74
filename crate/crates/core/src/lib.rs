//! Certification toolkit for delay equations in Lur'e form: characteristic
//! root counting, frequency-domain inequalities, the Goodwin cascade region
//! classifier, method-of-steps simulation and diagonal parabolic gap checks.

pub mod charroots;
pub mod ddesim;
pub mod freqcheck;
pub mod goodwin;
pub mod numeric;
pub mod parabolic;

pub use charroots::{count_roots_right_of, CharRootsError, DelayLinearPart, QuasiPolynomial, RootCount};
pub use freqcheck::{check_circle_condition, check_gain_condition, FreqError, FrequencySweepReport, LurjeDelaySystem};
pub use goodwin::{classify_point, sweep_region, ClassifyConfig, Label, PointClassification, RegionGrid};
