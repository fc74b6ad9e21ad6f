//! Scenario files, generators, an independent oracle and named suites.

pub mod gen;
pub mod oracle;
pub mod scenario;
pub mod suite;

pub use gen::{gen_diag, gen_no_rf, gen_process, gen_random, gen_random_with, RandomSpec};
pub use scenario::{Scenario, ScenarioFile};
pub use suite::{exit_code, run_suite, Suite, SuiteOptions};
