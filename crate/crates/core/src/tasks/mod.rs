//! Client tasks: losses, synthetic and CSV federations, and splits.

mod csv_source;
mod loss;
mod split;
mod synth;

pub use csv_source::{load_csv_federation, write_client_csv, CsvSource, CsvTask};
pub use loss::{ClientData, Federation, LossKind, Targets};
pub use split::{apply_split, reduced_size, standardize, SplitOutcome, SplitSpec};
pub use synth::{
    feature_mean, label_histogram, synth_federation, Heterogeneity, SynthSpec, TaskSpec,
};
