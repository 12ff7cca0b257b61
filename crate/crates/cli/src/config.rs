use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use spectral_coloring::recovery::{ClusterMode, RecoveryParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exhaustive,
    Heuristic,
}

impl From<Mode> for ClusterMode {
    fn from(m: Mode) -> ClusterMode {
        match m {
            Mode::Exhaustive => ClusterMode::Exhaustive,
            Mode::Heuristic => ClusterMode::Heuristic,
        }
    }
}

/// Options shared by every command. A JSON config file may set any of them;
/// flags given on the command line win.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Edge list of the input (or host) graph
    #[arg(long, visible_alias = "host", global = true)]
    pub input: Option<PathBuf>,
    /// Partition file (one color per line)
    #[arg(long, global = true)]
    pub partition: Option<PathBuf>,
    /// Reference partition for agreement metrics
    #[arg(long, global = true)]
    pub reference: Option<PathBuf>,
    /// Generator spec (JSON) for `gen`
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Directory for generated or planted artifacts
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Host degree used for planting normalization
    #[arg(long, global = true)]
    pub d: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub net_resolution: Option<f64>,
    #[arg(long, global = true)]
    pub rank_cap: Option<usize>,
    #[arg(long, global = true)]
    pub max_candidates: Option<usize>,
    /// Free-component size limit for full recovery
    #[arg(long, global = true)]
    pub size_limit: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    pub mode: Option<Mode>,
    /// Report path; stdout when absent
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// JSON config file
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! prefer {
    ($a:expr, $b:expr, $($f:ident),*) => {
        Options { $($f: $a.$f.or($b.$f),)* }
    };
}

impl Options {
    pub fn over(self, base: Options) -> Options {
        prefer!(
            self, base, input, partition, reference, spec, output_dir, k, d, gamma, tau, sigma, lambda, eta,
            net_resolution, rank_cap, max_candidates, size_limit, seed, mode, out, config
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Recovery parameters with `lambda` defaulting to `default_lambda`.
    pub fn recovery(&self, default_lambda: f64, seed: u64) -> RecoveryParams {
        let base = RecoveryParams::default();
        RecoveryParams {
            lambda: self.lambda.unwrap_or(default_lambda),
            eta: self.eta.unwrap_or(base.eta),
            net_resolution: self.net_resolution.unwrap_or(base.net_resolution),
            rank_cap: self.rank_cap.unwrap_or(base.rank_cap),
            max_candidates: self.max_candidates.unwrap_or(base.max_candidates),
            mode: self.mode.map(ClusterMode::from).unwrap_or(base.mode),
            seed,
            ..base
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let flags = Options { k: Some(4), ..Default::default() };
        let file: Options = serde_json::from_str(r#"{"k": 3, "lambda": 0.2, "mode": "exhaustive"}"#).unwrap();
        let o = flags.over(file);
        assert_eq!(o.k, Some(4));
        assert_eq!(o.lambda, Some(0.2));
        assert_eq!(o.recovery(0.3, 0).mode, ClusterMode::Exhaustive);
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(serde_json::from_str::<Options>(r#"{"kk": 3}"#).is_err());
    }
}
