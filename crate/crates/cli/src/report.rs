//! JSON output shapes shared by the subcommands.
//!
//! Every report embeds a [`Provenance`] block so results can be traced back
//! to the exact invocation and input bytes that produced them.

use ordibound_core::{
    BoundsEstimate, BoundsReport, IntervalReport, JointMatrix, TupleIndex, ValidationReport,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: ToolInfo,
    /// Hex SHA-256 of the raw input bytes (file contents or the joined
    /// inline arguments), so a result can be matched to its data.
    pub input_sha256: String,
    /// Either `file:PATH` or `inline`.
    pub input_source: String,
    pub command: String,
}

impl Provenance {
    pub fn new(command: &str, input_source: String, input_bytes: &[u8]) -> Self {
        let digest = Sha256::digest(input_bytes);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        Provenance {
            tool: ToolInfo { name: "ordibound", version: env!("CARGO_PKG_VERSION") },
            input_sha256: hex,
            input_source,
            command: command.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsOutput {
    pub provenance: Provenance,
    pub num_categories: usize,
    pub treated_marginal: Vec<f64>,
    pub control_marginal: Vec<f64>,
    pub bounds: BoundsReport,
}

/// One attaining joint distribution plus the checks that it really attains.
#[derive(Debug, Serialize)]
pub struct AttainSide {
    pub target: f64,
    pub tuple: TupleIndex,
    pub matrix: Vec<Vec<f64>>,
    pub validation: ValidationReport,
}

impl AttainSide {
    pub fn new(matrix: &JointMatrix, tuple: TupleIndex, target: f64, validation: ValidationReport) -> Self {
        AttainSide { target, tuple, matrix: matrix.rows().to_vec(), validation }
    }
}

#[derive(Debug, Serialize)]
pub struct AttainOutput {
    pub provenance: Provenance,
    pub num_categories: usize,
    pub treated_marginal: Vec<f64>,
    pub control_marginal: Vec<f64>,
    pub upper: AttainSide,
    pub lower: AttainSide,
}

#[derive(Debug, Serialize)]
pub struct EstimateOutput {
    pub provenance: Provenance,
    pub estimate: BoundsEstimate,
}

#[derive(Debug, Serialize)]
pub struct CiOutput {
    pub provenance: Provenance,
    pub interval: IntervalReport,
}

/// One randomized cross-check of the closed-form bounds against the
/// linear-program oracle, with the attainment constructions validated too.
#[derive(Debug, Serialize)]
pub struct OracleTrial {
    pub trial: usize,
    pub num_categories: usize,
    pub upper_deviation: f64,
    pub lower_deviation: f64,
    pub upper_attainment_ok: bool,
    pub lower_attainment_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct OracleCheckOutput {
    pub provenance: Provenance,
    pub trials: usize,
    pub max_categories: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_upper_deviation: f64,
    pub max_lower_deviation: f64,
    pub failures: Vec<OracleTrial>,
    pub ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_hashes_input_bytes() {
        let p = Provenance::new("bounds", "inline".into(), b"abc");
        assert_eq!(
            p.input_sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(p.tool.name, "ordibound");
        assert_eq!(p.command, "bounds");
    }
}
