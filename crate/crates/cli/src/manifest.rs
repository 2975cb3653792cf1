//! The pipeline manifest: a JSON sidecar in which every stage records the
//! exact configuration that produced its artifacts plus their checksums.
//! Reruns with an identical manifest reproduce identical outputs, so the
//! manifest doubles as a provenance check: stages verify the recorded
//! checksum of any input that an earlier stage produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use hypercs_core::{DetectionConfig, SolverConfig, SynthConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineManifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructStage>,
    /// One entry per detection arm, keyed by arm label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detect: BTreeMap<String, DetectStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareStage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthStage {
    pub config: SynthConfig,
    pub video: String,
    pub truth: String,
    pub signature: String,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleStage {
    pub input: String,
    pub output: String,
    pub rows: usize,
    pub cols: usize,
    pub operator: OperatorParams,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorParams {
    pub n: usize,
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructStage {
    pub input: String,
    pub output: String,
    pub rows: usize,
    pub cols: usize,
    pub solver: SolverConfig,
    pub converged_bands: usize,
    pub total_bands: usize,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectStage {
    pub input: String,
    pub signature: String,
    pub background_frames: String,
    pub config: DetectionConfig,
    pub threshold: f64,
    pub counts: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaps: Option<String>,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareStage {
    pub counts_raw: String,
    pub counts_recon: String,
    pub output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub checksums: BTreeMap<String, String>,
}

impl PipelineManifest {
    /// Load the manifest if the file exists, otherwise start empty.
    pub fn load_or_default(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Format(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Format(format!("malformed manifest {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Format(format!("cannot serialize manifest: {e}")))?;
        fs::write(path, text + "\n")
            .map_err(|e| CliError::Format(format!("cannot write manifest {}: {e}", path.display())))?;
        Ok(())
    }

    /// Every output checksum recorded by any stage, keyed by path string.
    pub fn recorded_checksums(&self) -> BTreeMap<&str, &str> {
        let mut all = BTreeMap::new();
        let mut extend = |map: &BTreeMap<String, String>| {
            for (k, v) in map {
                all.insert(k.as_str(), v.as_str());
            }
        };
        if let Some(s) = &self.synth {
            extend(&s.checksums);
        }
        if let Some(s) = &self.sample {
            extend(&s.checksums);
        }
        if let Some(s) = &self.reconstruct {
            extend(&s.checksums);
        }
        for stage in self.detect.values() {
            extend(&stage.checksums);
        }
        if let Some(s) = &self.compare {
            extend(&s.checksums);
        }
        all
    }

    /// If an earlier stage recorded a checksum for `input`, verify the file
    /// on disk still matches it.
    pub fn verify_input(&self, input: &Path) -> Result<()> {
        let key = input.to_string_lossy();
        if let Some(&recorded) = self.recorded_checksums().get(key.as_ref()) {
            let actual = sha256_file(input)?;
            if actual != recorded {
                return Err(CliError::Format(format!(
                    "checksum mismatch for {key}: manifest records {recorded}, file has {actual}; \
                     the pipeline state is stale"
                )));
            }
        }
        Ok(())
    }
}

/// SHA-256 of a file, lowercase hex.
pub fn sha256_file(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path)
        .map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Checksum a list of produced files into a stage's checksum map.
pub fn checksum_outputs(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for p in paths {
        map.insert(p.to_string_lossy().into_owned(), sha256_file(p)?);
    }
    Ok(map)
}
