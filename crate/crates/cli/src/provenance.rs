//! Structured-text form of stage provenance, written beside each checkpoint
//! and embedded in the checkpoint file.

use serde::{Deserialize, Serialize};

use seqadapt_core::pipelines::{Stage, StageRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetJson {
    pub name: String,
    pub sha256: String,
}

/// JSON shape of a [`StageRecord`]. Losses are `null` when not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecordJson {
    pub stage: String,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub freeze_encoder: bool,
    pub steps: usize,
    pub examples_per_epoch: usize,
    pub datasets: Vec<DatasetJson>,
    pub initial_loss: Option<f64>,
    pub epoch_losses: Vec<Option<f64>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&StageRecord> for StageRecordJson {
    fn from(r: &StageRecord) -> Self {
        Self {
            stage: r.stage.as_str().to_string(),
            seed: r.seed,
            epochs: r.epochs,
            batch_size: r.batch_size,
            lr: r.lr,
            freeze_encoder: r.freeze_encoder,
            steps: r.steps,
            examples_per_epoch: r.examples_per_epoch,
            datasets: r
                .datasets
                .iter()
                .map(|(name, hash)| DatasetJson {
                    name: name.clone(),
                    sha256: hash.clone(),
                })
                .collect(),
            initial_loss: finite(r.initial_loss),
            epoch_losses: r.epoch_losses.iter().copied().map(finite).collect(),
        }
    }
}

impl StageRecordJson {
    pub fn to_record(&self) -> Result<StageRecord, String> {
        let stage = Stage::parse(&self.stage).ok_or_else(|| format!("unknown stage {:?}", self.stage))?;
        Ok(StageRecord {
            stage,
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            freeze_encoder: self.freeze_encoder,
            steps: self.steps,
            examples_per_epoch: self.examples_per_epoch,
            datasets: self
                .datasets
                .iter()
                .map(|d| (d.name.clone(), d.sha256.clone()))
                .collect(),
            initial_loss: self.initial_loss.unwrap_or(f64::NAN),
            epoch_losses: self.epoch_losses.iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
        })
    }
}

/// Pretty JSON array of every stage record, oldest first.
pub fn provenance_to_string(records: &[StageRecord]) -> String {
    let json: Vec<StageRecordJson> = records.iter().map(StageRecordJson::from).collect();
    let mut s = serde_json::to_string_pretty(&json).expect("provenance serializes");
    s.push('\n');
    s
}

pub fn parse_provenance(text: &str) -> Result<Vec<StageRecord>, String> {
    let json: Vec<StageRecordJson> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    json.iter().map(StageRecordJson::to_record).collect()
}
