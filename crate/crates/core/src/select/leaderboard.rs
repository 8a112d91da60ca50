use std::io::Write;

use serde::{Deserialize, Serialize};

use super::CandidateSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub candidate: CandidateSpec,
    pub mean_nrmse: f64,
    pub mean_mape: f64,
    pub mean_accuracy: f64,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxCandidates,
    WallClock,
    GridExhausted,
}

/// Evaluated candidates, best (lowest NRMSE) first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub station: String,
    pub entries: Vec<LeaderboardEntry>,
    pub stop_reason: StopReason,
}

impl Leaderboard {
    pub fn best(&self) -> Option<&LeaderboardEntry> {
        self.entries.first()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "rank",
            "candidate_index",
            "algorithm",
            "mean_nrmse",
            "mean_mape",
            "mean_accuracy",
            "fit_seconds",
        ])?;
        for (rank, e) in self.entries.iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                e.candidate.candidate_index.to_string(),
                e.candidate.algorithm.to_string(),
                e.mean_nrmse.to_string(),
                e.mean_mape.to_string(),
                e.mean_accuracy.to_string(),
                e.fit_seconds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut sink, self)?;
        sink.write_all(b"\n")
    }
}
