//! Line-oriented JSON records: rasters, datasets, trace sets and training logs.
//!
//! A raster is a JSON object
//! `{"timesteps": T, "channels": C, "label": y, "events": [[t, c], ...]}`
//! with events sorted by time then channel and free of duplicates. A dataset
//! file holds one raster object per line; a trace file one `SimTrace` per
//! line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Raster, SimTrace};
use crate::train::EpochRecord;

/// On-disk form of a [`Raster`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterFile {
    pub timesteps: usize,
    pub channels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub events: Vec<(usize, usize)>,
}

impl From<&Raster> for RasterFile {
    fn from(r: &Raster) -> Self {
        Self {
            timesteps: r.timesteps(),
            channels: r.channels(),
            label: r.label(),
            events: r.events().collect(),
        }
    }
}

impl RasterFile {
    /// Validates ranges, ordering and uniqueness, then builds the raster.
    pub fn to_raster(&self) -> Result<Raster> {
        if let Some(w) = self.events.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Format(format!(
                "raster events must be sorted and unique: {:?} then {:?}",
                w[0], w[1]
            )));
        }
        let mut raster =
            Raster::from_events(self.timesteps, self.channels, self.events.iter().copied())?;
        raster.set_label(self.label);
        Ok(raster)
    }
}

pub fn raster_to_json(r: &Raster) -> Result<String> {
    Ok(serde_json::to_string(&RasterFile::from(r))?)
}

pub fn raster_from_json(s: &str) -> Result<Raster> {
    serde_json::from_str::<RasterFile>(s)?.to_raster()
}

pub fn save_raster(path: impl AsRef<Path>, r: &Raster) -> Result<()> {
    std::fs::write(path, raster_to_json(r)? + "\n")?;
    Ok(())
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    raster_from_json(&std::fs::read_to_string(path)?)
}

fn write_lines<T: Serialize>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_lines<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut items = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        items.push(item);
    }
    Ok(items)
}

pub fn save_dataset(path: impl AsRef<Path>, data: &[Raster]) -> Result<()> {
    write_lines(path, data.iter().map(RasterFile::from))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Raster>> {
    read_lines::<RasterFile>(path)?
        .iter()
        .map(RasterFile::to_raster)
        .collect()
}

pub fn save_traces(path: impl AsRef<Path>, traces: &[SimTrace]) -> Result<()> {
    write_lines(path, traces)
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<SimTrace>> {
    read_lines(path)
}

pub fn save_log(path: impl AsRef<Path>, log: &[EpochRecord]) -> Result<()> {
    write_lines(path, log)
}

pub fn load_log(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    read_lines(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_json_is_sorted_and_round_trips() {
        let r = Raster::from_events(5, 3, [(4, 0), (1, 2), (1, 0), (1, 2)])
            .unwrap()
            .with_label(2);
        let json = raster_to_json(&r).unwrap();
        assert_eq!(
            json,
            r#"{"timesteps":5,"channels":3,"label":2,"events":[[1,0],[1,2],[4,0]]}"#
        );
        assert_eq!(raster_from_json(&json).unwrap(), r);
    }

    #[test]
    fn malformed_rasters_are_rejected() {
        for bad in [
            r#"{"timesteps":5,"channels":3,"events":[[1,2],[1,0]]}"#,
            r#"{"timesteps":5,"channels":3,"events":[[1,0],[1,0]]}"#,
            r#"{"timesteps":5,"channels":3,"events":[[5,0]]}"#,
            r#"{"timesteps":5,"channels":3,"events":[[0,3]]}"#,
        ] {
            assert!(raster_from_json(bad).is_err(), "{bad}");
        }
        let unlabelled = raster_from_json(r#"{"timesteps":2,"channels":1,"events":[]}"#).unwrap();
        assert_eq!(unlabelled.label(), None);
    }

    #[test]
    fn dataset_and_log_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<Raster> = (0..3)
            .map(|n| {
                Raster::from_events(4, 2, [(n, n % 2)])
                    .unwrap()
                    .with_label(n)
            })
            .collect();
        let path = dir.path().join("data.jsonl");
        save_dataset(&path, &data).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), data);

        let log = vec![EpochRecord {
            epoch: 0,
            loss: 0.1 + 0.2,
            accuracy: 1.0 / 3.0,
        }];
        let path = dir.path().join("log.jsonl");
        save_log(&path, &log).unwrap();
        assert_eq!(load_log(&path).unwrap(), log);
    }
}
