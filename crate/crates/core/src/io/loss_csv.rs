use std::path::Path;

use super::IoError;
use crate::optimize::{LossLog, LossRecord};

pub const LOSS_CSV_HEADER: &str = "iteration,content_loss,style_loss,total_loss,elapsed_ms";

pub fn write_loss_csv(log: &LossLog, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| IoError::Invalid(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    if log.is_empty() {
        writer.write_record(LOSS_CSV_HEADER.split(',')).map_err(csv_err)?;
    }
    for record in log.records() {
        writer.serialize(record).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| IoError::write(path, e))
}

pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<LossLog, IoError> {
    let path = path.as_ref();
    let malformed = |e: csv::Error| IoError::MalformedText {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::open(path, io),
        other => IoError::Invalid(format!("{other:?}")),
    })?;
    let header = reader
        .headers()
        .map_err(malformed)?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != LOSS_CSV_HEADER {
        return Err(IoError::MalformedText {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut log = LossLog::new();
    let mut last = None;
    for row in reader.deserialize::<LossRecord>() {
        let row = row.map_err(malformed)?;
        if last.is_some_and(|it| row.iteration <= it) {
            return Err(IoError::MalformedText {
                path: path.to_path_buf(),
                reason: format!("iteration {} out of order", row.iteration),
            });
        }
        last = Some(row.iteration);
        log.push(row);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        let mut log = LossLog::new();
        for i in 0..3 {
            log.push(LossRecord {
                iteration: i,
                content_loss: 1.0 / (i + 1) as f64,
                style_loss: 0.1 * i as f64,
                total_loss: 2.5e-7 * i as f64 + 1.0 / 3.0,
                elapsed_ms: 12.5,
            });
        }
        write_loss_csv(&log, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), LOSS_CSV_HEADER);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_loss_csv(&p).unwrap(), log);
    }

    #[test]
    fn empty_log_still_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        write_loss_csv(&LossLog::new(), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().trim_end(), LOSS_CSV_HEADER);
        assert!(read_loss_csv(&p).unwrap().is_empty());
    }
}
