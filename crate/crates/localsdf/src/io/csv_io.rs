//! CSV reports with header rows: sample sets, loss curves, evaluation
//! reports, and the 2D receptive-field sweep.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::sampling::SdfSample;
use crate::training::EpochLoss;

/// `x,y,z,sdf,weight` rows.
pub fn save_samples(samples: &[SdfSample], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y,z,sdf,weight")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.position[0], s.position[1], s.position[2], s.sdf, s.weight
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_samples(path: &Path) -> Result<Vec<SdfSample>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if lineno == 1 {
            if line.trim() != "x,y,z,sdf,weight" {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: format!("expected header 'x,y,z,sdf,weight', got '{line}'"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 5];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("bad number '{f}'"),
            })?;
        }
        out.push(SdfSample {
            position: [vals[0], vals[1], vals[2]],
            sdf: vals[3],
            weight: vals[4],
        });
    }
    Ok(out)
}

/// `epoch,mean_loss,lr` rows.
pub fn save_loss_curve(curve: &[EpochLoss], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,mean_loss,lr")?;
    for e in curve {
        writeln!(w, "{},{},{}", e.epoch, e.mean_loss, e.lr)?;
    }
    w.flush()?;
    Ok(())
}

/// Single-row evaluation report. Chamfer is reported scaled by 1e3
/// (table convention); the raw value is in `EvalReport`.
pub fn save_eval_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "chamfer_x1e3,mesh_accuracy_p90,completion_fraction,completion_threshold,pred_points,gt_points"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        report.chamfer_mean * 1e3,
        report.mesh_accuracy_p90,
        report.completion_fraction,
        report.completion_threshold,
        report.pred_points,
        report.gt_points
    )?;
    w.flush()?;
    Ok(())
}

/// `radius_factor,test_error_px` rows for the 2D receptive-field sweep.
pub fn save_radius_sweep(rows: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "radius_factor,test_error_px")?;
    for (r, e) in rows {
        writeln!(w, "{r},{e}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn samples_roundtrip() {
        let samples = vec![
            SdfSample {
                position: [0.1, -0.25, 3.0],
                sdf: 0.0125,
                weight: 1.0,
            },
            SdfSample {
                position: [1e-9, 2.5e8, -0.0],
                sdf: -0.05,
                weight: 0.05,
            },
        ];
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        save_samples(&samples, &path).unwrap();
        let loaded = load_samples(&path).unwrap();
        assert_eq!(loaded, samples);
    }

    #[test]
    fn samples_bad_header_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(load_samples(&path).is_err());
    }

    #[test]
    fn samples_bad_field_reports_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "x,y,z,sdf,weight\n1,2,3,oops,1\n").unwrap();
        match load_samples(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn report_and_sweep_write_headers() {
        let dir = tempdir().unwrap();
        let rp = dir.path().join("r.csv");
        save_eval_report(
            &EvalReport {
                chamfer_mean: 0.0001,
                mesh_accuracy_p90: 0.004,
                completion_fraction: 0.93,
                completion_threshold: 0.007,
                pred_points: 1000,
                gt_points: 900,
            },
            &rp,
        )
        .unwrap();
        let text = std::fs::read_to_string(&rp).unwrap();
        assert!(text.starts_with("chamfer_x1e3,"));
        assert!(text.contains("0.1,")); // 0.0001 * 1e3

        let sp = dir.path().join("sweep.csv");
        save_radius_sweep(&[(1.0, 2.5), (1.5, 1.25)], &sp).unwrap();
        let text = std::fs::read_to_string(&sp).unwrap();
        assert_eq!(text, "radius_factor,test_error_px\n1,2.5\n1.5,1.25\n");
    }
}
