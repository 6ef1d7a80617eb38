//! Trajectory artifacts: diagnostics JSONL, numbered curve snapshots, a
//! summary JSON and optional SVG frames.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::{hausdorff, ClosedCurve};
use crate::error::{Error, Result};
use crate::flow::{ComparisonRow, Diagnostics, FlowTrajectory, Halt};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const SVG_FILE: &str = "frames.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub k: usize,
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEnergies {
    #[serde(rename = "P_phi")]
    pub p_phi: f64,
    #[serde(rename = "E_elastic")]
    pub e_elastic: f64,
    #[serde(rename = "F_total")]
    pub f_total: f64,
    pub area: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// "flat_flow" or "reference".
    pub solver: String,
    pub step: f64,
    pub steps_completed: usize,
    pub final_time: f64,
    pub completed: bool,
    /// "completed" or the halt kind.
    pub exit_reason: String,
    pub halt: Option<Halt>,
    #[serde(rename = "final")]
    pub final_energies: FinalEnergies,
    pub hausdorff_to_initial: f64,
    pub tube_exit_time: Option<f64>,
    pub snapshots: Vec<SnapshotEntry>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

/// One JSON object per line.
pub fn diagnostics_jsonl(diags: &[Diagnostics]) -> String {
    let mut s = String::new();
    for d in diags {
        s.push_str(&serde_json::to_string(d).expect("diagnostics serialize"));
        s.push('\n');
    }
    s
}

pub fn summarize(traj: &FlowTrajectory, solver: &str) -> Summary {
    let last = traj.diagnostics.last().expect("trajectory has an initial record");
    let snapshots = traj
        .times
        .iter()
        .map(|&t| {
            let k = (t / traj.step).round() as usize;
            SnapshotEntry { k, t, file: format!("{SNAPSHOT_DIR}/snapshot_{k:06}.json") }
        })
        .collect();
    Summary {
        solver: solver.into(),
        step: traj.step,
        steps_completed: last.k,
        final_time: last.t,
        completed: traj.completed(),
        exit_reason: match &traj.halt {
            None => "completed".into(),
            Some(h) => serde_json::to_value(h.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        },
        halt: traj.halt.clone(),
        final_energies: FinalEnergies {
            p_phi: last.p_phi,
            e_elastic: last.e_elastic,
            f_total: last.free_energy(),
            area: last.area,
            length: last.length,
        },
        hausdorff_to_initial: hausdorff(&traj.curves[0], traj.last_curve()),
        tube_exit_time: traj.tube_exit_time,
        snapshots,
    }
}

/// Writes every artifact of `traj` into `dir` (created if missing).
pub fn write_trajectory(dir: &Path, traj: &FlowTrajectory, solver: &str, svg: bool) -> Result<Summary> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    let path = dir.join(DIAGNOSTICS_FILE);
    let mut out = fs::File::create(&path).map_err(io_err(&path))?;
    out.write_all(diagnostics_jsonl(&traj.diagnostics).as_bytes()).map_err(io_err(&path))?;
    let summary = summarize(traj, solver);
    for (entry, curve) in summary.snapshots.iter().zip(&traj.curves) {
        let p = dir.join(&entry.file);
        fs::write(&p, curve.to_json()).map_err(io_err(&p))?;
    }
    let p = dir.join(SUMMARY_FILE);
    fs::write(&p, serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(io_err(&p))?;
    if svg {
        let p = dir.join(SVG_FILE);
        fs::write(&p, svg_frames(&traj.curves)).map_err(io_err(&p))?;
    }
    Ok(summary)
}

/// Reads back a trajectory written by [`write_trajectory`].
pub fn read_trajectory(dir: &Path) -> Result<FlowTrajectory> {
    let p = dir.join(SUMMARY_FILE);
    let summary: Summary = serde_json::from_str(&fs::read_to_string(&p).map_err(io_err(&p))?)
        .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    let mut times = Vec::new();
    let mut curves = Vec::new();
    for entry in &summary.snapshots {
        let p = dir.join(&entry.file);
        curves.push(ClosedCurve::from_json(&fs::read_to_string(&p).map_err(io_err(&p))?)?);
        times.push(entry.t);
    }
    if curves.is_empty() {
        return Err(Error::Io(format!("{}: no snapshots", dir.display())));
    }
    let p = dir.join(DIAGNOSTICS_FILE);
    let diagnostics = fs::read_to_string(&p)
        .map_err(io_err(&p))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Io(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<Diagnostics>>>()?;
    Ok(FlowTrajectory {
        step: summary.step,
        times,
        curves,
        diagnostics,
        halt: summary.halt,
        tube_exit_time: summary.tube_exit_time,
    })
}

/// CSV with header `t_a,t_b,hausdorff,l2_height` (empty when undefined).
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("t_a,t_b,hausdorff,l2_height\n");
    for r in rows {
        let l2 = r.l2_height.map(|v| format!("{v:e}")).unwrap_or_default();
        writeln!(s, "{:e},{:e},{:e},{l2}", r.t_a, r.t_b, r.hausdorff).unwrap();
    }
    s
}

/// One polyline per snapshot, later frames drawn darker.
pub fn svg_frames(curves: &[ClosedCurve]) -> String {
    let (mut lo, mut hi) = (crate::Vec2::repeat(f64::INFINITY), crate::Vec2::repeat(f64::NEG_INFINITY));
    for p in curves.iter().flat_map(|c| c.nodes()) {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let pad = 0.05 * (hi - lo).max();
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {w:.6} {h:.6}\" width=\"600\" height=\"{:.0}\">\n",
        lo.x - pad,
        -(hi.y + pad),
        600.0 * h / w
    );
    let m = curves.len().max(2) - 1;
    for (i, c) in curves.iter().enumerate() {
        let grey = 200 - (200 * i / m);
        let pts: Vec<String> = c.nodes().iter().map(|p| format!("{:.6},{:.6}", p.x, -p.y)).collect();
        writeln!(
            s,
            "<polygon fill=\"none\" stroke=\"rgb({grey},{grey},{grey})\" stroke-width=\"{:.6}\" points=\"{}\"/>",
            0.003 * w,
            pts.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::run_flat_flow;
    use crate::step::StepConfig;
    use crate::Anisotropy;

    #[test]
    fn round_trip() {
        let e = ClosedCurve::ellipse(1.1, 1.0 / 1.1, 64).unwrap();
        let traj = run_flat_flow(&e, &StepConfig::new(2e-3, 0.1, Anisotropy::Euclidean), 6e-3, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let s = write_trajectory(dir.path(), &traj, "flat_flow", true).unwrap();
        assert_eq!(s.exit_reason, "completed");
        assert_eq!(s.snapshots.iter().map(|e| e.k).collect::<Vec<_>>(), vec![0, 2, 3]);
        let back = read_trajectory(dir.path()).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.diagnostics, traj.diagnostics);
        for (a, b) in back.curves.iter().zip(&traj.curves) {
            assert_eq!(a.nodes(), b.nodes());
        }
        assert!(fs::read_to_string(dir.path().join(SVG_FILE)).unwrap().matches("<polygon").count() == 3);
    }
}
