use std::io::Write;
use std::path::Path;

use super::StepLog;

pub const METRICS_HEADER: &str = "step,elapsed_s,lr,total,basic,ae,entropy,xent,best_total";

/// Writes one row per logged step.
pub fn write_metrics(path: &Path, log: &[StepLog]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{METRICS_HEADER}")?;
    for s in log {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.step,
            s.elapsed_s,
            s.lr,
            s.loss.total,
            s.loss.basic,
            s.ae,
            s.loss.entropy,
            s.loss.cross_entropy,
            s.best_total
        )?;
    }
    w.flush()
}
