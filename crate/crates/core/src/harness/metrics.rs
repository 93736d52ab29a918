//! Tracking and saturation statistics over a logged run.

use super::{HarnessError, LogRecord};
use crate::quatmath::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    /// First time included in the window (s).
    pub window_start: f64,
    pub samples: usize,
    /// Per-axis `max |r − r_d|` over the window (m).
    pub max_abs_error: Vec3,
    /// Per-axis RMS position error over the window (m).
    pub rms_error: Vec3,
    /// Position error at the last sample (m).
    pub final_error: Vec3,
    pub roll_range_deg: (f64, f64),
    pub pitch_range_deg: (f64, f64),
    /// Fraction of window ticks with any channel saturated.
    pub saturation_duty: f64,
    /// Per-channel saturated fraction.
    pub channel_duty: [f64; 4],
}

/// Metrics over records with `t ≥ settle_s`.
pub fn compute_metrics(records: &[LogRecord], settle_s: f64) -> Result<MetricsSummary, HarnessError> {
    let window: Vec<&LogRecord> = records.iter().filter(|r| r.t >= settle_s).collect();
    let Some(last) = window.last() else {
        return Err(HarnessError::EmptyWindow { start: settle_s });
    };
    let n = window.len() as f64;
    let mut max_abs = Vec3::ZERO;
    let mut sq = Vec3::ZERO;
    let mut roll = (f64::INFINITY, f64::NEG_INFINITY);
    let mut pitch = (f64::INFINITY, f64::NEG_INFINITY);
    let mut any = 0usize;
    let mut per = [0usize; 4];
    for r in &window {
        let e = r.position_error();
        max_abs = Vec3::new(
            max_abs.x.max(e.x.abs()),
            max_abs.y.max(e.y.abs()),
            max_abs.z.max(e.z.abs()),
        );
        sq += e.hadamard(e);
        roll = (roll.0.min(r.euler_deg.x), roll.1.max(r.euler_deg.x));
        pitch = (pitch.0.min(r.euler_deg.y), pitch.1.max(r.euler_deg.y));
        if r.sat.iter().any(|s| *s) {
            any += 1;
        }
        for (c, s) in per.iter_mut().zip(r.sat) {
            *c += s as usize;
        }
    }
    Ok(MetricsSummary {
        window_start: settle_s,
        samples: window.len(),
        max_abs_error: max_abs,
        rms_error: (sq / n).map(f64::sqrt),
        final_error: last.position_error(),
        roll_range_deg: roll,
        pitch_range_deg: pitch,
        saturation_duty: any as f64 / n,
        channel_duty: per.map(|c| c as f64 / n),
    })
}

impl std::fmt::Display for MetricsSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let e = self.max_abs_error;
        let rms = self.rms_error;
        writeln!(f, "window_start_s   {}", self.window_start)?;
        writeln!(f, "samples          {}", self.samples)?;
        writeln!(f, "max_abs_err_m    {:.6} {:.6} {:.6}", e.x, e.y, e.z)?;
        writeln!(f, "rms_err_m        {:.6} {:.6} {:.6}", rms.x, rms.y, rms.z)?;
        let fe = self.final_error;
        writeln!(f, "final_err_m      {:.6} {:.6} {:.6}", fe.x, fe.y, fe.z)?;
        writeln!(f, "roll_deg         {:.3} .. {:.3}", self.roll_range_deg.0, self.roll_range_deg.1)?;
        writeln!(f, "pitch_deg        {:.3} .. {:.3}", self.pitch_range_deg.0, self.pitch_range_deg.1)?;
        writeln!(f, "saturation_duty  {:.4}", self.saturation_duty)?;
        let c = self.channel_duty;
        write!(f, "channel_duty     {:.4} {:.4} {:.4} {:.4}", c[0], c[1], c[2], c[3])
    }
}
