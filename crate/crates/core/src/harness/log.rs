//! Per-tick CSV flight log.
//!
//! Layout: one `#` header line carrying the format version and scenario,
//! a CSV header row with the names in [`LOG_COLUMNS`], one row per control
//! tick, and an optional `# termination=...` trailer. Units are SI with
//! angles in radians except the `*_deg` Euler columns (ZYX convention).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::HarnessError;
use crate::quatmath::Vec3;

pub const LOG_VERSION: u32 = 1;

pub const LOG_COLUMNS: [&str; 58] = [
    "t_s",
    "r1_m", "r2_m", "r3_m",
    "v1_mps", "v2_mps", "v3_mps",
    "qw", "qx", "qy", "qz",
    "roll_deg", "pitch_deg", "yaw_deg",
    "w1_radps", "w2_radps", "w3_radps",
    "est_r1_m", "est_r2_m", "est_r3_m",
    "est_v1_mps", "est_v2_mps", "est_v3_mps",
    "est_qw", "est_qx", "est_qy", "est_qz",
    "est_w1_radps", "est_w2_radps", "est_w3_radps",
    "est_qres",
    "rd1_m", "rd2_m", "rd3_m",
    "vd1_mps", "vd2_mps", "vd3_mps",
    "psid_rad",
    "f_cmd_N", "tau1_cmd_Nm", "tau2_cmd_Nm", "tau3_cmd_Nm",
    "qdw", "qdx", "qdy", "qdz",
    "u1_cmd", "u2_cmd", "u3_cmd", "u4_cmd",
    "sat1", "sat2", "sat3", "sat4",
    "f_app_N",
    "tau1_app_Nm", "tau2_app_Nm", "tau3_app_Nm",
];

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogRecord {
    pub t: f64,
    pub r: Vec3,
    pub v: Vec3,
    pub q: [f64; 4],
    /// (roll, pitch, yaw) in degrees.
    pub euler_deg: Vec3,
    pub omega: Vec3,
    pub est_r: Vec3,
    pub est_v: Vec3,
    pub est_q: [f64; 4],
    pub est_omega: Vec3,
    pub est_qres: f64,
    pub r_d: Vec3,
    pub v_d: Vec3,
    pub psi_d: f64,
    pub f_cmd: f64,
    pub tau_cmd: Vec3,
    pub q_d: [f64; 4],
    pub u: [f64; 4],
    pub sat: [bool; 4],
    pub f_app: f64,
    pub tau_app: Vec3,
}

impl LogRecord {
    /// Position error `r − r_d` of the true state.
    pub fn position_error(&self) -> Vec3 {
        self.r - self.r_d
    }

    fn values(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(LOG_COLUMNS.len() + 2);
        let mut f = |x: f64| out.push(x.to_string());
        f(self.t);
        for v in [self.r, self.v] {
            v.to_array().into_iter().for_each(&mut f);
        }
        self.q.into_iter().for_each(&mut f);
        for v in [self.euler_deg, self.omega, self.est_r, self.est_v] {
            v.to_array().into_iter().for_each(&mut f);
        }
        self.est_q.into_iter().for_each(&mut f);
        self.est_omega.to_array().into_iter().for_each(&mut f);
        f(self.est_qres);
        for v in [self.r_d, self.v_d] {
            v.to_array().into_iter().for_each(&mut f);
        }
        f(self.psi_d);
        f(self.f_cmd);
        self.tau_cmd.to_array().into_iter().for_each(&mut f);
        self.q_d.into_iter().for_each(&mut f);
        self.u.into_iter().for_each(&mut f);
        out.extend(self.sat.iter().map(|s| if *s { "1" } else { "0" }.to_string()));
        out.push(self.f_app.to_string());
        out.extend(self.tau_app.to_array().iter().map(f64::to_string));
        out
    }

    fn from_values(vals: &[f64]) -> Self {
        let mut it = vals.iter().copied();
        let mut n = || it.next().expect("column count checked");
        let v3 = |n: &mut dyn FnMut() -> f64| Vec3::new(n(), n(), n());
        let q4 = |n: &mut dyn FnMut() -> f64| [n(), n(), n(), n()];
        let t = n();
        let r = v3(&mut n);
        let v = v3(&mut n);
        let q = q4(&mut n);
        let euler_deg = v3(&mut n);
        let omega = v3(&mut n);
        let est_r = v3(&mut n);
        let est_v = v3(&mut n);
        let est_q = q4(&mut n);
        let est_omega = v3(&mut n);
        let est_qres = n();
        let r_d = v3(&mut n);
        let v_d = v3(&mut n);
        let psi_d = n();
        let f_cmd = n();
        let tau_cmd = v3(&mut n);
        let q_d = q4(&mut n);
        let u = q4(&mut n);
        let s = q4(&mut n);
        let sat = s.map(|x| x != 0.0);
        let f_app = n();
        let tau_app = v3(&mut n);
        Self {
            t,
            r,
            v,
            q,
            euler_deg,
            omega,
            est_r,
            est_v,
            est_q,
            est_omega,
            est_qres,
            r_d,
            v_d,
            psi_d,
            f_cmd,
            tau_cmd,
            q_d,
            u,
            sat,
            f_app,
            tau_app,
        }
    }
}

fn log_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Log(e.to_string())
}

/// Incremental log writer.
pub struct LogWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, scenario: &str) -> Result<Self, HarnessError> {
        writeln!(out, "# fwmav-log v{LOG_VERSION} scenario={scenario} euler=ZYX units=SI")?;
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(LOG_COLUMNS).map_err(log_err)?;
        Ok(Self { csv })
    }

    pub fn write(&mut self, rec: &LogRecord) -> Result<(), HarnessError> {
        self.csv.write_record(rec.values()).map_err(log_err)
    }

    /// Append the trailer line and flush.
    pub fn finish(self, termination: &str) -> Result<W, HarnessError> {
        let mut out = self.csv.into_inner().map_err(log_err)?;
        writeln!(out, "# termination={termination}")?;
        out.flush()?;
        Ok(out)
    }
}

/// Write a complete log.
pub fn write_log<W: Write>(
    out: W,
    scenario: &str,
    records: &[LogRecord],
    termination: &str,
) -> Result<W, HarnessError> {
    let mut w = LogWriter::new(out, scenario)?;
    for r in records {
        w.write(r)?;
    }
    w.finish(termination)
}

/// Parse a log written by [`write_log`] or [`LogWriter`].
pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRecord>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(input);
    let headers = rdr.headers().map_err(log_err)?.clone();
    let expected = LOG_COLUMNS;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(HarnessError::Log("unexpected column header".into()));
    }
    let mut out = Vec::new();
    let mut vals = Vec::with_capacity(expected.len());
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(log_err)?;
        vals.clear();
        for (cell, name) in row.iter().zip(&expected) {
            let x: f64 = cell.parse().map_err(|_| {
                HarnessError::Log(format!("row {}: column {name}: bad number `{cell}`", i + 1))
            })?;
            vals.push(x);
        }
        out.push(LogRecord::from_values(&vals));
    }
    Ok(out)
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogRecord>, HarnessError> {
    read_log(BufReader::new(File::open(path)?))
}

/// Buffered file-backed writer.
pub fn create_log_file(path: &Path, scenario: &str) -> Result<LogWriter<BufWriter<File>>, HarnessError> {
    LogWriter::new(BufWriter::new(File::create(path)?), scenario)
}
