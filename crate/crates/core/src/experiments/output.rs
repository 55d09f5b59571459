//! CSV rendering; floats use nine significant digits.

use super::{ScanRow, TrajPoint};
use crate::peel::TracePoint;
use crate::stats::fmt_g9;

/// A record type with a fixed CSV layout.
pub trait Csv {
    const HEADER: &'static str;
    fn csv_fields(&self) -> Vec<String>;
}

impl Csv for ScanRow {
    const HEADER: &'static str = "k,n,r,m,trials,sat_count,p_hat,ci_lo,ci_hi,phi_pred,\
surplus_mean_scaled,surplus_var_scaled,core_n_mean,core_m_mean,empty_core_count";

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            self.n.to_string(),
            fmt_g9(self.r),
            self.m.to_string(),
            self.trials.to_string(),
            self.sat_count.to_string(),
            fmt_g9(self.p_hat),
            fmt_g9(self.ci_lo),
            fmt_g9(self.ci_hi),
            fmt_g9(self.phi_pred),
            fmt_g9(self.surplus_mean_scaled),
            fmt_g9(self.surplus_var_scaled),
            fmt_g9(self.core_n_mean),
            fmt_g9(self.core_m_mean),
            self.empty_core_count.to_string(),
        ]
    }
}

impl Csv for TrajPoint {
    const HEADER: &'static str = "tau,z1_mean,z2_mean,y1_theory,y2_theory";

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.tau.to_string(),
            fmt_g9(self.z1_mean),
            fmt_g9(self.z2_mean),
            fmt_g9(self.y1_theory),
            fmt_g9(self.y2_theory),
        ]
    }
}

impl Csv for TracePoint {
    const HEADER: &'static str = "tau,z1,z2";

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.tau.to_string(),
            self.z1.to_string(),
            self.z2.to_string(),
        ]
    }
}

/// Header line plus one line per record, each terminated by `\n`.
pub fn to_csv<T: Csv>(records: &[T]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(T::HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_fields().join(","));
        out.push('\n');
    }
    out
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    to_csv(rows)
}

pub fn traj_csv(points: &[TrajPoint]) -> String {
    to_csv(points)
}
