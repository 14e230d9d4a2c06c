//! Bit-exact text export of trajectories.

use std::io::{self, Write};

use crate::hybrid::Trajectory;

pub const CSV_HEADER: &str = "t,x,y,z,zone";
pub const CSV_HEADER_2D: &str = "t,x,y,zone";

/// Shortest-round-trip is not fixed-width; `{:.16e}` always gives 17
/// significant digits, which round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the dense samples of `traj` as `t,x,y,z,zone` rows (header first);
/// two-dimensional trajectories omit the `z` column.
pub fn write_csv(traj: &Trajectory, mut out: impl Write) -> io::Result<()> {
    let planar = traj.dim < 3;
    writeln!(out, "{}", if planar { CSV_HEADER_2D } else { CSV_HEADER })?;
    for s in &traj.samples {
        let (t, x, y) = (fmt_f64(s.t), fmt_f64(s.state[0]), fmt_f64(s.state[1]));
        if planar {
            writeln!(out, "{t},{x},{y},{}", s.zone)?;
        } else {
            writeln!(out, "{t},{x},{y},{},{}", fmt_f64(s.state[2]), s.zone)?;
        }
    }
    Ok(())
}

pub fn to_csv(traj: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}
