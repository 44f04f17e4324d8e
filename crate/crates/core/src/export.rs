//! Plain CSV export of trajectories. Every number is written with 17
//! significant digits so files round-trip exactly.

use std::io::{self, Write};

use crate::eulerian::EulerianTrajectory;
use crate::flow_map::FlowMap;
use crate::grid::GridFunction;
use crate::systems::SystemTrajectory;
use crate::temple::TempleTrajectory;

/// `{:.16e}`: 17 significant digits.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(out: &mut impl Write, fields: &[f64]) -> io::Result<()> {
    let line: Vec<String> = fields.iter().map(|&v| number(v)).collect();
    writeln!(out, "{}", line.join(","))
}

/// Header `t,x,rho`; one row per snapshot and cell centre.
pub fn write_density_csv(out: &mut impl Write, traj: &EulerianTrajectory) -> io::Result<()> {
    writeln!(out, "t,x,rho")?;
    for (rho, &t) in traj.snapshots.iter().zip(&traj.times) {
        write_cells(out, t, &[rho])?;
    }
    Ok(())
}

/// Header `t,x,eta,v`.
pub fn write_temple_csv(out: &mut impl Write, traj: &TempleTrajectory) -> io::Result<()> {
    writeln!(out, "t,x,eta,v")?;
    for (s, &t) in traj.states.iter().zip(&traj.times) {
        write_cells(out, t, &[&s.eta, &s.v])?;
    }
    Ok(())
}

/// Header `t,x,gamma`; one row per snapshot and label edge.
pub fn write_flow_map_csv(out: &mut impl Write, maps: &[FlowMap]) -> io::Result<()> {
    writeln!(out, "t,x,gamma")?;
    for m in maps {
        for (&x, &g) in m.x.iter().zip(&m.gamma) {
            row(out, &[m.t, x, g])?;
        }
    }
    Ok(())
}

/// Header `t,x,eta,w,v`.
pub fn write_system_csv(out: &mut impl Write, traj: &SystemTrajectory) -> io::Result<()> {
    writeln!(out, "t,x,eta,w,v")?;
    for (s, &t) in traj.states.iter().zip(&traj.times) {
        write_cells(out, t, &[&s.eta, &s.w, &s.v])?;
    }
    Ok(())
}

fn write_cells(out: &mut impl Write, t: f64, fields: &[&GridFunction]) -> io::Result<()> {
    let mesh = fields[0];
    let mut buf = Vec::with_capacity(fields.len() + 2);
    for i in 0..mesh.len() {
        buf.clear();
        buf.push(t);
        buf.push(mesh.center(i));
        buf.extend(fields.iter().map(|f| f.values[i]));
        row(out, &buf)?;
    }
    Ok(())
}
