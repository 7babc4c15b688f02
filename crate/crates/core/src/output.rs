//! CSV persistence and gnuplot script emission.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! parsing a field gives back the in-memory value bit for bit.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::config::PlotKind;
use crate::error::Error;
use crate::integrators::TimeSeries;
use crate::vehicle::{ForcingSample, StateVector, STATE_DIM, WHEELS};

pub const SERIES_HEADER: &str = "t,z1,z1dot,z2,z2dot,zk,zkdot,phi,phidot,eta1,eta2,eta3,eta4";

pub fn write_series_csv<W: Write>(series: &TimeSeries, mut out: W) -> io::Result<()> {
    let mut line = String::with_capacity(256);
    writeln!(out, "{SERIES_HEADER}")?;
    for ((t, x), f) in series
        .times
        .iter()
        .zip(&series.states)
        .zip(&series.forcings)
    {
        line.clear();
        write!(line, "{t}").unwrap();
        for v in x.0.iter().chain(&f.eta) {
            write!(line, ",{v}").unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn series_csv_bytes(series: &TimeSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    write_series_csv(series, &mut buf).expect("writing to memory");
    buf
}

/// Reads a file written by [`write_series_csv`]. Wheel rates are not stored
/// and come back as zero.
pub fn read_series_csv(text: &str) -> Result<TimeSeries, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SERIES_HEADER) => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut series = TimeSeries {
        sample_stride: 1,
        ..Default::default()
    };
    for (n, line) in lines.enumerate() {
        let fields = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| format!("row {}: {e}", n + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if fields.len() != 1 + STATE_DIM + WHEELS {
            return Err(format!("row {}: {} fields", n + 1, fields.len()));
        }
        let mut state = StateVector::ZERO;
        state.0.copy_from_slice(&fields[1..=STATE_DIM]);
        let mut forcing = ForcingSample::ZERO;
        forcing.eta.copy_from_slice(&fields[1 + STATE_DIM..]);
        series.times.push(fields[0]);
        series.states.push(state);
        series.forcings.push(forcing);
    }
    Ok(series)
}

/// A body drawn in the plots: label, colour and its displacement/velocity
/// columns (1-based, as gnuplot counts them).
struct Trace {
    label: &'static str,
    colour: &'static str,
    displacement: usize,
    velocity: usize,
}

const TRACES: [Trace; 3] = [
    Trace {
        label: "carcass",
        colour: "red",
        displacement: 6,
        velocity: 7,
    },
    Trace {
        label: "1st bogie",
        colour: "blue",
        displacement: 2,
        velocity: 3,
    },
    Trace {
        label: "2nd bogie",
        colour: "green",
        displacement: 4,
        velocity: 5,
    },
];

/// Gnuplot script plotting `csv` (path as it should appear in the script).
pub fn plot_script(series: &TimeSeries, csv: &str, kind: PlotKind) -> Result<String, Error> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let csv = csv.replace('\'', "''");
    let stem = Path::new(&csv).with_extension("");
    let image = format!("{}-{}.png", stem.display(), kind_name(kind));

    let mut s = String::new();
    writeln!(s, "# railsim {} plot of {csv}", kind_name(kind)).unwrap();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set terminal pngcairo size 1200,800").unwrap();
    writeln!(s, "set output '{image}'").unwrap();
    writeln!(s, "set grid").unwrap();
    match kind {
        PlotKind::Timeseries => {
            writeln!(s, "set multiplot layout 2,1").unwrap();
            for (title, ylabel, column) in [
                (
                    "Displacements",
                    "displacement, m",
                    (|t: &Trace| t.displacement) as fn(&Trace) -> usize,
                ),
                ("Velocities", "velocity, m/s", |t: &Trace| t.velocity),
            ] {
                writeln!(s, "set title '{title}'").unwrap();
                writeln!(s, "set xlabel 't, s'").unwrap();
                writeln!(s, "set ylabel '{ylabel}'").unwrap();
                let parts: Vec<String> = TRACES
                    .iter()
                    .enumerate()
                    .map(|(i, tr)| {
                        let file = if i == 0 {
                            format!("'{csv}'")
                        } else {
                            "''".into()
                        };
                        format!(
                            "{file} every ::1 using 1:{} with lines lc rgb '{}' title '{}'",
                            column(tr),
                            tr.colour,
                            tr.label
                        )
                    })
                    .collect();
                writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
            }
            writeln!(s, "unset multiplot").unwrap();
        }
        PlotKind::Phase => {
            writeln!(s, "set multiplot layout 1,3").unwrap();
            for tr in &TRACES {
                writeln!(s, "set title '{} phase diagram'", capitalise(tr.label)).unwrap();
                writeln!(s, "set xlabel 'displacement, m'").unwrap();
                writeln!(s, "set ylabel 'velocity, m/s'").unwrap();
                writeln!(
                    s,
                    "plot '{csv}' every ::1 using {}:{} with lines lc rgb '{}' title '{}'",
                    tr.displacement, tr.velocity, tr.colour, tr.label
                )
                .unwrap();
            }
            writeln!(s, "unset multiplot").unwrap();
        }
    }
    Ok(s)
}

/// Writes the plot script to `script`; nothing is written on error.
pub fn emit_plot(series: &TimeSeries, csv: &Path, kind: PlotKind, script: &Path) -> io::Result<()> {
    let text = plot_script(series, &csv.display().to_string(), kind)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    std::fs::write(script, text)
}

pub fn kind_name(kind: PlotKind) -> &'static str {
    match kind {
        PlotKind::Timeseries => "timeseries",
        PlotKind::Phase => "phase",
    }
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}
