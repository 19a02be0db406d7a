//! CSV result tables.
//!
//! Sweep rows: `ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber`.
//! Degradation rows: `modulation,detector,bits,m,k,target_ber,degradation_db,achieved`,
//! with an empty `degradation_db` and `achieved = false` when the curve
//! never crosses the target.

use std::io::{Read, Write};

use crate::detector::DetectorKind;
use crate::modem::Modulation;
use crate::quantizer::Resolution;
use crate::simulator::BerCurve;

use super::CliError;

pub const SWEEP_HEADER: [&str; 9] = [
    "ebn0_db",
    "bits",
    "detector",
    "modulation",
    "m",
    "k",
    "bit_errors",
    "bits_total",
    "ber",
];

pub const DEGRADATION_HEADER: [&str; 8] = [
    "modulation",
    "detector",
    "bits",
    "m",
    "k",
    "target_ber",
    "degradation_db",
    "achieved",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ebn0_db: f64,
    pub bits: Resolution,
    pub detector: DetectorKind,
    pub modulation: Modulation,
    pub m: usize,
    pub k: usize,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRow {
    pub modulation: Modulation,
    pub detector: DetectorKind,
    pub bits: Resolution,
    pub m: usize,
    pub k: usize,
    pub target_ber: f64,
    pub degradation_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Sweep(Vec<SweepRow>),
    Degradation(Vec<DegradationRow>),
}

/// Grid values are rounded to 1e-9 dB so accumulated binary error never
/// reaches the file.
pub fn format_db(v: f64) -> String {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

pub fn sweep_rows(curve: &BerCurve) -> Vec<SweepRow> {
    let c = &curve.config;
    curve
        .points
        .iter()
        .map(|p| SweepRow {
            ebn0_db: p.ebn0_db,
            bits: c.quantizer_bits,
            detector: c.detector,
            modulation: c.modulation,
            m: c.m_antennas,
            k: c.k_users,
            bit_errors: p.bit_errors,
            bits_total: p.bits_total,
            ber: p.ber,
        })
        .collect()
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(io_err)?;
    for r in rows {
        w.write_record([
            format_db(r.ebn0_db),
            r.bits.to_string(),
            r.detector.to_string(),
            r.modulation.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.bit_errors.to_string(),
            r.bits_total.to_string(),
            format!("{:e}", r.ber),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_degradation<W: Write>(out: W, rows: &[DegradationRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DEGRADATION_HEADER).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.modulation.to_string(),
            r.detector.to_string(),
            r.bits.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            format!("{:e}", r.target_ber),
            r.degradation_db
                .map(|d| format!("{d:.4}"))
                .unwrap_or_default(),
            r.degradation_db.is_some().to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn malformed(row: usize, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("malformed CSV at row {row}: {reason}"))
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    row: usize,
) -> Result<T, CliError> {
    let raw = rec.get(idx).unwrap_or("");
    raw.trim()
        .parse::<T>()
        .map_err(|_| malformed(row, format!("column `{name}` has invalid value `{raw}`")))
}

/// Reads a sweep or degradation table, detecting the schema from the
/// header. Row numbers in errors count the header as row 1.
pub fn read_table<R: Read>(input: R) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(1, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let is_sweep = header.iter().map(String::as_str).eq(SWEEP_HEADER);
    let is_degradation = header.iter().map(String::as_str).eq(DEGRADATION_HEADER);
    if !is_sweep && !is_degradation {
        return Err(malformed(
            1,
            format!("unrecognized header `{}`", header.join(",")),
        ));
    }

    let mut sweep = Vec::new();
    let mut degradation = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| malformed(row, e))?;
        if rec.len() != header.len() {
            return Err(malformed(
                row,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        if is_sweep {
            let r = SweepRow {
                ebn0_db: field(&rec, 0, "ebn0_db", row)?,
                bits: field(&rec, 1, "bits", row)?,
                detector: field(&rec, 2, "detector", row)?,
                modulation: field(&rec, 3, "modulation", row)?,
                m: field(&rec, 4, "m", row)?,
                k: field(&rec, 5, "k", row)?,
                bit_errors: field(&rec, 6, "bit_errors", row)?,
                bits_total: field(&rec, 7, "bits_total", row)?,
                ber: field(&rec, 8, "ber", row)?,
            };
            if !r.ebn0_db.is_finite() || !(0.0..=1.0).contains(&r.ber) {
                return Err(malformed(
                    row,
                    "ebn0_db must be finite and ber must lie in [0, 1]",
                ));
            }
            sweep.push(r);
        } else {
            let achieved: bool = field(&rec, 7, "achieved", row)?;
            let degradation_db = if achieved {
                let d: f64 = field(&rec, 6, "degradation_db", row)?;
                if !d.is_finite() {
                    return Err(malformed(row, "degradation_db must be finite"));
                }
                Some(d)
            } else {
                None
            };
            degradation.push(DegradationRow {
                modulation: field(&rec, 0, "modulation", row)?,
                detector: field(&rec, 1, "detector", row)?,
                bits: field(&rec, 2, "bits", row)?,
                m: field(&rec, 3, "m", row)?,
                k: field(&rec, 4, "k", row)?,
                target_ber: field(&rec, 5, "target_ber", row)?,
                degradation_db,
            });
        }
    }
    let empty = if is_sweep {
        sweep.is_empty()
    } else {
        degradation.is_empty()
    };
    if empty {
        return Err(CliError::Config(
            "CSV has a header but no data rows".to_string(),
        ));
    }
    Ok(if is_sweep {
        Table::Sweep(sweep)
    } else {
        Table::Degradation(degradation)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_sweep() -> Vec<SweepRow> {
        vec![
            SweepRow {
                ebn0_db: -1.5,
                bits: Resolution::Finite(2),
                detector: DetectorKind::Zf,
                modulation: Modulation::Qam16,
                m: 100,
                k: 10,
                bit_errors: 12,
                bits_total: 4000,
                ber: 0.003,
            },
            SweepRow {
                ebn0_db: 0.0,
                bits: Resolution::Infinite,
                detector: DetectorKind::Mmse,
                modulation: Modulation::Qpsk,
                m: 100,
                k: 10,
                bit_errors: 0,
                bits_total: 4000,
                ber: 0.0,
            },
        ]
    }

    #[test]
    fn sweep_layout_is_exact() {
        let mut buf = Vec::new();
        write_sweep(&mut buf, &sample_sweep()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber"
        );
        assert_eq!(lines[1], "-1.5,2,zf,16qam,100,10,12,4000,3e-3");
        assert_eq!(lines[2], "0,inf,mmse,qpsk,100,10,0,4000,0e0");
    }

    #[test]
    fn sweep_round_trip() {
        let rows = sample_sweep();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &rows).unwrap();
        assert_eq!(read_table(buf.as_slice()).unwrap(), Table::Sweep(rows));
    }

    #[test]
    fn degradation_layout_and_round_trip() {
        let rows = vec![
            DegradationRow {
                modulation: Modulation::Qpsk,
                detector: DetectorKind::Zf,
                bits: Resolution::Finite(1),
                m: 100,
                k: 10,
                target_ber: 1e-4,
                degradation_db: None,
            },
            DegradationRow {
                modulation: Modulation::Qpsk,
                detector: DetectorKind::Zf,
                bits: Resolution::Infinite,
                m: 100,
                k: 10,
                target_ber: 1e-4,
                degradation_db: Some(0.0),
            },
        ];
        let mut buf = Vec::new();
        write_degradation(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().collect::<Vec<_>>(),
            vec![
                "modulation,detector,bits,m,k,target_ber,degradation_db,achieved",
                "qpsk,zf,1,100,10,1e-4,,false",
                "qpsk,zf,inf,100,10,1e-4,0.0000,true",
            ]
        );
        assert_eq!(
            read_table(buf.as_slice()).unwrap(),
            Table::Degradation(rows)
        );
    }

    #[test]
    fn format_db_is_clean() {
        assert_eq!(format_db(-16.0), "-16");
        assert_eq!(format_db(0.1 + 0.2), "0.3");
        assert_eq!(format_db(-0.0), "0");
    }

    #[test]
    fn malformed_rows_report_row_number() {
        let text = "ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber\n0,1,zf,qpsk,100,10,1,10,0.1\n1,1,zf,qpsk,abc,10,1,10,0.1\n";
        match read_table(text.as_bytes()) {
            Err(CliError::Config(msg)) => {
                assert!(msg.contains("row 3") && msg.contains("`m`"), "{msg}")
            }
            other => panic!("{other:?}"),
        }
        let short = "ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber\n0,1,zf\n";
        assert!(
            matches!(read_table(short.as_bytes()), Err(CliError::Config(m)) if m.contains("row 2"))
        );
    }

    #[test]
    fn empty_body_and_unknown_header_rejected() {
        let header_only = "ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber\n";
        assert!(matches!(
            read_table(header_only.as_bytes()),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            read_table("".as_bytes()),
            Err(CliError::Config(_))
        ));
        assert!(
            matches!(read_table("a,b\n1,2\n".as_bytes()), Err(CliError::Config(m)) if m.contains("row 1"))
        );
    }
}
