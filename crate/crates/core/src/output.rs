//! CSV and JSON writers for sweep results and analytic grids.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`; undefined values are written as `NaN`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::analytic::{critical_disorder, localization_length_inverse};
use crate::config::OutputFormat;
use crate::ensemble::{Linkage, PhaseDiagramResult, PointRecord};
use crate::error::Result;

pub const CSV_HEADER: &str = "axis1,axis2,nu_mean,nu_stderr,ipr_avg_obc,ipr_avg_pbc,ipr_mid,gap_mean,\
e_mid_re_1,e_mid_re_2,e_mid_re_3,e_mid_re_4,e_mid_im_1,e_mid_im_2,e_mid_im_3,e_mid_im_4,rejects,failed";

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        x.to_string()
    }
}

fn record_fields(r: &PointRecord) -> Vec<String> {
    let mut out: Vec<String> = [r.nu_mean, r.nu_stderr, r.ipr_avg_obc, r.ipr_avg_pbc, r.ipr_mid, r.gap_mean]
        .into_iter()
        .chain(r.e_mid_re)
        .chain(r.e_mid_im)
        .map(fmt_f64)
        .collect();
    out.push(r.rejects.to_string());
    out.push(u8::from(r.failed).to_string());
    out
}

/// One row per grid point, axis1-major.
pub fn write_csv<W: Write>(result: &PhaseDiagramResult, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for p in &result.points {
        let mut row = vec![fmt_f64(p.axis1), fmt_f64(p.axis2)];
        row.extend(record_fields(&p.record));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json<W: Write>(result: &PhaseDiagramResult, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, result)?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<PhaseDiagramResult> {
    Ok(serde_json::from_reader(r)?)
}

/// Writes `<prefix>.csv` and/or `<prefix>.json` into `dir`.
pub fn emit_results(
    result: &PhaseDiagramResult,
    dir: &Path,
    prefix: &str,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = dir.join(format!("{prefix}.csv"));
        let mut f = BufWriter::new(File::create(&path)?);
        write_csv(result, &mut f)?;
        f.flush()?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = dir.join(format!("{prefix}.json"));
        let mut f = BufWriter::new(File::create(&path)?);
        write_json(result, &mut f)?;
        f.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// `Λ⁻¹` on a `γ × W` grid with `W₁ = r₁W`, `W₂ = r₂W`. No eigensolves.
pub fn write_loclen_csv<W: Write>(
    t_prime: f64,
    gammas: &[f64],
    ws: &[f64],
    linkage: Linkage,
    mut w: W,
) -> Result<()> {
    writeln!(w, "gamma,W,inv_loc_length")?;
    for &g in gammas {
        for &x in ws {
            let v = localization_length_inverse(t_prime, g, linkage.w1_ratio * x, linkage.w2_ratio * x);
            writeln!(w, "{},{},{}", fmt_f64(g), fmt_f64(x), fmt_f64(v))?;
        }
    }
    Ok(())
}

/// Critical disorder strengths, one row per root.
pub fn write_roots_csv<W: Write>(t_prime: f64, gammas: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "gamma,W_star")?;
    for &g in gammas {
        for root in critical_disorder(t_prime, g) {
            writeln!(w, "{},{}", fmt_f64(g), fmt_f64(root))?;
        }
    }
    Ok(())
}

/// Disorder-averaged middle-of-spectrum tracks against one swept value.
pub fn write_spectrum_csv<W: Write>(label: &str, rows: &[(f64, PointRecord)], mut w: W) -> Result<()> {
    writeln!(
        w,
        "{label},nu_mean,gap_mean,e_mid_re_1,e_mid_re_2,e_mid_re_3,e_mid_re_4,\
e_mid_im_1,e_mid_im_2,e_mid_im_3,e_mid_im_4,rejects,failed"
    )?;
    for (x, r) in rows {
        let mut row = vec![fmt_f64(*x), fmt_f64(r.nu_mean), fmt_f64(r.gap_mean)];
        row.extend(r.e_mid_re.iter().chain(&r.e_mid_im).map(|v| fmt_f64(*v)));
        row.push(r.rejects.to_string());
        row.push(u8::from(r.failed).to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Site densities; each column is one named profile.
pub fn write_profiles_csv<W: Write>(columns: &[(&str, &[f64])], mut w: W) -> Result<()> {
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(w, "site,cell,{}", names.join(","))?;
    let n = columns.iter().map(|c| c.1.len()).max().unwrap_or(0);
    for x in 0..n {
        let vals: Vec<String> = columns.iter().map(|c| fmt_f64(c.1.get(x).copied().unwrap_or(f64::NAN))).collect();
        writeln!(w, "{x},{},{}", x / 2, vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_exact() {
        assert_eq!(
            CSV_HEADER,
            "axis1,axis2,nu_mean,nu_stderr,ipr_avg_obc,ipr_avg_pbc,ipr_mid,gap_mean,e_mid_re_1,e_mid_re_2,e_mid_re_3,e_mid_re_4,e_mid_im_1,e_mid_im_2,e_mid_im_3,e_mid_im_4,rejects,failed"
        );
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 2.5e-17] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn loclen_grid_has_one_row_per_point() {
        let mut buf = Vec::new();
        write_loclen_csv(1.2, &[0.0, 0.5, 1.0], &[0.5, 1.0], Linkage::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == 3));
    }
}
