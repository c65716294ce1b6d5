use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluation::format_g;
use crate::volume::ComplexVolume;

/// Magnitudes of the azimuth-elevation slice at range `d`, row-major
/// `[elevation bin][azimuth]`.
pub fn slice_magnitudes(vol: &ComplexVolume, d: usize) -> Result<Vec<f64>> {
    let [_, _, nd] = vol.dims();
    if d >= nd {
        return Err(Error::InvalidParameter(format!(
            "range line {d} is outside the volume (0..{nd})"
        )));
    }
    Ok(vol.slice(d).iter().map(|c| c.norm()).collect())
}

/// Binary PGM (`P5`) of the slice magnitudes scaled so the slice maximum maps
/// to 255. The highest elevation bin is the top row.
pub fn heatmap_pgm(vol: &ComplexVolume, d: usize) -> Result<Vec<u8>> {
    let [n, a, _] = vol.dims();
    let mags = slice_magnitudes(vol, d)?;
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let mut out = format!("P5\n{a} {n}\n255\n").into_bytes();
    for row in (0..n).rev() {
        for v in &mags[row * a..(row + 1) * a] {
            let gray = if peak > 0.0 { (255.0 * v / peak).round() } else { 0.0 };
            out.push(gray as u8);
        }
    }
    Ok(out)
}

/// The slice magnitudes as CSV: a `bin,0,1,…` header, then one row per
/// elevation bin in ascending order.
pub fn heatmap_csv(vol: &ComplexVolume, d: usize) -> Result<String> {
    let [n, a, _] = vol.dims();
    let mags = slice_magnitudes(vol, d)?;
    let mut out = String::from("bin");
    for i in 0..a {
        let _ = write!(out, ",{i}");
    }
    out.push('\n');
    for row in 0..n {
        out.push_str(&row.to_string());
        for v in &mags[row * a..(row + 1) * a] {
            out.push(',');
            out.push_str(&format_g(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn pgm_scales_to_slice_max() {
        let mut vol = ComplexVolume::zeros(3, 2, 2);
        vol.set_slice(1, &[C64::new(0.0, 2.0), C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default(), C64::new(0.5, 0.0)]);
        let pgm = heatmap_pgm(&vol, 1).unwrap();
        let header = b"P5\n2 3\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        // top row is bin 2
        assert_eq!(&pgm[header.len()..], &[0, 64, 0, 0, 255, 128]);
        assert!(heatmap_pgm(&vol, 2).is_err());
    }

    #[test]
    fn zero_slice_is_black() {
        let vol = ComplexVolume::zeros(2, 2, 1);
        let pgm = heatmap_pgm(&vol, 0).unwrap();
        assert!(pgm.ends_with(&[0, 0, 0, 0]));
    }

    #[test]
    fn csv_rows_per_bin() {
        let mut vol = ComplexVolume::zeros(2, 2, 1);
        vol.set_slice(0, &[C64::new(3.0, 4.0), C64::default(), C64::default(), C64::new(0.25, 0.0)]);
        assert_eq!(heatmap_csv(&vol, 0).unwrap(), "bin,0,1\n0,5,0\n1,0,0.25\n");
    }
}
