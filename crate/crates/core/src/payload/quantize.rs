use serde::{Deserialize, Serialize};

use super::PayloadError;

/// Affine integer codes for one vector: `value ≈ offset + scale·code`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantized {
    pub codes: Vec<u16>,
    pub bits: u8,
    pub scale: f32,
    pub offset: f32,
}

pub(crate) fn check_bits(bits: u8) -> Result<u16, PayloadError> {
    match bits {
        8 => Ok(u8::MAX as u16),
        16 => Ok(u16::MAX),
        _ => Err(PayloadError::Invalid(format!(
            "quantization supports 8 or 16 bits, not {bits}"
        ))),
    }
}

fn value(offset: f32, scale: f32, code: u16) -> f64 {
    offset as f64 + scale as f64 * code as f64
}

/// Largest `f32` not above `x`.
fn f32_floor(x: f64) -> f32 {
    let r = x as f32;
    if r as f64 > x {
        r.next_down()
    } else {
        r
    }
}

/// Min/max affine quantization.
///
/// `offset` is the largest `f32` not above `min(z)` and `scale` the smallest
/// `f32` whose grid reaches `max(z)`, so every component lies inside the grid
/// and dequantizes to within `scale/2`. A constant vector gets `scale = 0`,
/// all-zero codes and `offset` equal to the constant when the constant is
/// an `f32`; otherwise it goes through the general grid.
pub fn quantize(z: &[f64], bits: u8) -> Result<Quantized, PayloadError> {
    let levels = check_bits(bits)?;
    if z.is_empty() {
        return Err(PayloadError::Invalid(
            "cannot quantize an empty vector".into(),
        ));
    }
    if let Some(i) = z
        .iter()
        .position(|v| !v.is_finite() || v.abs() > f32::MAX as f64)
    {
        return Err(PayloadError::Invalid(format!(
            "component {i} is {} and has no f32 code",
            z[i]
        )));
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi && (lo as f32) as f64 == lo {
        return Ok(Quantized {
            codes: vec![0; z.len()],
            bits,
            scale: 0.0,
            offset: lo as f32,
        });
    }
    let offset = f32_floor(lo);
    let mut scale = ((hi - offset as f64) / levels as f64) as f32;
    while value(offset, scale, levels) < hi {
        scale = scale.next_up();
    }
    let codes = z
        .iter()
        .map(|&v| {
            let c = ((v - offset as f64) / scale as f64)
                .round()
                .clamp(0.0, levels as f64) as u16;
            // the division rounds; settle on whichever neighbour is truly nearest
            [c.saturating_sub(1), c, c.saturating_add(1).min(levels)]
                .into_iter()
                .min_by(|a, b| {
                    (v - value(offset, scale, *a))
                        .abs()
                        .total_cmp(&(v - value(offset, scale, *b)).abs())
                })
                .expect("three candidates")
        })
        .collect();
    Ok(Quantized {
        codes,
        bits,
        scale,
        offset,
    })
}

/// `offset + scale·code` per component, evaluated in `f64`.
pub fn dequantize(q: &Quantized) -> Result<Vec<f64>, PayloadError> {
    let levels = check_bits(q.bits)?;
    if let Some(i) = q.codes.iter().position(|&c| c > levels) {
        return Err(PayloadError::Invalid(format!(
            "code {} at {i} exceeds {} bits",
            q.codes[i], q.bits
        )));
    }
    Ok(q.codes
        .iter()
        .map(|&c| value(q.offset, q.scale, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_vector_is_exact() {
        let z = vec![0.375; 9];
        let q = quantize(&z, 8).unwrap();
        assert_eq!(q.scale, 0.0);
        assert!(q.codes.iter().all(|&c| c == 0));
        assert_eq!(dequantize(&q).unwrap(), z);
    }

    #[test]
    fn constant_off_the_f32_grid_stays_within_half_step() {
        let z = vec![6483.928_123_456_7; 5];
        let q = quantize(&z, 8).unwrap();
        assert!(q.scale > 0.0);
        for (a, b) in dequantize(&q).unwrap().iter().zip(&z) {
            assert!((a - b).abs() <= q.scale as f64 / 2.0);
        }
    }

    #[test]
    fn unit_interval_hits_both_ends() {
        let q = quantize(&[0.0, 1.0], 8).unwrap();
        assert_eq!(q.codes, vec![0, 255]);
        let back = dequantize(&q).unwrap();
        assert_eq!(back[0], 0.0);
        assert!((back[1] - 1.0).abs() <= 255.0 * f32::EPSILON as f64 * q.scale as f64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(quantize(&[1.0, f64::NAN], 8).is_err());
        assert!(quantize(&[1.0, 2.0], 12).is_err());
        assert!(quantize(&[], 8).is_err());
        assert!(quantize(&[0.0, 1e300], 16).is_err());
        let q = Quantized {
            codes: vec![300],
            bits: 8,
            scale: 1.0,
            offset: 0.0,
        };
        assert!(dequantize(&q).is_err());
    }

    #[test]
    fn tiny_range_far_from_zero_stays_bounded() {
        let z = [1000.0, 1000.0 + 1e-6, 1000.0 + 3e-7];
        let q = quantize(&z, 8).unwrap();
        let back = dequantize(&q).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() <= q.scale as f64 / 2.0 + 1e-12);
        }
    }
}
